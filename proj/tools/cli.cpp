#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bpreg/diagnostics.hpp"
#include "bpreg/distribution.hpp"
#include "bpreg/regression.hpp"
#include "bpreg/simulation.hpp"
#include "bpreg/special_functions.hpp"
#include "csv.hpp"
#include "json.hpp"

namespace bpreg::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Usage-level failure (exit 2) raised by the commands themselves.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr const char* kIntercept = "(Intercept)";

struct RunConfig {
  std::string input_path;
  std::string response;
  std::vector<std::string> mean_terms;
  std::vector<std::string> precision_terms;
  std::string mean_link = "log";
  std::string precision_link = "log";
  std::string output_dir = ".";
  std::uint64_t seed = 1;
  std::string format = "json";
  double level = 0.95;
  std::string vcov = "hessian";
  int max_iterations = 200;
};

struct DiagnoseFlags {
  std::string scheme = "case-weights";
  std::string covariate;
  std::string subset = "theta";
  int envelope_reps = 100;
  double band_level = 0.95;
  unsigned workers = 0;
};

struct SimulateFlags {
  int scenario = 1;
  int n = 150;
  int reps = 500;
  std::uint64_t seed = 1;
  std::uint64_t covariate_seed = 20170614;
  unsigned workers = 0;
  std::string output_dir = ".";
  std::string format = "json";
};

struct DistFlags {
  double mu = 0.0;
  double phi = 0.0;
  std::string op = "summary";
  std::vector<double> at;
  int n = 1;
  std::uint64_t seed = 1;
};

struct GenerateFlags {
  int n = 150;
  std::uint64_t seed = 1;
  std::uint64_t covariate_seed = 20170614;
  std::string output;
};

// ---------------------------------------------------------------------------
// Data loading

struct LoadedModel {
  ModelSpec spec;
  std::vector<std::string> mean_names;       // one per column of X
  std::vector<std::string> precision_names;  // one per column of Z
};

MatrixXd design(const CsvTable& t, const std::vector<std::string>& terms, std::size_t n) {
  MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(terms.size() + 1));
  m.col(0).setOnes();
  for (std::size_t j = 0; j < terms.size(); ++j) {
    const std::vector<double> col = t.numeric_column(terms[j]);
    for (std::size_t i = 0; i < n; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = col[i];
  }
  return m;
}

void check_terms(const RunConfig& cfg) {
  if (cfg.input_path.empty()) throw UsageError("--input is required");
  if (cfg.response.empty()) throw UsageError("--response is required");
  for (const auto* terms : {&cfg.mean_terms, &cfg.precision_terms}) {
    std::set<std::string> seen;
    for (const std::string& t : *terms) {
      if (t == cfg.response) throw UsageError("term '" + t + "' is the response column");
      if (!seen.insert(t).second) throw UsageError("term '" + t + "' listed twice");
    }
  }
}

LoadedModel load_model(const RunConfig& cfg) {
  check_terms(cfg);
  const CsvTable t = read_csv(cfg.input_path);
  // Resolve every name first so a missing column is reported before any
  // numeric parsing.
  t.column(cfg.response);
  for (const std::string& s : cfg.mean_terms) t.column(s);
  for (const std::string& s : cfg.precision_terms) t.column(s);

  const std::size_t n = t.rows.size();
  if (n == 0) throw CsvError("'" + cfg.input_path + "' has no data rows");
  const std::vector<double> yv = t.numeric_column(cfg.response);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(yv[i] > 0.0)) {
      throw UsageError("response '" + cfg.response + "' must be strictly positive (the beta prime support is y > 0); row " +
                       std::to_string(i + 1) + " has " + format_double(yv[i]));
    }
  }
  VectorXd y = Eigen::Map<const VectorXd>(yv.data(), static_cast<Eigen::Index>(n));
  LinkFunction mean_link, precision_link;
  try {
    mean_link = LinkFunction::parse(cfg.mean_link);
    precision_link = LinkFunction::parse(cfg.precision_link);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  LoadedModel out{ModelSpec(std::move(y), design(t, cfg.mean_terms, n), design(t, cfg.precision_terms, n),
                            mean_link, precision_link),
                  {kIntercept},
                  {kIntercept}};
  out.mean_names.insert(out.mean_names.end(), cfg.mean_terms.begin(), cfg.mean_terms.end());
  out.precision_names.insert(out.precision_names.end(), cfg.precision_terms.begin(), cfg.precision_terms.end());
  return out;
}

FitOptions fit_options(const RunConfig& cfg) {
  FitOptions o;
  if (cfg.max_iterations < 1) throw UsageError("--max-iterations must be at least 1");
  o.max_iterations = cfg.max_iterations;
  if (cfg.vcov == "hessian") {
    o.vcov_source = VcovSource::observed_hessian;
  } else if (cfg.vcov == "fisher") {
    o.vcov_source = VcovSource::fisher;
  } else {
    throw UsageError("unknown --vcov '" + cfg.vcov + "' (expected hessian or fisher)");
  }
  return o;
}

// ---------------------------------------------------------------------------
// Output helpers

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw CsvError("cannot create output directory '" + dir + "'");
  return fs::path(dir);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw CsvError("cannot write '" + p.string() + "'");
  return f;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream f = open_out(p);
  f << j.dump(2) << '\n';
  if (!f) throw CsvError("write failed for '" + p.string() + "'");
}

std::string fmt(double v) { return format_double(v); }
std::string fmt(std::size_t v) { return std::to_string(v); }

std::string_view phase_name(FitPhase p) {
  switch (p) {
    case FitPhase::fisher_scoring: return "fisher_scoring";
    case FitPhase::newton: return "newton";
    case FitPhase::quasi_newton: return "quasi_newton";
  }
  return "?";
}

json trace_json(const FitTrace& trace) {
  json a = json::array();
  for (const TraceEntry& e : trace) {
    a.push_back({{"iteration", e.iteration},
                 {"phase", phase_name(e.phase)},
                 {"loglik", e.loglik},
                 {"max_abs_score", e.max_abs_score},
                 {"step", e.step}});
  }
  return a;
}

void dump_trace(std::ostream& err, const FitTrace& trace) {
  err << "iteration,phase,loglik,max_abs_score,step\n";
  CsvWriter w(err);
  for (const TraceEntry& e : trace) {
    w.row({std::to_string(e.iteration), std::string(phase_name(e.phase)), fmt(e.loglik), fmt(e.max_abs_score),
           fmt(e.step)});
  }
}

json estimates_json(const LoadedModel& lm, const FittedModel& m, const RunConfig& cfg) {
  const VectorXd se = m.standard_errors();
  const std::vector<Interval> ci = confidence_intervals(m, cfg.level);
  const double z = special::std_normal_quantile(0.5 + 0.5 * cfg.level);
  json coefs = json::array();
  const Eigen::Index p = m.beta_hat.size();
  const VectorXd theta = m.theta();
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const bool mean = j < p;
    const std::size_t local = static_cast<std::size_t>(mean ? j : j - p);
    coefs.push_back({{"submodel", mean ? "mean" : "precision"},
                     {"term", mean ? lm.mean_names[local] : lm.precision_names[local]},
                     {"estimate", theta(j)},
                     {"std_error", se(j)},
                     {"z_value", theta(j) / se(j)},
                     {"p_value", 2.0 * special::std_normal_cdf(-std::abs(theta(j) / se(j)))},
                     {"ci_lower", ci[static_cast<std::size_t>(j)].lower},
                     {"ci_upper", ci[static_cast<std::size_t>(j)].upper}});
  }
  const double k = static_cast<double>(m.num_parameters());
  const double n = static_cast<double>(m.spec.n());
  return {{"input", cfg.input_path},
          {"response", cfg.response},
          {"n", m.spec.n()},
          {"mean_link", m.spec.mean_link().name()},
          {"precision_link", m.spec.precision_link().name()},
          {"vcov", cfg.vcov},
          {"level", cfg.level},
          {"z_critical", z},
          {"coefficients", coefs},
          {"loglik", m.loglik},
          {"aic", -2.0 * m.loglik + 2.0 * k},
          {"bic", -2.0 * m.loglik + k * std::log(n)},
          {"converged", m.converged},
          {"iterations", m.iterations},
          {"trace", trace_json(m.trace)}};
}

void write_fitted_csv(const fs::path& p, const FittedModel& m) {
  const VectorXd rq = diag::quantile_residual_values(m.spec.y(), m.mu_hat, m.phi_hat);
  const VectorXd rp = diag::pearson_residual_values(m.spec.y(), m.mu_hat, m.phi_hat);
  std::ofstream f = open_out(p);
  CsvWriter w(f);
  w.row({"i", "y", "mu_hat", "phi_hat", "quantile_residual", "pearson_residual"});
  for (Eigen::Index i = 0; i < m.spec.n(); ++i) {
    w.row({std::to_string(i + 1), fmt(m.spec.y()(i)), fmt(m.mu_hat(i)), fmt(m.phi_hat(i)), fmt(rq(i)), fmt(rp(i))});
  }
}

void print_coefficients(std::ostream& out, const json& est) {
  out << "submodel,term,estimate,std_error\n";
  CsvWriter w(out);
  for (const json& c : est["coefficients"]) {
    w.row({c["submodel"].get<std::string>(), c["term"].get<std::string>(), fmt(c["estimate"].get<double>()),
           fmt(c["std_error"].get<double>())});
  }
  out << "loglik " << fmt(est["loglik"].get<double>()) << "  aic " << fmt(est["aic"].get<double>()) << "  bic "
      << fmt(est["bic"].get<double>()) << '\n';
}

// ---------------------------------------------------------------------------
// fit

int cmd_fit(const RunConfig& cfg, std::ostream& out) {
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw UsageError("--level must lie in (0, 1)");
  const LoadedModel lm = load_model(cfg);
  const FittedModel m = fit(lm.spec, fit_options(cfg));
  const fs::path dir = prepare_dir(cfg.output_dir);
  const json est = estimates_json(lm, m, cfg);
  write_json(dir / "estimates.json", est);
  write_fitted_csv(dir / "fitted.csv", m);
  print_coefficients(out, est);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// diagnose

std::optional<Eigen::Index> find_term(const std::vector<std::string>& names, const std::string& term) {
  for (std::size_t j = 1; j < names.size(); ++j) {
    if (names[j] == term) return static_cast<Eigen::Index>(j);
  }
  return std::nullopt;
}

diag::PerturbationScheme resolve_scheme(const LoadedModel& lm, const DiagnoseFlags& f, std::ostream& err) {
  diag::PerturbationScheme s;
  try {
    s.kind = diag::parse_scheme(f.scheme);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  using diag::SchemeKind;
  const bool needs_covariate = s.kind == SchemeKind::mean_covariate || s.kind == SchemeKind::precision_covariate ||
                               s.kind == SchemeKind::simultaneous;
  if (!needs_covariate) {
    if (!f.covariate.empty()) err << "warning: --covariate is ignored by --scheme " << f.scheme << '\n';
    return s;
  }
  if (f.covariate.empty()) throw UsageError("--scheme " + f.scheme + " requires --covariate");
  const auto in_mean = find_term(lm.mean_names, f.covariate);
  const auto in_precision = find_term(lm.precision_names, f.covariate);
  switch (s.kind) {
    case SchemeKind::mean_covariate:
      if (!in_mean) throw UsageError("--covariate '" + f.covariate + "' is not a mean term");
      s.covariate_index = in_mean;
      break;
    case SchemeKind::precision_covariate:
      if (!in_precision) throw UsageError("--covariate '" + f.covariate + "' is not a precision term");
      s.covariate_index = in_precision;
      break;
    default:
      if (!in_mean || !in_precision) {
        throw UsageError("--scheme simultaneous needs '" + f.covariate + "' in both the mean and precision terms");
      }
      s.covariate_index = in_mean;
      s.precision_covariate_index = in_precision;
  }
  return s;
}

int cmd_diagnose(const RunConfig& cfg, const DiagnoseFlags& f, std::ostream& out, std::ostream& err) {
  if (f.envelope_reps != 0 && f.envelope_reps < 19) {
    throw UsageError("--envelope-reps must be 0 (skip) or at least 19");
  }
  if (!(f.band_level > 0.0 && f.band_level < 1.0)) throw UsageError("--band-level must lie in (0, 1)");
  diag::InfluenceSubset subset;
  try {
    subset = diag::parse_subset(f.subset);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const LoadedModel lm = load_model(cfg);
  const diag::PerturbationScheme scheme = resolve_scheme(lm, f, err);
  const FittedModel m = fit(lm.spec, fit_options(cfg));

  MatrixXd delta;
  try {
    delta = diag::perturbation_matrix(m, scheme);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const diag::InfluenceResult inf = diag::local_influence(m, delta, subset);
  const fs::path dir = prepare_dir(cfg.output_dir);
  const std::size_t n = static_cast<std::size_t>(m.spec.n());
  {
    std::ofstream file = open_out(dir / "influence.csv");
    CsvWriter w(file);
    w.row({"i", "C_i", "flagged", "l_max"});
    for (Eigen::Index i = 0; i < m.spec.n(); ++i) {
      w.row({std::to_string(i + 1), fmt(inf.c_indices(i)), inf.c_indices(i) > inf.threshold ? "1" : "0",
             fmt(inf.l_max(i))});
    }
  }
  {
    const VectorXd rq = diag::quantile_residual_values(m.spec.y(), m.mu_hat, m.phi_hat);
    const VectorXd rp = diag::pearson_residual_values(m.spec.y(), m.mu_hat, m.phi_hat);
    std::ofstream file = open_out(dir / "residuals.csv");
    CsvWriter w(file);
    w.row({"i", "mu_hat", "phi_hat", "quantile_residual", "pearson_residual"});
    for (Eigen::Index i = 0; i < m.spec.n(); ++i) {
      w.row({std::to_string(i + 1), fmt(m.mu_hat(i)), fmt(m.phi_hat(i)), fmt(rq(i)), fmt(rp(i))});
    }
  }
  if (f.envelope_reps > 0) {
    diag::EnvelopeOptions eo;
    eo.replicates = f.envelope_reps;
    eo.band_level = f.band_level;
    eo.seed = cfg.seed;
    eo.workers = f.workers;
    eo.fit_options = fit_options(cfg);
    const diag::EnvelopeBands b = diag::simulated_envelope(m, eo);
    std::ofstream file = open_out(dir / "envelope.csv");
    CsvWriter w(file);
    w.row({"rank", "normal_score", "sorted_residual", "lower", "median", "upper"});
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double score = special::std_normal_quantile((static_cast<double>(i + 1) - 0.375) / (nn + 0.25));
      w.row({std::to_string(i + 1), fmt(score), fmt(b.sorted_residuals(k)), fmt(b.lower(k)), fmt(b.median(k)),
             fmt(b.upper(k))});
    }
    if (b.failed > 0) err << "warning: " << b.failed << " envelope refits failed and were skipped\n";
  }
  const std::vector<std::size_t> flagged = inf.flagged();
  Eigen::Index top = 0;
  inf.c_indices.maxCoeff(&top);
  out << "scheme " << diag::scheme_name(scheme.kind) << "  subset " << diag::subset_name(subset) << '\n';
  out << "c_max " << fmt(inf.c_max) << "  threshold " << fmt(inf.threshold) << "  flagged " << flagged.size()
      << " of " << n << "  largest C_i at i = " << top + 1 << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const SimulateFlags& f, std::ostream& out, std::ostream& err) {
  if (f.scenario != 1 && f.scenario != 2) throw UsageError("--scenario must be 1 or 2");
  if (f.format != "json" && f.format != "csv") throw UsageError("--format must be json or csv");
  sim::ScenarioConfig sc;
  sc.n = f.n;
  sc.replications = f.reps;
  sc.seed = f.seed;
  sc.covariate_seed = f.covariate_seed;
  sc.workers = f.workers;
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (f.n < 30) {
    err << "warning: n = " << f.n
        << " is small; asymptotic standard errors and interval coverage are unreliable at this size\n";
  }
  const fs::path dir = prepare_dir(f.output_dir);

  if (f.scenario == 1) {
    const sim::ScenarioReport r = sim::run_scenario_one(sc);
    if (f.format == "json") {
      json params = json::array();
      for (const auto& p : r.parameters) {
        params.push_back({{"name", p.name},
                          {"truth", p.truth},
                          {"mean", p.mean},
                          {"bias", p.bias},
                          {"rmse", p.rmse},
                          {"sd", p.sd},
                          {"mean_se", p.mean_se},
                          {"coverage", p.coverage}});
      }
      write_json(dir / "scenario1.json", {{"scenario", 1},
                                          {"n", r.n},
                                          {"replications", r.replications},
                                          {"failed_fits", r.failed_fits},
                                          {"seed", r.seed},
                                          {"covariate_seed", r.covariate_seed},
                                          {"levels", r.levels},
                                          {"parameters", params}});
    } else {
      std::ofstream file = open_out(dir / "scenario1.csv");
      CsvWriter w(file);
      std::vector<std::string> head{"parameter", "truth", "mean", "bias", "rmse", "sd", "mean_se"};
      for (double l : r.levels) head.push_back("coverage_" + fmt(l));
      w.row(head);
      for (const auto& p : r.parameters) {
        std::vector<std::string> row{p.name, fmt(p.truth), fmt(p.mean), fmt(p.bias), fmt(p.rmse), fmt(p.sd),
                                     fmt(p.mean_se)};
        for (double c : p.coverage) row.push_back(fmt(c));
        w.row(row);
      }
    }
    out << "scenario 1  n " << r.n << "  replications " << r.replications << "  failed " << r.failed_fits << '\n';
    for (const auto& p : r.parameters) {
      out << p.name << "  bias " << fmt(p.bias) << "  rmse " << fmt(p.rmse) << '\n';
    }
    return kExitOk;
  }

  const sim::ResidualReport r = sim::run_scenario_two(sc);
  const auto moments = [](const sim::PooledMoments& m) {
    return json{{"mean", m.mean},
                {"sd", m.sd},
                {"skewness", m.skewness},
                {"excess_kurtosis", m.excess_kurtosis},
                {"count", m.count}};
  };
  if (f.format == "json") {
    write_json(dir / "scenario2.json", {{"scenario", 2},
                                        {"n", r.n},
                                        {"replications", r.replications},
                                        {"failed_fits", r.failed_fits},
                                        {"seed", r.seed},
                                        {"covariate_seed", r.covariate_seed},
                                        {"quantile_residuals", moments(r.quantile)},
                                        {"pearson_residuals", moments(r.pearson)}});
  } else {
    std::ofstream file = open_out(dir / "scenario2.csv");
    CsvWriter w(file);
    w.row({"residual", "mean", "sd", "skewness", "excess_kurtosis", "count"});
    for (const auto& [name, m] : {std::pair{"quantile", r.quantile}, std::pair{"pearson", r.pearson}}) {
      w.row({name, fmt(m.mean), fmt(m.sd), fmt(m.skewness), fmt(m.excess_kurtosis), fmt(m.count)});
    }
  }
  {
    std::ofstream file = open_out(dir / "qq.csv");
    CsvWriter w(file);
    w.row({"replication", "rank", "normal_score", "quantile_residual", "pearson_residual"});
    for (std::size_t k = 0; k < r.replication_index.size(); ++k) {
      for (std::size_t i = 0; i < r.normal_scores.size(); ++i) {
        w.row({std::to_string(r.replication_index[k] + 1), std::to_string(i + 1), fmt(r.normal_scores[i]),
               fmt(r.sorted_quantile[k][i]), fmt(r.sorted_pearson[k][i])});
      }
    }
  }
  out << "scenario 2  n " << r.n << "  replications " << r.replications << "  failed " << r.failed_fits << '\n';
  out << "quantile  mean " << fmt(r.quantile.mean) << "  sd " << fmt(r.quantile.sd) << "  skewness "
      << fmt(r.quantile.skewness) << '\n';
  out << "pearson   mean " << fmt(r.pearson.mean) << "  sd " << fmt(r.pearson.sd) << "  skewness "
      << fmt(r.pearson.skewness) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// dist

int cmd_dist(const DistFlags& f, std::ostream& out) {
  const MeanPrecisionParams p(f.mu, f.phi);  // DomainError for mu, phi <= 0
  if (f.op == "pdf" || f.op == "cdf" || f.op == "quantile") {
    if (f.at.empty()) throw UsageError("--op " + f.op + " requires --at");
    for (double x : f.at) {
      const double v = f.op == "pdf" ? pdf(x, p) : f.op == "cdf" ? cdf(x, p) : quantile(x, p);
      out << fmt(v) << '\n';
    }
    return kExitOk;
  }
  if (f.op == "sample") {
    if (f.n < 1) throw UsageError("--n must be at least 1");
    for (double v : sample(p, static_cast<std::size_t>(f.n), f.seed)) out << fmt(v) << '\n';
    return kExitOk;
  }
  if (f.op == "summary") {
    const DistributionSummary s = summary(p);
    const ShapeParams sh = to_shape(p);
    out << "alpha " << fmt(sh.alpha()) << '\n';
    out << "beta " << fmt(sh.beta()) << '\n';
    out << "mean " << fmt(s.mean) << '\n';
    out << "variance " << fmt(s.variance) << '\n';
    out << "skewness " << (s.skewness ? fmt(*s.skewness) : "undefined (needs phi > 1)") << '\n';
    out << "kurtosis " << (s.kurtosis ? fmt(*s.kurtosis) : "undefined (needs phi > 2)") << '\n';
    out << "mode " << (s.mode ? fmt(*s.mode) : "none (density decreasing)") << '\n';
    if (s.inflection_points) {
      out << "inflection_points " << fmt(s.inflection_points->first) << ' ' << fmt(s.inflection_points->second)
          << '\n';
    } else {
      out << "inflection_points none\n";
    }
    return kExitOk;
  }
  throw UsageError("unknown --op '" + f.op + "' (expected pdf, cdf, quantile, sample or summary)");
}

// ---------------------------------------------------------------------------
// generate: one synthetic dataset from the scenario design

int cmd_generate(const GenerateFlags& f, std::ostream& out) {
  sim::ScenarioConfig sc;
  sc.n = f.n;
  sc.replications = 1;
  sc.seed = f.seed;
  sc.covariate_seed = f.covariate_seed;
  try {
    sc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const sim::ScenarioDesign d = sim::make_design(sc);
  const VectorXd y = sim::simulate_response(d.mu, d.phi, sim::replication_seed(f.seed, 0));
  std::ofstream file;
  std::ostream* dst = &out;
  if (!f.output.empty()) {
    file = open_out(f.output);
    dst = &file;
  }
  CsvWriter w(*dst);
  w.row({"y", "x", "z"});
  for (Eigen::Index i = 0; i < y.size(); ++i) w.row({fmt(y(i)), fmt(d.x(i, 1)), fmt(d.z(i, 1))});
  return kExitOk;
}

void add_model_flags(CLI::App* app, RunConfig& cfg) {
  app->add_option("--input,-i", cfg.input_path, "CSV file with a header row")->required();
  app->add_option("--response,-y", cfg.response, "response column (values > 0)")->required();
  app->add_option("--mean", cfg.mean_terms, "mean submodel columns; intercept is implicit")->delimiter(',');
  app->add_option("--precision", cfg.precision_terms, "precision submodel columns; intercept is implicit")
      ->delimiter(',');
  app->add_option("--mean-link", cfg.mean_link, "log, sqrt or identity")->capture_default_str();
  app->add_option("--precision-link", cfg.precision_link, "log, sqrt or identity")->capture_default_str();
  app->add_option("--vcov", cfg.vcov, "hessian or fisher")->capture_default_str();
  app->add_option("--max-iterations", cfg.max_iterations, "optimizer iteration cap")->capture_default_str();
  app->add_option("--level", cfg.level, "confidence level for intervals")->capture_default_str();
  app->add_option("--output-dir,-o", cfg.output_dir, "directory for report files")->capture_default_str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Beta prime regression: fitting, diagnostics, simulation and distribution queries", "bpreg"};
  app.require_subcommand(1);

  RunConfig fit_cfg;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit a beta prime regression to a CSV file");
  add_model_flags(fit_cmd, fit_cfg);

  RunConfig diag_cfg;
  DiagnoseFlags diag_flags;
  CLI::App* diag_cmd = app.add_subcommand("diagnose", "fit, then write residuals, envelope and local influence");
  add_model_flags(diag_cmd, diag_cfg);
  diag_cmd->add_option("--scheme", diag_flags.scheme,
                       "case-weights, response, mean-covariate, precision-covariate or simultaneous")
      ->capture_default_str();
  diag_cmd->add_option("--covariate", diag_flags.covariate, "column perturbed by the covariate schemes");
  diag_cmd->add_option("--subset", diag_flags.subset, "theta, beta or nu")->capture_default_str();
  diag_cmd->add_option("--envelope-reps", diag_flags.envelope_reps, "simulated envelope replicates (0 skips)")
      ->capture_default_str();
  diag_cmd->add_option("--band-level", diag_flags.band_level, "envelope band level")->capture_default_str();
  diag_cmd->add_option("--seed", diag_cfg.seed, "envelope seed")->capture_default_str();
  diag_cmd->add_option("--workers", diag_flags.workers, "threads (0: all cores)")->capture_default_str();

  SimulateFlags sim_flags;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Monte Carlo scenarios");
  sim_cmd->add_option("--scenario", sim_flags.scenario, "1 (estimates) or 2 (residuals)")->capture_default_str();
  sim_cmd->add_option("--n", sim_flags.n, "sample size")->capture_default_str();
  sim_cmd->add_option("--reps", sim_flags.reps, "replications")->capture_default_str();
  sim_cmd->add_option("--seed", sim_flags.seed, "response seed; replication r uses seed + r")->capture_default_str();
  sim_cmd->add_option("--covariate-seed", sim_flags.covariate_seed, "seed of the fixed covariates")
      ->capture_default_str();
  sim_cmd->add_option("--workers", sim_flags.workers, "threads (0: all cores)")->capture_default_str();
  sim_cmd->add_option("--output-dir,-o", sim_flags.output_dir, "directory for report files")->capture_default_str();
  sim_cmd->add_option("--format", sim_flags.format, "json or csv")->capture_default_str();

  DistFlags dist_flags;
  CLI::App* dist_cmd = app.add_subcommand("dist", "beta prime distribution queries");
  dist_cmd->add_option("--mu", dist_flags.mu, "mean (> 0)")->required();
  dist_cmd->add_option("--phi", dist_flags.phi, "precision (> 0)")->required();
  dist_cmd->add_option("--op", dist_flags.op, "pdf, cdf, quantile, sample or summary")->capture_default_str();
  dist_cmd->add_option("--at", dist_flags.at, "evaluation points")->delimiter(',');
  dist_cmd->add_option("--n", dist_flags.n, "sample size for --op sample")->capture_default_str();
  dist_cmd->add_option("--seed", dist_flags.seed, "seed for --op sample")->capture_default_str();

  GenerateFlags gen_flags;
  CLI::App* gen_cmd = app.add_subcommand("generate", "write one synthetic dataset (columns y, x, z)");
  gen_cmd->add_option("--n", gen_flags.n, "sample size")->capture_default_str();
  gen_cmd->add_option("--seed", gen_flags.seed, "response seed")->capture_default_str();
  gen_cmd->add_option("--covariate-seed", gen_flags.covariate_seed, "covariate seed")->capture_default_str();
  gen_cmd->add_option("--output,-o", gen_flags.output, "CSV path (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit_cfg, out);
    if (*diag_cmd) return cmd_diagnose(diag_cfg, diag_flags, out, err);
    if (*sim_cmd) return cmd_simulate(sim_flags, out, err);
    if (*dist_cmd) return cmd_dist(dist_flags, out);
    if (*gen_cmd) return cmd_generate(gen_flags, out);
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << '\n';
    dump_trace(err, e.trace());
    return kExitModel;
  } catch (const ModelError& e) {
    err << "error: " << e.what() << '\n';
    return kExitModel;
  } catch (const CsvError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const special::DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace bpreg::cli
