#include "bpreg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "bpreg/distribution.hpp"
#include "bpreg/simulation.hpp"
#include "bpreg/special_functions.hpp"
#include "parallel.hpp"

namespace bpreg::diag {

// ---------------------------------------------------------------------------
// Residuals

VectorXd quantile_residual_values(const VectorXd& y, const VectorXd& mu, const VectorXd& phi,
                                  std::vector<std::size_t>* clamped) {
  VectorXd r(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double f = cdf(y(i), MeanPrecisionParams(mu(i), phi(i)));
    if (f < kCdfClamp || f > 1.0 - kCdfClamp) {
      f = std::clamp(f, kCdfClamp, 1.0 - kCdfClamp);
      if (clamped) clamped->push_back(static_cast<std::size_t>(i));
    }
    r(i) = special::std_normal_quantile(f);
  }
  return r;
}

VectorXd pearson_residual_values(const VectorXd& y, const VectorXd& mu, const VectorXd& phi) {
  return (phi.array().sqrt() * (y - mu).array() / (mu.array() * (1.0 + mu.array())).sqrt())
      .matrix();
}

namespace {

std::vector<std::size_t> iota_ids(Eigen::Index n) {
  std::vector<std::size_t> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return ids;
}

}  // namespace

ResidualSet quantile_residuals(const FittedModel& m) {
  ResidualSet out;
  out.kind = ResidualKind::quantile;
  out.values = quantile_residual_values(m.spec.y(), m.mu_hat, m.phi_hat, &out.clamped);
  out.observation_ids = iota_ids(m.spec.n());
  return out;
}

ResidualSet pearson_residuals(const FittedModel& m) {
  ResidualSet out;
  out.kind = ResidualKind::pearson;
  out.values = pearson_residual_values(m.spec.y(), m.mu_hat, m.phi_hat);
  out.observation_ids = iota_ids(m.spec.n());
  return out;
}

// ---------------------------------------------------------------------------
// Envelope

namespace {

// Linear interpolation between order statistics (Hyndman-Fan type 7).
double empirical_quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

EnvelopeBands simulated_envelope(const FittedModel& m, const EnvelopeOptions& opt) {
  if (opt.replicates < 19) throw std::invalid_argument("envelope needs at least 19 replicates");
  if (!(opt.band_level > 0.0 && opt.band_level < 1.0)) {
    throw std::invalid_argument("band level must lie in (0, 1)");
  }
  const Eigen::Index n = m.spec.n();
  const int reps = opt.replicates;

  FitOptions fo = opt.fit_options;
  fo.start_beta = m.beta_hat;
  fo.start_nu = m.nu_hat;

  std::vector<std::vector<double>> sims(static_cast<std::size_t>(reps));
  std::vector<char> ok(static_cast<std::size_t>(reps), 0);
  detail::parallel_for(reps, opt.workers, [&](int r) {
    try {
      const VectorXd y = sim::simulate_response(m.mu_hat, m.phi_hat, sim::replication_seed(opt.seed, r));
      const FittedModel refit = fit(m.spec.with_response(y), fo);
      const VectorXd res = quantile_residual_values(y, refit.mu_hat, refit.phi_hat);
      std::vector<double> v(res.data(), res.data() + res.size());
      std::sort(v.begin(), v.end());
      sims[static_cast<std::size_t>(r)] = std::move(v);
      ok[static_cast<std::size_t>(r)] = 1;
    } catch (const std::exception&) {
      // counted below
    }
  });

  EnvelopeBands out;
  out.band_level = opt.band_level;
  out.failed = static_cast<int>(std::count(ok.begin(), ok.end(), 0));
  out.replicates = reps - out.failed;
  if (out.failed > opt.max_failure_fraction * reps || out.replicates < 2) {
    throw ModelError("envelope: " + std::to_string(out.failed) + " of " + std::to_string(reps) +
                     " replicate refits failed");
  }

  const VectorXd observed = quantile_residual_values(m.spec.y(), m.mu_hat, m.phi_hat);
  std::vector<double> sorted(observed.data(), observed.data() + n);
  std::sort(sorted.begin(), sorted.end());
  out.sorted_residuals = Eigen::Map<VectorXd>(sorted.data(), n);
  out.lower.resize(n);
  out.median.resize(n);
  out.upper.resize(n);
  const double tail = 0.5 * (1.0 - opt.band_level);
  std::vector<double> column;
  column.reserve(static_cast<std::size_t>(reps));
  for (Eigen::Index j = 0; j < n; ++j) {
    column.clear();
    for (int r = 0; r < reps; ++r) {
      if (ok[static_cast<std::size_t>(r)]) column.push_back(sims[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)]);
    }
    std::sort(column.begin(), column.end());
    out.lower(j) = empirical_quantile(column, tail);
    out.median(j) = empirical_quantile(column, 0.5);
    out.upper(j) = empirical_quantile(column, 1.0 - tail);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Perturbation matrices

SchemeKind parse_scheme(std::string_view name) {
  if (name == "case-weights") return SchemeKind::case_weights;
  if (name == "response") return SchemeKind::response;
  if (name == "mean-covariate") return SchemeKind::mean_covariate;
  if (name == "precision-covariate") return SchemeKind::precision_covariate;
  if (name == "simultaneous") return SchemeKind::simultaneous;
  throw std::invalid_argument("unknown perturbation scheme '" + std::string(name) + "'");
}

std::string_view scheme_name(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::case_weights: return "case-weights";
    case SchemeKind::response: return "response";
    case SchemeKind::mean_covariate: return "mean-covariate";
    case SchemeKind::precision_covariate: return "precision-covariate";
    case SchemeKind::simultaneous: return "simultaneous";
  }
  return "?";
}

namespace {

bool is_constant(const VectorXd& col) {
  return col.size() == 0 || (col.array() == col(0)).all();
}

Eigen::Index checked_column(const MatrixXd& design, std::optional<Eigen::Index> index,
                            const char* which) {
  if (!index) throw std::invalid_argument(std::string("scheme needs a ") + which + " covariate index");
  const Eigen::Index k = *index;
  if (k < 0 || k >= design.cols()) {
    throw std::invalid_argument(std::string(which) + " covariate index " + std::to_string(k) +
                                " is out of range");
  }
  if (is_constant(design.col(k))) {
    throw std::invalid_argument(std::string(which) + " covariate index " + std::to_string(k) +
                                " is an intercept (constant) column");
  }
  return k;
}

VectorXd scale_for(const std::optional<VectorXd>& given, const VectorXd& column) {
  const Eigen::Index n = column.size();
  if (given) {
    if (given->size() != n) throw std::invalid_argument("scale vector must have length n");
    return *given;
  }
  const double mean = column.mean();
  const double sd = std::sqrt((column.array() - mean).square().sum() / static_cast<double>(n - 1));
  return VectorXd::Constant(n, sd);
}

}  // namespace

MatrixXd perturbation_matrix(const FittedModel& m, const PerturbationScheme& scheme) {
  const ModelSpec& spec = m.spec;
  const MatrixXd& x = spec.x();
  const MatrixXd& z = spec.z();
  const Eigen::Index n = spec.n();
  const Eigen::Index p = spec.p();
  const Eigen::Index q = spec.q();
  const ScoreWorkspace ws = make_workspace(spec, m.beta_hat, m.nu_hat);

  const VectorXd mean_score = ws.a.cwiseProduct(ws.d_mu);      // a_i d_mu
  const VectorXd precision_score = ws.b.cwiseProduct(ws.d_phi);  // b_i d_phi

  MatrixXd delta(p + q, n);
  switch (scheme.kind) {
    case SchemeKind::case_weights: {
      delta.topRows(p) = x.transpose() * mean_score.asDiagonal();
      delta.bottomRows(q) = z.transpose() * precision_score.asDiagonal();
      break;
    }
    case SchemeKind::response: {
      const VectorXd& y = spec.y();
      const VectorXd yy = y.array() * (1.0 + y.array());
      const VectorXd s = (ws.mu.array() * (1.0 + ws.mu.array()) / ws.phi.array()).sqrt();
      const VectorXd d8 = (1.0 + ws.phi.array()) / yy.array();
      const VectorXd d9 = (ws.mu - y).array() / yy.array();
      delta.topRows(p) = x.transpose() * (ws.a.array() * d8.array() * s.array()).matrix().asDiagonal();
      delta.bottomRows(q) = z.transpose() * (ws.b.array() * d9.array() * s.array()).matrix().asDiagonal();
      break;
    }
    case SchemeKind::mean_covariate: {
      const Eigen::Index t = checked_column(x, scheme.covariate_index, "mean");
      const VectorXd s = scale_for(scheme.scale, x.col(t));
      const double bt = m.beta_hat(t);
      delta.topRows(p) = bt * x.transpose() * ws.c.asDiagonal();
      delta.row(t) += mean_score.transpose();
      delta.bottomRows(q) = bt * z.transpose() * ws.m.asDiagonal();
      delta = delta * s.asDiagonal();
      break;
    }
    case SchemeKind::precision_covariate: {
      const Eigen::Index k = checked_column(z, scheme.covariate_index, "precision");
      const VectorXd s = scale_for(scheme.precision_scale ? scheme.precision_scale : scheme.scale, z.col(k));
      const double nk = m.nu_hat(k);
      delta.topRows(p) = nk * x.transpose() * ws.m.asDiagonal();
      delta.bottomRows(q) = nk * z.transpose() * ws.w.asDiagonal();
      delta.row(p + k) += precision_score.transpose();
      delta = delta * s.asDiagonal();
      break;
    }
    case SchemeKind::simultaneous: {
      const Eigen::Index t = checked_column(x, scheme.covariate_index, "mean");
      Eigen::Index k = -1;
      if (scheme.precision_covariate_index) {
        k = checked_column(z, scheme.precision_covariate_index, "precision");
        if (x.col(t) != z.col(k)) {
          throw std::invalid_argument("simultaneous scheme: X column " + std::to_string(t) +
                                      " and Z column " + std::to_string(k) + " differ");
        }
      } else {
        for (Eigen::Index j = 0; j < q; ++j) {
          if (z.col(j) == x.col(t)) {
            k = j;
            break;
          }
        }
        if (k < 0) {
          throw std::invalid_argument("simultaneous scheme: X column " + std::to_string(t) +
                                      " does not appear in Z");
        }
      }
      const VectorXd s = scale_for(scheme.scale, x.col(t));
      const VectorXd s_dot = scale_for(scheme.precision_scale, z.col(k));
      if (s != s_dot) {
        throw std::invalid_argument("simultaneous scheme requires equal mean and precision scale factors");
      }
      const double bt = m.beta_hat(t);
      const double nk = m.nu_hat(k);
      delta.topRows(p) = x.transpose() * (bt * ws.c + nk * ws.m).asDiagonal();
      delta.row(t) += mean_score.transpose();
      delta.bottomRows(q) = z.transpose() * (nk * ws.w + bt * ws.m).asDiagonal();
      delta.row(p + k) += precision_score.transpose();
      delta = delta * s.asDiagonal();
      break;
    }
  }
  return delta;
}

// ---------------------------------------------------------------------------
// Local influence

InfluenceSubset parse_subset(std::string_view name) {
  if (name == "theta") return InfluenceSubset::theta;
  if (name == "beta") return InfluenceSubset::beta_only;
  if (name == "nu") return InfluenceSubset::nu_only;
  throw std::invalid_argument("unknown parameter subset '" + std::string(name) +
                              "' (expected theta, beta or nu)");
}

std::string_view subset_name(InfluenceSubset s) {
  switch (s) {
    case InfluenceSubset::theta: return "theta";
    case InfluenceSubset::beta_only: return "beta";
    case InfluenceSubset::nu_only: return "nu";
  }
  return "?";
}

std::vector<std::size_t> InfluenceResult::flagged() const {
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < c_indices.size(); ++i) {
    if (c_indices(i) > threshold) out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

namespace {

// Inverse of a negative definite matrix.
MatrixXd invert_negative_definite(const MatrixXd& h, const char* what) {
  Eigen::LLT<MatrixXd> llt(-h);
  if (llt.info() != Eigen::Success) {
    throw ModelError(std::string(what) + " is singular or not negative definite");
  }
  return -llt.solve(MatrixXd::Identity(h.rows(), h.cols()));
}

}  // namespace

InfluenceResult local_influence(const FittedModel& m, const MatrixXd& delta, InfluenceSubset subset) {
  const Eigen::Index p = m.beta_hat.size();
  const Eigen::Index q = m.nu_hat.size();
  const Eigen::Index n = m.spec.n();
  if (delta.rows() != p + q || delta.cols() != n) {
    throw std::invalid_argument("perturbation matrix must be (p+q) x n");
  }
  const MatrixXd& h = m.hessian;
  MatrixXd middle = invert_negative_definite(h, "Hessian");
  if (subset == InfluenceSubset::beta_only) {
    middle.bottomRightCorner(q, q) -= invert_negative_definite(h.bottomRightCorner(q, q), "Hessian nu block");
  } else if (subset == InfluenceSubset::nu_only) {
    middle.topLeftCorner(p, p) -= invert_negative_definite(h.topLeftCorner(p, p), "Hessian beta block");
  }

  InfluenceResult out;
  out.delta = delta;
  out.subset = subset;
  out.curvature_matrix = delta.transpose() * middle * delta;
  const MatrixXd& b = out.curvature_matrix;
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw std::logic_error("curvature matrix is not symmetric");
  }
  const MatrixXd sym = -0.5 * (b + b.transpose());

  out.c_indices = 2.0 * b.diagonal().cwiseAbs();
  out.threshold = n > 0 ? 2.0 * out.c_indices.mean() : 0.0;

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw ModelError("eigen decomposition of the curvature matrix failed");
  const VectorXd& values = eig.eigenvalues();
  Eigen::Index dominant = 0;
  values.cwiseAbs().maxCoeff(&dominant);
  out.c_max = 2.0 * std::abs(values(dominant));
  out.l_max = eig.eigenvectors().col(dominant);
  // Fix the sign so the largest component is positive.
  Eigen::Index big = 0;
  out.l_max.cwiseAbs().maxCoeff(&big);
  if (out.l_max(big) < 0.0) out.l_max = -out.l_max;
  out.l_max.normalize();
  return out;
}

}  // namespace bpreg::diag
