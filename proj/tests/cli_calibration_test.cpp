// Flag rate of the 2 * mean(C_i) rule under case weights on data simulated
// from the fitted model class (no contamination).

#include <sstream>
#include <string>
#include <vector>

#include "bpreg/diagnostics.hpp"
#include "bpreg/simulation.hpp"
#include "doctest.h"

using namespace bpreg;

TEST_CASE("case-weights flags at most 10% of clean observations") {
  constexpr int kDatasets = 50;
  sim::ScenarioConfig cfg;
  cfg.n = 150;
  const sim::ScenarioDesign d = sim::make_design(cfg);
  double total = 0.0, worst = 0.0;
  int over = 0;
  for (int s = 1; s <= kDatasets; ++s) {
    const ModelSpec spec(sim::simulate_response(d.mu, d.phi, static_cast<std::uint64_t>(s)), d.x, d.z);
    const FittedModel m = fit(spec);
    const diag::InfluenceResult r =
        diag::local_influence(m, diag::perturbation_matrix(m, {diag::SchemeKind::case_weights}));
    const double frac = static_cast<double>(r.flagged().size()) / 150.0;
    total += frac;
    worst = std::max(worst, frac);
    if (frac > 0.10) ++over;
  }
  const double mean = total / kDatasets;
  MESSAGE("mean flagged fraction " << mean << ", worst " << worst << ", datasets above 10%: " << over << "/"
                                   << kDatasets);
  CHECK(mean <= 0.10);
}
