#include "diqkd/estimation.hpp"

#include <algorithm>
#include <cmath>

#include "diqkd/errors.hpp"

namespace diqkd {

ProjectionResult project_to_quantum(const Behavior& raw, const ProjectionConfig& config) {
  for (double w : config.setting_weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw ConfigError("projection weights must be positive");
  }
  npa::MomentProblem mp = npa::assemble({kInputsA, kInputsB, 0}, config.level, {},
                                        npa::Polynomial(), {});
  // Epigraph of the weighted 2-norm as an arrow matrix [[t, r'], [r, t I]].
  const int t = mp.program.add_var();
  mp.program.objective(t) = 1.0;
  sdp::PsdBlock arrow;
  arrow.dim = kBehaviorSize + 1;
  arrow.label = "distance";
  for (int i = 0; i <= kBehaviorSize; ++i) arrow.entries.push_back({t, i, i, 1.0});
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) {
      const double w = config.setting_weights[setting_index(x, y)];
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const int row = 1 + Behavior::flat_index(a, b, x, y);
          const sdp::LinearExpr e = mp.linear(npa::probability(a, b, x, y));
          for (const auto& term : e.terms) arrow.entries.push_back({term.var, 0, row, w * term.coef});
          arrow.entries.push_back({sdp::MatrixEntry::kConstant, 0, row, -w * raw(a, b, x, y)});
        }
      }
    }
  }
  mp.program.psd_blocks.push_back(std::move(arrow));

  const sdp::SolverSolution sol = sdp::solve(mp.program, config.solver);
  if (!sol.ok()) throw SolverError("projection SDP failed: " + sol.message);

  // Read the projected behavior through its Collins-Gisin coordinates so it
  // is exactly no-signaling, then clip solver-level negatives.
  CollinsGisinVector h{};
  const auto value = [&](const npa::Polynomial& p) { return mp.evaluate(p, sol.values); };
  for (int x = 0; x < kInputsA; ++x) h[cg_alice(x)] = value(npa::alice_effect(1, x));
  for (int y = 0; y < kInputsB; ++y) h[cg_bob(y)] = value(npa::bob_effect(1, y));
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) h[cg_joint(x, y)] = value(npa::probability(1, 1, x, y));
  }
  std::array<OutcomeDist, kSettings> rows{};
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) {
      const double pa = h[cg_alice(x)], pb = h[cg_bob(y)], pab = h[cg_joint(x, y)];
      OutcomeDist d{1.0 - pa - pb + pab, pb - pab, pa - pab, pab};
      for (double& v : d) v = std::max(v, 0.0);
      double s = 0.0;
      for (double v : d) s += v;
      for (double& v : d) v /= s;
      rows[setting_index(x, y)] = d;
    }
  }
  ProjectionResult res;
  res.raw = raw;
  res.projected = Behavior::from_settings(rows);
  double d2 = 0.0;
  for (int i = 0; i < kBehaviorSize; ++i) {
    const double diff = res.projected.table()[i] - raw.table()[i];
    d2 += diff * diff;
  }
  res.distance = std::sqrt(d2);
  res.status = sol.status;
  res.iterations = sol.iterations;
  return res;
}

std::array<double, kSettings> count_weights(const CountTable& counts) {
  std::array<double, kSettings> w{};
  double mean = 0.0;
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) mean += static_cast<double>(counts.setting_total(x, y));
  }
  mean /= kSettings;
  if (!(mean > 0.0)) throw DataError("count table is empty");
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) {
      w[setting_index(x, y)] = std::sqrt(static_cast<double>(counts.setting_total(x, y)) / mean);
    }
  }
  return w;
}

void ConfidenceParams::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
  if (!(n > 0.0)) throw ConfigError("round count must be positive");
  if (!(q > 0.0 && q <= 1.0)) throw ConfigError("setting probability must lie in (0,1]");
  if (!(lambda_max >= 0.0)) throw ConfigError("lambda must be non-negative");
}

double hoeffding_delta(const ConfidenceParams& c) {
  c.validate();
  return 2.0 * c.lambda_max / c.q * std::sqrt(std::log(1.0 / c.epsilon) / (2.0 * c.n));
}

double max_abs_lambda(const BellFunctional& g) {
  double m = 0.0;
  for (double l : g.lambda) m = std::max(m, std::abs(l));
  return m;
}

FunctionalEstimate estimator_from_events(std::span<const EventRecord> events,
                                         const BellFunctional& functional,
                                         const Scenario& scenario, double epsilon) {
  if (events.empty()) throw DataError("no events to estimate from");
  scenario.validate();
  double sum = 0.0;
  for (const auto& e : events) {
    e.validate();
    const double pxy = scenario.input_probability(e.x, e.y);
    if (!(pxy > 0.0)) throw DataError("event at a setting with zero input probability");
    sum += functional.lambda[Behavior::flat_index(e.a, e.b, e.x, e.y)] / pxy;
  }
  FunctionalEstimate est;
  est.rounds = static_cast<std::int64_t>(events.size());
  est.g_prime = sum / static_cast<double>(events.size());
  const double q = *std::max_element(scenario.input_distribution.begin(),
                                     scenario.input_distribution.end());
  est.delta = hoeffding_delta({epsilon, static_cast<double>(est.rounds), q, max_abs_lambda(functional)});
  return est;
}

}  // namespace diqkd
