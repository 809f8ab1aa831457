// Acceptance checks: one PASS/FAIL line per criterion. `--long` runs the
// full efficiency-threshold sweeps instead of the three-point sign check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diqkd/bff_entropy.hpp"
#include "diqkd/errors.hpp"
#include "diqkd/estimation.hpp"
#include "diqkd/keyrate.hpp"
#include "diqkd/npa.hpp"
#include "diqkd/preprocess.hpp"
#include "diqkd/reference_data.hpp"
#include "diqkd/spdc_model.hpp"

using namespace diqkd;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

BffConfig bff(int m, const std::string& level) {
  BffConfig c;
  c.m = m;
  c.level = npa::LevelSpec::parse(level);
  return c;
}

// Every certified bound computed below, for the duality-gap audit.
struct Solve {
  std::string label;
  Behavior behavior;
  EntropyBoundResult result;
};
std::vector<Solve> g_solves;

void record(const std::string& label, const Behavior& b, const EntropyBoundResult& r) {
  g_solves.push_back({label, b, r});
}

Behavior table_iv(int fiber) { return reference::estimated_behavior(reference::fiber_run(fiber)); }

Outcome ec_cost_check() {
  const Behavior b = table_iv(20);
  const auto t0 = Clock::now();
  const ProcessedStats s = process(b.setting(0, 2), {0.96, 0.13});
  const double ms = seconds_since(t0) * 1e3;
  return {std::abs(s.ec_cost - 0.55995) <= 1e-4 && ms < 1.0,
          fmt("ec_cost %.6f (0.55995 +- 1e-4), %.3f ms", s.ec_cost, ms)};
}

Outcome entropy_bound_check() {
  const Behavior b = table_iv(20);
  const auto t0 = Clock::now();
  const auto r = entropy_bound(b, Scenario{}, {0.96, 0.13}, bff(8, "2+ABZ+AZZ"));
  const double sec = seconds_since(t0);
  record("bound 20 m", b, r);
  return {std::abs(r.bound - 0.56021) <= 2e-3,
          fmt("bound %.6f (0.56021 +- 2e-3), %.0f s", r.bound, sec)};
}

Outcome key_rate_check() {
  struct Target {
    int fiber;
    double lo, hi;
  };
  const Target targets[] = {{20, 2.03e-4, 2.63e-4},
                            {80, 5.37e-5 / 1.5, 5.37e-5 * 1.5},
                            {220, 1.30e-6 / 1.5, 1.30e-6 * 1.5}};
  Outcome out{true, ""};
  for (const auto& t : targets) {
    const auto& run = reference::fiber_run(t.fiber);
    const auto proj = project_to_quantum(from_counts(run.counts));
    const auto rep = evaluate_rate(proj.projected, Scenario{}, run.params, bff(8, "2+ABZ+AZZ"), 1.0);
    record(fmt("analyze %d m", t.fiber), proj.projected, rep.entropy);
    const bool ok = rep.rate >= t.lo && rep.rate <= t.hi;
    out.pass = out.pass && ok;
    out.detail += fmt("%s%d m %.3e [%.2e, %.2e]%s", out.detail.empty() ? "" : "; ", t.fiber,
                      rep.rate, t.lo, t.hi, ok ? "" : " MISS");
  }
  return out;
}

// Rate at symmetric efficiency eta, searched from the 20 m configuration.
double optimized_rate(double eta, const OptimizerConfig& cfg) {
  SpdcParams tmpl = reference::realistic_model(eta);
  const SearchPoint warm{{0.96, 0.13}, tmpl};
  return optimize_params(tmpl, cfg, {warm}).report.rate;
}

OptimizerConfig ci_optimizer() {
  OptimizerConfig c;
  c.population = 12;
  c.generations = 6;
  c.polish_evaluations = 30;
  c.refine_fraction = 0.2;
  return c;
}

Outcome threshold_sign_check() {
  const OptimizerConfig cfg = ci_optimizer();
  const double r85 = optimized_rate(0.85, cfg);
  const double r875 = optimized_rate(0.875, cfg);
  const double r92 = optimized_rate(0.92, cfg);
  return {r85 <= 0.0 && r875 > 0.0 && r92 > 0.0,
          fmt("rate(0.85) %.3e <= 0, rate(0.875) %.3e > 0, rate(0.92) %.3e > 0", r85, r875, r92)};
}

Outcome threshold_sweep_check() {
  struct Curve {
    const char* name;
    bool preprocessing;
    double f_e;
    double target;
  };
  const Curve curves[] = {{"preprocessed", true, 1.0, 0.862},     {"plain", false, 1.0, 0.912},
                          {"f_e=1.06", true, 1.06, 0.932},        {"f_e=1.01", true, 1.01, 0.905},
                          {"f_e=1.001", true, 1.001, 0.881},      {"f_e=1.0001", true, 1.0001, 0.868}};
  Outcome out{true, ""};
  for (const auto& c : curves) {
    SweepConfig s;
    for (int k = -3; k <= 3; ++k) s.etas.push_back(c.target + 0.005 * k);
    s.resolution = 1e-3;
    s.optimizer.preprocessing = c.preprocessing;
    s.optimizer.f_e = c.f_e;
    s.optimizer.verbose = true;
    const auto r = threshold_sweep(reference::realistic_model(c.target), s);
    const bool ok = r.threshold && std::abs(*r.threshold - c.target) <= 0.005;
    out.pass = out.pass && ok;
    out.detail += fmt("%s%s %s (%.1f%%)", out.detail.empty() ? "" : "; ", c.name,
                      r.threshold ? fmt("%.1f%%", 100 * *r.threshold).c_str() : "none",
                      100 * c.target);
  }
  return out;
}

Outcome tsirelson_check() {
  npa::Polynomial s;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      const npa::Polynomial a = npa::Polynomial(1.0) - 2.0 * npa::Polynomial::symbol(npa::Symbol::A(x));
      const npa::Polynomial b = npa::Polynomial(1.0) - 2.0 * npa::Polynomial::symbol(npa::Symbol::B(y));
      s += (x * y ? -1.0 : 1.0) * (a * b);
    }
  }
  const auto mp = npa::assemble({2, 2, 0}, npa::LevelSpec::parse("2"), {}, -1.0 * s, {});
  const auto sol = sdp::solve(mp.program);
  const double value = -sol.dual_value;

  SpdcParams p;
  p.angles_a = {0.0, std::numbers::pi / 2};
  p.angles_b = {3 * std::numbers::pi / 4, -3 * std::numbers::pi / 4, std::numbers::pi};
  std::array<OutcomeDist, kSettings> rows{};
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 3; ++y) rows[setting_index(x, y)] = single_pair_probs(p, x, y);
  }
  const double score = chsh_score(Behavior::from_settings(rows));
  const double analytic = (2 + std::sqrt(2.0)) / 4;
  return {sol.ok() && std::abs(value - 2 * std::sqrt(2.0)) <= 1e-6 && std::abs(score - analytic) <= 1e-9,
          fmt("NPA max %.9f (2.828427125), ideal score %.12f (%.12f)", value, score, analytic)};
}

Outcome chsh_configuration_check() {
  const double w = chsh_score(behavior_from_model(reference::chsh_model()));
  return {std::abs(w - 0.7559) <= 2e-3, fmt("omega %.6f (0.7559 +- 0.002)", w)};
}

Outcome quadrature_check() {
  double worst = 0.0;
  for (int m = 1; m <= 8; ++m) {
    const Quadrature q = gauss_radau(m);
    for (int k = 0; k <= 2 * m - 2; ++k) {
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += q.weights[i] * std::pow(q.nodes[i], k);
      worst = std::max(worst, std::abs(s - 1.0 / (k + 1)));
    }
  }
  const Quadrature q2 = gauss_radau(2);
  const double m2 = std::max({std::abs(q2.nodes[0] - 1.0 / 3), std::abs(q2.nodes[1] - 1.0),
                              std::abs(q2.weights[0] - 0.75), std::abs(q2.weights[1] - 0.25)});
  return {worst <= 1e-12 && m2 <= 1e-15,
          fmt("max moment error %.1e, m=2 deviation %.1e", worst, m2)};
}

Outcome statistics_check() {
  Outcome out{true, ""};
  for (int fiber : {20, 220}) {
    const auto& run = reference::fiber_run(fiber);
    const double d = hoeffding_delta({reference::kEpsilon, 6 * reference::kRoundsPerSetting,
                                      1.0 / 6, run.lambda});
    const bool ok = std::abs(d / run.delta - 1.0) <= 0.02;
    out.pass = out.pass && ok;
    out.detail += fmt("%s%d m delta %.4e (%.3e)", out.detail.empty() ? "" : "; ", fiber, d, run.delta);
  }
  return out;
}

// Outcome strings of n pairs enumerated; a station clicks when any pair does.
OutcomeDist enumerate_pairs(const SpdcParams& p, int x, int y) {
  const OutcomeDist single = single_pair_probs(p, x, y);
  const OutcomeDist none = zero_pair_probs(p.dark_count);
  OutcomeDist total{};
  double mass = 0.0;
  for (int n = 0; n <= p.max_pairs; ++n) {
    const double w = std::exp(-p.mean_photon) * std::pow(p.mean_photon, n) / std::tgamma(n + 1.0);
    mass += w;
    if (n == 0) {
      for (int k = 0; k < 4; ++k) total[k] += w * none[k];
      continue;
    }
    const int combos = 1 << (2 * n);
    for (int c = 0; c < combos; ++c) {
      double pr = 1.0;
      int a = 1, b = 1;
      for (int i = 0, cc = c; i < n; ++i, cc /= 4) {
        pr *= single[cc % 4];
        a &= (cc % 4) >> 1;
        b &= (cc % 4) & 1;
      }
      total[2 * a + b] += w * pr;
    }
  }
  for (double& v : total) v /= mass;
  return total;
}

Outcome property_check() {
  std::vector<std::string> failures;

  const BetaTensor beta = BetaTensor::click_union();
  int tensor_ok = 0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      int hits = 0;
      bool right = true;
      for (int k = 0; k < 4; ++k) {
        hits += beta(k, i, j);
        const int expect = 2 * ((i >> 1) & (j >> 1)) + ((i & 1) & (j & 1));
        right = right && (beta(k, i, j) == (k == expect ? 1 : 0));
      }
      tensor_ok += (hits == 1 && right);
    }
  }
  if (tensor_ok != 16) failures.push_back(fmt("beta tensor %d/16", tensor_ok));

  double oracle = 0.0;
  SpdcParams p = reference::model_20m();
  p.mean_photon = 0.3;
  p.dark_count = 1e-3;
  for (int pairs : {1, 2}) {
    p.max_pairs = pairs;
    const Behavior b = behavior_from_model(p);
    for (int x = 0; x < 2; ++x) {
      for (int y = 0; y < 3; ++y) {
        const auto o = enumerate_pairs(p, x, y);
        for (int k = 0; k < 4; ++k) oracle = std::max(oracle, std::abs(o[k] - b.setting(x, y)[k]));
      }
    }
  }
  if (oracle > 1e-12) failures.push_back(fmt("multipair oracle %.1e", oracle));

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double ns = 0.0;
  for (int k = 0; k < 200; ++k) {
    SpdcParams q;
    q.r = unit(rng);
    q.visibility = 0.8 + 0.2 * unit(rng);
    q.eta_a = 0.5 + 0.5 * unit(rng);
    q.eta_b = 0.5 + 0.5 * unit(rng);
    q.dark_count = 1e-4 * unit(rng);
    q.mean_photon = unit(rng);
    for (auto& a : q.angles_a) a = std::numbers::pi * (2 * unit(rng) - 1);
    for (auto& a : q.angles_b) a = std::numbers::pi * (2 * unit(rng) - 1);
    q.max_pairs = 1 + k % 4;
    ns = std::max(ns, no_signaling_residual(behavior_from_model(q)));
  }
  if (ns >= 1e-12) failures.push_back(fmt("no-signaling residual %.1e", ns));

  double idem = 0.0;
  for (const Behavior& start : {behavior_from_model(reference::model_20m()),
                                project_to_quantum(from_counts(reference::fiber_run(80).counts)).projected}) {
    const Behavior once = project_to_quantum(start).projected;
    const Behavior twice = project_to_quantum(once).projected;
    for (int k = 0; k < kBehaviorSize; ++k) idem = std::max(idem, std::abs(once.table()[k] - twice.table()[k]));
  }
  if (idem > 1e-6) failures.push_back(fmt("projection idempotence %.1e", idem));

  const Behavior b20 = table_iv(20);
  BffConfig c = bff(2, "2");
  c.final_node = FinalNode::dropped;
  double last = -1e9;
  bool monotone = true;
  for (int m : {2, 3, 4}) {
    c.m = m;
    const auto r = entropy_bound(b20, Scenario{}, {0.96, 0.13}, c);
    record(fmt("monotonicity m=%d", m), b20, r);
    monotone = monotone && r.bound >= last - 1e-9;
    last = r.bound;
  }
  if (!monotone) failures.push_back("bound not monotone in m");

  double gap = 0.0;
  int audited = 0;
  for (const auto& s : g_solves) {
    if (s.result.status != sdp::SolveStatus::optimal) continue;
    ++audited;
    gap = std::max(gap, std::abs(s.result.dual.evaluate(s.behavior) - s.result.bound));
  }
  if (gap > 1e-5) failures.push_back(fmt("duality gap %.1e", gap));

  std::string detail = fmt("beta %d/16 cases, oracle %.1e, NS %.1e, idempotence %.1e, gap %.1e over %d solves",
                           tensor_ok, oracle, ns, idem, gap, audited);
  for (const auto& f : failures) detail += "; FAILED " + f;
  return {failures.empty() && audited > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  bool long_run = false;
  std::vector<int> only;
  app.add_flag("--long", long_run, "run the full threshold sweeps only");
  app.add_option("--only", only, "run just these criteria");
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  std::vector<Criterion> all = {
      {1, "error-correction cost", ec_cost_check},
      {2, "entropy bound", entropy_bound_check},
      {3, "key rates", key_rate_check},
      {4, long_run ? "efficiency thresholds" : "threshold sign check", long_run ? threshold_sweep_check : threshold_sign_check},
      {5, "Tsirelson oracle", tsirelson_check},
      {6, "CHSH configuration", chsh_configuration_check},
      {7, "Gauss-Radau quadrature", quadrature_check},
      {8, "Hoeffding half-width", statistics_check},
      {9, "property suites", property_check},
  };
  if (long_run && only.empty()) only = {4};

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s  [%d] %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
