#include "diqkd/keyrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "diqkd/errors.hpp"
#include "diqkd/estimation.hpp"

namespace diqkd {

double dw_rate(const ProcessedStats& stats, const EntropyBoundResult& eb, double f_e) {
  if (!(f_e >= 1.0)) throw ConfigError("error-correction efficiency f_e must be >= 1");
  return stats.p_v * (eb.bound - f_e * stats.ec_cost);
}

std::string config_description(const BffConfig& config, double f_e) {
  std::ostringstream os;
  os.precision(17);
  os << "m=" << config.m << ";level=" << config.level.to_string()
     << ";mode=" << to_string(config.mode) << ";final=" << to_string(config.final_node)
     << ";norm=" << (config.norm_constraints ? config.norm.localizing_level : -1)
     << ";gap_tol=" << config.solver.gap_tol << ";feas_tol=" << config.solver.feas_tol
     << ";max_iter=" << config.solver.max_iterations << ";f_e=" << f_e;
  return os.str();
}

std::string config_fingerprint(const BffConfig& config, double f_e) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : config_description(config, f_e)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

KeyRateReport evaluate_rate(const Behavior& behavior, const Scenario& scenario,
                            const PreprocessParams& params, const BffConfig& config,
                            double f_e) {
  if (!(f_e >= 1.0)) throw ConfigError("error-correction efficiency f_e must be >= 1");
  KeyRateReport r;
  r.entropy = entropy_bound(behavior, scenario, params, config);
  const Behavior snapped = to_behavior(collins_gisin(behavior));
  r.stats = process(snapped.setting(scenario.key_input_a, scenario.key_input_b), params);
  r.params = params;
  r.f_e = f_e;
  r.p_v = r.stats.p_v;
  r.ec_cost = r.stats.ec_cost;
  r.rate = dw_rate(r.stats, r.entropy, f_e);
  r.positive = r.rate > 0.0;
  r.lambda_max = max_abs_lambda(r.entropy.dual);
  r.configuration = config_description(config, f_e);
  r.fingerprint = config_fingerprint(config, f_e);
  return r;
}

void attach_confidence(KeyRateReport& report, const Scenario& scenario, double epsilon,
                       double n) {
  const double q = *std::max_element(scenario.input_distribution.begin(),
                                     scenario.input_distribution.end());
  report.lambda_max = max_abs_lambda(report.entropy.dual);
  report.delta = hoeffding_delta({epsilon, n, q, report.lambda_max});
  report.epsilon = epsilon;
  report.rounds = n;
}

OptimizerConfig::OptimizerConfig() {
  screening.m = 8;
  screening.level = npa::LevelSpec::parse("2");
  refinement.m = 8;
  refinement.level = npa::LevelSpec::parse("2+ABZ+AZZ");
}

void OptimizerConfig::validate() const {
  if (population < 4) throw ConfigError("population must be at least 4");
  if (generations < 0) throw ConfigError("generations must be non-negative");
  if (!(differential_weight > 0.0 && differential_weight <= 2.0)) {
    throw ConfigError("differential weight must lie in (0,2]");
  }
  if (!(crossover >= 0.0 && crossover <= 1.0)) throw ConfigError("crossover must lie in [0,1]");
  if (polish_evaluations < 0) throw ConfigError("polish budget must be non-negative");
  if (!(refine_fraction >= 0.0 && refine_fraction <= 1.0)) {
    throw ConfigError("refine fraction must lie in [0,1]");
  }
  if (!(warm_spread >= 0.0 && warm_spread <= 1.0)) {
    throw ConfigError("warm spread must lie in [0,1]");
  }
  if (!(f_e >= 1.0)) throw ConfigError("error-correction efficiency f_e must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  screening.validate();
  refinement.validate();
}

namespace {

using Vec = std::array<double, kSearchDim>;

constexpr double kPi = std::numbers::pi;
constexpr std::array<double, kSearchDim> kLower{0.0, 0.0, 0.0, 0.001, -kPi, -kPi, -kPi, -kPi, -kPi};
constexpr std::array<double, kSearchDim> kUpper{1.0, 0.5, 1.0, 1.0, kPi, kPi, kPi, kPi, kPi};
constexpr int kFirstAngle = 4;
// Rate assigned when a candidate cannot be evaluated.
constexpr double kFailedRate = -1.0;

class Search {
 public:
  Search(const SpdcParams& tmpl, const OptimizerConfig& cfg) : tmpl_(tmpl), cfg_(cfg) {
    for (int i = 0; i < kSearchDim; ++i) {
      const bool fixed_pre = !cfg.preprocessing && i < 2;
      const bool fixed_state = !cfg.optimize_state && (i == 2 || i == 3);
      if (!fixed_pre && !fixed_state) active_.push_back(i);
    }
  }

  const std::vector<int>& active() const { return active_; }

  // Unit-cube coordinates of a point; inactive coordinates keep the
  // template values.
  Vec encode(const SearchPoint& p) const {
    const Vec v{p.params.keep_prob, p.params.flip_prob, p.model.r, p.model.mean_photon,
                p.model.angles_a[0], p.model.angles_a[1], p.model.angles_b[0],
                p.model.angles_b[1], p.model.angles_b[2]};
    Vec u{};
    for (int i = 0; i < kSearchDim; ++i) {
      u[i] = std::clamp((v[i] - kLower[i]) / (kUpper[i] - kLower[i]), 0.0, 1.0);
    }
    return u;
  }

  SearchPoint decode(const Vec& u) const {
    Vec v{};
    for (int i = 0; i < kSearchDim; ++i) v[i] = kLower[i] + u[i] * (kUpper[i] - kLower[i]);
    SearchPoint p;
    p.model = tmpl_;
    p.params = {v[0], v[1]};
    if (!cfg_.preprocessing) p.params = {1.0, 0.0};
    if (cfg_.optimize_state) {
      p.model.r = v[2];
      p.model.mean_photon = v[3];
    }
    p.model.angles_a = {v[4], v[5]};
    p.model.angles_b = {v[6], v[7], v[8]};
    return p;
  }

  // Keeps angles periodic and everything else inside the box.
  static void normalize(Vec& u) {
    for (int i = 0; i < kSearchDim; ++i) {
      if (i >= kFirstAngle) {
        u[i] -= std::floor(u[i]);
      } else {
        u[i] = std::clamp(u[i], 0.0, 1.0);
      }
    }
  }

  double screen(const Vec& u) const { return rate(u, cfg_.screening); }

  double rate(const Vec& u, const BffConfig& bff) const {
    try {
      const SearchPoint p = decode(u);
      const Behavior b = behavior_from_model(p.model);
      return evaluate_rate(b, Scenario{}, p.params, bff, cfg_.f_e).rate;
    } catch (const SolverError&) {
      return kFailedRate;
    } catch (const DataError&) {
      return kFailedRate;
    }
  }

  std::vector<double> screen_all(const std::vector<Vec>& pts) {
    std::vector<double> out(pts.size());
    if (cfg_.jobs <= 1) {
      for (std::size_t i = 0; i < pts.size(); ++i) out[i] = screen(pts[i]);
    } else {
      for (std::size_t start = 0; start < pts.size(); start += cfg_.jobs) {
        const std::size_t stop = std::min(pts.size(), start + cfg_.jobs);
        std::vector<std::future<double>> batch;
        for (std::size_t i = start; i < stop; ++i) {
          batch.push_back(std::async(std::launch::async, [this, &pts, i] { return screen(pts[i]); }));
        }
        for (std::size_t i = start; i < stop; ++i) out[i] = batch[i - start].get();
      }
    }
    evaluations += static_cast<int>(pts.size());
    return out;
  }

  int evaluations = 0;

 private:
  SpdcParams tmpl_;
  const OptimizerConfig& cfg_;
  std::vector<int> active_;
};

// Bounded Nelder-Mead on the active coordinates, maximizing f.
template <class F>
std::pair<Vec, double> polish(const Vec& start, double f_start, const std::vector<int>& active,
                              int budget, F&& f) {
  const int n = static_cast<int>(active.size());
  if (n == 0 || budget <= 0) return {start, f_start};
  std::vector<Vec> pts{start};
  std::vector<double> val{f_start};
  for (int k = 0; k < n && budget > 0; ++k) {
    Vec p = start;
    p[active[k]] += p[active[k]] < 0.95 ? 0.05 : -0.05;
    Search::normalize(p);
    pts.push_back(p);
    val.push_back(f(p));
    --budget;
  }
  if (static_cast<int>(pts.size()) < n + 1) {
    const auto it = std::max_element(val.begin(), val.end());
    return {pts[it - val.begin()], *it};
  }
  std::vector<int> order(n + 1);
  while (budget > 0) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return val[a] > val[b]; });
    const int best = order.front(), worst = order.back(), second = order[n - 1];
    Vec centroid{};
    for (int k = 0; k < n; ++k) {
      for (int j : active) centroid[j] += pts[order[k]][j] / n;
    }
    auto along = [&](double s) {
      Vec p = pts[worst];
      for (int j : active) p[j] = centroid[j] + s * (pts[worst][j] - centroid[j]);
      Search::normalize(p);
      return p;
    };
    const Vec xr = along(-1.0);
    const double fr = f(xr);
    --budget;
    if (fr > val[best] && budget > 0) {
      const Vec xe = along(-2.0);
      const double fe = f(xe);
      --budget;
      if (fe > fr) {
        pts[worst] = xe, val[worst] = fe;
      } else {
        pts[worst] = xr, val[worst] = fr;
      }
    } else if (fr > val[second]) {
      pts[worst] = xr, val[worst] = fr;
    } else if (budget > 0) {
      const Vec xc = along(fr > val[worst] ? -0.5 : 0.5);
      const double fc = f(xc);
      --budget;
      if (fc > std::max(fr, val[worst])) {
        pts[worst] = xc, val[worst] = fc;
      } else {
        for (int k = 1; k <= n && budget > 0; ++k) {
          Vec& p = pts[order[k]];
          for (int j : active) p[j] = pts[best][j] + 0.5 * (p[j] - pts[best][j]);
          Search::normalize(p);
          val[order[k]] = f(p);
          --budget;
        }
      }
    }
  }
  const auto it = std::max_element(val.begin(), val.end());
  return {pts[it - val.begin()], *it};
}

}  // namespace

OptimizeResult optimize_params(const SpdcParams& model_template, const OptimizerConfig& config,
                               const std::vector<SearchPoint>& warm_starts) {
  config.validate();
  model_template.validate();
  Search search(model_template, config);
  const auto& active = search.active();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const SearchPoint base{PreprocessParams{1.0, 0.0}, model_template};
  std::vector<Vec> anchors;
  for (const auto& w : warm_starts) anchors.push_back(search.encode(w));
  if (anchors.empty()) anchors.push_back(search.encode(base));

  const int np = config.population;
  std::vector<Vec> pop;
  for (const auto& a : anchors) {
    if (static_cast<int>(pop.size()) < np) pop.push_back(a);
  }
  // Without preprocessing in play the template's own settings are a natural
  // candidate; with it, also try the plain protocol.
  if (config.preprocessing && static_cast<int>(pop.size()) < np) {
    Vec plain = anchors.front();
    plain[0] = 1.0;
    plain[1] = 0.0;
    pop.push_back(plain);
  }
  while (static_cast<int>(pop.size()) < np) {
    Vec u = anchors[pop.size() % anchors.size()];
    for (int j : active) {
      u[j] = config.warm_spread > 0.0 ? u[j] + config.warm_spread * (2.0 * unit(rng) - 1.0)
                                      : unit(rng);
    }
    Search::normalize(u);
    pop.push_back(u);
  }
  std::vector<double> fit = search.screen_all(pop);

  std::uniform_int_distribution<int> pick(0, np - 1);
  std::uniform_int_distribution<int> pick_dim(0, static_cast<int>(active.size()) - 1);
  for (int g = 0; g < config.generations && !active.empty(); ++g) {
    std::vector<Vec> trials(np);
    for (int i = 0; i < np; ++i) {
      int r1, r2, r3;
      do r1 = pick(rng); while (r1 == i);
      do r2 = pick(rng); while (r2 == i || r2 == r1);
      do r3 = pick(rng); while (r3 == i || r3 == r1 || r3 == r2);
      Vec t = pop[i];
      const int forced = active[pick_dim(rng)];
      for (int j : active) {
        if (j == forced || unit(rng) < config.crossover) {
          t[j] = pop[r1][j] + config.differential_weight * (pop[r2][j] - pop[r3][j]);
        }
      }
      Search::normalize(t);
      trials[i] = t;
    }
    const std::vector<double> tf = search.screen_all(trials);
    for (int i = 0; i < np; ++i) {
      if (tf[i] >= fit[i]) {
        pop[i] = trials[i];
        fit[i] = tf[i];
      }
    }
    if (config.verbose) {
      std::fprintf(stderr, "generation %d best %.6e\n", g + 1,
                   *std::max_element(fit.begin(), fit.end()));
    }
  }

  std::vector<int> order(np);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return fit[a] > fit[b]; });
  auto [polished, polished_rate] =
      polish(pop[order[0]], fit[order[0]], active, config.polish_evaluations, [&](const Vec& u) {
        ++search.evaluations;
        return search.screen(u);
      });

  std::vector<std::pair<Vec, double>> candidates{{polished, polished_rate}};
  const int n_refine = static_cast<int>(std::ceil(config.refine_fraction * np));
  for (int k = 0; k < n_refine; ++k) candidates.emplace_back(pop[order[k]], fit[order[k]]);

  OptimizeResult out;
  out.report.rate = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (const auto& [u, screened] : candidates) {
    const SearchPoint p = search.decode(u);
    KeyRateReport rep;
    try {
      rep = evaluate_rate(behavior_from_model(p.model), Scenario{}, p.params, config.refinement,
                          config.f_e);
    } catch (const SolverError&) {
      continue;
    } catch (const DataError&) {
      continue;
    }
    ++out.evaluations;
    if (!any || rep.rate > out.report.rate) {
      any = true;
      rep.model = p.model;
      rep.source = "model";
      out.report = rep;
      out.best = p;
      out.screening_rate = screened;
    }
  }
  if (!any) throw SolverError("no candidate could be evaluated at the refinement level");
  out.evaluations += search.evaluations;
  return out;
}

SweepResult threshold_sweep(const SpdcParams& model_template, const SweepConfig& config) {
  if (config.etas.empty()) throw ConfigError("efficiency grid is empty");
  if (!std::is_sorted(config.etas.begin(), config.etas.end())) {
    throw ConfigError("efficiency grid must be sorted");
  }
  if (!(config.resolution > 0.0)) throw ConfigError("resolution must be positive");
  for (double e : config.etas) {
    if (!(e > 0.0 && e <= 1.0)) throw ConfigError("efficiencies must lie in (0,1]");
  }
  SweepResult res;
  res.fingerprint = config_fingerprint(config.optimizer.refinement, config.optimizer.f_e);

  std::vector<SearchPoint> warm;
  auto run = [&](double eta, const std::vector<SearchPoint>& starts) {
    SpdcParams m = model_template;
    m.eta_a = eta;
    m.eta_b = eta;
    std::vector<SearchPoint> seeded = starts;
    for (auto& s : seeded) {
      s.model.eta_a = eta;
      s.model.eta_b = eta;
    }
    const OptimizeResult r = optimize_params(m, config.optimizer, seeded);
    if (config.optimizer.verbose) {
      std::fprintf(stderr, "eta %.4f rate %.6e\n", eta, r.report.rate);
    }
    return SweepPoint{eta, r.report.rate, r.best, true};
  };

  // Highest efficiency first so later points start from a good optimum.
  res.grid.resize(config.etas.size());
  for (std::size_t k = config.etas.size(); k-- > 0;) {
    res.grid[k] = run(config.etas[k], warm);
    warm = {res.grid[k].best};
  }

  const double floor = config.positive_floor;
  std::size_t first = res.grid.size();
  for (std::size_t k = 0; k < res.grid.size(); ++k) {
    if (res.grid[k].rate > floor) {
      first = k;
      break;
    }
  }
  if (first == res.grid.size()) return res;
  if (first == 0) {
    res.threshold = res.grid[0].eta;
    return res;
  }
  double lo = res.grid[first - 1].eta, hi = res.grid[first].eta;
  SearchPoint hi_best = res.grid[first].best;
  while (hi - lo > config.resolution) {
    const double mid = 0.5 * (lo + hi);
    const SweepPoint p = run(mid, {hi_best});
    res.bisection.push_back(p);
    if (p.rate > floor) {
      hi = mid;
      hi_best = p.best;
    } else {
      lo = mid;
    }
  }
  res.threshold = hi;
  return res;
}

}  // namespace diqkd
