#include "diqkd/bff_entropy.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "diqkd/errors.hpp"

namespace diqkd {
namespace {

constexpr double kLn2 = std::numbers::ln2;

int worse(sdp::SolveStatus a, sdp::SolveStatus b) {
  return std::max(static_cast<int>(a), static_cast<int>(b));
}

}  // namespace

Quadrature gauss_radau(int m) {
  if (m < 1) throw ConfigError("quadrature needs at least one node");
  Quadrature q;
  q.m = m;
  if (m == 1) {
    q.nodes = {1.0};
    q.weights = {1.0};
    return q;
  }
  // Monic Legendre recurrence on [-1,1]: p_{k+1} = x p_k - beta_k p_{k-1}.
  auto beta = [](int k) { return k * k / (4.0 * k * k - 1.0); };
  std::vector<double> p(m + 1);
  p[0] = 1.0;
  p[1] = 1.0;
  for (int k = 1; k < m; ++k) p[k + 1] = p[k] - beta(k) * p[k - 1];
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(m, m);
  for (int k = 1; k < m; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(beta(k));
  J(m - 1, m - 1) = 1.0 - beta(m - 1) * p[m - 2] / p[m - 1];
  J = 0.5 * (J + J.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  q.nodes.resize(m);
  q.weights.resize(m);
  for (int i = 0; i < m; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    q.nodes[i] = (es.eigenvalues()(i) + 1.0) / 2.0;
    q.weights[i] = v0 * v0;  // 2 v0^2 on [-1,1], halved on [0,1]
  }
  q.nodes.back() = 1.0;
  return q;
}

double c_m(const Quadrature& q) {
  double s = -1.0 / (static_cast<double>(q.m) * q.m * kLn2);
  for (int i = 0; i < q.m; ++i) s += q.weights[i] / (q.nodes[i] * kLn2);
  return s;
}

double node_alpha(double t) {
  if (!(t > 0.0 && t < 1.0)) throw ConfigError("norm bound needs an interior node");
  return 1.5 * std::max(1.0 / t, 1.0 / (1.0 - t));
}

double BellFunctional::evaluate(const Behavior& p) const {
  double s = alpha;
  for (int i = 0; i < kBehaviorSize; ++i) s += lambda[i] * p.table()[i];
  return s;
}

double BellFunctional::evaluate(const CollinsGisinVector& h) const {
  double s = beta;
  for (int i = 0; i < 11; ++i) s += gamma[i] * h[i];
  return s;
}

void BellFunctional::compress() {
  // P(00) = 1 - hA - hB + hAB, P(01) = hB - hAB, P(10) = hA - hAB, P(11) = hAB
  // with h in terms of outcome 1.
  beta = alpha;
  gamma.fill(0.0);
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) {
      const double l00 = lambda[Behavior::flat_index(0, 0, x, y)];
      const double l01 = lambda[Behavior::flat_index(0, 1, x, y)];
      const double l10 = lambda[Behavior::flat_index(1, 0, x, y)];
      const double l11 = lambda[Behavior::flat_index(1, 1, x, y)];
      beta += l00;
      gamma[cg_alice(x)] += l10 - l00;
      gamma[cg_bob(y)] += l01 - l00;
      gamma[cg_joint(x, y)] += l11 - l10 - l01 + l00;
    }
  }
}

std::string to_string(BoundMode m) { return m == BoundMode::joint ? "joint" : "per-node"; }
std::string to_string(FinalNode f) { return f == FinalNode::collision ? "collision" : "dropped"; }

BoundMode parse_bound_mode(const std::string& s) {
  if (s == "per-node" || s == "per_node") return BoundMode::per_node;
  if (s == "joint") return BoundMode::joint;
  throw ConfigError("unknown bound mode '" + s + "' (per-node, joint)");
}

FinalNode parse_final_node(const std::string& s) {
  if (s == "collision") return FinalNode::collision;
  if (s == "dropped") return FinalNode::dropped;
  throw ConfigError("unknown final-node treatment '" + s + "' (collision, dropped)");
}

void BffConfig::validate() const {
  if (m < 1) throw ConfigError("m must be at least 1");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (norm.localizing_level < 0) throw ConfigError("localizing level must be non-negative");
}

npa::Polynomial node_objective(const Scenario& scenario, const OutcomeDist& key_dist,
                               const PreprocessParams& params, double t, int slot) {
  using npa::Polynomial;
  using npa::Symbol;
  const double pv = retention_probability(key_dist, params.keep_prob);
  if (!(pv > 0.0)) throw DataError("post-selection keeps no rounds (p_V = 0)");
  const OutcomeDist w = postselection_weights(params.keep_prob);
  std::array<Polynomial, 2> M;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      M[a] += (w[outcome_index(a, b)] / pv) *
              (npa::alice_effect(a, scenario.key_input_a) * npa::bob_effect(b, scenario.key_input_b));
    }
  }
  const double q = params.flip_prob;
  const std::array<Polynomial, 2> Mh{(1.0 - q) * M[0] + q * M[1], (1.0 - q) * M[1] + q * M[0]};
  const Polynomial msum = M[0] + M[1];
  Polynomial obj;
  for (int a = 0; a < 2; ++a) {
    const Symbol z = Symbol::Z(2 * slot + a), zs = Symbol::Z(2 * slot + a, true);
    const Polynomial Z = Polynomial::symbol(z), Zs = Polynomial::symbol(zs);
    obj += Mh[a] * (Z + Zs + (1.0 - t) * Polynomial::word({zs, z}));
    obj += t * msum * Polynomial::word({z, zs});
  }
  return obj;
}

BellFunctional dual_bell_functional(const sdp::SolverSolution& solution,
                                    const npa::MomentProblem& problem,
                                    const std::vector<npa::ProbabilityPin>& pins) {
  if (!solution.ok()) throw SolverError("dual functional needs an optimal solve");
  if (pins.size() != problem.pin_rows.size()) throw ConfigError("pin list does not match problem");
  BellFunctional g;
  g.alpha = solution.dual_value;
  for (size_t k = 0; k < pins.size(); ++k) {
    const auto& p = pins[k];
    const double mu = solution.equality_multipliers[problem.pin_rows[k]];
    g.lambda[Behavior::flat_index(p.a, p.b, p.x, p.y)] += mu;
    g.alpha -= mu * p.value;
  }
  g.compress();
  return g;
}

namespace {

struct NodeSolve {
  NodeTerm term;
  BellFunctional functional;
  int basis_size = 0;
  int moment_count = 0;
};

NodeSolve solve_program(const npa::Alphabet& alphabet, const npa::Polynomial& objective,
                        const std::vector<npa::ProbabilityPin>& pins,
                        const std::vector<npa::NormBound>& bounds, const BffConfig& cfg) {
  npa::MomentProblem mp =
      npa::assemble(alphabet, cfg.level, pins, objective, bounds, cfg.norm);
  const sdp::SolverSolution sol = sdp::solve(mp.program, cfg.solver);
  NodeSolve out;
  out.basis_size = static_cast<int>(mp.basis.size());
  out.moment_count = mp.program.num_vars;
  out.term.status = sol.status;
  out.term.iterations = sol.iterations;
  if (sol.status == sdp::SolveStatus::infeasible) {
    throw DataError("entropy SDP is infeasible (" + sol.message +
                    "); project the behavior onto the quantum set first");
  }
  if (!sol.ok()) throw SolverError("entropy SDP failed: " + sol.message);
  out.term.value = sol.dual_value;
  out.term.primal = sol.primal_value;
  out.functional = dual_bell_functional(sol, mp, pins);
  return out;
}

}  // namespace

EntropyBoundResult entropy_bound(const Behavior& behavior, const Scenario& scenario,
                                 const PreprocessParams& params, const BffConfig& config) {
  config.validate();
  params.validate();
  scenario.validate();
  const double residual = no_signaling_residual(behavior);
  if (residual > 1e-6) {
    throw DataError("behavior violates no-signaling by " + std::to_string(residual) +
                    "; project it first");
  }
  const Behavior pinned = to_behavior(collins_gisin(behavior));
  const auto pins = npa::pins_from(pinned);
  const OutcomeDist key = pinned.setting(scenario.key_input_a, scenario.key_input_b);

  const Quadrature q = gauss_radau(config.m);
  EntropyBoundResult res;
  res.c_m = c_m(q);
  res.p_v = retention_probability(key, params.keep_prob);
  const double flip = params.flip_prob;
  res.final_term = config.final_node == FinalNode::collision
                       ? 2.0 * flip * (1.0 - flip) * q.weights.back() / kLn2
                       : 0.0;
  const int interior = config.m - 1;
  res.nodes.resize(interior);
  for (int i = 0; i < interior; ++i) {
    NodeTerm& n = res.nodes[i];
    n.t = q.nodes[i];
    n.weight = q.weights[i];
    n.alpha = node_alpha(n.t);
    n.coefficient = n.weight / (n.t * kLn2);
  }

  BellFunctional total;
  total.alpha = res.c_m + res.final_term;
  if (interior > 0 && config.mode == BoundMode::per_node) {
    auto run = [&](int i) {
      const NodeTerm& n = res.nodes[i];
      std::vector<npa::NormBound> bounds;
      if (config.norm_constraints) bounds = {{0, n.alpha}, {1, n.alpha}};
      return solve_program({kInputsA, kInputsB, 2}, node_objective(scenario, key, params, n.t),
                           pins, bounds, config);
    };
    std::vector<NodeSolve> solved(interior);
    if (config.jobs <= 1) {
      for (int i = 0; i < interior; ++i) solved[i] = run(i);
    } else {
      for (int start = 0; start < interior; start += config.jobs) {
        std::vector<std::future<NodeSolve>> batch;
        const int stop = std::min(interior, start + config.jobs);
        for (int i = start; i < stop; ++i) batch.push_back(std::async(std::launch::async, run, i));
        for (int i = start; i < stop; ++i) solved[i] = batch[i - start].get();
      }
    }
    for (int i = 0; i < interior; ++i) {
      NodeTerm& n = res.nodes[i];
      const NodeTerm& s = solved[i].term;
      n.value = s.value;
      n.primal = s.primal;
      n.status = s.status;
      n.iterations = s.iterations;
      res.basis_size = solved[i].basis_size;
      res.moment_count = solved[i].moment_count;
      total.alpha += n.coefficient * solved[i].functional.alpha;
      for (int k = 0; k < kBehaviorSize; ++k) {
        total.lambda[k] += n.coefficient * solved[i].functional.lambda[k];
      }
    }
  } else if (interior > 0) {
    npa::Polynomial objective;
    std::vector<npa::NormBound> bounds;
    for (int i = 0; i < interior; ++i) {
      const NodeTerm& n = res.nodes[i];
      objective += n.coefficient * node_objective(scenario, key, params, n.t, i);
      if (config.norm_constraints) {
        bounds.push_back({2 * i, n.alpha});
        bounds.push_back({2 * i + 1, n.alpha});
      }
    }
    const NodeSolve s =
        solve_program({kInputsA, kInputsB, 2 * interior}, objective, pins, bounds, config);
    res.basis_size = s.basis_size;
    res.moment_count = s.moment_count;
    // The joint program only certifies the weighted sum.
    for (auto& n : res.nodes) {
      n.status = s.term.status;
      n.iterations = s.term.iterations;
      n.value = std::numeric_limits<double>::quiet_NaN();
    }
    total.alpha += s.functional.alpha;
    for (int k = 0; k < kBehaviorSize; ++k) total.lambda[k] += s.functional.lambda[k];
    res.per_node_terms.push_back(s.term.value);
    res.bound = res.c_m + res.final_term + s.term.value;
  }

  int status = static_cast<int>(sdp::SolveStatus::optimal);
  for (const auto& n : res.nodes) status = worse(static_cast<sdp::SolveStatus>(status), n.status);
  res.status = static_cast<sdp::SolveStatus>(status);
  if (config.mode == BoundMode::per_node || interior == 0) {
    res.bound = res.c_m + res.final_term;
    for (const auto& n : res.nodes) {
      res.per_node_terms.push_back(n.coefficient * n.value);
      res.bound += n.coefficient * n.value;
    }
  }
  total.compress();
  res.dual = total;
  res.configuration = "m=" + std::to_string(config.m) + " level=" + config.level.to_string() +
                      " mode=" + to_string(config.mode) +
                      " final-node=" + to_string(config.final_node) + " norm=" +
                      (config.norm_constraints
                           ? "localizing-" + std::to_string(config.norm.localizing_level)
                           : std::string("off"));
  return res;
}

}  // namespace diqkd
