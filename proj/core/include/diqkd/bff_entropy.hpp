#pragma once

// Lower bounds on the conditional von Neumann entropy H(A_hat | E) of the
// preprocessed key bit from a Gauss-Radau expansion of the relative entropy,
// each node giving a noncommutative optimization relaxed to an SDP.

#include <array>
#include <string>
#include <vector>

#include "diqkd/correlations.hpp"
#include "diqkd/npa.hpp"
#include "diqkd/preprocess.hpp"
#include "diqkd/sdp.hpp"

namespace diqkd {

struct Quadrature {
  int m = 1;
  std::vector<double> nodes;    // ascending, nodes.back() == 1
  std::vector<double> weights;  // sum to 1
};

// m-point Gauss-Radau rule for the constant weight on [0,1] with the fixed
// node t_m = 1.
Quadrature gauss_radau(int m);

// -1/(m^2 ln 2) + sum_i w_i / (t_i ln 2)
double c_m(const Quadrature& q);

// Norm bound 3/2 max(1/t, 1/(1-t)) for an interior node.
double node_alpha(double t);

// g(P) = alpha + sum lambda(a,b,x,y) P(a,b|x,y); on no-signaling behaviors
// equivalently beta + gamma . h with h the Collins-Gisin coordinates.
struct BellFunctional {
  double alpha = 0.0;
  Behavior::Table lambda{};
  double beta = 0.0;
  CollinsGisinVector gamma{};

  double evaluate(const Behavior& p) const;
  double evaluate(const CollinsGisinVector& h) const;
  // Fills beta and gamma from alpha and lambda.
  void compress();
};

enum class BoundMode { per_node, joint };

// Treatment of the t_m = 1 node. `dropped` uses only the trivial estimate;
// `collision` adds 2 p_N (1 - p_N) w_m / ln 2, valid because the t = 1 term
// is bounded by the collision probability of the flipped bit.
enum class FinalNode { dropped, collision };

std::string to_string(BoundMode m);
std::string to_string(FinalNode f);
BoundMode parse_bound_mode(const std::string& s);
FinalNode parse_final_node(const std::string& s);

struct BffConfig {
  int m = 8;
  npa::LevelSpec level = npa::LevelSpec::parse("2+ABZ+AZZ");
  BoundMode mode = BoundMode::per_node;
  FinalNode final_node = FinalNode::collision;
  bool norm_constraints = true;
  npa::NormRelaxation norm;
  sdp::SolverConfig solver;
  int jobs = 1;  // concurrent node solves in per-node mode

  void validate() const;
};

struct NodeTerm {
  double t = 0.0;
  double weight = 0.0;  // quadrature weight w_i
  double alpha = 0.0;   // norm bound
  double value = 0.0;   // infimum (dual value of the SDP)
  double primal = 0.0;
  double coefficient = 0.0;  // w_i / (t_i ln 2)
  sdp::SolveStatus status = sdp::SolveStatus::numerical_failure;
  int iterations = 0;
};

struct EntropyBoundResult {
  double bound = 0.0;
  double c_m = 0.0;
  double final_term = 0.0;
  std::vector<NodeTerm> nodes;
  std::vector<double> per_node_terms;  // coefficient * value
  sdp::SolveStatus status = sdp::SolveStatus::optimal;
  BellFunctional dual;
  double p_v = 1.0;
  int basis_size = 0;
  int moment_count = 0;
  std::string configuration;  // human-readable summary for reports
};

// The pinned behavior must be no-signaling within 1e-6 (project first); it is
// snapped onto its Collins-Gisin representative before pinning. Throws
// DataError for infeasible pins and SolverError when any SDP fails. Exactly
// extremal behaviors (deterministic points, pure maximal violations) leave no
// strictly feasible moment matrix and typically end in SolverError.
EntropyBoundResult entropy_bound(const Behavior& behavior, const Scenario& scenario,
                                 const PreprocessParams& params, const BffConfig& config);

// Affine functional from the pin multipliers of one solve. The returned
// functional maps a behavior to the dual value of that solve.
BellFunctional dual_bell_functional(const sdp::SolverSolution& solution,
                                    const npa::MomentProblem& problem,
                                    const std::vector<npa::ProbabilityPin>& pins);

// Objective of one node (Z operators 2*slot and 2*slot+1).
npa::Polynomial node_objective(const Scenario& scenario, const OutcomeDist& key_dist,
                               const PreprocessParams& params, double t, int slot = 0);

}  // namespace diqkd
