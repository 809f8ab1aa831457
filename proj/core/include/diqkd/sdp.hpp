#pragma once

// Small dense primal-dual interior-point solver for linear matrix
// inequalities:
//
//   minimize    c'y + c0
//   subject to  e_k(y)  = 0                       (affine equalities)
//               F_j(y) = F_j0 + sum_i y_i F_ji >= 0  (PSD blocks)
//               g_l(y) >= 0                       (affine inequalities)
//
// Equalities are eliminated before the iterations start; the remaining
// problem is solved as the dual of a standard-form SDP with an
// infeasible-start Mehrotra predictor-corrector using the HKM direction.
// Multipliers of the equalities are recovered afterwards from the
// stationarity conditions, which is what the dual certificates rely on.

#include <string>
#include <vector>

#include <Eigen/Core>

namespace diqkd::sdp {

struct Term {
  int var = 0;
  double coef = 0.0;
};

struct LinearExpr {
  std::vector<Term> terms;
  double constant = 0.0;
};

// Entry (row, col) with row <= col of a symmetric coefficient matrix. The
// entry and its mirror both carry coef. var == kConstant marks F_j0.
struct MatrixEntry {
  static constexpr int kConstant = -1;
  int var = kConstant;
  int row = 0;
  int col = 0;
  double coef = 0.0;
};

struct PsdBlock {
  int dim = 0;
  std::vector<MatrixEntry> entries;
  std::string label;
};

struct Equality {
  LinearExpr expr;  // expr == 0
  std::string label;
};

struct Inequality {
  LinearExpr expr;  // expr >= 0
  std::string label;
};

struct ConicProblem {
  int num_vars = 0;
  Eigen::VectorXd objective;  // minimized
  double objective_constant = 0.0;
  std::vector<Equality> equalities;
  std::vector<PsdBlock> psd_blocks;
  std::vector<Inequality> inequalities;

  int add_var();  // grows objective with a zero coefficient
  void validate() const;
};

enum class SolveStatus { optimal, near_optimal, infeasible, numerical_failure };

std::string to_string(SolveStatus s);

struct SolverConfig {
  double gap_tol = 1e-7;    // on |primal - dual| / (1 + |primal|)
  double feas_tol = 1e-8;   // relative primal/dual residuals
  int max_iterations = 150;
  bool verbose = false;
};

struct SolverSolution {
  SolveStatus status = SolveStatus::numerical_failure;
  double primal_value = 0.0;
  double dual_value = 0.0;
  Eigen::VectorXd values;  // y
  // Lagrange multipliers mu_k; raising the constant of e_k by d moves the
  // optimum by -mu_k * d to first order.
  std::vector<double> equality_multipliers;
  std::vector<double> inequality_multipliers;  // >= 0
  int iterations = 0;
  double relative_gap = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  std::string message;

  bool ok() const {
    return status == SolveStatus::optimal || status == SolveStatus::near_optimal;
  }
};

SolverSolution solve(const ConicProblem& problem, const SolverConfig& config = {});

// JSON dump (variables, sparse blocks, constraints) for offline debugging.
std::string dump_json(const ConicProblem& problem);

}  // namespace diqkd::sdp
