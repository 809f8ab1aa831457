#pragma once

// Least-squares projection of measured frequencies onto an NPA outer
// approximation of the quantum set, and Hoeffding confidence half-widths for
// Bell-functional estimates.

#include <array>
#include <cstdint>
#include <span>

#include "diqkd/bff_entropy.hpp"
#include "diqkd/correlations.hpp"
#include "diqkd/npa.hpp"
#include "diqkd/sdp.hpp"

namespace diqkd {

struct ProjectionResult {
  Behavior raw = Behavior::uniform();
  Behavior projected = Behavior::uniform();
  double distance = 0.0;  // Euclidean norm over the 24 entries
  sdp::SolveStatus status = sdp::SolveStatus::optimal;
  int iterations = 0;
};

struct ProjectionConfig {
  npa::LevelSpec level = npa::LevelSpec::parse("2");
  // Per-setting residual weights; all ones gives the plain 2-norm.
  std::array<double, kSettings> setting_weights{1, 1, 1, 1, 1, 1};
  sdp::SolverConfig solver;
};

// Throws SolverError if the SDP fails.
ProjectionResult project_to_quantum(const Behavior& raw, const ProjectionConfig& config = {});

// Weights proportional to sqrt(N_xy / mean N) for count-weighted projection.
std::array<double, kSettings> count_weights(const CountTable& counts);

struct ConfidenceParams {
  double epsilon = 1e-2;
  double n = 0.0;           // total rounds
  double q = 1.0 / 6.0;     // max setting probability
  double lambda_max = 0.0;  // max |lambda|

  void validate() const;
};

// (2 lambda / q) sqrt(ln(1/eps) / (2 n))
double hoeffding_delta(const ConfidenceParams& c);

double max_abs_lambda(const BellFunctional& g);

struct FunctionalEstimate {
  double g_prime = 0.0;  // estimate of g(P) - alpha
  std::int64_t rounds = 0;
  double delta = 0.0;
};

// g' = (1/n) sum_i lambda(a_i,b_i,x_i,y_i) / P(x_i,y_i); throws DataError on
// an empty stream.
FunctionalEstimate estimator_from_events(std::span<const EventRecord> events,
                                         const BellFunctional& functional,
                                         const Scenario& scenario, double epsilon);

}  // namespace diqkd
