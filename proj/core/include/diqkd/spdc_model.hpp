#pragma once

// Expectation-level model of a polarization-entangled SPDC source with
// Werner-type noise, lossy detectors with dark counts and Poissonian
// multi-pair emission.

#include <array>

#include <Eigen/Core>

#include "diqkd/correlations.hpp"

namespace diqkd {

struct SpdcParams {
  double r = 1.0;            // amplitude ratio of |VH> to |HV>
  double visibility = 1.0;
  double eta_a = 1.0;
  double eta_b = 1.0;
  double dark_count = 0.0;
  double mean_photon = 0.0;  // mean pairs per pulse
  std::array<double, kInputsA> angles_a{};  // Bloch angles, radians
  std::array<double, kInputsB> angles_b{};
  int max_pairs = 3;

  void validate() const;
};

using DensityMatrix4 = Eigen::Matrix4cd;
using Effect2 = Eigen::Matrix2cd;

// rho = V |psi_r><psi_r| + (1 - V) I/4 with |psi_r> ~ |HV> + r |VH>.
DensityMatrix4 werner_state(double r, double visibility);

// Click effect M_0 for a polarization projection at Bloch angle phi in the
// x-z plane; the no-click effect is I - M_0.
Effect2 measurement_effect(double phi, double eta, double dark_count);

// Four 4x4 0/1 matrices: entry (i,j) of matrix k is 1 iff combining a pair
// with outcome i and a pair with outcome j yields outcome k. Outcomes are
// ordered (00, 01, 10, 11).
class BetaTensor {
 public:
  using Matrix = std::array<std::array<int, 4>, 4>;

  // The click-union tensor used for multi-pair emission.
  static BetaTensor click_union();
  // Throws ConfigError unless the four matrices partition every (i,j).
  explicit BetaTensor(const std::array<Matrix, 4>& beta);

  int operator()(int k, int i, int j) const { return beta_[k][i][j]; }

 private:
  std::array<Matrix, 4> beta_;
};

OutcomeDist single_pair_probs(const SpdcParams& params, int x, int y);
OutcomeDist multipair_combine(const OutcomeDist& p, const OutcomeDist& q,
                              const BetaTensor& beta);
// No-pair outcome distribution produced by dark counts alone.
OutcomeDist zero_pair_probs(double dark_count);

// Poisson mixture over 0..max_pairs emitted pairs, renormalized by the
// retained Poisson mass.
Behavior behavior_from_model(const SpdcParams& params);

double fidelity_to_visibility(double fidelity);

}  // namespace diqkd
