#pragma once

// Experimental reference data and model presets used as fixtures.

#include <span>

#include "diqkd/correlations.hpp"
#include "diqkd/preprocess.hpp"
#include "diqkd/spdc_model.hpp"

namespace diqkd::reference {

struct FiberRun {
  int fiber_m = 0;
  double mean_photon = 0.0;
  CountTable counts;
  // Reference least-squares estimate of the behavior.
  std::array<OutcomeDist, kSettings> estimated{};
  PreprocessParams params;  // reference (p, p_N)
  double rate = 0.0;        // reference bits per pulse
  double lambda = 0.0;      // reference max |lambda|
  double delta = 0.0;       // reference confidence half-width
};

inline constexpr double kRoundsPerSetting = 2.4e8;
inline constexpr double kEpsilon = 1e-2;
inline constexpr double kFidelity = 0.9952;
inline constexpr double kEtaA = 0.8716;
inline constexpr double kEtaB = 0.8782;
inline constexpr double kDarkCount = 1e-6;

std::span<const FiberRun> fiber_runs();
// Throws ConfigError for an unknown length.
const FiberRun& fiber_run(int fiber_m);

Behavior estimated_behavior(const FiberRun& run);

// Source and detector model with measurement angles fitted to the 20 m
// estimate.
SpdcParams model_20m();

// State and settings of the CHSH demonstration.
SpdcParams chsh_model();

// Realistic imperfections with symmetric efficiency eta; r, u and the angles
// are placeholders for an optimizer.
SpdcParams realistic_model(double eta);

}  // namespace diqkd::reference
