#pragma once

// Devetak-Winter key rate, optimization of source, settings and
// preprocessing parameters, and efficiency-threshold sweeps.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "diqkd/bff_entropy.hpp"
#include "diqkd/correlations.hpp"
#include "diqkd/preprocess.hpp"
#include "diqkd/spdc_model.hpp"

namespace diqkd {

// p_v (bound - f_e ec_cost); throws ConfigError for f_e < 1.
double dw_rate(const ProcessedStats& stats, const EntropyBoundResult& eb, double f_e);

// Canonical description of everything that influences a bound besides the
// behavior, and a stable 64-bit FNV-1a hash of it.
std::string config_description(const BffConfig& config, double f_e);
std::string config_fingerprint(const BffConfig& config, double f_e);

struct KeyRateReport {
  double rate = 0.0;  // bits per pulse, may be negative
  bool positive = false;
  double p_v = 0.0;
  double ec_cost = 0.0;
  double f_e = 1.0;
  ProcessedStats stats;
  EntropyBoundResult entropy;
  PreprocessParams params;
  std::optional<SpdcParams> model;
  std::string source;  // dataset id or "model"
  double lambda_max = 0.0;
  double delta = 0.0;    // confidence half-width, 0 when no round count is known
  double epsilon = 0.0;
  double rounds = 0.0;
  std::string configuration;
  std::string fingerprint;
};

// Bound and rate for a no-signaling behavior (project measured data first).
KeyRateReport evaluate_rate(const Behavior& behavior, const Scenario& scenario,
                            const PreprocessParams& params, const BffConfig& config,
                            double f_e);

// Fills delta from the dual functional of the report; n is the total round
// count.
void attach_confidence(KeyRateReport& report, const Scenario& scenario, double epsilon,
                       double n);

// Search vector: p, p_N, r, u, then the five Bloch angles.
inline constexpr int kSearchDim = 9;

struct SearchPoint {
  PreprocessParams params;
  SpdcParams model;
};

struct OptimizerConfig {
  std::uint64_t seed = 0;
  int population = 20;
  int generations = 25;
  double differential_weight = 0.6;
  double crossover = 0.9;
  int polish_evaluations = 80;
  // Share of the final population re-evaluated at the refinement level.
  double refine_fraction = 0.1;
  // Sample the initial population in a box of this half-width (in units of
  // each parameter range) around the warm starts; 0 samples the full range.
  double warm_spread = 0.0;
  bool preprocessing = true;  // false pins p = 1 and p_N = 0
  bool optimize_state = true;  // r and u
  double f_e = 1.0;
  BffConfig screening;
  BffConfig refinement;
  int jobs = 1;  // concurrent population evaluations
  bool verbose = false;

  OptimizerConfig();
  void validate() const;
};

struct OptimizeResult {
  SearchPoint best;
  KeyRateReport report;  // at the refinement level
  double screening_rate = 0.0;
  int evaluations = 0;
};

// Deterministic for a fixed seed. Efficiencies, dark counts, visibility and
// max_pairs are taken from the template; warm starts seed the population.
OptimizeResult optimize_params(const SpdcParams& model_template, const OptimizerConfig& config,
                               const std::vector<SearchPoint>& warm_starts = {});

struct SweepPoint {
  double eta = 0.0;
  double rate = 0.0;
  SearchPoint best;
  bool refined = false;
};

struct SweepConfig {
  std::vector<double> etas;  // sorted ascending
  double resolution = 1e-3;  // bisection stops at this bracket width
  double positive_floor = 1e-9;
  OptimizerConfig optimizer;
};

struct SweepResult {
  std::vector<SweepPoint> grid;        // the requested grid
  std::vector<SweepPoint> bisection;   // extra points evaluated while bisecting
  std::optional<double> threshold;     // smallest eta with rate > positive_floor
  std::string fingerprint;
};

// Symmetric efficiencies eta_a = eta_b = eta on top of the template.
SweepResult threshold_sweep(const SpdcParams& model_template, const SweepConfig& config);

}  // namespace diqkd
