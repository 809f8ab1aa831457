#pragma once

// Text formats: the count CSV, behavior and model JSON, and report output.
// External labels for inputs are 1-based.

#include <iosfwd>
#include <string>
#include <vector>

#include "diqkd/bff_entropy.hpp"
#include "diqkd/correlations.hpp"
#include "diqkd/estimation.hpp"
#include "diqkd/keyrate.hpp"
#include "diqkd/spdc_model.hpp"

namespace diqkd::io {

inline constexpr const char* kCountHeader = "fiber_m,mean_photon,x,y,n11,n10,n01,n00";

struct CountRecord {
  int fiber_m = 0;
  double mean_photon = 0.0;
  CountTable counts;
};

// One record per fiber length in order of first appearance; each needs all
// six settings exactly once. Throws DataError on malformed or empty input.
std::vector<CountRecord> read_counts_csv(std::istream& in);
std::vector<CountRecord> read_counts_csv_file(const std::string& path);
void write_counts_csv(std::ostream& out, const std::vector<CountRecord>& records);
const CountRecord& select_fiber(const std::vector<CountRecord>& records, int fiber_m);

// "P(a,b|x,y)" keys, outcome labels 0/1, input labels 1-based.
std::string probability_key(int a, int b, int x, int y);
std::string behavior_to_json(const Behavior& b);
// Accepts the object itself or one holding it under "behavior".
Behavior behavior_from_json(const std::string& text);

// Missing or mistyped fields raise ConfigError naming the field; max_pairs
// defaults to 3.
SpdcParams spdc_params_from_json(const std::string& text);
std::string spdc_params_to_json(const SpdcParams& p);

std::string projection_to_json(const ProjectionResult& r);
// {alpha, lambda{...}, collins_gisin{beta, gamma[11]}}
std::string certificate_to_json(const BellFunctional& g);
std::string report_to_json(const KeyRateReport& r);
std::string sweep_to_json(const SweepResult& s);
// eta,rate rows, grid and bisection points merged in eta order.
void write_sweep_csv(std::ostream& out, const SweepResult& s);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace diqkd::io
