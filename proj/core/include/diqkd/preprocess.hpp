#pragma once

// Random post-selection and noisy preprocessing of the key-generation
// statistics, and the one-way error-correction cost that follows.

#include "diqkd/correlations.hpp"

namespace diqkd {

struct PreprocessParams {
  double keep_prob = 1.0;  // probability of keeping an outcome-1 bit
  double flip_prob = 0.0;  // Alice's flip probability, in [0, 0.5]

  void validate() const;
};

struct ProcessedStats {
  double p_v = 1.0;  // retention probability
  OutcomeDist tilde_p{};  // post-selected key distribution
  OutcomeDist hat_p{};    // after Alice's flips
  double ec_cost = 0.0;   // H(A_hat | B), bits
};

// Weight (1, p, p, p^2) applied to outcomes (00, 01, 10, 11).
OutcomeDist postselection_weights(double keep_prob);

double retention_probability(const OutcomeDist& key_dist, double keep_prob);
OutcomeDist postselect(const OutcomeDist& key_dist, double keep_prob);
OutcomeDist noisy_flip(const OutcomeDist& dist, double flip_prob);
double ec_cost(const OutcomeDist& hat_dist);
ProcessedStats process(const OutcomeDist& key_dist, const PreprocessParams& params);

// -x log2 x with h(0) = 0.
double entropy_term(double x);

}  // namespace diqkd
