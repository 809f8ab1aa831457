#include "diqkd/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "diqkd/errors.hpp"

namespace diqkd {
namespace {

void check_dist(const OutcomeDist& d) {
  double total = 0.0;
  for (double v : d) {
    if (!(v >= -1e-12 && v <= 1.0 + 1e-12)) throw DataError("key distribution entry out of [0,1]");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DataError("key distribution is not normalized");
}

void check_keep(double keep_prob) {
  if (!(keep_prob >= 0.0 && keep_prob <= 1.0)) {
    throw ConfigError("post-selection probability must lie in [0,1]");
  }
}

}  // namespace

void PreprocessParams::validate() const {
  check_keep(keep_prob);
  if (!(flip_prob >= 0.0 && flip_prob <= 0.5)) {
    throw ConfigError("flip probability must lie in [0, 0.5]");
  }
}

double entropy_term(double x) {
  if (x < 1e-300) return 0.0;
  return -x * std::log2(x);
}

OutcomeDist postselection_weights(double keep_prob) {
  return {1.0, keep_prob, keep_prob, keep_prob * keep_prob};
}

double retention_probability(const OutcomeDist& key_dist, double keep_prob) {
  check_keep(keep_prob);
  const OutcomeDist w = postselection_weights(keep_prob);
  double pv = 0.0;
  for (int k = 0; k < 4; ++k) pv += w[k] * key_dist[k];
  return pv;
}

OutcomeDist postselect(const OutcomeDist& key_dist, double keep_prob) {
  check_dist(key_dist);
  const double pv = retention_probability(key_dist, keep_prob);
  if (!(pv > 0.0)) throw DataError("post-selection keeps no rounds (p_V = 0)");
  const OutcomeDist w = postselection_weights(keep_prob);
  OutcomeDist out{};
  for (int k = 0; k < 4; ++k) out[k] = key_dist[k] * w[k] / pv;
  return out;
}

OutcomeDist noisy_flip(const OutcomeDist& dist, double flip_prob) {
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("flip probability out of range");
  OutcomeDist out{};
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      out[outcome_index(a, b)] = (1.0 - flip_prob) * dist[outcome_index(a, b)] +
                                 flip_prob * dist[outcome_index(a ^ 1, b)];
    }
  }
  return out;
}

double ec_cost(const OutcomeDist& hat_dist) {
  double joint = 0.0;
  for (double v : hat_dist) joint += entropy_term(v);
  double bob = 0.0;
  for (int b = 0; b < 2; ++b) {
    bob += entropy_term(hat_dist[outcome_index(0, b)] + hat_dist[outcome_index(1, b)]);
  }
  return std::clamp(joint - bob, 0.0, 1.0);
}

ProcessedStats process(const OutcomeDist& key_dist, const PreprocessParams& params) {
  params.validate();
  ProcessedStats s;
  s.p_v = retention_probability(key_dist, params.keep_prob);
  s.tilde_p = postselect(key_dist, params.keep_prob);
  s.hat_p = noisy_flip(s.tilde_p, params.flip_prob);
  s.ec_cost = ec_cost(s.hat_p);
  return s;
}

}  // namespace diqkd
