#include "diqkd/correlations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "diqkd/errors.hpp"

namespace diqkd {

void Scenario::validate() const {
  if (n_inputs_a != kInputsA || n_inputs_b != kInputsB || n_outcomes != kOutcomes) {
    throw ConfigError("only the 2x3-input binary-outcome scenario is supported");
  }
  if (key_input_a < 0 || key_input_a >= kInputsA || key_input_b < 0 ||
      key_input_b >= kInputsB) {
    throw ConfigError("key inputs out of range");
  }
  double total = 0.0;
  for (double q : input_distribution) {
    if (q < 0.0) throw ConfigError("negative input probability");
    total += q;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ConfigError("input distribution does not sum to 1");
  }
}

std::string setting_label(int x, int y) {
  std::ostringstream os;
  os << "(x,y)=(" << x + 1 << "," << y + 1 << ")";
  return os.str();
}

Behavior Behavior::uniform() {
  Table p;
  p.fill(0.25);
  return Behavior(p);
}

Behavior Behavior::from_table(const Table& p) {
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) {
      double total = 0.0;
      for (int a = 0; a < kOutcomes; ++a) {
        for (int b = 0; b < kOutcomes; ++b) {
          const double v = p[flat_index(a, b, x, y)];
          if (!std::isfinite(v) || v < -kIngressTolerance || v > 1.0 + kIngressTolerance) {
            throw DataError("probability out of [0,1] at " + setting_label(x, y));
          }
          total += v;
        }
      }
      if (std::abs(total - 1.0) > kIngressTolerance) {
        std::ostringstream os;
        os << "setting " << setting_label(x, y) << " is not normalized (sum "
           << total << ")";
        throw DataError(os.str());
      }
    }
  }
  return Behavior(p);
}

Behavior Behavior::from_settings(const std::array<OutcomeDist, kSettings>& rows) {
  Table p{};
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) {
      for (int a = 0; a < kOutcomes; ++a) {
        for (int b = 0; b < kOutcomes; ++b) {
          p[flat_index(a, b, x, y)] = rows[setting_index(x, y)][outcome_index(a, b)];
        }
      }
    }
  }
  return from_table(p);
}

OutcomeDist Behavior::setting(int x, int y) const {
  OutcomeDist d{};
  for (int a = 0; a < kOutcomes; ++a) {
    for (int b = 0; b < kOutcomes; ++b) d[outcome_index(a, b)] = (*this)(a, b, x, y);
  }
  return d;
}

std::int64_t CountTable::setting_total(int x, int y) const {
  const auto& row = counts[setting_index(x, y)];
  return std::accumulate(row.begin(), row.end(), std::int64_t{0});
}

Behavior from_counts(const CountTable& counts,
                     const std::array<std::int64_t, kSettings>& rounds_per_setting) {
  Behavior::Table p{};
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) {
      const auto& row = counts.counts[setting_index(x, y)];
      for (std::int64_t n : row) {
        if (n < 0) throw DataError("negative count at " + setting_label(x, y));
      }
      const std::int64_t total = counts.setting_total(x, y);
      const std::int64_t declared = rounds_per_setting[setting_index(x, y)];
      if (total != declared) {
        std::ostringstream os;
        os << "counts at " << setting_label(x, y) << " sum to " << total
           << " but " << declared << " rounds were declared";
        throw DataError(os.str());
      }
      if (total == 0) throw DataError("no rounds recorded at " + setting_label(x, y));
      for (int a = 0; a < kOutcomes; ++a) {
        for (int b = 0; b < kOutcomes; ++b) {
          p[Behavior::flat_index(a, b, x, y)] =
              static_cast<double>(row[outcome_index(a, b)]) / static_cast<double>(total);
        }
      }
    }
  }
  return Behavior::from_table(p);
}

Behavior from_counts(const CountTable& counts) {
  std::array<std::int64_t, kSettings> rounds{};
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) rounds[setting_index(x, y)] = counts.setting_total(x, y);
  }
  return from_counts(counts, rounds);
}

Marginals marginals(const Behavior& b) {
  Marginals m;
  for (int x = 0; x < kInputsA; ++x) {
    for (int a = 0; a < kOutcomes; ++a) {
      double lo = 2.0, hi = -1.0, sum = 0.0;
      for (int y = 0; y < kInputsB; ++y) {
        const double v = b(a, 0, x, y) + b(a, 1, x, y);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
      }
      m.alice[x][a] = sum / kInputsB;
      m.alice_discrepancy = std::max(m.alice_discrepancy, hi - lo);
    }
  }
  for (int y = 0; y < kInputsB; ++y) {
    for (int bb = 0; bb < kOutcomes; ++bb) {
      double lo = 2.0, hi = -1.0, sum = 0.0;
      for (int x = 0; x < kInputsA; ++x) {
        const double v = b(0, bb, x, y) + b(1, bb, x, y);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
      }
      m.bob[y][bb] = sum / kInputsA;
      m.bob_discrepancy = std::max(m.bob_discrepancy, hi - lo);
    }
  }
  return m;
}

double no_signaling_residual(const Behavior& b) {
  const Marginals m = marginals(b);
  return std::max(m.alice_discrepancy, m.bob_discrepancy);
}

CollinsGisinVector collins_gisin(const Behavior& b) {
  const Marginals m = marginals(b);
  CollinsGisinVector h{};
  for (int x = 0; x < kInputsA; ++x) h[cg_alice(x)] = m.alice[x][1];
  for (int y = 0; y < kInputsB; ++y) h[cg_bob(y)] = m.bob[y][1];
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) h[cg_joint(x, y)] = b(1, 1, x, y);
  }
  return h;
}

Behavior to_behavior(const CollinsGisinVector& h) {
  constexpr double tol = 1e-12;
  Behavior::Table p{};
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) {
      const double p11 = h[cg_joint(x, y)];
      const double p10 = h[cg_alice(x)] - p11;
      const double p01 = h[cg_bob(y)] - p11;
      const double p00 = 1.0 - h[cg_alice(x)] - h[cg_bob(y)] + p11;
      for (double v : {p11, p10, p01, p00}) {
        if (!(v >= -tol && v <= 1.0 + tol)) {
          throw DataError("Collins-Gisin vector outside the no-signaling polytope at " +
                          setting_label(x, y));
        }
      }
      p[Behavior::flat_index(1, 1, x, y)] = p11;
      p[Behavior::flat_index(1, 0, x, y)] = p10;
      p[Behavior::flat_index(0, 1, x, y)] = p01;
      p[Behavior::flat_index(0, 0, x, y)] = p00;
    }
  }
  return Behavior::from_table(p);
}

double chsh_score(const Behavior& b, std::pair<int, int> bob_inputs) {
  const std::array<int, 2> ys{bob_inputs.first, bob_inputs.second};
  for (int y : ys) {
    if (y < 0 || y >= kInputsB) throw ConfigError("CHSH Bob input out of range");
  }
  if (ys[0] == ys[1]) throw ConfigError("CHSH needs two distinct Bob inputs");
  double score = 0.0;
  for (int k = 0; k < 2; ++k) {
    for (int l = 0; l < 2; ++l) {
      for (int a = 0; a < kOutcomes; ++a) {
        for (int bb = 0; bb < kOutcomes; ++bb) {
          if ((a ^ bb) == (k & l)) score += b(a, bb, k, ys[l]);
        }
      }
    }
  }
  return score / 4.0;
}

void EventRecord::validate() const {
  if (x < 0 || x >= kInputsA || y < 0 || y >= kInputsB || a < 0 || a >= kOutcomes ||
      b < 0 || b >= kOutcomes) {
    throw DataError("event indices out of range");
  }
}

}  // namespace diqkd
