#pragma once

// Bell scenario with two inputs for Alice, three for Bob and binary outcomes.
//
// Index conventions: inputs are stored 0-based (x in {0,1}, y in {0,1,2});
// every external format (CSV, JSON, CLI) uses 1-based input labels. Outcome 0
// is a detector click, outcome 1 is no click.

#include <array>
#include <cstdint>
#include <string>
#include <utility>

namespace diqkd {

inline constexpr int kInputsA = 2;
inline constexpr int kInputsB = 3;
inline constexpr int kOutcomes = 2;
inline constexpr int kSettings = kInputsA * kInputsB;
inline constexpr int kBehaviorSize = kSettings * kOutcomes * kOutcomes;

// Probabilities of one setting ordered (00, 01, 10, 11), i.e. index 2*a + b.
using OutcomeDist = std::array<double, 4>;

constexpr int outcome_index(int a, int b) { return 2 * a + b; }
constexpr int setting_index(int x, int y) { return x * kInputsB + y; }

struct Scenario {
  int n_inputs_a = kInputsA;
  int n_inputs_b = kInputsB;
  int n_outcomes = kOutcomes;
  int key_input_a = 0;  // label 1
  int key_input_b = 2;  // label 3
  std::array<double, kSettings> input_distribution{1.0 / 6, 1.0 / 6, 1.0 / 6,
                                                   1.0 / 6, 1.0 / 6, 1.0 / 6};

  void validate() const;
  double input_probability(int x, int y) const {
    return input_distribution[setting_index(x, y)];
  }
};

// Conditional distribution P(a,b|x,y). Immutable once constructed.
class Behavior {
 public:
  using Table = std::array<double, kBehaviorSize>;

  // Tolerance applied when validating externally supplied tables.
  static constexpr double kIngressTolerance = 1e-9;

  static Behavior uniform();
  // Throws DataError unless every entry is in [0,1] and each setting is
  // normalized (both up to kIngressTolerance).
  static Behavior from_table(const Table& p);
  static Behavior from_settings(const std::array<OutcomeDist, kSettings>& rows);

  double operator()(int a, int b, int x, int y) const {
    return p_[flat_index(a, b, x, y)];
  }
  OutcomeDist setting(int x, int y) const;
  const Table& table() const { return p_; }

  static constexpr int flat_index(int a, int b, int x, int y) {
    return (setting_index(x, y) * kOutcomes + a) * kOutcomes + b;
  }

 private:
  explicit Behavior(const Table& p) : p_(p) {}
  Table p_{};
};

// Raw detection counts per setting, ordered (00, 01, 10, 11).
struct CountTable {
  std::array<std::array<std::int64_t, 4>, kSettings> counts{};

  std::int64_t setting_total(int x, int y) const;
};

Behavior from_counts(const CountTable& counts,
                     const std::array<std::int64_t, kSettings>& rounds_per_setting);
// Same, with the per-setting totals taken from the table itself.
Behavior from_counts(const CountTable& counts);

struct Marginals {
  std::array<std::array<double, kOutcomes>, kInputsA> alice{};  // [x][a], y-averaged
  std::array<std::array<double, kOutcomes>, kInputsB> bob{};    // [y][b], x-averaged
  double alice_discrepancy = 0.0;  // max spread of P_A(a|x) across y
  double bob_discrepancy = 0.0;    // max spread of P_B(b|y) across x
};

Marginals marginals(const Behavior& b);
double no_signaling_residual(const Behavior& b);

// Minimal coordinates of a no-signaling behavior:
//   h[0..1]  = P_A(1|x),  h[2..4] = P_B(1|y),  h[5..10] = P(1,1|x,y) (x-major).
using CollinsGisinVector = std::array<double, 11>;

constexpr int cg_alice(int x) { return x; }
constexpr int cg_bob(int y) { return kInputsA + y; }
constexpr int cg_joint(int x, int y) { return kInputsA + kInputsB + setting_index(x, y); }

CollinsGisinVector collins_gisin(const Behavior& b);
// Throws DataError if h lies outside the no-signaling polytope.
Behavior to_behavior(const CollinsGisinVector& h);

// Expected CHSH winning probability using Alice's two inputs and the two
// given Bob inputs (0-based), re-indexed to k,l in {0,1} in listed order.
double chsh_score(const Behavior& b, std::pair<int, int> bob_inputs = {0, 1});

// One experimental round, 0-based indices.
struct EventRecord {
  int x = 0;
  int y = 0;
  int a = 0;
  int b = 0;

  void validate() const;
};

std::string setting_label(int x, int y);

}  // namespace diqkd
