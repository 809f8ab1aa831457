#include <doctest.h>

#include <cmath>
#include <random>

#include "diqkd/correlations.hpp"
#include "diqkd/errors.hpp"
#include "diqkd/reference_data.hpp"

using namespace diqkd;

namespace {

Behavior deterministic(int a0, int a1, int b0, int b1, int b2) {
  const int as[2] = {a0, a1};
  const int bs[3] = {b0, b1, b2};
  Behavior::Table t{};
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 3; ++y) t[Behavior::flat_index(as[x], bs[y], x, y)] = 1.0;
  }
  return Behavior::from_table(t);
}

}  // namespace

TEST_CASE("from_counts reproduces the 20 m frequencies") {
  const auto& run = reference::fiber_run(20);
  const Behavior b = from_counts(run.counts);
  CHECK(b(1, 1, 0, 0) == doctest::Approx(0.9940212125).epsilon(1e-12));
  CHECK(b(0, 0, 0, 0) == doctest::Approx(0.0034232042).epsilon(1e-8));
}

TEST_CASE("every reference count row sums to the declared rounds") {
  for (const auto& run : reference::fiber_runs()) {
    for (int x = 0; x < kInputsA; ++x) {
      for (int y = 0; y < kInputsB; ++y) CHECK(run.counts.setting_total(x, y) == 240000000);
    }
    std::array<std::int64_t, kSettings> rounds{};
    rounds.fill(240000000);
    CHECK_NOTHROW(from_counts(run.counts, rounds));
  }
}

TEST_CASE("uniform counts give uniform probabilities") {
  CountTable c;
  for (auto& row : c.counts) row = {25, 25, 25, 25};
  const Behavior b = from_counts(c);
  for (double v : b.table()) CHECK(v == 0.25);
}

TEST_CASE("declared round mismatch names the setting") {
  CountTable c;
  for (auto& row : c.counts) row = {25, 25, 25, 25};
  std::array<std::int64_t, kSettings> rounds{};
  rounds.fill(100);
  rounds[setting_index(1, 2)] = 99;
  try {
    from_counts(c, rounds);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("(x,y)=(2,3)") != std::string::npos);
  }
}

TEST_CASE("behavior validation") {
  Behavior::Table t{};
  CHECK_THROWS_AS(Behavior::from_table(t), DataError);
  for (int s = 0; s < kSettings; ++s) t[4 * s] = 1.0;
  CHECK_NOTHROW(Behavior::from_table(t));
  t[0] = 1.5;
  t[1] = -0.5;
  CHECK_THROWS_AS(Behavior::from_table(t), DataError);
}

TEST_CASE("marginals") {
  const Marginals u = marginals(Behavior::uniform());
  CHECK(u.alice[0][1] == 0.5);
  CHECK(u.alice[1][1] == 0.5);
  CHECK(u.alice_discrepancy == 0.0);

  const Behavior t4 = reference::estimated_behavior(reference::fiber_run(20));
  const Marginals m = marginals(t4);
  CHECK(m.alice[0][1] == doctest::Approx(0.9956620736).epsilon(1e-9));
  CHECK(m.alice_discrepancy <= 1e-10);

  // Move 1e-3 of mass inside one setting so Alice's marginal shifts there.
  auto rows = std::array<OutcomeDist, kSettings>{};
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 3; ++y) rows[setting_index(x, y)] = t4.setting(x, y);
  }
  rows[setting_index(0, 1)][outcome_index(1, 1)] -= 1e-3;
  rows[setting_index(0, 1)][outcome_index(0, 1)] += 1e-3;
  const Marginals p = marginals(Behavior::from_settings(rows));
  CHECK(p.alice_discrepancy == doctest::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("no-signaling residual") {
  CHECK(no_signaling_residual(Behavior::uniform()) == 0.0);
  const double raw = no_signaling_residual(from_counts(reference::fiber_run(20).counts));
  CHECK(raw > 1e-5);
  CHECK(raw < 1e-2);
  CHECK(no_signaling_residual(reference::estimated_behavior(reference::fiber_run(20))) < 1e-9);
}

TEST_CASE("Collins-Gisin coordinates") {
  const auto h = collins_gisin(Behavior::uniform());
  for (int i = 0; i < 5; ++i) CHECK(h[i] == 0.5);
  for (int i = 5; i < 11; ++i) CHECK(h[i] == 0.25);

  const Behavior t4 = reference::estimated_behavior(reference::fiber_run(20));
  const Behavior back = to_behavior(collins_gisin(t4));
  for (int k = 0; k < kBehaviorSize; ++k) CHECK(back.table()[k] == doctest::Approx(t4.table()[k]).epsilon(1e-10));

  // Exact round trip on coordinates of a no-signaling behavior.
  const auto h2 = collins_gisin(to_behavior(collins_gisin(t4)));
  const auto h1 = collins_gisin(t4);
  for (int i = 0; i < 11; ++i) CHECK(std::abs(h2[i] - h1[i]) < 1e-12);

  auto bad = collins_gisin(Behavior::uniform());
  bad[cg_joint(0, 0)] = 0.9;
  CHECK_THROWS_AS(to_behavior(bad), DataError);
}

TEST_CASE("CHSH score") {
  CHECK(chsh_score(deterministic(0, 0, 0, 0, 0)) == doctest::Approx(0.75));
  // PR box on inputs (x, y) with y in {0,1}: a xor b = x y.
  Behavior::Table t{};
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 3; ++y) {
      for (int a = 0; a < 2; ++a) {
        const int b = a ^ (x * (y == 1 ? 1 : 0));
        t[Behavior::flat_index(a, b, x, y)] = 0.5;
      }
    }
  }
  CHECK(chsh_score(Behavior::from_table(t)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(chsh_score(Behavior::uniform(), {1, 1}), ConfigError);
}

TEST_CASE("scenario and events") {
  Scenario s;
  CHECK_NOTHROW(s.validate());
  s.input_distribution[0] = 0.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK_THROWS_AS((EventRecord{2, 0, 0, 0}.validate()), DataError);
  CHECK_NOTHROW((EventRecord{1, 2, 1, 0}.validate()));
  CHECK(setting_label(0, 2) == "(x,y)=(1,3)");
}
