#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "diqkd/errors.hpp"
#include "diqkd/sdp.hpp"

using namespace diqkd::sdp;

namespace {

// minimize x subject to [[x, 1], [1, 1]] >= 0, optimum 1.
ConicProblem toy() {
  ConicProblem p;
  const int x = p.add_var();
  p.objective(x) = 1.0;
  PsdBlock b;
  b.dim = 2;
  b.entries = {{x, 0, 0, 1.0}, {MatrixEntry::kConstant, 0, 1, 1.0}, {MatrixEntry::kConstant, 1, 1, 1.0}};
  p.psd_blocks.push_back(b);
  return p;
}

}  // namespace

TEST_CASE("hand-checkable PSD problem") {
  const auto s = solve(toy());
  REQUIRE(s.ok());
  CHECK(s.primal_value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.dual_value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.dual_value <= s.primal_value + 1e-9);
}

TEST_CASE("maximal eigenvalue of a fixed matrix") {
  // minimize t subject to t I - M >= 0 for M = [[2, 1], [1, 2]]: t = 3.
  ConicProblem p;
  const int t = p.add_var();
  p.objective(t) = 1.0;
  PsdBlock b;
  b.dim = 2;
  b.entries = {{t, 0, 0, 1.0}, {t, 1, 1, 1.0}, {MatrixEntry::kConstant, 0, 0, -2.0},
               {MatrixEntry::kConstant, 1, 1, -2.0}, {MatrixEntry::kConstant, 0, 1, -1.0}};
  p.psd_blocks.push_back(b);
  const auto s = solve(p);
  REQUIRE(s.ok());
  CHECK(s.primal_value == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("infeasible constraints are reported, not solved") {
  ConicProblem q = toy();
  q.equalities.push_back({{{{0, 1.0}}, -2.0}, "x = 2"});
  q.inequalities.push_back({{{{0, -1.0}}, 1.0}, "x <= 1"});
  const auto s = solve(q);
  CHECK(s.status == SolveStatus::infeasible);
  CHECK_FALSE(s.ok());

  ConicProblem r = toy();
  r.equalities.push_back({{{{0, 1.0}}, -2.0}, "x = 2"});
  r.equalities.push_back({{{{0, 1.0}}, -3.0}, "x = 3"});
  CHECK(solve(r).status == SolveStatus::infeasible);
}

TEST_CASE("multipliers are sensitivities") {
  ConicProblem p;
  const int x = p.add_var();
  const int y = p.add_var();
  p.objective(x) = 1.0;
  p.objective(y) = 1.0;
  p.equalities.push_back({{{{x, 1.0}}, -1.0}, "x = 1"});
  p.inequalities.push_back({{{{y, 1.0}}, -0.5}, "y >= 0.5"});
  PsdBlock b;
  b.dim = 1;
  b.entries = {{y, 0, 0, 1.0}};
  p.psd_blocks.push_back(b);
  const auto s = solve(p);
  REQUIRE(s.ok());
  CHECK(s.primal_value == doctest::Approx(1.5).epsilon(1e-8));
  REQUIRE(s.equality_multipliers.size() == 1);
  CHECK(s.equality_multipliers[0] == doctest::Approx(1.0).epsilon(1e-6));
  REQUIRE(s.inequality_multipliers.size() == 1);
  CHECK(s.inequality_multipliers[0] == doctest::Approx(1.0).epsilon(1e-6));

  // Finite-difference check of the equality multiplier.
  ConicProblem moved = p;
  moved.equalities[0].expr.constant += 1e-3;
  CHECK(solve(moved).primal_value - s.primal_value ==
        doctest::Approx(-s.equality_multipliers[0] * 1e-3).epsilon(1e-5));
}

TEST_CASE("validation") {
  ConicProblem p = toy();
  p.psd_blocks[0].entries.push_back({5, 0, 0, 1.0});
  CHECK_THROWS_AS(p.validate(), diqkd::ConfigError);
  ConicProblem q = toy();
  q.psd_blocks[0].entries.push_back({0, 2, 0, 1.0});
  CHECK_THROWS_AS(q.validate(), diqkd::ConfigError);
}

TEST_CASE("problem dump") {
  const auto j = nlohmann::json::parse(dump_json(toy()));
  CHECK(j["num_vars"] == 1);
  CHECK(j.contains("psd_blocks"));
}

TEST_CASE("status names") {
  CHECK(to_string(SolveStatus::near_optimal) == "near_optimal");
  CHECK(to_string(SolveStatus::infeasible) == "infeasible");
}
