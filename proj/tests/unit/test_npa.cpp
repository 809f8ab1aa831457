#include <doctest.h>

#include <cmath>

#include "diqkd/errors.hpp"
#include "diqkd/npa.hpp"
#include "diqkd/reference_data.hpp"

using namespace diqkd;
using namespace diqkd::npa;

namespace {

Polynomial correlator(int x, int y) {
  const Polynomial a = Polynomial(1.0) - 2.0 * Polynomial::symbol(Symbol::A(x));
  const Polynomial b = Polynomial(1.0) - 2.0 * Polynomial::symbol(Symbol::B(y));
  return a * b;
}

Polynomial chsh() {
  Polynomial s;
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) s += (x * y ? -1.0 : 1.0) * correlator(x, y);
  }
  return s;
}

double max_chsh(const std::string& level) {
  const auto mp = assemble({2, 2, 0}, LevelSpec::parse(level), {}, -1.0 * chsh(), {});
  const auto s = sdp::solve(mp.program);
  REQUIRE(s.ok());
  return -s.dual_value;
}

}  // namespace

TEST_CASE("canonical words") {
  const Symbol a1 = Symbol::A(0), b1 = Symbol::B(0), z = Symbol::Z(0), zs = Symbol::Z(0, true);
  CHECK(canonicalize({b1, a1}) == Word{a1, b1});
  CHECK(canonicalize({a1, a1}) == Word{a1});
  CHECK(canonicalize({z, a1}) == Word{a1, z});
  CHECK(canonicalize({z, zs}) == Word{z, zs});
  CHECK(canonicalize({z, zs}) != canonicalize({zs, z}));
  const Word w{z, b1, a1, zs, a1};
  CHECK(canonicalize(canonicalize(w)) == canonicalize(w));
  CHECK(canonicalize(adjoint({a1, z})) == Word{a1, zs});
  CHECK(adjoint({z, zs}) == Word{z, zs});
  CHECK(moment_key({zs}) == moment_key({z}));
  CHECK(to_string(Word{}) == "1");
}

TEST_CASE("level parsing") {
  const auto l = LevelSpec::parse("2+ABZ+AZZ");
  CHECK(l.base_level == 2);
  CHECK(l.extra_sets == std::vector<std::string>{"ABZ", "AZZ"});
  CHECK(l.to_string() == "2+ABZ+AZZ");
  CHECK_THROWS_AS(LevelSpec::parse("0"), ConfigError);
  CHECK_THROWS_AS(LevelSpec::parse("2+AQ"), ConfigError);
  CHECK_THROWS_AS(LevelSpec::parse(""), ConfigError);
}

TEST_CASE("basis sizes") {
  CHECK(build_basis({2, 2, 0}, LevelSpec::parse("1")).size() == 5);
  CHECK(build_basis({2, 3, 0}, LevelSpec::parse("1")).size() == 6);
  const auto basis = build_basis({2, 3, 0}, LevelSpec::parse("1"));
  CHECK(basis.front().empty());
  // Regression constants for one quadrature node (one Z per key outcome).
  CHECK(build_basis({2, 3, 2}, LevelSpec::parse("2")).size() == 60);
  CHECK(build_basis({2, 3, 2}, LevelSpec::parse("2+ABZ")).size() == 84);
  CHECK(build_basis({2, 3, 2}, LevelSpec::parse("2+ABZ+AZZ")).size() == 116);
  // All seven interior nodes of m = 8 in one program.
  CHECK(build_basis({2, 3, 14}, LevelSpec::parse("2+ABZ+AZZ")).size() == 2708);
  std::size_t last = 0;
  for (const char* lvl : {"1", "1+AB", "2", "2+ABZ", "2+ABZ+AZZ", "3"}) {
    const auto n = build_basis({2, 3, 2}, LevelSpec::parse(lvl)).size();
    CHECK(n >= last);
    last = n;
  }
}

TEST_CASE("moment matrix is symmetric under adjoints") {
  const auto mp = assemble({2, 3, 2}, LevelSpec::parse("2"), {}, Polynomial(), {});
  const std::size_t n = mp.basis.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) CHECK(mp.gram[i][j] == mp.gram[j][i]);
  }
  CHECK(mp.gram[0][0] == mp.identity_var());
}

TEST_CASE("Tsirelson bound") {
  CHECK(std::abs(max_chsh("2") - 2.0 * std::sqrt(2.0)) < 1e-6);
  CHECK(max_chsh("1") >= max_chsh("2") - 1e-7);
}

TEST_CASE("pinned local deterministic behavior") {
  // Alice always clicks, Bob never does: P(0,1|x,y) = 1.
  Behavior::Table t{};
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 3; ++y) t[Behavior::flat_index(0, 1, x, y)] = 1.0;
  }
  const auto pins = pins_from(Behavior::from_table(t));
  const auto mp = assemble({2, 3, 0}, LevelSpec::parse("2"), pins, correlator(0, 0), {});
  const auto s = sdp::solve(mp.program);
  REQUIRE(s.ok());
  CHECK(s.primal_value == doctest::Approx(-1.0).epsilon(1e-7));
  // The rank-one moment assignment <w> = prod of the deterministic values is
  // feasible: every moment with a B letter vanishes, the rest equal one.
  for (std::size_t v = 0; v < mp.moments.size(); ++v) {
    bool has_b = false;
    for (const auto& sym : mp.moments[v]) has_b |= sym.sector == Sector::b;
    CHECK(s.values(static_cast<int>(v)) == doctest::Approx(has_b ? 0.0 : 1.0).epsilon(1e-6));
  }
}

TEST_CASE("reference 20 m estimate is feasible at level 2") {
  const Behavior t4 = reference::estimated_behavior(reference::fiber_run(20));
  const auto pins = pins_from(to_behavior(collins_gisin(t4)));
  const auto mp = assemble({2, 3, 0}, LevelSpec::parse("2"), pins, Polynomial(), {});
  const auto s = sdp::solve(mp.program);
  CHECK(s.ok());
}

TEST_CASE("inconsistent pins") {
  auto pins = pins_from(Behavior::uniform());
  pins[0].value = 0.75;  // setting sums to 1.5
  CHECK_THROWS_AS(assemble({2, 3, 0}, LevelSpec::parse("1"), pins, Polynomial(), {}), DataError);
}

TEST_CASE("objective outside the relaxation") {
  const Polynomial far = Polynomial::word({Symbol::A(0), Symbol::B(0), Symbol::Z(0), Symbol::Z(0, true)});
  CHECK_THROWS_AS(assemble({2, 3, 2}, LevelSpec::parse("1"), {}, far, {}), ConfigError);
}

TEST_CASE("polynomial algebra") {
  const Polynomial a = Polynomial::symbol(Symbol::A(0));
  const Polynomial sq = a * a;
  CHECK(sq.terms().size() == 1);
  CHECK(sq.terms().begin()->first == Word{Symbol::A(0)});
  const Polynomial z = Polynomial::symbol(Symbol::Z(0), 2.0);
  CHECK(z.adjoint().terms().begin()->first == Word{Symbol::Z(0, true)});
  const Polynomial p = probability(0, 0, 0, 0) + probability(0, 1, 0, 0) + probability(1, 0, 0, 0) +
                       probability(1, 1, 0, 0);
  REQUIRE(p.terms().size() == 1);
  CHECK(p.terms().begin()->first.empty());
  CHECK(p.terms().begin()->second == doctest::Approx(1.0));
}
