#pragma once

// Noncommutative monomials, moment matrices and their compilation into
// conic programs.
//
// Letters: Alice's click projectors A_x, Bob's click projectors B_y and
// non-Hermitian operators Z_s with adjoints Z*_s. Operators from different
// sectors commute; projectors are idempotent. Moments are taken real: the
// relaxations built here are invariant under complex conjugation, so the
// real part of any feasible complex moment matrix is feasible with the same
// objective value, and <w> = <w*> may be imposed without loss.

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "diqkd/correlations.hpp"
#include "diqkd/sdp.hpp"

namespace diqkd::npa {

enum class Sector : std::uint8_t { a = 0, b = 1, z = 2 };

struct Symbol {
  Sector sector = Sector::a;
  std::uint8_t index = 0;
  bool adjoint = false;  // only meaningful for Z

  static Symbol A(int x) { return {Sector::a, static_cast<std::uint8_t>(x), false}; }
  static Symbol B(int y) { return {Sector::b, static_cast<std::uint8_t>(y), false}; }
  static Symbol Z(int s, bool adj = false) {
    return {Sector::z, static_cast<std::uint8_t>(s), adj};
  }

  Symbol dagger() const { return sector == Sector::z ? Symbol{sector, index, !adjoint} : *this; }
  std::string to_string() const;

  auto operator<=>(const Symbol&) const = default;
};

using Word = std::vector<Symbol>;

// Canonical word: A-part, then B-part, then Z-part, each in original order
// with repeated projectors collapsed. Identity is the empty word.
Word canonicalize(const Word& w);
Word adjoint(const Word& w);
// Real-moment key: the smaller of canonical(w) and canonical(w*).
Word moment_key(const Word& w);
std::string to_string(const Word& w);

struct Alphabet {
  int n_a = kInputsA;
  int n_b = kInputsB;
  int n_z = 0;  // number of Z operators; each brings its adjoint

  std::vector<Symbol> letters() const;
  std::vector<Symbol> letters(Sector s) const;
};

// "2", "2+ABZ+AZZ", "1+AB". Pattern letters A, B, Z; Z ranges over the Z
// operators and their adjoints.
struct LevelSpec {
  int base_level = 1;
  std::vector<std::string> extra_sets;

  static LevelSpec parse(const std::string& text);
  std::string to_string() const;
};

// Deduplicated canonical words, identity first, then words by length in
// generation order, then extra-pattern words. Extra sets are closed under
// adjoints.
std::vector<Word> build_basis(const Alphabet& alphabet, const LevelSpec& level);

class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(double c);  // NOLINT: scalar multiple of identity
  static Polynomial word(const Word& w, double coef = 1.0);
  static Polynomial symbol(Symbol s, double coef = 1.0) { return word({s}, coef); }

  Polynomial& operator+=(const Polynomial& o);
  Polynomial& operator-=(const Polynomial& o);
  Polynomial& operator*=(double c);
  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double c) { return a *= c; }
  friend Polynomial operator*(double c, Polynomial a) { return a *= c; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);

  Polynomial adjoint() const;
  const std::map<Word, double>& terms() const { return terms_; }

 private:
  std::map<Word, double> terms_;  // canonical words
};

// Click projectors with the no-click outcome eliminated: M_{0|x} = A_x,
// M_{1|x} = I - A_x.
Polynomial alice_effect(int a, int x);
Polynomial bob_effect(int b, int y);
Polynomial probability(int a, int b, int x, int y);

struct ProbabilityPin {
  int a = 0;
  int b = 0;
  int x = 0;
  int y = 0;
  double value = 0.0;
};

// ||Z_s||^2 <= alpha, imposed as alpha - Z Z* >= 0 and alpha - Z* Z >= 0.
struct NormBound {
  int z = 0;
  double alpha = 1.0;
};

struct NormRelaxation {
  // 0: scalar constraints on <Z Z*> and <Z* Z>; L >= 1: localizing matrices
  // over the basis words of length <= L.
  int localizing_level = 0;
};

class MomentProblem {
 public:
  Alphabet alphabet;
  LevelSpec level;
  std::vector<Word> basis;
  std::vector<Word> moments;           // variable id -> moment key
  std::map<Word, int> moment_index;    // moment key -> variable id
  std::vector<std::vector<int>> gram;  // basis x basis -> variable id
  sdp::ConicProblem program;
  std::vector<int> pin_rows;  // equality index of each pin
  int normalization_row = -1;

  int identity_var() const { return 0; }
  // Variable for a word's moment; throws ConfigError if absent unless
  // create is true.
  int var(const Word& w, bool create = false);
  int find_var(const Word& w) const;
  // Linear form of a polynomial over the moment variables.
  sdp::LinearExpr linear(const Polynomial& p, bool create = false);
  double evaluate(const Polynomial& p, const Eigen::VectorXd& values) const;
};

// Builds the relaxation: main moment matrix, identity = 1, the pins, the norm
// constraints, and the objective (minimized). Throws DataError for
// inconsistent pins, ConfigError when the objective needs moments outside
// the moment matrix.
MomentProblem assemble(const Alphabet& alphabet, const LevelSpec& level,
                       std::span<const ProbabilityPin> pins, const Polynomial& objective,
                       std::span<const NormBound> norm_bounds,
                       const NormRelaxation& relax = {});

// All 24 probabilities of a behavior as pins.
std::vector<ProbabilityPin> pins_from(const Behavior& b);

}  // namespace diqkd::npa
