#include "diqkd/npa.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "diqkd/errors.hpp"

namespace diqkd::npa {
namespace {

void collapse_into(Word& out, const Word& part, bool idempotent) {
  for (const Symbol& s : part) {
    if (idempotent && !out.empty() && out.back() == s) continue;
    out.push_back(s);
  }
}

Word concat(const Word& a, const Word& b) {
  Word w;
  w.reserve(a.size() + b.size());
  w.insert(w.end(), a.begin(), a.end());
  w.insert(w.end(), b.begin(), b.end());
  return w;
}

}  // namespace

std::string Symbol::to_string() const {
  std::string s;
  switch (sector) {
    case Sector::a: s = "A"; break;
    case Sector::b: s = "B"; break;
    case Sector::z: s = "Z"; break;
  }
  s += std::to_string(index + 1);
  if (adjoint) s += "*";
  return s;
}

Word canonicalize(const Word& w) {
  Word a, b, z;
  for (const Symbol& s : w) {
    switch (s.sector) {
      case Sector::a: a.push_back(s); break;
      case Sector::b: b.push_back(s); break;
      case Sector::z: z.push_back(s); break;
    }
  }
  Word out;
  out.reserve(w.size());
  collapse_into(out, a, true);
  collapse_into(out, b, true);
  collapse_into(out, z, false);
  return out;
}

Word adjoint(const Word& w) {
  Word out;
  out.reserve(w.size());
  for (auto it = w.rbegin(); it != w.rend(); ++it) out.push_back(it->dagger());
  return canonicalize(out);
}

Word moment_key(const Word& w) {
  Word c = canonicalize(w);
  Word d = adjoint(c);
  return std::min(c, d);
}

std::string to_string(const Word& w) {
  if (w.empty()) return "1";
  std::string s;
  for (const Symbol& sym : w) s += sym.to_string();
  return s;
}

std::vector<Symbol> Alphabet::letters(Sector s) const {
  std::vector<Symbol> out;
  switch (s) {
    case Sector::a:
      for (int x = 0; x < n_a; ++x) out.push_back(Symbol::A(x));
      break;
    case Sector::b:
      for (int y = 0; y < n_b; ++y) out.push_back(Symbol::B(y));
      break;
    case Sector::z:
      for (int k = 0; k < n_z; ++k) {
        out.push_back(Symbol::Z(k, false));
        out.push_back(Symbol::Z(k, true));
      }
      break;
  }
  return out;
}

std::vector<Symbol> Alphabet::letters() const {
  std::vector<Symbol> out = letters(Sector::a);
  for (Sector s : {Sector::b, Sector::z}) {
    const auto part = letters(s);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

LevelSpec LevelSpec::parse(const std::string& text) {
  LevelSpec spec;
  std::stringstream ss(text);
  std::string item;
  bool first = true;
  while (std::getline(ss, item, '+')) {
    item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
    if (first) {
      first = false;
      if (item.empty() || !std::all_of(item.begin(), item.end(), ::isdigit)) {
        throw ConfigError("relaxation level must start with an integer: '" + text + "'");
      }
      spec.base_level = std::stoi(item);
      if (spec.base_level < 1) throw ConfigError("relaxation base level must be at least 1");
      continue;
    }
    if (item.empty()) throw ConfigError("empty extra set in relaxation level '" + text + "'");
    for (char& c : item) {
      c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      if (c != 'A' && c != 'B' && c != 'Z') {
        throw ConfigError("extra set '" + item + "' may only use the letters A, B, Z");
      }
    }
    spec.extra_sets.push_back(item);
  }
  if (first) throw ConfigError("empty relaxation level");
  return spec;
}

std::string LevelSpec::to_string() const {
  std::string s = std::to_string(base_level);
  for (const auto& e : extra_sets) s += "+" + e;
  return s;
}

std::vector<Word> build_basis(const Alphabet& alphabet, const LevelSpec& level) {
  std::vector<Word> basis;
  std::set<Word> seen;
  auto add = [&](const Word& w) {
    Word c = canonicalize(w);
    if (seen.insert(c).second) basis.push_back(std::move(c));
  };
  add({});
  const std::vector<Symbol> letters = alphabet.letters();
  std::vector<Word> frontier{{}};
  for (int len = 1; len <= level.base_level; ++len) {
    std::vector<Word> next;
    next.reserve(frontier.size() * letters.size());
    for (const Word& w : frontier) {
      for (const Symbol& s : letters) {
        Word e = w;
        e.push_back(s);
        add(e);
        next.push_back(std::move(e));
      }
    }
    frontier = std::move(next);
  }
  for (const std::string& pattern : level.extra_sets) {
    std::vector<Word> words{{}};
    for (char c : pattern) {
      const Sector sec = c == 'A' ? Sector::a : c == 'B' ? Sector::b : Sector::z;
      const auto choices = alphabet.letters(sec);
      std::vector<Word> grown;
      for (const Word& w : words) {
        for (const Symbol& s : choices) {
          Word e = w;
          e.push_back(s);
          grown.push_back(std::move(e));
        }
      }
      words = std::move(grown);
    }
    for (const Word& w : words) {
      add(w);
      add(adjoint(w));
    }
  }
  return basis;
}

Polynomial::Polynomial(double c) {
  if (c != 0.0) terms_[{}] = c;
}

Polynomial Polynomial::word(const Word& w, double coef) {
  Polynomial p;
  if (coef != 0.0) p.terms_[canonicalize(w)] = coef;
  return p;
}

Polynomial& Polynomial::operator+=(const Polynomial& o) {
  for (const auto& [w, c] : o.terms_) {
    const double v = (terms_[w] += c);
    if (v == 0.0) terms_.erase(w);
  }
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& o) { return *this += o * -1.0; }

Polynomial& Polynomial::operator*=(double c) {
  if (c == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [w, v] : terms_) v *= c;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  Polynomial out;
  for (const auto& [wa, ca] : a.terms_) {
    for (const auto& [wb, cb] : b.terms_) out += Polynomial::word(concat(wa, wb), ca * cb);
  }
  return out;
}

Polynomial Polynomial::adjoint() const {
  Polynomial out;
  for (const auto& [w, c] : terms_) out += word(npa::adjoint(w), c);
  return out;
}

Polynomial alice_effect(int a, int x) {
  const Polynomial p = Polynomial::symbol(Symbol::A(x));
  return a == 0 ? p : Polynomial(1.0) - p;
}

Polynomial bob_effect(int b, int y) {
  const Polynomial p = Polynomial::symbol(Symbol::B(y));
  return b == 0 ? p : Polynomial(1.0) - p;
}

Polynomial probability(int a, int b, int x, int y) { return alice_effect(a, x) * bob_effect(b, y); }

int MomentProblem::find_var(const Word& w) const {
  const auto it = moment_index.find(moment_key(w));
  return it == moment_index.end() ? -1 : it->second;
}

int MomentProblem::var(const Word& w, bool create) {
  Word key = moment_key(w);
  const auto it = moment_index.find(key);
  if (it != moment_index.end()) return it->second;
  if (!create) {
    throw ConfigError("moment <" + to_string(key) + "> is not in the relaxation; raise the level");
  }
  const int id = program.add_var();
  moment_index.emplace(key, id);
  moments.push_back(std::move(key));
  return id;
}

sdp::LinearExpr MomentProblem::linear(const Polynomial& p, bool create) {
  std::map<int, double> acc;
  for (const auto& [w, c] : p.terms()) acc[var(w, create)] += c;
  sdp::LinearExpr e;
  for (const auto& [v, c] : acc) {
    if (c != 0.0) e.terms.push_back({v, c});
  }
  return e;
}

double MomentProblem::evaluate(const Polynomial& p, const Eigen::VectorXd& values) const {
  double s = 0.0;
  for (const auto& [w, c] : p.terms()) {
    const int v = find_var(w);
    if (v < 0) throw ConfigError("moment <" + to_string(w) + "> is not in the relaxation");
    s += c * values(v);
  }
  return s;
}

namespace {

void check_pins(std::span<const ProbabilityPin> pins, const Alphabet& alphabet) {
  std::map<std::pair<int, int>, std::map<std::pair<int, int>, double>> by_setting;
  for (const auto& p : pins) {
    if (p.x < 0 || p.x >= alphabet.n_a || p.y < 0 || p.y >= alphabet.n_b || p.a < 0 || p.a > 1 ||
        p.b < 0 || p.b > 1) {
      throw ConfigError("pin index out of range");
    }
    if (!(p.value >= -1e-9 && p.value <= 1.0 + 1e-9)) {
      throw DataError("pinned probability " + std::to_string(p.value) + " outside [0,1] at " +
                      setting_label(p.x, p.y));
    }
    auto& s = by_setting[{p.x, p.y}];
    const auto [it, inserted] = s.emplace(std::make_pair(p.a, p.b), p.value);
    if (!inserted && std::abs(it->second - p.value) > 1e-12) {
      throw DataError("conflicting pins at " + setting_label(p.x, p.y));
    }
  }
  for (const auto& [xy, s] : by_setting) {
    if (s.size() != 4) continue;
    double total = 0.0;
    for (const auto& [ab, v] : s) total += v;
    if (std::abs(total - 1.0) > 1e-9) {
      throw DataError("pinned probabilities at " + setting_label(xy.first, xy.second) +
                      " sum to " + std::to_string(total));
    }
  }
}

}  // namespace

MomentProblem assemble(const Alphabet& alphabet, const LevelSpec& level,
                       std::span<const ProbabilityPin> pins, const Polynomial& objective,
                       std::span<const NormBound> norm_bounds, const NormRelaxation& relax) {
  check_pins(pins, alphabet);
  MomentProblem mp;
  mp.alphabet = alphabet;
  mp.level = level;
  mp.basis = build_basis(alphabet, level);
  mp.program.objective = Eigen::VectorXd(0);

  mp.var({}, true);  // identity is variable 0
  const int n = static_cast<int>(mp.basis.size());
  std::vector<Word> daggers(n);
  for (int i = 0; i < n; ++i) daggers[i] = adjoint(mp.basis[i]);
  mp.gram.assign(n, std::vector<int>(n, -1));
  sdp::PsdBlock main;
  main.dim = n;
  main.label = "moment matrix";
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const int v = mp.var(concat(daggers[i], mp.basis[j]), true);
      mp.gram[i][j] = mp.gram[j][i] = v;
      main.entries.push_back({v, i, j, 1.0});
    }
  }
  mp.program.psd_blocks.push_back(std::move(main));

  mp.normalization_row = static_cast<int>(mp.program.equalities.size());
  mp.program.equalities.push_back({{{{mp.identity_var(), 1.0}}, -1.0}, "normalization"});
  for (const auto& p : pins) {
    sdp::LinearExpr e = mp.linear(probability(p.a, p.b, p.x, p.y));
    e.constant -= p.value;
    mp.pin_rows.push_back(static_cast<int>(mp.program.equalities.size()));
    mp.program.equalities.push_back(
        {std::move(e), "P(" + std::to_string(p.a + 1) + std::to_string(p.b + 1) + "|" +
                           std::to_string(p.x + 1) + std::to_string(p.y + 1) + ")"});
  }

  for (const auto& nb : norm_bounds) {
    if (nb.z < 0 || nb.z >= alphabet.n_z) throw ConfigError("norm bound on unknown Z operator");
    if (!(nb.alpha > 0.0)) throw ConfigError("norm bound must be positive");
    const Symbol z = Symbol::Z(nb.z), zs = Symbol::Z(nb.z, true);
    for (const Word& prod : {Word{z, zs}, Word{zs, z}}) {
      const Polynomial loc = Polynomial(nb.alpha) - Polynomial::word(prod);
      if (relax.localizing_level <= 0) {
        mp.program.inequalities.push_back(
            {mp.linear(loc, true), "norm " + z.to_string() + " " + to_string(prod)});
        continue;
      }
      std::vector<Word> words;
      for (const Word& w : mp.basis) {
        if (static_cast<int>(w.size()) <= relax.localizing_level) words.push_back(w);
      }
      sdp::PsdBlock blk;
      blk.dim = static_cast<int>(words.size());
      blk.label = "localizing " + to_string(prod);
      for (int i = 0; i < blk.dim; ++i) {
        const Polynomial left = Polynomial::word(adjoint(words[i]));
        for (int j = i; j < blk.dim; ++j) {
          const Polynomial entry = left * loc * Polynomial::word(words[j]);
          for (const auto& t : mp.linear(entry, true).terms) {
            blk.entries.push_back({t.var, i, j, t.coef});
          }
        }
      }
      mp.program.psd_blocks.push_back(std::move(blk));
    }
  }

  const sdp::LinearExpr obj = mp.linear(objective);
  mp.program.objective.setZero();
  for (const auto& t : obj.terms) mp.program.objective(t.var) += t.coef;
  return mp;
}

std::vector<ProbabilityPin> pins_from(const Behavior& b) {
  std::vector<ProbabilityPin> pins;
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) {
      for (int a = 0; a < 2; ++a) {
        for (int bb = 0; bb < 2; ++bb) pins.push_back({a, bb, x, y, b(a, bb, x, y)});
      }
    }
  }
  return pins;
}

}  // namespace diqkd::npa
