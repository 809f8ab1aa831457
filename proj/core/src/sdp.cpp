#include "diqkd/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <tuple>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <nlohmann/json.hpp>

#include "diqkd/errors.hpp"

namespace diqkd::sdp {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// w * (e_r e_c' + e_c e_r'); diagonal entries carry half the coefficient.
struct SymEntry {
  int r;
  int c;
  double w;
};
using SymMatrix = std::vector<SymEntry>;

double inner(const SymMatrix& a, const MatrixXd& m) {
  double s = 0.0;
  for (const auto& e : a) s += e.w * (m(e.r, e.c) + m(e.c, e.r));
  return s;
}

void add_to(MatrixXd& m, const SymMatrix& a, double scale) {
  for (const auto& e : a) {
    m(e.r, e.c) += scale * e.w;
    m(e.c, e.r) += scale * e.w;
  }
}

double frobenius(const SymMatrix& a, int n) {
  MatrixXd m = MatrixXd::Zero(n, n);
  add_to(m, a, 1.0);
  return m.norm();
}

// Standard form, dual side:  max b'y  s.t.  sum_i y_i A_i + S = C,  S >= 0.
// The LP cone is kept separately as a diagonal block.
struct Block {
  int n = 0;
  MatrixXd C;
  std::vector<int> vars;       // sorted
  std::vector<SymMatrix> mats;  // parallel to vars
};

struct LpRow {
  double c = 0.0;
  std::vector<std::pair<int, double>> coefs;
};

struct Standard {
  int m = 0;
  VectorXd b;
  std::vector<Block> blocks;
  std::vector<LpRow> lp;
};

struct Elimination {
  bool consistent = true;
  std::vector<int> pivot_vars;
  // y_pivot = rhs - sum coef * y_free
  std::vector<double> rhs;
  std::vector<std::vector<std::pair<int, double>>> deps;
  std::vector<int> touched;
  MatrixXd e;  // equalities x touched, as given
};

Elimination eliminate(const ConicProblem& p) {
  Elimination el;
  std::map<int, int> col_of;
  for (const auto& eq : p.equalities) {
    for (const auto& t : eq.expr.terms) col_of.emplace(t.var, 0);
  }
  for (auto& [var, col] : col_of) {
    col = static_cast<int>(el.touched.size());
    el.touched.push_back(var);
  }
  const int rows = static_cast<int>(p.equalities.size());
  const int cols = static_cast<int>(el.touched.size());
  el.e = MatrixXd::Zero(rows, cols);
  VectorXd rhs(rows);
  for (int i = 0; i < rows; ++i) {
    for (const auto& t : p.equalities[i].expr.terms) el.e(i, col_of[t.var]) += t.coef;
    rhs(i) = -p.equalities[i].expr.constant;
  }
  MatrixXd a = el.e;
  const double scale = a.size() > 0 ? std::max(1.0, a.cwiseAbs().maxCoeff()) : 1.0;
  const double tol = 1e-11 * scale;
  std::vector<int> pivot_col;
  std::vector<bool> used(cols, false);
  int rank = 0;
  while (rank < rows) {
    int bi = -1, bj = -1;
    double best = tol;
    for (int i = rank; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        if (!used[j] && std::abs(a(i, j)) > best) {
          best = std::abs(a(i, j));
          bi = i;
          bj = j;
        }
      }
    }
    if (bi < 0) break;
    a.row(rank).swap(a.row(bi));
    std::swap(rhs(rank), rhs(bi));
    const double piv = a(rank, bj);
    a.row(rank) /= piv;
    rhs(rank) /= piv;
    for (int i = 0; i < rows; ++i) {
      if (i == rank) continue;
      const double f = a(i, bj);
      if (f != 0.0) {
        a.row(i) -= f * a.row(rank);
        rhs(i) -= f * rhs(rank);
      }
    }
    used[bj] = true;
    pivot_col.push_back(bj);
    ++rank;
  }
  const double rhs_scale = 1.0 + (rows > 0 ? rhs.cwiseAbs().maxCoeff() : 0.0);
  for (int i = rank; i < rows; ++i) {
    if (std::abs(rhs(i)) > 1e-9 * rhs_scale) el.consistent = false;
  }
  for (int k = 0; k < rank; ++k) {
    el.pivot_vars.push_back(el.touched[pivot_col[k]]);
    el.rhs.push_back(rhs(k));
    std::vector<std::pair<int, double>> dep;
    for (int j = 0; j < cols; ++j) {
      if (!used[j] && std::abs(a(k, j)) > 1e-15) dep.emplace_back(el.touched[j], a(k, j));
    }
    el.deps.push_back(std::move(dep));
  }
  return el;
}

// Expands a coefficient on an original variable into free-variable
// coefficients plus a constant.
class Substitution {
 public:
  Substitution(int num_vars, const Elimination& el) : pivot_of_(num_vars, -1), el_(el) {
    for (size_t k = 0; k < el.pivot_vars.size(); ++k) pivot_of_[el.pivot_vars[k]] = static_cast<int>(k);
  }

  template <typename F>
  void expand(int var, double coef, double& constant, F&& emit) const {
    const int k = pivot_of_[var];
    if (k < 0) {
      emit(var, coef);
      return;
    }
    constant += coef * el_.rhs[k];
    for (const auto& [f, a] : el_.deps[k]) emit(f, -coef * a);
  }

  bool is_pivot(int var) const { return pivot_of_[var] >= 0; }

 private:
  std::vector<int> pivot_of_;
  const Elimination& el_;
};

struct Reduction {
  Standard std;
  std::vector<int> free_of;  // original var -> standard index or -1
  std::vector<int> original_of;
  double objective_constant = 0.0;
  bool unbounded = false;
};

Reduction reduce(const ConicProblem& p, const Elimination& el) {
  const Substitution sub(p.num_vars, el);
  Reduction red;
  red.objective_constant = p.objective_constant;

  VectorXd cost = VectorXd::Zero(p.num_vars);
  for (int j = 0; j < p.num_vars; ++j) {
    if (p.objective(j) == 0.0) continue;
    sub.expand(j, p.objective(j), red.objective_constant,
               [&](int f, double v) { cost(f) += v; });
  }

  // Per block: var -> list of (r, c, coef), constant matrix.
  struct RawBlock {
    int n;
    MatrixXd f0;
    std::map<int, std::map<std::pair<int, int>, double>> mats;
  };
  std::vector<RawBlock> raw;
  std::vector<bool> appears(p.num_vars, false);
  for (const auto& blk : p.psd_blocks) {
    RawBlock rb{blk.dim, MatrixXd::Zero(blk.dim, blk.dim), {}};
    for (const auto& e : blk.entries) {
      const int r = std::min(e.row, e.col);
      const int c = std::max(e.row, e.col);
      double k = 0.0;
      if (e.var == MatrixEntry::kConstant) {
        k = e.coef;
      } else {
        sub.expand(e.var, e.coef, k, [&](int f, double v) {
          rb.mats[f][{r, c}] += v;
          appears[f] = true;
        });
      }
      if (k != 0.0) {
        rb.f0(r, c) += k;
        if (r != c) rb.f0(c, r) += k;
      }
    }
    raw.push_back(std::move(rb));
  }
  std::vector<std::pair<double, std::map<int, double>>> lp_raw;
  for (const auto& ineq : p.inequalities) {
    double k = ineq.expr.constant;
    std::map<int, double> row;
    for (const auto& t : ineq.expr.terms) {
      sub.expand(t.var, t.coef, k, [&](int f, double v) {
        row[f] += v;
        appears[f] = true;
      });
    }
    lp_raw.emplace_back(k, std::move(row));
  }

  red.free_of.assign(p.num_vars, -1);
  for (int j = 0; j < p.num_vars; ++j) {
    if (sub.is_pivot(j)) continue;
    if (!appears[j]) {
      if (std::abs(cost(j)) > 1e-14) red.unbounded = true;
      continue;
    }
    red.free_of[j] = static_cast<int>(red.original_of.size());
    red.original_of.push_back(j);
  }
  Standard& s = red.std;
  s.m = static_cast<int>(red.original_of.size());
  s.b.resize(s.m);
  for (int i = 0; i < s.m; ++i) s.b(i) = -cost(red.original_of[i]);
  // C = F0, A_i = -F_i.
  for (auto& rb : raw) {
    Block b;
    b.n = rb.n;
    b.C = rb.f0;
    for (auto& [var, entries] : rb.mats) {
      SymMatrix sm;
      for (const auto& [rc, v] : entries) {
        if (v == 0.0) continue;
        const double w = rc.first == rc.second ? -v / 2.0 : -v;
        sm.push_back({rc.first, rc.second, w});
      }
      if (sm.empty()) continue;
      b.vars.push_back(red.free_of[var]);
      b.mats.push_back(std::move(sm));
    }
    s.blocks.push_back(std::move(b));
  }
  for (auto& [k, row] : lp_raw) {
    LpRow lr;
    lr.c = k;
    for (const auto& [var, v] : row) {
      if (v != 0.0) lr.coefs.emplace_back(red.free_of[var], -v);
    }
    s.lp.push_back(std::move(lr));
  }
  return red;
}

double max_step(const MatrixXd& x, const MatrixXd& dx) {
  Eigen::LLT<MatrixXd> llt(x);
  if (llt.info() != Eigen::Success) return 0.0;
  MatrixXd w = llt.matrixL().solve(dx);
  w = llt.matrixL().solve(w.transpose()).eval();
  w = 0.5 * (w + w.transpose());
  const double lmin =
      Eigen::SelfAdjointEigenSolver<MatrixXd>(w, Eigen::EigenvaluesOnly).eigenvalues()(0);
  return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

double max_step_lp(const VectorXd& x, const VectorXd& dx) {
  double a = std::numeric_limits<double>::infinity();
  for (int i = 0; i < x.size(); ++i) {
    if (dx(i) < 0.0) a = std::min(a, -x(i) / dx(i));
  }
  return a;
}

// Blocked Cholesky, with a pivoted LDLT fallback once the Schur complement
// loses definiteness numerically.
class SchurFactor {
 public:
  bool compute(const MatrixXd& m) {
    llt_.compute(m);
    use_llt_ = llt_.info() == Eigen::Success;
    if (use_llt_) return true;
    ldlt_.compute(m);
    return ldlt_.info() == Eigen::Success;
  }
  VectorXd solve(const VectorXd& b) const {
    if (use_llt_) return llt_.solve(b);
    return ldlt_.solve(b);
  }

 private:
  Eigen::LLT<MatrixXd> llt_;
  Eigen::LDLT<MatrixXd> ldlt_;
  bool use_llt_ = true;
};

struct IterateResult {
  std::vector<MatrixXd> X;
  VectorXd x_lp;
  VectorXd y;
  double pobj = 0.0;
  double dobj = 0.0;
  double rel_gap = 0.0;
  double pinf = 0.0;
  double dinf = 0.0;
  int iterations = 0;
  bool primal_unbounded = false;  // certificate that the LMI is infeasible
  bool dual_unbounded = false;
  bool broke_down = false;
};

class Ipm {
 public:
  Ipm(const Standard& s, const SolverConfig& cfg) : s_(s), cfg_(cfg) {}

  IterateResult run() {
    init();
    const double b_norm = s_.b.norm();
    double c_norm2 = 0.0;
    for (const auto& blk : s_.blocks) c_norm2 += blk.C.squaredNorm();
    for (const auto& row : s_.lp) c_norm2 += row.c * row.c;
    const double c_norm = std::sqrt(c_norm2);
    const double x0_trace = total_trace();

    int stalls = 0;
    int since_progress = 0;
    IterateResult best;
    double best_merit = std::numeric_limits<double>::infinity();
    auto snapshot = [&](const IterateResult& cur, double merit) {
      best = cur;
      best.X = X_;
      best.x_lp = xl_;
      best.y = y_;
      best_merit = merit;
    };
    for (int it = 0; it <= cfg_.max_iterations; ++it) {
      compute_residuals();
      IterateResult cur;
      cur.pobj = primal_objective();
      cur.dobj = s_.b.dot(y_);
      cur.rel_gap = std::abs(cur.pobj - cur.dobj) / (1.0 + std::abs(cur.pobj) + std::abs(cur.dobj));
      cur.pinf = rp_.norm() / (1.0 + b_norm);
      cur.dinf = dual_residual_norm() / (1.0 + c_norm);
      cur.iterations = it;
      if (cfg_.verbose) {
        std::fprintf(stderr, "%3d  pobj %+.10e  dobj %+.10e  gap %.2e  pinf %.2e  dinf %.2e\n",
                     it, cur.pobj, cur.dobj, cur.rel_gap, cur.pinf, cur.dinf);
      }
      const double merit = std::max({cur.rel_gap, cur.pinf, cur.dinf});
      if (!std::isfinite(merit)) {
        best.broke_down = true;
        break;
      }
      if (merit < 0.7 * best_merit || merit > 1e-4) {
        since_progress = 0;
      } else {
        ++since_progress;
      }
      if (merit <= best_merit) snapshot(cur, merit);
      if (cur.rel_gap < 0.1 * cfg_.gap_tol && cur.pinf < cfg_.feas_tol &&
          cur.dinf < cfg_.feas_tol) {
        break;
      }
      if (since_progress >= 6 && best.rel_gap < cfg_.gap_tol) break;
      // Divergence tests for infeasible or unbounded problems.
      const double tr = total_trace();
      if (tr > 1e10 * std::max(1.0, x0_trace) && cur.pobj < 0.0 && cur.dinf > 1e-6) {
        best = cur;
        best.primal_unbounded = true;
        break;
      }
      if (y_.norm() > 1e12 && cur.dobj > 0.0 && cur.pinf > 1e-6) {
        best = cur;
        best.dual_unbounded = true;
        break;
      }
      if (it == cfg_.max_iterations || since_progress >= 15) break;
      double ap = 0.0, ad = 0.0;
      if (!step(ap, ad)) {
        best.broke_down = true;
        break;
      }
      if (cfg_.verbose) std::fprintf(stderr, "     step %.3f %.3f\n", ap, ad);
      stalls = (ap < 1e-8 && ad < 1e-8) ? stalls + 1 : 0;
      if (stalls >= 3) break;
    }
    if (best.X.empty()) {
      best.X = X_;
      best.x_lp = xl_;
      best.y = y_;
    }
    return best;
  }

 private:
  void init() {
    const int m = s_.m;
    y_ = VectorXd::Zero(m);
    X_.clear();
    S_.clear();
    for (const auto& blk : s_.blocks) {
      const double n = blk.n;
      double xi = std::max(10.0, std::sqrt(n));
      double eta = std::max({10.0, std::sqrt(n), blk.C.norm()});
      for (size_t k = 0; k < blk.vars.size(); ++k) {
        const double an = frobenius(blk.mats[k], blk.n);
        xi = std::max(xi, std::sqrt(n) * (1.0 + std::abs(s_.b(blk.vars[k]))) / (1.0 + an));
        eta = std::max(eta, an);
      }
      X_.push_back(xi * MatrixXd::Identity(blk.n, blk.n));
      S_.push_back(eta * MatrixXd::Identity(blk.n, blk.n));
    }
    const int nl = static_cast<int>(s_.lp.size());
    double xi = 10.0, eta = 10.0;
    for (const auto& row : s_.lp) {
      eta = std::max(eta, std::abs(row.c));
      for (const auto& [i, v] : row.coefs) {
        xi = std::max(xi, (1.0 + std::abs(s_.b(i))) / (1.0 + std::abs(v)));
        eta = std::max(eta, std::abs(v));
      }
    }
    xl_ = VectorXd::Constant(nl, xi);
    sl_ = VectorXd::Constant(nl, eta);
  }

  double total_trace() const {
    double t = xl_.sum();
    for (const auto& x : X_) t += x.trace();
    return t;
  }

  double primal_objective() const {
    double v = 0.0;
    for (size_t k = 0; k < s_.blocks.size(); ++k) v += s_.blocks[k].C.cwiseProduct(X_[k]).sum();
    for (size_t l = 0; l < s_.lp.size(); ++l) v += s_.lp[l].c * xl_(l);
    return v;
  }

  // A(X) over blocks plus LP.
  VectorXd apply_a(const std::vector<MatrixXd>& mats, const VectorXd& lp) const {
    VectorXd out = VectorXd::Zero(s_.m);
    for (size_t k = 0; k < s_.blocks.size(); ++k) {
      const Block& blk = s_.blocks[k];
      for (size_t p = 0; p < blk.vars.size(); ++p) out(blk.vars[p]) += inner(blk.mats[p], mats[k]);
    }
    for (size_t l = 0; l < s_.lp.size(); ++l) {
      for (const auto& [i, v] : s_.lp[l].coefs) out(i) += v * lp(l);
    }
    return out;
  }

  // sum_i y_i A_i per block.
  MatrixXd apply_at(const Block& blk, const VectorXd& y) const {
    MatrixXd m = MatrixXd::Zero(blk.n, blk.n);
    for (size_t p = 0; p < blk.vars.size(); ++p) add_to(m, blk.mats[p], y(blk.vars[p]));
    return m;
  }

  VectorXd apply_at_lp(const VectorXd& y) const {
    VectorXd v = VectorXd::Zero(static_cast<int>(s_.lp.size()));
    for (size_t l = 0; l < s_.lp.size(); ++l) {
      for (const auto& [i, a] : s_.lp[l].coefs) v(l) += a * y(i);
    }
    return v;
  }

  void compute_residuals() {
    rp_ = s_.b - apply_a(X_, xl_);
    rd_.resize(s_.blocks.size());
    for (size_t k = 0; k < s_.blocks.size(); ++k) {
      rd_[k] = s_.blocks[k].C - apply_at(s_.blocks[k], y_) - S_[k];
    }
    rdl_ = VectorXd(static_cast<int>(s_.lp.size()));
    const VectorXd aty = apply_at_lp(y_);
    for (size_t l = 0; l < s_.lp.size(); ++l) rdl_(l) = s_.lp[l].c - aty(l) - sl_(l);
  }

  double dual_residual_norm() const {
    double v = rdl_.squaredNorm();
    for (const auto& r : rd_) v += r.squaredNorm();
    return std::sqrt(v);
  }

  MatrixXd schur(const std::vector<MatrixXd>& sinv) const {
    MatrixXd M = MatrixXd::Zero(s_.m, s_.m);
    for (size_t k = 0; k < s_.blocks.size(); ++k) {
      const Block& blk = s_.blocks[k];
      const MatrixXd& X = X_[k];
      const MatrixXd& Si = sinv[k];
      const size_t nv = blk.vars.size();
      for (size_t p = 0; p < nv; ++p) {
        const SymMatrix& ap = blk.mats[p];
        const int i = blk.vars[p];
        for (size_t q = p; q < nv; ++q) {
          const SymMatrix& aq = blk.mats[q];
          double v = 0.0;
          for (const auto& e : ap) {
            const int r = e.r, c = e.c;
            for (const auto& f : aq) {
              const int s = f.r, t = f.c;
              v += e.w * f.w *
                   (X(c, s) * Si(t, r) + X(c, t) * Si(s, r) + X(r, s) * Si(t, c) +
                    X(r, t) * Si(s, c));
            }
          }
          const int j = blk.vars[q];
          M(i, j) += v;
          if (i != j) M(j, i) += v;
        }
      }
    }
    for (size_t l = 0; l < s_.lp.size(); ++l) {
      const double d = xl_(l) / sl_(l);
      for (const auto& [i, a] : s_.lp[l].coefs) {
        for (const auto& [j, b] : s_.lp[l].coefs) M(i, j) += d * a * b;
      }
    }
    return M;
  }

  struct Direction {
    VectorXd dy;
    std::vector<MatrixXd> dX, dS;
    VectorXd dxl, dsl;
  };

  // Solves the HKM system with target T = sigma*mu*S^-1 - X - corr.
  Direction direction(const SchurFactor& fact, const std::vector<MatrixXd>& sinv,
                      double sigma_mu, const Direction* pred) const {
    const size_t nb = s_.blocks.size();
    std::vector<MatrixXd> T(nb), G(nb);
    for (size_t k = 0; k < nb; ++k) {
      T[k] = sigma_mu * sinv[k] - X_[k];
      if (pred) {
        MatrixXd c = pred->dX[k] * pred->dS[k] * sinv[k];
        T[k] -= 0.5 * (c + c.transpose());
      }
      G[k] = X_[k] * rd_[k] * sinv[k];
    }
    const int nl = static_cast<int>(s_.lp.size());
    VectorXd tl(nl), gl(nl);
    for (int l = 0; l < nl; ++l) {
      tl(l) = sigma_mu / sl_(l) - xl_(l);
      if (pred) tl(l) -= pred->dxl(l) * pred->dsl(l) / sl_(l);
      gl(l) = xl_(l) * rdl_(l) / sl_(l);
    }
    const VectorXd rhs = rp_ - apply_a(T, tl) + apply_a(G, gl);
    Direction d;
    d.dy = fact.solve(rhs);
    d.dX.resize(nb);
    d.dS.resize(nb);
    d.dxl = VectorXd(nl);
    auto expand = [&]() {
      for (size_t k = 0; k < nb; ++k) {
        d.dS[k] = rd_[k] - apply_at(s_.blocks[k], d.dy);
        MatrixXd h = X_[k] * d.dS[k] * sinv[k];
        d.dX[k] = T[k] - 0.5 * (h + h.transpose());
      }
      d.dsl = rdl_ - apply_at_lp(d.dy);
      for (int l = 0; l < nl; ++l) d.dxl(l) = tl(l) - xl_(l) / sl_(l) * d.dsl(l);
    };
    expand();
    // Iterative refinement against the primal equations A(dX) = rp.
    for (int pass = 0; pass < 2; ++pass) {
      const VectorXd err = rp_ - apply_a(d.dX, d.dxl);
      if (err.norm() <= 1e-14 * (1.0 + rp_.norm())) break;
      d.dy += fact.solve(err);
      expand();
    }
    return d;
  }

  void step_lengths(const Direction& d, double& ap, double& ad) const {
    ap = max_step_lp(xl_, d.dxl);
    ad = max_step_lp(sl_, d.dsl);
    for (size_t k = 0; k < X_.size(); ++k) {
      ap = std::min(ap, max_step(X_[k], d.dX[k]));
      ad = std::min(ad, max_step(S_[k], d.dS[k]));
    }
  }

  bool step(double& ap_out, double& ad_out) {
    const size_t nb = s_.blocks.size();
    std::vector<MatrixXd> sinv(nb);
    double xs = xl_.dot(sl_);
    int dim = static_cast<int>(s_.lp.size());
    for (size_t k = 0; k < nb; ++k) {
      Eigen::LLT<MatrixXd> llt(S_[k]);
      if (llt.info() != Eigen::Success) return false;
      sinv[k] = llt.solve(MatrixXd::Identity(S_[k].rows(), S_[k].cols()));
      sinv[k] = 0.5 * (sinv[k] + sinv[k].transpose()).eval();
      xs += X_[k].cwiseProduct(S_[k]).sum();
      dim += s_.blocks[k].n;
    }
    const double mu = xs / std::max(dim, 1);
    MatrixXd M = schur(sinv);
    // Tiny regularization guards against rank loss near the boundary.
    const double reg = M.size() > 0 ? 1e-14 * std::max(1.0, M.diagonal().cwiseAbs().maxCoeff()) : 0.0;
    M.diagonal().array() += reg;
    SchurFactor fact;
    if (!fact.compute(M)) return false;

    const Direction pred = direction(fact, sinv, 0.0, nullptr);
    if (!pred.dy.allFinite()) return false;
    double ap = 0.0, ad = 0.0;
    step_lengths(pred, ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double xs_new = (xl_ + ap * pred.dxl).dot(sl_ + ad * pred.dsl);
    for (size_t k = 0; k < nb; ++k) {
      xs_new += (X_[k] + ap * pred.dX[k]).cwiseProduct(S_[k] + ad * pred.dS[k]).sum();
    }
    const double ratio = std::clamp(xs_new / xs, 0.0, 1.0);
    const double sigma = std::pow(ratio, mu > 1e-6 ? 2.0 : 3.0);

    const Direction corr = direction(fact, sinv, sigma * mu, &pred);
    if (!corr.dy.allFinite()) return false;
    step_lengths(corr, ap, ad);
    const double gamma = 0.9 + 0.09 * std::min(std::min(1.0, ap), std::min(1.0, ad));
    ap = std::min(1.0, gamma * ap);
    ad = std::min(1.0, gamma * ad);
    for (size_t k = 0; k < nb; ++k) {
      X_[k] += ap * corr.dX[k];
      S_[k] += ad * corr.dS[k];
      X_[k] = 0.5 * (X_[k] + X_[k].transpose()).eval();
      S_[k] = 0.5 * (S_[k] + S_[k].transpose()).eval();
    }
    xl_ += ap * corr.dxl;
    sl_ += ad * corr.dsl;
    y_ += ad * corr.dy;
    ap_out = ap;
    ad_out = ad;
    return true;
  }

  const Standard& s_;
  const SolverConfig& cfg_;
  std::vector<MatrixXd> X_, S_;
  VectorXd xl_, sl_, y_;
  VectorXd rp_, rdl_;
  std::vector<MatrixXd> rd_;
};

}  // namespace

int ConicProblem::add_var() {
  objective.conservativeResize(num_vars + 1);
  objective(num_vars) = 0.0;
  return num_vars++;
}

void ConicProblem::validate() const {
  if (objective.size() != num_vars) throw ConfigError("objective size does not match variable count");
  auto check_var = [&](int v) {
    if (v < 0 || v >= num_vars) throw ConfigError("variable index out of range");
  };
  for (const auto& eq : equalities) {
    for (const auto& t : eq.expr.terms) check_var(t.var);
  }
  for (const auto& ineq : inequalities) {
    for (const auto& t : ineq.expr.terms) check_var(t.var);
  }
  for (const auto& blk : psd_blocks) {
    if (blk.dim <= 0) throw ConfigError("empty PSD block");
    for (const auto& e : blk.entries) {
      if (e.var != MatrixEntry::kConstant) check_var(e.var);
      if (e.row < 0 || e.col < 0 || e.row >= blk.dim || e.col >= blk.dim) {
        throw ConfigError("PSD block entry out of range");
      }
    }
  }
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::near_optimal: return "near_optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

SolverSolution solve(const ConicProblem& problem, const SolverConfig& config) {
  problem.validate();
  SolverSolution sol;
  sol.values = VectorXd::Zero(problem.num_vars);
  sol.equality_multipliers.assign(problem.equalities.size(), 0.0);
  sol.inequality_multipliers.assign(problem.inequalities.size(), 0.0);

  const Elimination el = eliminate(problem);
  if (!el.consistent) {
    sol.status = SolveStatus::infeasible;
    sol.message = "equality constraints are inconsistent";
    return sol;
  }
  const Reduction red = reduce(problem, el);
  if (red.unbounded) {
    sol.status = SolveStatus::infeasible;
    sol.message = "objective is unbounded (dual infeasible)";
    return sol;
  }
  if (red.std.m == 0) {
    // Nothing left to optimize: the constraints either hold or they do not.
    bool feasible = true;
    for (const auto& blk : red.std.blocks) {
      const double lmin =
          Eigen::SelfAdjointEigenSolver<MatrixXd>(blk.C, Eigen::EigenvaluesOnly).eigenvalues()(0);
      feasible = feasible && lmin >= -config.feas_tol;
    }
    for (const auto& row : red.std.lp) feasible = feasible && row.c >= -config.feas_tol;
    if (!feasible) {
      sol.status = SolveStatus::infeasible;
      sol.message = "constraints admit no feasible point";
      return sol;
    }
  }
  Ipm ipm(red.std, config);
  const IterateResult it = ipm.run();
  sol.iterations = it.iterations;
  sol.relative_gap = it.rel_gap;
  sol.primal_residual = it.dinf;
  sol.dual_residual = it.pinf;

  if (it.primal_unbounded) {
    sol.status = SolveStatus::infeasible;
    sol.message = "constraints admit no feasible point";
    return sol;
  }
  if (it.dual_unbounded) {
    sol.status = SolveStatus::infeasible;
    sol.message = "objective is unbounded (dual infeasible)";
    return sol;
  }

  // Recover the original variables.
  for (int j = 0; j < problem.num_vars; ++j) {
    if (red.free_of[j] >= 0) sol.values(j) = it.y(red.free_of[j]);
  }
  for (size_t k = 0; k < el.pivot_vars.size(); ++k) {
    double v = el.rhs[k];
    for (const auto& [f, a] : el.deps[k]) v -= a * sol.values(f);
    sol.values(el.pivot_vars[k]) = v;
  }
  sol.primal_value = problem.objective.dot(sol.values) + problem.objective_constant;
  sol.dual_value = red.objective_constant - it.pobj;

  // Inequality multipliers are the LP primal; equality multipliers solve
  // the stationarity conditions on the variables the equalities touch.
  for (size_t l = 0; l < problem.inequalities.size(); ++l) {
    sol.inequality_multipliers[l] = it.x_lp(l);
  }
  if (!problem.equalities.empty() && !el.touched.empty()) {
    std::vector<int> col(problem.num_vars, -1);
    for (size_t c = 0; c < el.touched.size(); ++c) col[el.touched[c]] = static_cast<int>(c);
    VectorXd r = VectorXd::Zero(el.touched.size());
    for (size_t c = 0; c < el.touched.size(); ++c) r(c) = problem.objective(el.touched[c]);
    for (size_t k = 0; k < problem.psd_blocks.size(); ++k) {
      const MatrixXd& X = it.X[k];
      for (const auto& e : problem.psd_blocks[k].entries) {
        if (e.var == MatrixEntry::kConstant || col[e.var] < 0) continue;
        const double v = e.row == e.col ? X(e.row, e.col) : X(e.row, e.col) + X(e.col, e.row);
        r(col[e.var]) -= e.coef * v;
      }
    }
    for (size_t l = 0; l < problem.inequalities.size(); ++l) {
      for (const auto& t : problem.inequalities[l].expr.terms) {
        if (col[t.var] >= 0) r(col[t.var]) -= t.coef * it.x_lp(l);
      }
    }
    const MatrixXd et = el.e.transpose();
    const VectorXd mu = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(et).solve(r);
    for (size_t k = 0; k < problem.equalities.size(); ++k) sol.equality_multipliers[k] = mu(k);
  }

  const double gap = std::abs(sol.primal_value - sol.dual_value) / (1.0 + std::abs(sol.primal_value));
  const double infeas = std::max(it.pinf, it.dinf);
  if (!std::isfinite(sol.primal_value) || !std::isfinite(sol.dual_value)) {
    sol.status = SolveStatus::numerical_failure;
    sol.message = "non-finite iterate";
  } else if (gap <= config.gap_tol && infeas <= config.feas_tol) {
    sol.status = SolveStatus::optimal;
  } else if (gap <= 1e3 * config.gap_tol && infeas <= 1e3 * config.feas_tol) {
    sol.status = SolveStatus::near_optimal;
    sol.message = "tolerances met only approximately";
  } else {
    sol.status = SolveStatus::numerical_failure;
    sol.message = it.broke_down ? "interior-point step failed" : "no convergence within the iteration limit";
  }
  sol.relative_gap = gap;
  return sol;
}

std::string dump_json(const ConicProblem& p) {
  nlohmann::json j;
  j["num_vars"] = p.num_vars;
  j["objective"] = std::vector<double>(p.objective.data(), p.objective.data() + p.objective.size());
  j["objective_constant"] = p.objective_constant;
  auto expr_json = [](const LinearExpr& e) {
    nlohmann::json t = nlohmann::json::array();
    for (const auto& term : e.terms) t.push_back({term.var, term.coef});
    return nlohmann::json{{"terms", t}, {"constant", e.constant}};
  };
  j["equalities"] = nlohmann::json::array();
  for (const auto& eq : p.equalities) {
    auto e = expr_json(eq.expr);
    e["label"] = eq.label;
    j["equalities"].push_back(e);
  }
  j["inequalities"] = nlohmann::json::array();
  for (const auto& in : p.inequalities) {
    auto e = expr_json(in.expr);
    e["label"] = in.label;
    j["inequalities"].push_back(e);
  }
  j["psd_blocks"] = nlohmann::json::array();
  for (const auto& b : p.psd_blocks) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : b.entries) entries.push_back({e.var, e.row, e.col, e.coef});
    j["psd_blocks"].push_back({{"dim", b.dim}, {"label", b.label}, {"entries", entries}});
  }
  return j.dump();
}

}  // namespace diqkd::sdp
