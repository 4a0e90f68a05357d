#include "sbolza/qp.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace sbolza::qp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard form: equality rows only, slacks appended for G w <= h.
struct Std {
  int n = 0;  // original variables
  int N = 0;  // with slacks
  SpMat H, A;
  Eigen::VectorXd c, b, lo, hi;
  double scale = 1.0;
};

Std standardize(const Problem& p) {
  const int n = p.n();
  const int me = static_cast<int>(p.b.size());
  const int mi = static_cast<int>(p.h.size());
  if (p.H.rows() != n || p.H.cols() != n) throw std::invalid_argument("qp: H has wrong shape");
  if (p.A.rows() != me || (me > 0 && p.A.cols() != n)) throw std::invalid_argument("qp: A has wrong shape");
  if (p.G.rows() != mi || (mi > 0 && p.G.cols() != n)) throw std::invalid_argument("qp: G has wrong shape");
  if (p.lo.size() != n || p.hi.size() != n) throw std::invalid_argument("qp: bounds have wrong size");
  Std s;
  s.n = n;
  s.N = n + mi;
  Triplets th;
  for (int k = 0; k < p.H.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.H, k); it; ++it) th.emplace_back(it.row(), it.col(), it.value());
  s.H.resize(s.N, s.N);
  s.H.setFromTriplets(th.begin(), th.end());
  Triplets ta;
  if (me > 0)
    for (int k = 0; k < p.A.outerSize(); ++k)
      for (SpMat::InnerIterator it(p.A, k); it; ++it) ta.emplace_back(it.row(), it.col(), it.value());
  if (mi > 0)
    for (int k = 0; k < p.G.outerSize(); ++k)
      for (SpMat::InnerIterator it(p.G, k); it; ++it) ta.emplace_back(me + it.row(), it.col(), it.value());
  for (int i = 0; i < mi; ++i) ta.emplace_back(me + i, n + i, 1.0);
  s.A.resize(me + mi, s.N);
  s.A.setFromTriplets(ta.begin(), ta.end());
  s.c = Eigen::VectorXd::Zero(s.N);
  s.c.head(n) = p.c;
  s.b.resize(me + mi);
  s.b << p.b, p.h;
  s.lo.resize(s.N);
  s.hi.resize(s.N);
  s.lo << p.lo, Eigen::VectorXd::Zero(mi);
  s.hi << p.hi, Eigen::VectorXd::Constant(mi, kInf);
  for (int i = 0; i < s.N; ++i)
    if (s.lo(i) > s.hi(i)) throw std::invalid_argument("qp: lower bound exceeds upper bound");
  double sc = 1.0;
  for (int k = 0; k < s.H.outerSize(); ++k)
    for (SpMat::InnerIterator it(s.H, k); it; ++it) sc = std::max(sc, std::abs(it.value()));
  for (int k = 0; k < s.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(s.A, k); it; ++it) sc = std::max(sc, std::abs(it.value()));
  s.scale = sc;
  return s;
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

Eigen::VectorXd clamp(const Eigen::VectorXd& w, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return w.cwiseMax(lo).cwiseMin(hi);
}

// Fixed-set states: 0 free, -1 at lower, +1 at upper, 2 pinned (lo == hi).
using State = std::vector<signed char>;

struct Kkt {
  bool ok = false;
  Eigen::VectorXd w, y;
};

// Equality-constrained QP over the free coordinates, solved through a
// quasi-definite regularization with iterative refinement on the exact system.
Kkt solve_kkt(const Std& s, const State& st, const Eigen::VectorXd* w0, const Eigen::VectorXd* y0) {
  const int N = s.N;
  const int M = static_cast<int>(s.b.size());
  std::vector<int> pos(N, -1);
  int nf = 0;
  Eigen::VectorXd wfix = Eigen::VectorXd::Zero(N);
  for (int i = 0; i < N; ++i) {
    if (st[i] == 0) {
      pos[i] = nf++;
    } else {
      wfix(i) = (st[i] == 1) ? s.hi(i) : s.lo(i);
    }
  }
  const int K = nf + M;
  Triplets t0;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(K);
  for (int i = 0; i < N; ++i)
    if (pos[i] >= 0) rhs(pos[i]) = -s.c(i);
  rhs.tail(M) = s.b;
  for (int k = 0; k < s.H.outerSize(); ++k) {
    for (SpMat::InnerIterator it(s.H, k); it; ++it) {
      const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
      if (pos[r] >= 0 && pos[c] >= 0) {
        if (pos[r] >= pos[c]) t0.emplace_back(pos[r], pos[c], it.value());
      } else if (pos[r] >= 0) {
        rhs(pos[r]) -= it.value() * wfix(c);
      }
    }
  }
  for (int k = 0; k < s.A.outerSize(); ++k) {
    for (SpMat::InnerIterator it(s.A, k); it; ++it) {
      const int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
      if (pos[c] >= 0) {
        t0.emplace_back(nf + r, pos[c], it.value());
      } else {
        rhs(nf + r) -= it.value() * wfix(c);
      }
    }
  }
  SpMat K0(K, K);
  K0.setFromTriplets(t0.begin(), t0.end());  // lower triangle
  auto regularized = [&](double delta) {
    Triplets treg = t0;
    for (int i = 0; i < nf; ++i) treg.emplace_back(i, i, delta);
    for (int i = 0; i < M; ++i) treg.emplace_back(nf + i, nf + i, -delta);
    SpMat Kd(K, K);
    Kd.setFromTriplets(treg.begin(), treg.end());
    return Kd;
  };

  Kkt out;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(K);
  if (w0)
    for (int i = 0; i < N; ++i)
      if (pos[i] >= 0) x(pos[i]) = (*w0)(i);
  if (y0 && y0->size() == M) x.tail(M) = *y0;
  if (K > 0) {
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
    // Cancellation can leave an exact zero pivot; a larger shift still
    // converges under the refinement below.
    double delta = 1e-9 * s.scale;
    for (int k = 0; k < 4; ++k, delta *= 100.0) {
      ldlt.compute(regularized(delta));
      if (ldlt.info() == Eigen::Success) break;
    }
    if (ldlt.info() != Eigen::Success) return out;
    const SpMat K0full = K0.selfadjointView<Eigen::Lower>();
    const double target = 1e-13 * (1.0 + inf_norm(rhs));
    double res = kInf;
    for (int it = 0; it < 60; ++it) {
      const Eigen::VectorXd r = rhs - K0full * x;
      const double rn = inf_norm(r);
      if (!std::isfinite(rn)) return out;
      if (rn <= target) {
        res = rn;
        break;
      }
      if (it > 5 && rn > 0.9 * res) {
        res = rn;
        break;
      }
      res = rn;
      x += ldlt.solve(r);
    }
    if (!(res <= 1e-9 * (1.0 + inf_norm(rhs)) * std::max(1.0, s.scale))) return out;
    if (inf_norm(x) > 1e13 * (1.0 + inf_norm(rhs))) return out;
  }
  out.ok = true;
  out.w = wfix;
  for (int i = 0; i < N; ++i)
    if (pos[i] >= 0) out.w(i) = x(pos[i]);
  out.y = x.tail(M);
  return out;
}

struct Pdas {
  bool ok = false;
  Eigen::VectorXd w, y;
  State state;
  int iterations = 0;
};

double feas_tol(double bound, double tol) { return tol * (1.0 + (std::isfinite(bound) ? std::abs(bound) : 0.0)); }

Pdas pdas(const Std& s, State st, const Eigen::VectorXd* w0, const Eigen::VectorXd* y0, double tol, int maxit) {
  Pdas out;
  std::set<State> seen;
  Eigen::VectorXd wprev, yprev;
  if (w0) wprev = *w0;
  if (y0) yprev = *y0;
  for (int it = 0; it < maxit; ++it) {
    out.iterations = it + 1;
    if (!seen.insert(st).second) return out;
    Kkt k = solve_kkt(s, st, wprev.size() ? &wprev : nullptr, yprev.size() ? &yprev : nullptr);
    if (!k.ok) return out;
    const Eigen::VectorXd g = s.H * k.w + s.c + s.A.transpose() * k.y;
    const double gtol = tol * std::max(1.0, inf_norm(s.c)) * std::max(1.0, s.scale);
    bool changed = false;
    State next = st;
    for (int i = 0; i < s.N; ++i) {
      if (st[i] == 0) {
        if (k.w(i) < s.lo(i) - feas_tol(s.lo(i), tol)) {
          next[i] = -1;
          changed = true;
        } else if (k.w(i) > s.hi(i) + feas_tol(s.hi(i), tol)) {
          next[i] = 1;
          changed = true;
        }
      } else if (st[i] == -1 && g(i) < -gtol) {
        next[i] = 0;
        changed = true;
      } else if (st[i] == 1 && g(i) > gtol) {
        next[i] = 0;
        changed = true;
      }
    }
    wprev = k.w;
    yprev = k.y;
    if (!changed) {
      out.ok = true;
      out.w = clamp(k.w, s.lo, s.hi);
      out.y = k.y;
      out.state = st;
      return out;
    }
    st = std::move(next);
  }
  return out;
}

State initial_state(const Std& s) {
  State st(s.N, 0);
  for (int i = 0; i < s.N; ++i)
    if (s.lo(i) == s.hi(i)) st[i] = 2;
  return st;
}

State state_from_point(const Std& s, const Eigen::VectorXd& w, const Eigen::VectorXd& y, double tol) {
  State st = initial_state(s);
  const Eigen::VectorXd g = s.H * w + s.c + s.A.transpose() * y;
  for (int i = 0; i < s.N; ++i) {
    if (st[i] == 2) continue;
    const double tl = std::max(1e-7, tol) * (1.0 + std::abs(s.lo(i)));
    const double tu = std::max(1e-7, tol) * (1.0 + std::abs(s.hi(i)));
    if (std::isfinite(s.lo(i)) && w(i) <= s.lo(i) + tl && g(i) >= 0.0) st[i] = -1;
    else if (std::isfinite(s.hi(i)) && w(i) >= s.hi(i) - tu && g(i) <= 0.0) st[i] = 1;
  }
  return st;
}

// Projected Newton for min 1/2 w'Mw + q'w over the box, M positive definite.
Eigen::VectorXd box_newton(const SpMat& M, const Eigen::VectorXd& q, const Eigen::VectorXd& lo,
                           const Eigen::VectorXd& hi, Eigen::VectorXd w, double tol, int maxit) {
  const int N = static_cast<int>(q.size());
  w = clamp(w, lo, hi);
  auto phi = [&](const Eigen::VectorXd& v) { return 0.5 * v.dot(M * v) + q.dot(v); };
  for (int it = 0; it < maxit; ++it) {
    const Eigen::VectorXd g = M * w + q;
    const Eigen::VectorXd pg = w - clamp(w - g, lo, hi);
    const double pgn = inf_norm(pg);
    if (pgn <= tol) break;
    const double eps = std::min(1e-6, pgn);
    std::vector<int> fpos(N, -1);
    std::vector<int> free;
    for (int i = 0; i < N; ++i) {
      const bool at_lo = w(i) <= lo(i) + eps && g(i) > 0.0;
      const bool at_hi = w(i) >= hi(i) - eps && g(i) < 0.0;
      if (!at_lo && !at_hi) {
        fpos[i] = static_cast<int>(free.size());
        free.push_back(i);
      }
    }
    Eigen::VectorXd d = Eigen::VectorXd::Zero(N);
    if (!free.empty()) {
      Triplets tf;
      for (int k = 0; k < M.outerSize(); ++k)
        for (SpMat::InnerIterator iti(M, k); iti; ++iti)
          if (fpos[iti.row()] >= 0 && fpos[iti.col()] >= 0) tf.emplace_back(fpos[iti.row()], fpos[iti.col()], iti.value());
      SpMat Mf(free.size(), free.size());
      Mf.setFromTriplets(tf.begin(), tf.end());
      Eigen::SimplicialLLT<SpMat> llt(Mf);
      Eigen::VectorXd gf(free.size());
      for (std::size_t k = 0; k < free.size(); ++k) gf(k) = g(free[k]);
      Eigen::VectorXd df = llt.info() == Eigen::Success ? Eigen::VectorXd(-llt.solve(gf)) : Eigen::VectorXd(-gf);
      for (std::size_t k = 0; k < free.size(); ++k) d(free[k]) = df(k);
    }
    for (int i = 0; i < N; ++i)
      if (fpos[i] < 0) d(i) = -g(i) / std::max(1e-12, M.coeff(i, i));
    const double f0 = phi(w);
    double alpha = 1.0;
    Eigen::VectorXd wn = w;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      wn = clamp(w + alpha * d, lo, hi);
      const double dec = -g.dot(wn - w);
      if (phi(wn) <= f0 - 1e-4 * std::max(0.0, dec)) {
        moved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!moved) {
      // Fall back to a projected gradient step with exact curvature bound.
      const double L = std::max(1e-12, M.diagonal().cwiseAbs().sum());
      wn = clamp(w - g / L, lo, hi);
      if (phi(wn) > f0) break;
    }
    w = wn;
  }
  return w;
}

struct Alm {
  bool converged = false;
  bool diverged = false;
  Eigen::VectorXd w, y;
  int iterations = 0;
  double pres = kInf, dres = kInf;
};

Alm alm(const Std& s, Eigen::VectorXd w, Eigen::VectorXd y, double eps, int maxit) {
  Alm out;
  const int N = s.N;
  double rho = 10.0 * s.scale, sig = 10.0 / s.scale;
  if (w.size() != N) w = Eigen::VectorXd::Zero(N);
  w = clamp(w, s.lo, s.hi);
  if (y.size() != s.b.size()) y = Eigen::VectorXd::Zero(s.b.size());
  const SpMat AtA = SpMat(s.A.transpose()) * s.A;
  SpMat I(N, N);
  I.setIdentity();
  double prev_pres = kInf;
  for (int it = 0; it < maxit; ++it) {
    out.iterations = it + 1;
    const Eigen::VectorXd wk = w;
    const SpMat M = s.H + rho * AtA + (1.0 / sig) * I;
    const Eigen::VectorXd q = s.c + s.A.transpose() * (y - rho * s.b) - wk / sig;
    const double inner_tol = std::max(1e-14, std::min(1e-6, 0.1 * std::min(out.pres, out.dres)));
    w = box_newton(M, q, s.lo, s.hi, w, inner_tol, 200);
    const Eigen::VectorXd r = s.A * w - s.b;
    y += rho * r;
    out.pres = inf_norm(r);
    out.dres = inf_norm(w - wk) / sig;
    if (!w.allFinite() || inf_norm(w) > 1e12) {
      out.diverged = true;
      break;
    }
    if (out.pres <= eps && out.dres <= eps) {
      out.converged = true;
      break;
    }
    if (out.pres > 0.25 * prev_pres) rho = std::min(rho * 5.0, 1e9 * s.scale);
    if (out.dres > 10 * out.pres) sig = std::min(sig * 2.0, 1e6);
    prev_pres = out.pres;
  }
  out.w = w;
  out.y = y;
  return out;
}

struct Ipm {
  bool ok = false;
  Eigen::VectorXd w, y, zl, zu;
  int iterations = 0;
};

// Mehrotra predictor-corrector on the standard form. Bound duals live only on
// finite bounds; the Newton system is the reduced augmented matrix
// [H + D, A'; A, 0], regularized and refined like solve_kkt.
Ipm ipm(const Std& s, double tol, int maxit) {
  const int N = s.N;
  const int M = static_cast<int>(s.b.size());
  Ipm out;
  std::vector<char> hl(N), hu(N);
  Eigen::VectorXd w(N), zl = Eigen::VectorXd::Zero(N), zu = Eigen::VectorXd::Zero(N), y = Eigen::VectorXd::Zero(M);
  int nb = 0;
  for (int i = 0; i < N; ++i) {
    hl[i] = std::isfinite(s.lo(i));
    hu[i] = std::isfinite(s.hi(i));
    double v = 0.0;
    if (hl[i] && hu[i]) {
      const double gap = std::min(1.0, 0.25 * (s.hi(i) - s.lo(i)));
      v = std::clamp(0.0, s.lo(i) + gap, s.hi(i) - gap);
    } else if (hl[i]) {
      v = std::max(0.0, s.lo(i) + 1.0);
    } else if (hu[i]) {
      v = std::min(0.0, s.hi(i) - 1.0);
    }
    w(i) = v;
    if (hl[i]) zl(i) = 1.0, ++nb;
    if (hu[i]) zu(i) = 1.0, ++nb;
  }
  Triplets base;
  for (int k = 0; k < s.H.outerSize(); ++k)
    for (SpMat::InnerIterator it(s.H, k); it; ++it)
      if (it.row() >= it.col()) base.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < s.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(s.A, k); it; ++it) base.emplace_back(N + it.row(), it.col(), it.value());
  const double bn = std::max(1.0, inf_norm(s.b));
  const double cn = std::max(1.0, inf_norm(s.c)) * std::max(1.0, s.scale);
  const double delta = 1e-8 * std::max(1.0, s.scale);
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower> ldlt;
  bool analyzed = false;

  for (int it = 0; it < maxit; ++it) {
    out.iterations = it + 1;
    Eigen::VectorXd sl = Eigen::VectorXd::Ones(N), su = Eigen::VectorXd::Ones(N);
    for (int i = 0; i < N; ++i) {
      if (hl[i]) sl(i) = w(i) - s.lo(i);
      if (hu[i]) su(i) = s.hi(i) - w(i);
    }
    const Eigen::VectorXd rd = s.H * w + s.c + s.A.transpose() * y - zl + zu;
    const Eigen::VectorXd rp = s.A * w - s.b;
    double mu = 0.0;
    for (int i = 0; i < N; ++i) mu += (hl[i] ? sl(i) * zl(i) : 0.0) + (hu[i] ? su(i) * zu(i) : 0.0);
    mu = nb ? mu / nb : 0.0;
    if (!std::isfinite(mu) || !std::isfinite(inf_norm(rd)) || !std::isfinite(inf_norm(rp))) return out;
    if (inf_norm(rp) <= tol * bn && inf_norm(rd) <= tol * cn && mu <= tol * cn) {
      out.ok = true;
      break;
    }
    Eigen::VectorXd D = Eigen::VectorXd::Zero(N);
    for (int i = 0; i < N; ++i) D(i) = (hl[i] ? zl(i) / sl(i) : 0.0) + (hu[i] ? zu(i) / su(i) : 0.0);
    Triplets tk = base, tr = base;
    for (int i = 0; i < N; ++i) {
      tk.emplace_back(i, i, D(i));
      tr.emplace_back(i, i, D(i) + delta);
    }
    for (int i = 0; i < M; ++i) tr.emplace_back(N + i, N + i, -delta);
    SpMat K(N + M, N + M), Kr(N + M, N + M);
    K.setFromTriplets(tk.begin(), tk.end());
    Kr.setFromTriplets(tr.begin(), tr.end());
    if (!analyzed) {
      ldlt.analyzePattern(Kr);
      analyzed = true;
    }
    ldlt.factorize(Kr);
    if (ldlt.info() != Eigen::Success) return out;
    const SpMat Kf = K.selfadjointView<Eigen::Lower>();

    // rcl, rcu are the complementarity targets; returns (dw, dy, dzl, dzu).
    auto direction = [&](const Eigen::VectorXd& rcl, const Eigen::VectorXd& rcu, Eigen::VectorXd& dw,
                         Eigen::VectorXd& dy, Eigen::VectorXd& dzl, Eigen::VectorXd& dzu) {
      Eigen::VectorXd rhs(N + M);
      for (int i = 0; i < N; ++i)
        rhs(i) = -rd(i) + (hl[i] ? rcl(i) / sl(i) : 0.0) - (hu[i] ? rcu(i) / su(i) : 0.0);
      rhs.tail(M) = -rp;
      Eigen::VectorXd x = ldlt.solve(rhs);
      for (int r = 0; r < 5; ++r) x += ldlt.solve(rhs - Kf * x);
      dw = x.head(N);
      dy = x.tail(M);
      dzl = Eigen::VectorXd::Zero(N);
      dzu = Eigen::VectorXd::Zero(N);
      for (int i = 0; i < N; ++i) {
        if (hl[i]) dzl(i) = (rcl(i) - zl(i) * dw(i)) / sl(i);
        if (hu[i]) dzu(i) = (rcu(i) + zu(i) * dw(i)) / su(i);
      }
    };
    auto step = [&](const Eigen::VectorXd& dw, const Eigen::VectorXd& dzl, const Eigen::VectorXd& dzu,
                    double frac) {
      double a = 1.0;
      for (int i = 0; i < N; ++i) {
        if (hl[i]) {
          if (dw(i) < 0) a = std::min(a, -frac * sl(i) / dw(i));
          if (dzl(i) < 0) a = std::min(a, -frac * zl(i) / dzl(i));
        }
        if (hu[i]) {
          if (dw(i) > 0) a = std::min(a, frac * su(i) / dw(i));
          if (dzu(i) < 0) a = std::min(a, -frac * zu(i) / dzu(i));
        }
      }
      return a;
    };

    Eigen::VectorXd rcl(N), rcu(N), dw, dy, dzl, dzu;
    for (int i = 0; i < N; ++i) {
      rcl(i) = hl[i] ? -sl(i) * zl(i) : 0.0;
      rcu(i) = hu[i] ? -su(i) * zu(i) : 0.0;
    }
    direction(rcl, rcu, dw, dy, dzl, dzu);
    double sigma = 0.0;
    if (nb) {
      const double aa = step(dw, dzl, dzu, 1.0);
      double maff = 0.0;
      for (int i = 0; i < N; ++i) {
        if (hl[i]) maff += (sl(i) + aa * dw(i)) * (zl(i) + aa * dzl(i));
        if (hu[i]) maff += (su(i) - aa * dw(i)) * (zu(i) + aa * dzu(i));
      }
      maff /= nb;
      sigma = std::pow(std::max(0.0, maff) / mu, 3);
      for (int i = 0; i < N; ++i) {
        if (hl[i]) rcl(i) += sigma * mu - dw(i) * dzl(i);
        if (hu[i]) rcu(i) += sigma * mu + dw(i) * dzu(i);
      }
      direction(rcl, rcu, dw, dy, dzl, dzu);
    }
    const double a = nb ? step(dw, dzl, dzu, 0.995) : 1.0;
    w += a * dw;
    y += a * dy;
    zl += a * dzl;
    zu += a * dzu;
    if (nb && a < 1e-12) {
      // Stalled; hand back the iterate if it is already close.
      out.ok = inf_norm(rp) <= 1e3 * tol * bn && inf_norm(rd) <= 1e3 * tol * cn && mu <= 1e3 * tol * cn;
      break;
    }
  }
  out.w = clamp(w, s.lo, s.hi);
  out.y = y;
  out.zl = zl;
  out.zu = zu;
  return out;
}

// Active set read off the interior point: a bound is active when its dual
// dominates its slack.
State state_from_ipm(const Std& s, const Ipm& ip) {
  State st = initial_state(s);
  for (int i = 0; i < s.N; ++i) {
    if (st[i] == 2) continue;
    if (std::isfinite(s.lo(i)) && ip.zl(i) > ip.w(i) - s.lo(i)) st[i] = -1;
    else if (std::isfinite(s.hi(i)) && ip.zu(i) > s.hi(i) - ip.w(i)) st[i] = 1;
  }
  return st;
}

Solution finish(const Problem& p, const Std& s, const Eigen::VectorXd& w, const Eigen::VectorXd& y, Status st,
                int iters) {
  Solution sol;
  sol.status = st;
  sol.iterations = iters;
  sol.w = w.head(s.n);
  const int me = static_cast<int>(p.b.size());
  sol.y_eq = y.head(me);
  sol.y_in = y.tail(y.size() - me);
  sol.value = 0.5 * sol.w.dot(p.H * sol.w) + p.c.dot(sol.w) + p.c0;
  const Eigen::VectorXd r = s.A * w - s.b;
  double pr = inf_norm(r);
  pr = std::max(pr, inf_norm((s.lo - w).cwiseMax(0.0)));
  pr = std::max(pr, inf_norm((w - s.hi).cwiseMax(0.0)));
  sol.primal_residual = pr;
  const Eigen::VectorXd g = s.H * w + s.c + s.A.transpose() * y;
  double dr = 0.0;
  for (int i = 0; i < s.N; ++i) {
    double gi = g(i);
    const bool at_lo = std::isfinite(s.lo(i)) && w(i) <= s.lo(i) + feas_tol(s.lo(i), 1e-9);
    const bool at_hi = std::isfinite(s.hi(i)) && w(i) >= s.hi(i) - feas_tol(s.hi(i), 1e-9);
    if (at_lo && at_hi) gi = 0.0;
    else if (at_lo) gi = std::min(gi, 0.0);
    else if (at_hi) gi = std::max(gi, 0.0);
    dr = std::max(dr, std::abs(gi));
  }
  sol.dual_residual = dr;
  return sol;
}

Solution solve_std(const Problem& p, const Std& s, const Options& opts);

// Smallest constraint violation achievable inside the bounds.
double phase_one(const Problem& p, const Std& s) {
  const int N = s.N;
  const int M = static_cast<int>(s.b.size());
  if (M == 0) return 0.0;
  // Variables (w, r) with A w - r = b, minimize 1/2 |r|^2.
  Problem f = Problem::empty(N + M);
  Triplets th;
  for (int i = 0; i < M; ++i) th.emplace_back(N + i, N + i, 1.0);
  f.H.setFromTriplets(th.begin(), th.end());
  Triplets ta;
  for (int k = 0; k < s.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(s.A, k); it; ++it) ta.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < M; ++i) ta.emplace_back(i, N + i, -1.0);
  f.A.resize(M, N + M);
  f.A.setFromTriplets(ta.begin(), ta.end());
  f.b = s.b;
  f.lo.head(N) = s.lo;
  f.hi.head(N) = s.hi;
  Options o;
  o.certify = false;
  o.tol = 1e-12;
  const Solution fs = solve_std(f, standardize(f), o);
  (void)p;
  return inf_norm(fs.w.tail(M));
}

// Projection of -c onto the recession cone {d : Hd = 0, Ad = 0, bound signs}.
Eigen::VectorXd recession(const Std& s) {
  const int N = s.N;
  Problem r = Problem::empty(N);
  SpMat I(N, N);
  I.setIdentity();
  r.H = I;
  r.c = s.c;
  const int M = static_cast<int>(s.b.size());
  Triplets ta;
  for (int k = 0; k < s.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(s.A, k); it; ++it) ta.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < s.H.outerSize(); ++k)
    for (SpMat::InnerIterator it(s.H, k); it; ++it) ta.emplace_back(M + it.row(), it.col(), it.value());
  r.A.resize(M + N, N);
  r.A.setFromTriplets(ta.begin(), ta.end());
  r.b = Eigen::VectorXd::Zero(M + N);
  for (int i = 0; i < N; ++i) {
    r.lo(i) = std::isfinite(s.lo(i)) ? 0.0 : -kInf;
    r.hi(i) = std::isfinite(s.hi(i)) ? 0.0 : kInf;
  }
  Options o;
  o.certify = false;
  o.tol = 1e-12;
  const Solution rs = solve_std(r, standardize(r), o);
  return rs.w;
}

Solution least_norm_refine(const Problem& p, const Solution& base, const Options& opts) {
  // Among minimizers (same gradient H w and same c'w), take the point of
  // least norm over the requested coordinates.
  const int n = p.n();
  Problem q = p;
  Triplets th;
  for (int i : opts.least_norm) th.emplace_back(i, i, 1.0);
  q.H.resize(n, n);
  q.H.setFromTriplets(th.begin(), th.end());
  q.c = Eigen::VectorXd::Zero(n);
  q.c0 = 0.0;
  const int me = static_cast<int>(p.b.size());
  Triplets ta;
  for (int k = 0; k < p.A.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.A, k); it; ++it) ta.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < p.H.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.H, k); it; ++it) ta.emplace_back(me + it.row(), it.col(), it.value());
  for (int j = 0; j < n; ++j)
    if (p.c(j) != 0.0) ta.emplace_back(me + n, j, p.c(j));
  q.A.resize(me + n + 1, n);
  q.A.setFromTriplets(ta.begin(), ta.end());
  q.b.resize(me + n + 1);
  q.b << p.b, p.H * base.w, p.c.dot(base.w);
  Options o;
  o.certify = false;
  o.tol = opts.tol;
  o.warm = &base.w;
  Solution ln = solve(q, o);
  if (ln.status != Status::optimal) return base;
  Solution out = base;
  out.w = ln.w;
  out.value = 0.5 * out.w.dot(p.H * out.w) + p.c.dot(out.w) + p.c0;
  return out;
}

Solution solve_std(const Problem& p, const Std& s, const Options& opts) {
  const int N = s.N;
  if (N == 0) {
    Solution sol;
    sol.w = Eigen::VectorXd::Zero(0);
    sol.value = p.c0;
    sol.y_eq = Eigen::VectorXd::Zero(p.b.size());
    sol.y_in = Eigen::VectorXd::Zero(p.h.size());
    sol.primal_residual = inf_norm(s.b);
    sol.status = sol.primal_residual <= 1e-9 ? Status::optimal : Status::infeasible;
    sol.infeasibility = sol.primal_residual;
    sol.iterations = 0;
    return sol;
  }
  Eigen::VectorXd w0;
  if (opts.warm && opts.warm->size() == s.n) {
    w0 = Eigen::VectorXd::Zero(N);
    w0.head(s.n) = clamp(*opts.warm, s.lo.head(s.n), s.hi.head(s.n));
    // Slack guess from the inequality rows.
    if (N > s.n) {
      const Eigen::VectorXd r = s.b - s.A * w0;
      w0.tail(N - s.n) = r.tail(N - s.n).cwiseMax(0.0);
    }
  }
  State st0 = initial_state(s);
  if (w0.size()) {
    for (int i = 0; i < N; ++i) {
      if (st0[i] == 2) continue;
      if (std::isfinite(s.lo(i)) && w0(i) <= s.lo(i)) st0[i] = -1;
      else if (std::isfinite(s.hi(i)) && w0(i) >= s.hi(i)) st0[i] = 1;
    }
  }
  int iters = 0;
  Pdas pd = pdas(s, st0, w0.size() ? &w0 : nullptr, nullptr, opts.tol, 40);
  iters += pd.iterations;
  if (!pd.ok && w0.size()) {
    pd = pdas(s, initial_state(s), nullptr, nullptr, opts.tol, 40);
    iters += pd.iterations;
  }
  if (pd.ok) return finish(p, s, pd.w, pd.y, Status::optimal, iters);

  if (opts.certify) {
    const double infeas = phase_one(p, s);
    if (infeas > 1e-8 * std::max(1.0, inf_norm(s.b))) {
      Solution sol = finish(p, s, Eigen::VectorXd::Zero(N), Eigen::VectorXd::Zero(s.b.size()), Status::infeasible, iters);
      sol.value = kInf;
      sol.infeasibility = infeas;
      return sol;
    }
    const Eigen::VectorXd d = recession(s);
    if (inf_norm(d) > 1e-9 * std::max(1.0, inf_norm(s.c)) && s.c.dot(d) < -1e-12) {
      Solution sol = finish(p, s, Eigen::VectorXd::Zero(N), Eigen::VectorXd::Zero(s.b.size()), Status::unbounded, iters);
      sol.value = -kInf;
      sol.ray = d.head(s.n);
      return sol;
    }
  }

  {
    const Ipm ip = ipm(s, 1e-11, 200);
    iters += ip.iterations;
    if (ip.ok) {
      for (const State& guess : {state_from_ipm(s, ip), state_from_point(s, ip.w, ip.y, 1e-8)}) {
        Pdas pol = pdas(s, guess, &ip.w, &ip.y, opts.tol, 40);
        iters += pol.iterations;
        if (pol.ok) return finish(p, s, pol.w, pol.y, Status::optimal, iters);
      }
      Solution sol = finish(p, s, ip.w, ip.y, Status::optimal, iters);
      const double tol = std::max(opts.tol, 1e-9);
      if (sol.primal_residual <= tol * std::max(1.0, inf_norm(s.b)) &&
          sol.dual_residual <= tol * std::max(1.0, inf_norm(s.c)) * s.scale)
        return sol;
    }
  }

  Eigen::VectorXd y0;
  Alm a = alm(s, w0.size() ? w0 : Eigen::VectorXd::Zero(N), y0, 1e-8, opts.max_iter);
  iters += a.iterations;
  for (int round = 0; round < 4; ++round) {
    const State guess = state_from_point(s, a.w, a.y, 1e-7);
    Pdas pol = pdas(s, guess, &a.w, &a.y, opts.tol, 40);
    iters += pol.iterations;
    if (pol.ok) return finish(p, s, pol.w, pol.y, Status::optimal, iters);
    if (a.diverged) break;
    const double eps = 1e-10 * std::pow(0.01, round);
    a = alm(s, a.w, a.y, eps, opts.max_iter);
    iters += a.iterations;
  }
  Solution sol = finish(p, s, a.w, a.y, Status::max_iter, iters);
  const double tol = std::max(opts.tol, 1e-9);
  if (sol.primal_residual <= tol * std::max(1.0, inf_norm(s.b)) &&
      sol.dual_residual <= tol * std::max(1.0, inf_norm(s.c)) * s.scale)
    sol.status = Status::optimal;
  return sol;
}

}  // namespace

Problem Problem::empty(int n) {
  Problem p;
  p.H.resize(n, n);
  p.c = Eigen::VectorXd::Zero(n);
  p.A.resize(0, n);
  p.b.resize(0);
  p.G.resize(0, n);
  p.h.resize(0);
  p.lo = Eigen::VectorXd::Constant(n, -kInf);
  p.hi = Eigen::VectorXd::Constant(n, kInf);
  return p;
}

const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::infeasible: return "infeasible";
    case Status::unbounded: return "unbounded";
    default: return "max_iter";
  }
}

Solution solve(const Problem& p, const Options& opts) {
  const Std s = standardize(p);
  Solution sol = solve_std(p, s, opts);
  if (sol.status == Status::optimal && !opts.least_norm.empty()) sol = least_norm_refine(p, sol, opts);
  return sol;
}

}  // namespace sbolza::qp
