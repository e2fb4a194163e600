#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include "gssctl/qp.hpp"
#include "scaling.hpp"
#include "supernodal.hpp"

namespace gssctl {

namespace {

using Vec = Eigen::VectorXd;
using detail::inf_norm;
using detail::Scaled;

// Scaled problem rewritten as Aeq x = beq, G x <= h.
struct Split {
  SparseMatrix Aeq, G;
  Vec beq, h;
  std::vector<Index> eq_row, g_row;
  std::vector<double> g_sign;  // +1 for an upper bound row, -1 for a lower bound row
};

Split split_rows(const Scaled& s) {
  const Index m = s.A.rows(), n = s.A.cols();
  Split sp;
  std::vector<Index> eq_idx(static_cast<std::size_t>(m), -1), up_idx(static_cast<std::size_t>(m), -1),
      lo_idx(static_cast<std::size_t>(m), -1);
  std::vector<double> beq, h;
  for (Index i = 0; i < m; ++i) {
    const std::size_t ii = static_cast<std::size_t>(i);
    if (s.l(i) == s.u(i)) {
      eq_idx[ii] = static_cast<Index>(sp.eq_row.size());
      sp.eq_row.push_back(i);
      beq.push_back(s.l(i));
      continue;
    }
    if (std::isfinite(s.u(i))) {
      up_idx[ii] = static_cast<Index>(sp.g_row.size());
      sp.g_row.push_back(i);
      sp.g_sign.push_back(1.0);
      h.push_back(s.u(i));
    }
    if (std::isfinite(s.l(i))) {
      lo_idx[ii] = static_cast<Index>(sp.g_row.size());
      sp.g_row.push_back(i);
      sp.g_sign.push_back(-1.0);
      h.push_back(-s.l(i));
    }
  }
  std::vector<Eigen::Triplet<double, int>> te, tg;
  for (int j = 0; j < s.A.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(s.A, j); it; ++it) {
      const std::size_t r = static_cast<std::size_t>(it.row());
      if (eq_idx[r] >= 0) te.emplace_back(static_cast<int>(eq_idx[r]), j, it.value());
      if (up_idx[r] >= 0) tg.emplace_back(static_cast<int>(up_idx[r]), j, it.value());
      if (lo_idx[r] >= 0) tg.emplace_back(static_cast<int>(lo_idx[r]), j, -it.value());
    }
  sp.Aeq.resize(static_cast<Index>(sp.eq_row.size()), n);
  sp.Aeq.setFromTriplets(te.begin(), te.end());
  sp.G.resize(static_cast<Index>(sp.g_row.size()), n);
  sp.G.setFromTriplets(tg.begin(), tg.end());
  sp.beq = Eigen::Map<const Vec>(beq.data(), static_cast<Index>(beq.size()));
  sp.h = Eigen::Map<const Vec>(h.data(), static_cast<Index>(h.size()));
  return sp;
}

// Quasi-definite Newton system [P + dI, Aeq', G'; Aeq, -dI, 0; G, 0, -W].
class Kkt {
 public:
  Kkt(const SparseMatrix& P, const Split& sp, double reg, int refine)
      : P_(P), sp_(sp), n_(P.rows()), me_(sp.Aeq.rows()), mi_(sp.G.rows()), reg_(reg), refine_(refine) {
    std::vector<Eigen::Triplet<double, int>> t;
    for (int j = 0; j < P.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(P, j); it; ++it)
        if (it.row() >= j) t.emplace_back(static_cast<int>(it.row()), j, it.value());
    for (Index j = 0; j < n_; ++j) t.emplace_back(static_cast<int>(j), static_cast<int>(j), reg_);
    for (int j = 0; j < sp.Aeq.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(sp.Aeq, j); it; ++it)
        t.emplace_back(static_cast<int>(n_ + it.row()), j, it.value());
    for (Index i = 0; i < me_; ++i) t.emplace_back(static_cast<int>(n_ + i), static_cast<int>(n_ + i), -reg_);
    for (int j = 0; j < sp.G.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(sp.G, j); it; ++it)
        t.emplace_back(static_cast<int>(n_ + me_ + it.row()), j, it.value());
    for (Index i = 0; i < mi_; ++i)
      t.emplace_back(static_cast<int>(n_ + me_ + i), static_cast<int>(n_ + me_ + i), -1.0);
    K_.resize(n_ + me_ + mi_, n_ + me_ + mi_);
    K_.setFromTriplets(t.begin(), t.end());
    K_.makeCompressed();
    for (Index i = 0; i < mi_; ++i) wdiag_.push_back(&K_.coeffRef(n_ + me_ + i, n_ + me_ + i));
    ldlt_.analyze(K_);
  }

  bool factor(const Vec& w) {
    w_ = w;
    for (Index i = 0; i < mi_; ++i) *wdiag_[static_cast<std::size_t>(i)] = -w(i);
    return ldlt_.factorize(K_);
  }

  // Solve against the unregularized system with iterative refinement.
  // Returns false if refinement fails to reduce the residual.
  bool solve(const Vec& r1, const Vec& r2, const Vec& r3, Vec& dx, Vec& dy, Vec& dz) const {
    Vec rhs(n_ + me_ + mi_);
    rhs << r1, r2, r3;
    Vec sol = ldlt_.solve(rhs);
    const double target = 1e-12 * std::max(1.0, inf_norm(rhs));
    double last = kInf;
    bool ok = false;
    for (int k = 0; k <= refine_; ++k) {
      const Vec x = sol.head(n_), y = sol.segment(n_, me_), z = sol.tail(mi_);
      Vec res(n_ + me_ + mi_);
      res.head(n_) = r1 - (P_ * x + sp_.Aeq.transpose() * y + sp_.G.transpose() * z);
      res.segment(n_, me_) = r2 - sp_.Aeq * x;
      res.tail(mi_) = r3 - (sp_.G * x - w_.cwiseProduct(z));
      const double rn = inf_norm(res);
      if (rn <= target) {
        ok = true;
        break;
      }
      if (!(rn < last)) break;
      last = rn;
      ok = rn <= 1e-6 * std::max(1.0, inf_norm(rhs));
      if (k < refine_) sol += ldlt_.solve(res);
    }
    dx = sol.head(n_);
    dy = sol.segment(n_, me_);
    dz = sol.tail(mi_);
    return ok && sol.allFinite();
  }

 private:
  const SparseMatrix& P_;
  const Split& sp_;
  Index n_, me_, mi_;
  double reg_;
  int refine_;
  SparseMatrix K_;
  std::vector<double*> wdiag_;
  Vec w_;
  detail::SupernodalLdlt ldlt_;
};

double max_step(const Vec& v, const Vec& dv) {
  double a = 1e300;
  for (Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0) a = std::min(a, -v(i) / dv(i));
  return a;
}

}  // namespace

SolverResult InteriorPointSolver::solve(const QpProblem& qp, const SolverSettings& st, const Vec* initial_x) {
  st.validate();
  qp.validate();
  require_psd(qp.P);
  (void)initial_x;  // the central path start does not use a primal guess

  const Index m = qp.num_rows();
  const Scaled s = detail::equilibrate(qp, st.scaling_iter);
  const Split sp = split_rows(s);
  const Index me = sp.Aeq.rows(), mi = sp.G.rows();

  double reg = 1e-9;
  std::unique_ptr<Kkt> kkt;
  Vec x, y, z, sl;
  // Least-squares start, then shift slacks and multipliers into the interior.
  for (int attempt = 0;; ++attempt) {
    kkt = std::make_unique<Kkt>(s.P, sp, reg, 5);
    if (kkt->factor(Vec::Ones(mi))) break;
    if (attempt >= 6) throw std::runtime_error("interior point: KKT factorization failed");
    reg *= 100.0;
  }
  kkt->solve(-s.q, sp.beq, sp.h, x, y, z);
  sl = -z;
  if (mi > 0) {
    sl.array() += std::max(-1.5 * sl.minCoeff(), 0.0) + 1e-8;
    z.array() += std::max(-1.5 * z.minCoeff(), 0.0) + 1e-8;
    const double sz = sl.dot(z);
    const double ds = 0.5 * sz / z.sum(), dz = 0.5 * sz / sl.sum();
    sl.array() += ds;
    z.array() += dz;
  }

  SolverResult res;
  res.status = SolverStatus::max_iter;
  struct Check {
    double prim = 0, dual = 0, prim_tol = 0, dual_tol = 0, obj = 0;
    bool ok() const { return prim <= prim_tol && dual <= dual_tol; }
  };
  auto check = [&](const Vec& xu, const Vec& yu) {
    Check c;
    const Vec ax = qp.A * xu;
    for (Index i = 0; i < m; ++i) c.prim = std::max({c.prim, ax(i) - qp.u(i), qp.l(i) - ax(i)});
    const Vec px = qp.P * xu, aty = qp.A.transpose() * yu;
    c.dual = inf_norm(px + qp.q + aty);
    c.prim_tol = st.eps_abs + st.eps_rel * inf_norm(ax);
    c.dual_tol = st.eps_abs + st.eps_rel * std::max({inf_norm(px), inf_norm(aty), inf_norm(qp.q)});
    c.obj = qp.objective(xu);
    return c;
  };
  auto full_dual = [&](const Vec& ys, const Vec& zs) {
    Vec yfull = Vec::Zero(m);
    for (Index k = 0; k < me; ++k) yfull(sp.eq_row[static_cast<std::size_t>(k)]) += ys(k);
    for (Index k = 0; k < mi; ++k)
      yfull(sp.g_row[static_cast<std::size_t>(k)]) += sp.g_sign[static_cast<std::size_t>(k)] * zs(k);
    return yfull;
  };
  auto record = [&](const Vec& xu, const Vec& yu, const Check& c, int iters) {
    res.x = xu;
    res.y = yu;
    res.objective = c.obj;
    res.prim_res = c.prim;
    res.dual_res = c.dual;
    res.iterations = iters;
  };
  // Active-set solve from the current iterate; accepted only if it meets the tolerances.
  auto try_polish = [&](int iters) {
    if (!st.polish) return false;
    const detail::PolishOutcome pol = detail::polish(s, x, s.A * x, full_dual(y, z), st);
    if (!pol.ok) return false;
    const Vec xu = s.D.cwiseProduct(pol.x), yu = s.E.cwiseProduct(pol.y) / s.c;
    const Check c = check(xu, yu);
    if (st.verbose) std::fprintf(stderr, "ipm polish: prim=%.2e dual=%.2e obj=%.10g\n", c.prim, c.dual, c.obj);
    if (!c.ok()) return false;
    record(xu, yu, c, iters);
    res.status = SolverStatus::optimal;
    res.polished = true;
    return true;
  };

  Vec dx, dy, dz, ds, dxa, dya, dza, dsa;
  for (int it = 0; it <= st.ipm_max_iter; ++it) {
    const Vec rd = s.P * x + s.q + sp.Aeq.transpose() * y + sp.G.transpose() * z;
    const Vec rp = sp.Aeq * x - sp.beq;
    const Vec rg = sp.G * x + sl - sp.h;
    const double mu = mi > 0 ? sl.dot(z) / static_cast<double>(mi) : 0.0;

    const Vec xu = s.D.cwiseProduct(x), yu = s.E.cwiseProduct(full_dual(y, z)) / s.c;
    const Check c = check(xu, yu);
    const double gap = std::abs(sl.dot(z)) / s.c;
    const double gap_scale = std::max(1.0, std::abs(c.obj));
    record(xu, yu, c, it);
    if (st.verbose)
      std::fprintf(stderr, "ipm it=%d prim=%.2e (%.1e) dual=%.2e (%.1e) gap=%.2e obj=%.10g\n", it, c.prim,
                   c.prim_tol, c.dual, c.dual_tol, gap, c.obj);
    if (c.ok() && gap <= st.eps_abs + st.eps_rel * gap_scale) {
      res.status = SolverStatus::optimal;
      // A polished point replaces the interior one only if it also passes.
      try_polish(it);
      return res;
    }
    if (it == st.ipm_max_iter) break;

    const Vec w = sl.cwiseQuotient(z);
    double alpha = 0.0;
    bool solved = false;
    while (!solved) {
      if (kkt->factor(w)) {
        // Predictor.
        solved = kkt->solve(-rd, -rp, -rg + sl, dxa, dya, dza);
        dsa = -sl - w.cwiseProduct(dza);
        alpha = mi > 0 ? std::min({1.0, max_step(sl, dsa), max_step(z, dza)}) : 1.0;
        Vec rc = Vec::Zero(mi);
        if (mi > 0) {
          const double mu_aff = (sl + alpha * dsa).dot(z + alpha * dza) / static_cast<double>(mi);
          const double sigma = std::pow(std::max(0.0, mu_aff) / mu, 3);
          rc = -sl.cwiseProduct(z) - dsa.cwiseProduct(dza) + Vec::Constant(mi, sigma * mu);
        }
        // Corrector.
        solved = kkt->solve(-rd, -rp, -rg - rc.cwiseQuotient(z), dx, dy, dz) && solved;
        ds = (rc - sl.cwiseProduct(dz)).cwiseQuotient(z);
      }
      if (!solved) {
        reg *= 10.0;
        if (reg > 1e-3) {
          try_polish(res.iterations);
          return res;
        }
        if (st.verbose) std::fprintf(stderr, "ipm: regularization raised to %.0e\n", reg);
        kkt = std::make_unique<Kkt>(s.P, sp, reg, 5);
      }
    }
    alpha = mi > 0 ? std::min(1.0, 0.99 * std::min(max_step(sl, ds), max_step(z, dz))) : 1.0;
    if (alpha < 1e-12) {
      try_polish(res.iterations);
      return res;
    }
    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    sl += alpha * ds;
  }
  try_polish(res.iterations);
  return res;
}

}  // namespace gssctl
