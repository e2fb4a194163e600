#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <Eigen/SparseCholesky>

#include "gssctl/qp.hpp"
#include "scaling.hpp"

namespace gssctl {

namespace {

using Vec = Eigen::VectorXd;
using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
using detail::Scaled;
using detail::equilibrate;
using detail::inf_norm;
using detail::PolishOutcome;
using detail::polish;

constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqualityFactor = 1e3;

// Lower triangle of [P + sigma I, A'; A, -diag(1/rho)].
SparseMatrix assemble_kkt(const SparseMatrix& P, const SparseMatrix& A, double sigma, const Vec& rho) {
  const Index n = P.rows(), m = A.rows();
  std::vector<Eigen::Triplet<double, int>> t;
  t.reserve(static_cast<std::size_t>(P.nonZeros() + A.nonZeros() + n + m));
  for (int j = 0; j < P.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(P, j); it; ++it)
      if (it.row() >= j) t.emplace_back(static_cast<int>(it.row()), j, it.value());
  for (Index j = 0; j < n; ++j) t.emplace_back(static_cast<int>(j), static_cast<int>(j), sigma);
  for (int j = 0; j < A.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(A, j); it; ++it)
      t.emplace_back(static_cast<int>(n + it.row()), j, it.value());
  for (Index i = 0; i < m; ++i)
    t.emplace_back(static_cast<int>(n + i), static_cast<int>(n + i), -1.0 / rho(i));
  SparseMatrix K(n + m, n + m);
  K.setFromTriplets(t.begin(), t.end());
  K.makeCompressed();
  return K;
}

// Rough operation counts used to decide how often a refactorization pays off.
int rho_update_interval(const Ldlt& ldlt) {
  const auto& L = ldlt.matrixL().nestedExpression();
  double factor = 0.0, solve = 0.0;
  for (int j = 0; j < L.outerSize(); ++j) {
    const double cnt = static_cast<double>(L.outerIndexPtr()[j + 1] - L.outerIndexPtr()[j]);
    factor += cnt * cnt;
    solve += 4.0 * cnt;
  }
  solve += 1.0;
  const double ratio = 0.4 * factor / solve;
  return static_cast<int>(std::clamp(ratio, 25.0, 2000.0));
}

Vec make_rho(const Vec& l, const Vec& u, double rho) {
  Vec out(l.size());
  for (Index i = 0; i < l.size(); ++i) {
    if (!std::isfinite(l(i)) && !std::isfinite(u(i)))
      out(i) = kRhoMin;
    else if (l(i) == u(i))
      out(i) = kRhoEqualityFactor * rho;
    else
      out(i) = rho;
  }
  return out;
}

struct Residuals {
  double prim = 0, dual = 0, prim_tol = 0, dual_tol = 0;
  double prim_scaled_rel = 0, dual_scaled_rel = 0;
};

Residuals compute_residuals(const Scaled& s, const Vec& x, const Vec& z, const Vec& y,
                            const SolverSettings& st) {
  Residuals r;
  const Vec ax = s.A * x;
  const Vec px = s.P * x;
  const Vec aty = s.A.transpose() * y;
  const Vec einv = s.E.cwiseInverse();
  const Vec dinv = s.D.cwiseInverse();
  const double cinv = 1.0 / s.c;

  r.prim = inf_norm(einv.cwiseProduct(ax - z));
  r.dual = cinv * inf_norm(dinv.cwiseProduct(px + s.q + aty));
  r.prim_tol = st.eps_abs + st.eps_rel * std::max(inf_norm(einv.cwiseProduct(ax)), inf_norm(einv.cwiseProduct(z)));
  r.dual_tol = st.eps_abs + st.eps_rel * cinv *
                                std::max({inf_norm(dinv.cwiseProduct(px)), inf_norm(dinv.cwiseProduct(aty)),
                                          inf_norm(dinv.cwiseProduct(s.q))});

  const double pden = std::max({inf_norm(ax), inf_norm(z), 1e-10});
  const double dden = std::max({inf_norm(px), inf_norm(aty), inf_norm(s.q), 1e-10});
  r.prim_scaled_rel = inf_norm(ax - z) / pden;
  r.dual_scaled_rel = inf_norm(px + s.q + aty) / dden;
  return r;
}

bool primal_infeasible(const Scaled& s, const Vec& dy, double eps) {
  const double norm = inf_norm(s.E.cwiseProduct(dy));
  if (norm < 1e-20) return false;
  const Vec aty = s.D.cwiseInverse().cwiseProduct(s.A.transpose() * dy);
  if (inf_norm(aty) > eps * norm) return false;
  double support = 0.0;
  for (Index i = 0; i < dy.size(); ++i) {
    if (dy(i) > 0) {
      if (!std::isfinite(s.u(i))) return false;
      support += s.u(i) * dy(i);
    } else if (dy(i) < 0) {
      if (!std::isfinite(s.l(i))) return false;
      support += s.l(i) * dy(i);
    }
  }
  return support < -eps * norm;
}

bool dual_infeasible(const Scaled& s, const Vec& dx, double eps) {
  const Vec dxu = s.D.cwiseProduct(dx);
  const double norm = inf_norm(dxu);
  if (norm < 1e-20) return false;
  const double cinv = 1.0 / s.c;
  const Vec pdx = cinv * s.D.cwiseInverse().cwiseProduct(s.P * dx);
  if (inf_norm(pdx) > eps * norm) return false;
  if (cinv * s.q.dot(dx) >= -eps * norm) return false;
  const Vec adx = s.E.cwiseInverse().cwiseProduct(s.A * dx);
  for (Index i = 0; i < adx.size(); ++i) {
    if (std::isfinite(s.u(i)) && adx(i) > eps * norm) return false;
    if (std::isfinite(s.l(i)) && adx(i) < -eps * norm) return false;
  }
  return true;
}

}  // namespace

SolverResult AdmmSolver::solve(const QpProblem& qp, const SolverSettings& st, const Vec* initial_x) {
  st.validate();
  qp.validate();
  require_psd(qp.P);

  const Index n = qp.num_vars(), m = qp.num_rows();
  const Scaled s = equilibrate(qp, st.scaling_iter);

  Vec rho = make_rho(s.l, s.u, st.rho);
  double rho_scalar = st.rho;
  SparseMatrix K = assemble_kkt(s.P, s.A, st.sigma, rho);
  Ldlt ldlt;
  ldlt.analyzePattern(K);
  ldlt.factorize(K);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("ADMM: KKT factorization failed");
  const int rho_interval = rho_update_interval(ldlt);

  Vec x = Vec::Zero(n), z = Vec::Zero(m), y = Vec::Zero(m);
  if (initial_x) {
    if (initial_x->size() != n) throw std::invalid_argument("ADMM: initial point has wrong size");
    x = s.D.cwiseInverse().cwiseProduct(*initial_x);
    z = (s.A * x).cwiseMax(s.l).cwiseMin(s.u);
  }

  SolverResult res;
  Vec rhs(n + m), xt(n), zt(m), ztmp(m), x_prev(n), y_prev(m);
  Residuals rr;
  bool converged = false;
  int iter = 0;
  for (iter = 1; iter <= st.max_iter; ++iter) {
    x_prev = x;
    y_prev = y;
    rhs.head(n) = st.sigma * x - s.q;
    rhs.tail(m) = z - y.cwiseQuotient(rho);
    const Vec sol = ldlt.solve(rhs);
    xt = sol.head(n);
    zt = z + (sol.tail(m) - y).cwiseQuotient(rho);
    x = st.alpha * xt + (1.0 - st.alpha) * x_prev;
    ztmp = st.alpha * zt + (1.0 - st.alpha) * z;
    z = (ztmp + y.cwiseQuotient(rho)).cwiseMax(s.l).cwiseMin(s.u);
    y += rho.cwiseProduct(ztmp - z);

    const bool check = (iter % st.check_interval == 0) || iter == st.max_iter;
    if (!check) continue;

    rr = compute_residuals(s, x, z, y, st);
    if (st.verbose && iter % (st.check_interval * 100) == 0)
      std::fprintf(stderr, "admm it=%d prim=%.3e (%.1e) dual=%.3e (%.1e) rho=%.2e\n", iter, rr.prim,
                   rr.prim_tol, rr.dual, rr.dual_tol, rho_scalar);
    if (rr.prim <= rr.prim_tol && rr.dual <= rr.dual_tol) {
      converged = true;
      break;
    }
    if (primal_infeasible(s, y - y_prev, st.eps_prim_inf)) {
      res.status = SolverStatus::infeasible;
      break;
    }
    if (dual_infeasible(s, x - x_prev, st.eps_dual_inf)) {
      res.status = SolverStatus::unbounded;
      break;
    }
    if (st.adaptive_rho && iter % rho_interval == 0) {
      double ratio = std::sqrt(rr.prim_scaled_rel / std::max(rr.dual_scaled_rel, 1e-30));
      double cand = std::clamp(rho_scalar * ratio, kRhoMin, kRhoMax);
      if (cand > 5.0 * rho_scalar || cand < 0.2 * rho_scalar) {
        rho_scalar = cand;
        rho = make_rho(s.l, s.u, rho_scalar);
        for (Index i = 0; i < m; ++i) K.coeffRef(n + i, n + i) = -1.0 / rho(i);
        ldlt.factorize(K);
        if (ldlt.info() != Eigen::Success) throw std::runtime_error("ADMM: KKT refactorization failed");
      }
    }
  }
  res.iterations = std::min(iter, st.max_iter);

  if (converged) {
    res.status = SolverStatus::optimal;
    if (st.polish) {
      PolishOutcome pol = polish(s, x, z, y, st);
      if (pol.ok) {
        const Residuals pr = compute_residuals(s, pol.x, pol.z, pol.y, st);
        // The polished point is judged on unscaled infeasibility of A x itself.
        const Vec ax = s.E.cwiseInverse().cwiseProduct(s.A * pol.x);
        double viol = 0.0;
        for (Index i = 0; i < m; ++i) {
          const double lo = std::isfinite(s.l(i)) ? s.l(i) / s.E(i) : -kInf;
          const double hi = std::isfinite(s.u(i)) ? s.u(i) / s.E(i) : kInf;
          viol = std::max({viol, ax(i) - hi, lo - ax(i)});
        }
        const double prim_pol = std::max(pr.prim, viol);
        if (st.verbose)
          std::fprintf(stderr, "polish: prim %.3e -> %.3e, dual %.3e -> %.3e\n", rr.prim, prim_pol, rr.dual, pr.dual);
        if (prim_pol <= std::max(rr.prim, 1e-10) * 1.0000001 && pr.dual <= std::max(rr.dual, 1e-10) * 1.0000001) {
          x = pol.x;
          y = pol.y;
          z = pol.z;
          rr.prim = prim_pol;
          rr.dual = pr.dual;
          res.polished = true;
        }
      }
    }
  }

  res.x = s.D.cwiseProduct(x);
  res.y = s.E.cwiseProduct(y) / s.c;
  res.objective = qp.objective(res.x);
  if (!converged && res.status != SolverStatus::infeasible && res.status != SolverStatus::unbounded) {
    rr = compute_residuals(s, x, z, y, st);
    res.status = SolverStatus::max_iter;
  }
  res.prim_res = rr.prim;
  res.dual_res = rr.dual;
  return res;
}

}  // namespace gssctl
