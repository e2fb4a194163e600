#include <cmath>
#include <vector>

#include <Eigen/SparseCholesky>

#include "scaling.hpp"

namespace gssctl::detail {

namespace {
using Vec = Eigen::VectorXd;
using Ldlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
}  // namespace

PolishOutcome polish(const Scaled& s, const Vec& x, const Vec& z, const Vec& y, const SolverSettings& st) {
  const Index n = s.P.rows(), m = s.A.rows();
  std::vector<Index> act;
  Vec bound;
  std::vector<double> bvals;
  std::vector<int> side;  // -1 lower, +1 upper
  for (Index i = 0; i < m; ++i) {
    const bool lower = std::isfinite(s.l(i)) && (z(i) - s.l(i) < -y(i));
    const bool upper = std::isfinite(s.u(i)) && (s.u(i) - z(i) < y(i));
    if (s.l(i) == s.u(i)) {
      act.push_back(i);
      bvals.push_back(s.l(i));
      side.push_back(0);
    } else if (lower) {
      act.push_back(i);
      bvals.push_back(s.l(i));
      side.push_back(-1);
    } else if (upper) {
      act.push_back(i);
      bvals.push_back(s.u(i));
      side.push_back(1);
    }
  }
  const Index na = static_cast<Index>(act.size());

  // Rows of A restricted to the active set.
  std::vector<Index> pos(static_cast<std::size_t>(m), -1);
  for (Index k = 0; k < na; ++k) pos[static_cast<std::size_t>(act[static_cast<std::size_t>(k)])] = k;
  std::vector<Eigen::Triplet<double, int>> ta;
  for (int j = 0; j < s.A.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(s.A, j); it; ++it) {
      const Index k = pos[static_cast<std::size_t>(it.row())];
      if (k >= 0) ta.emplace_back(static_cast<int>(k), j, it.value());
    }
  SparseMatrix Aact(na, n);
  Aact.setFromTriplets(ta.begin(), ta.end());

  const double delta = st.polish_delta;
  std::vector<Eigen::Triplet<double, int>> t;
  for (int j = 0; j < s.P.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(s.P, j); it; ++it)
      if (it.row() >= j) t.emplace_back(static_cast<int>(it.row()), j, it.value());
  for (Index j = 0; j < n; ++j) t.emplace_back(static_cast<int>(j), static_cast<int>(j), delta);
  for (int j = 0; j < Aact.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(Aact, j); it; ++it)
      t.emplace_back(static_cast<int>(n + it.row()), j, it.value());
  for (Index k = 0; k < na; ++k) t.emplace_back(static_cast<int>(n + k), static_cast<int>(n + k), -delta);
  SparseMatrix K(n + na, n + na);
  K.setFromTriplets(t.begin(), t.end());

  Ldlt ldlt(K);
  PolishOutcome out;
  if (ldlt.info() != Eigen::Success) return out;

  Vec rhs(n + na);
  rhs.head(n) = -s.q;
  for (Index k = 0; k < na; ++k) rhs(n + k) = bvals[static_cast<std::size_t>(k)];
  // Regularize around the current iterate so directions the active set does
  // not pin down stay where ADMM left them.
  Vec rhs_reg = rhs;
  rhs_reg.head(n) += delta * x;
  Vec sol = ldlt.solve(rhs_reg);
  // Iterative refinement against the unregularized system.
  for (int it = 0; it < st.polish_refine_iter; ++it) {
    Vec r(n + na);
    const Vec xs = sol.head(n), ys = sol.tail(na);
    r.head(n) = rhs.head(n) - (s.P * xs + Aact.transpose() * ys);
    r.tail(na) = rhs.tail(na) - Aact * xs;
    sol += ldlt.solve(r);
  }
  if (!sol.allFinite()) return out;

  out.x = sol.head(n);
  out.y = Vec::Zero(m);
  for (Index k = 0; k < na; ++k) {
    double yk = sol(n + k);
    const int sd = side[static_cast<std::size_t>(k)];
    // Multipliers with the wrong sign are clipped; the dual residual then
    // exposes a wrong active-set guess.
    if (sd < 0) yk = std::min(yk, 0.0);
    if (sd > 0) yk = std::max(yk, 0.0);
    out.y(act[static_cast<std::size_t>(k)]) = yk;
  }
  out.z = (s.A * out.x).cwiseMax(s.l).cwiseMin(s.u);
  out.ok = true;
  return out;
}

}  // namespace gssctl::detail
