#include "scaling.hpp"

#include <algorithm>
#include <cmath>

namespace gssctl::detail {

namespace {

using Vec = Eigen::VectorXd;

constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;

double clamp_scaling(double v) {
  if (v < kMinScaling) return 1.0;
  return std::min(v, kMaxScaling);
}

Vec col_inf_norms(const SparseMatrix& M) {
  Vec out = Vec::Zero(M.cols());
  for (int j = 0; j < M.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(M, j); it; ++it) out(j) = std::max(out(j), std::abs(it.value()));
  return out;
}

Vec row_inf_norms(const SparseMatrix& M) {
  Vec out = Vec::Zero(M.rows());
  for (int j = 0; j < M.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(M, j); it; ++it)
      out(it.row()) = std::max(out(it.row()), std::abs(it.value()));
  return out;
}

}  // namespace

Scaled equilibrate(const QpProblem& qp, int iterations) {
  Scaled s;
  s.P = qp.P;
  s.A = qp.A;
  s.q = qp.q;
  const Index n = qp.num_vars(), m = qp.num_rows();
  s.D = Vec::Ones(n);
  s.E = Vec::Ones(m);
  for (int it = 0; it < iterations; ++it) {
    const Vec np = col_inf_norms(s.P);
    const Vec na = col_inf_norms(s.A);
    const Vec nr = row_inf_norms(s.A);
    Vec dt(n), et(m);
    for (Index j = 0; j < n; ++j) dt(j) = 1.0 / std::sqrt(clamp_scaling(std::max(np(j), na(j))));
    for (Index i = 0; i < m; ++i) et(i) = 1.0 / std::sqrt(clamp_scaling(nr(i)));
    s.P = dt.asDiagonal() * s.P * dt.asDiagonal();
    s.A = et.asDiagonal() * s.A * dt.asDiagonal();
    s.q = dt.cwiseProduct(s.q);
    s.D = s.D.cwiseProduct(dt);
    s.E = s.E.cwiseProduct(et);

    const Vec npc = col_inf_norms(s.P);
    const double mean_p = n ? npc.mean() : 0.0;
    const double gamma = 1.0 / clamp_scaling(std::max(mean_p, inf_norm(s.q)));
    s.P *= gamma;
    s.q *= gamma;
    s.c *= gamma;
  }
  s.l = qp.l;
  s.u = qp.u;
  for (Index i = 0; i < m; ++i) {
    if (std::isfinite(s.l(i))) s.l(i) *= s.E(i);
    if (std::isfinite(s.u(i))) s.u(i) *= s.E(i);
  }
  s.P.makeCompressed();
  s.A.makeCompressed();
  return s;
}

}  // namespace gssctl::detail
