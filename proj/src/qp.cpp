#include "gssctl/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SparseCholesky>

namespace gssctl {

const Span* QpProblem::find_var_span(const std::string& name) const {
  for (const auto& s : vars)
    if (s.name == name) return &s;
  return nullptr;
}

const Span& QpProblem::var_span(const std::string& name) const {
  if (const Span* s = find_var_span(name)) return *s;
  throw std::out_of_range("QpProblem: no variable block named '" + name + "'");
}

double QpProblem::objective(const Eigen::VectorXd& x) const {
  return 0.5 * x.dot(P * x) + q.dot(x) + constant;
}

void QpProblem::validate() const {
  const Index n = q.size();
  const Index m = l.size();
  if (P.rows() != n || P.cols() != n) throw std::invalid_argument("QpProblem: P must be n x n");
  if (A.rows() != m || A.cols() != n) throw std::invalid_argument("QpProblem: A must be m x n");
  if (u.size() != m) throw std::invalid_argument("QpProblem: l and u sizes differ");
  for (Index i = 0; i < m; ++i)
    if (!(l(i) <= u(i))) throw std::invalid_argument("QpProblem: lower bound exceeds upper bound");
}

LinearExpr& LinearExpr::operator+=(const LinearExpr& other) {
  terms.insert(terms.end(), other.terms.begin(), other.terms.end());
  constant += other.constant;
  return *this;
}

LinearExpr& LinearExpr::operator*=(double s) {
  for (auto& t : terms) t.second *= s;
  constant *= s;
  return *this;
}

double LinearExpr::evaluate(const Eigen::VectorXd& x) const {
  double acc = constant;
  for (const auto& [v, c] : terms) acc += c * x(v);
  return acc;
}

Index QpBuilder::add_variables(const std::string& name, Index count) {
  const Index off = nvars_;
  if (!vars_.empty() && vars_.back().name == name && vars_.back().offset + vars_.back().size == off)
    vars_.back().size += count;
  else
    vars_.push_back({name, off, count});
  nvars_ += count;
  return off;
}

void QpBuilder::close_row_group() {
  if (!rows_.empty()) rows_.back().size = num_rows() - rows_.back().offset;
}

void QpBuilder::begin_row_group(const std::string& name) {
  close_row_group();
  rows_.push_back({name, num_rows(), 0});
}

Index QpBuilder::add_row(const LinearExpr& expr, double lo, double hi) {
  const Index row = num_rows();
  for (const auto& [v, c] : expr.terms) {
    if (v < 0 || v >= nvars_) throw std::out_of_range("QpBuilder::add_row: variable out of range");
    a_.emplace_back(static_cast<int>(row), static_cast<int>(v), c);
  }
  lower_.push_back(lo - expr.constant);
  upper_.push_back(hi - expr.constant);
  return row;
}

void QpBuilder::add_hessian(Index i, Index j, double value) {
  if (value == 0.0) return;
  p_.emplace_back(static_cast<int>(i), static_cast<int>(j), value);
  if (i != j) p_.emplace_back(static_cast<int>(j), static_cast<int>(i), value);
}

void QpBuilder::add_linear(Index i, double value) { linear_.emplace_back(i, value); }

QpProblem QpBuilder::build() const {
  QpProblem qp;
  const Index n = nvars_;
  const Index m = num_rows();
  qp.P.resize(n, n);
  qp.P.setFromTriplets(p_.begin(), p_.end());
  qp.P.makeCompressed();
  qp.A.resize(m, n);
  qp.A.setFromTriplets(a_.begin(), a_.end());
  qp.A.makeCompressed();
  qp.q = Eigen::VectorXd::Zero(n);
  for (const auto& [i, v] : linear_) qp.q(i) += v;
  qp.l = Eigen::Map<const Eigen::VectorXd>(lower_.data(), m);
  qp.u = Eigen::Map<const Eigen::VectorXd>(upper_.data(), m);
  qp.constant = constant_;
  qp.vars = vars_;
  qp.rows = rows_;
  if (!qp.rows.empty()) qp.rows.back().size = m - qp.rows.back().offset;
  return qp;
}

void SolverSettings::validate() const {
  if (!(eps_abs > 0) || !(eps_rel > 0)) throw std::invalid_argument("SolverSettings: tolerances must be positive");
  if (!(alpha > 0 && alpha < 2)) throw std::invalid_argument("SolverSettings: alpha must lie in (0, 2)");
  if (!(rho > 0) || !(sigma > 0)) throw std::invalid_argument("SolverSettings: rho and sigma must be positive");
  if (max_iter < 1 || ipm_max_iter < 1) throw std::invalid_argument("SolverSettings: max_iter must be positive");
}

const char* to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::optimal: return "optimal";
    case SolverStatus::max_iter: return "max_iter";
    case SolverStatus::infeasible: return "infeasible";
    case SolverStatus::unbounded: return "unbounded";
  }
  return "unknown";
}

SolverResult solve(const QpProblem& qp, const SolverSettings& settings) {
  if (settings.method == SolverMethod::admm) return AdmmSolver().solve(qp, settings, nullptr);
  SolverResult res = InteriorPointSolver().solve(qp, settings, nullptr);
  if (res.status != SolverStatus::max_iter) return res;
  SolverResult alt = AdmmSolver().solve(qp, settings, nullptr);
  return alt.status == SolverStatus::max_iter ? res : alt;
}

std::pair<double, double> kkt_residuals(const QpProblem& qp, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y) {
  const Eigen::VectorXd ax = qp.A * x;
  double prim = 0.0;
  for (Index i = 0; i < ax.size(); ++i) {
    const double viol = std::max(ax(i) - qp.u(i), qp.l(i) - ax(i));
    prim = std::max(prim, viol);
  }
  const Eigen::VectorXd grad = qp.P * x + qp.q + qp.A.transpose() * y;
  const double dual = grad.size() ? grad.lpNorm<Eigen::Infinity>() : 0.0;
  return {prim, dual};
}

void require_psd(const SparseMatrix& P) {
  if (P.rows() != P.cols()) throw std::invalid_argument("require_psd: P must be square");
  const Index n = P.rows();
  if (n == 0) return;
  double scale = 1.0;
  for (Index j = 0; j < n; ++j) scale = std::max(scale, std::abs(P.coeff(j, j)));
  SparseMatrix shifted = P;
  for (Index j = 0; j < n; ++j) shifted.coeffRef(j, j) += 1e-10 * scale;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success)
    throw std::invalid_argument("objective Hessian is not positive semidefinite");
  const Eigen::VectorXd d = ldlt.vectorD();
  for (Index j = 0; j < d.size(); ++j)
    if (!(d(j) > 0.0)) throw std::invalid_argument("objective Hessian is not positive semidefinite");
}

}  // namespace gssctl
