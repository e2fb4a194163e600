#include "gssctl/robust.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace gssctl {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Disturbance coordinates of stages 0..N-1 (the stacked terminal block is zero).
Index active_w(const StackedSystem& ss) { return ss.n() * ss.N; }

}  // namespace

DisturbanceSet DisturbanceSet::box(const Eigen::VectorXd& half_widths) {
  DisturbanceSet out;
  out.kind = Kind::box;
  out.d = half_widths;
  return out;
}

DisturbanceSet DisturbanceSet::polytope(const Eigen::MatrixXd& M, const Eigen::VectorXd& h) {
  DisturbanceSet out;
  out.kind = Kind::polytope;
  out.M = M;
  out.h = h;
  return out;
}

void DisturbanceSet::validate(Index n) const {
  if (kind == Kind::box) {
    require(d.size() == n, "DisturbanceSet: box needs n half-widths");
    for (Index i = 0; i < n; ++i)
      require(d(i) >= 0.0 && std::isfinite(d(i)), "DisturbanceSet: negative or non-finite half-width");
  } else {
    require(M.cols() == n, "DisturbanceSet: polytope M must have n columns");
    require(M.rows() == h.size() && M.rows() > 0, "DisturbanceSet: polytope M and h disagree");
    require(M.allFinite() && h.allFinite(), "DisturbanceSet: non-finite polytope data");
  }
}

Eigen::VectorXd DisturbanceSet::stacked_half_widths(int N) const {
  require(kind == Kind::box, "stacked_half_widths: box sets only");
  Eigen::VectorXd out(d.size() * N);
  for (int t = 0; t < N; ++t) out.segment(t * d.size(), d.size()) = d;
  return out;
}

std::vector<Eigen::VectorXd> DisturbanceSet::stage_vertices() const {
  std::vector<Eigen::VectorXd> out;
  if (kind == Kind::box) {
    const Index n = d.size();
    require(n < 31, "stage_vertices: box dimension too large");
    for (long mask = 0; mask < (1L << n); ++mask) {
      Eigen::VectorXd w(n);
      for (Index i = 0; i < n; ++i) w(i) = ((mask >> i) & 1) ? d(i) : -d(i);
      out.push_back(w);
    }
    return out;
  }
  // Every n-subset of facets whose intersection point is feasible.
  const Index q = M.rows(), n = M.cols();
  std::vector<Index> pick(static_cast<std::size_t>(n));
  std::vector<bool> sel(static_cast<std::size_t>(q), false);
  std::fill(sel.begin(), sel.begin() + std::min(n, q), true);
  if (n > q) return out;
  const double scale = std::max(1.0, h.lpNorm<Eigen::Infinity>());
  do {
    Index c = 0;
    for (Index i = 0; i < q; ++i)
      if (sel[static_cast<std::size_t>(i)]) pick[static_cast<std::size_t>(c++)] = i;
    Eigen::MatrixXd Ms(n, n);
    Eigen::VectorXd hs(n);
    for (Index k = 0; k < n; ++k) {
      Ms.row(k) = M.row(pick[static_cast<std::size_t>(k)]);
      hs(k) = h(pick[static_cast<std::size_t>(k)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Ms);
    if (lu.rank() < n) continue;
    const Eigen::VectorXd w = lu.solve(hs);
    if (((M * w - h).array() > 1e-9 * scale).any()) continue;
    bool dup = false;
    for (const auto& o : out)
      if ((o - w).lpNorm<Eigen::Infinity>() <= 1e-9 * scale) dup = true;
    if (!dup) out.push_back(w);
  } while (std::prev_permutation(sel.begin(), sel.end()));
  return out;
}

CostSpec CostSpec::zero(Index n, Index m, int N) {
  CostSpec c;
  c.state_weights.assign(static_cast<std::size_t>(N + 1), Eigen::VectorXd::Zero(n));
  c.state_refs.assign(static_cast<std::size_t>(N + 1), Eigen::VectorXd::Zero(n));
  c.input_weights.assign(static_cast<std::size_t>(N), Eigen::VectorXd::Zero(m));
  return c;
}

void CostSpec::validate(Index n, Index m, int N) const {
  require(state_weights.size() == static_cast<std::size_t>(N + 1), "CostSpec: need N+1 state weight vectors");
  require(state_refs.size() == static_cast<std::size_t>(N + 1), "CostSpec: need N+1 state references");
  require(input_weights.size() == static_cast<std::size_t>(N), "CostSpec: need N input weight vectors");
  for (const auto& w : state_weights)
    require(w.size() == n && (w.array() >= 0).all(), "CostSpec: state weights must be nonnegative n-vectors");
  for (const auto& r : state_refs) require(r.size() == n, "CostSpec: state references must be n-vectors");
  for (const auto& w : input_weights)
    require(w.size() == m && (w.array() >= 0).all(), "CostSpec: input weights must be nonnegative m-vectors");
}

double CostSpec::evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& u, int N) const {
  const Index n = state_refs.front().size();
  const Index m = input_weights.empty() ? 0 : input_weights.front().size();
  double j = 0.0;
  for (int k = 0; k <= N; ++k) {
    const Eigen::VectorXd e = x.segment(k * n, n) - state_refs[static_cast<std::size_t>(k)];
    j += e.cwiseProduct(state_weights[static_cast<std::size_t>(k)]).dot(e);
  }
  for (int k = 0; k < N && m > 0; ++k) {
    const Eigen::VectorXd uk = u.segment(k * m, m);
    j += uk.cwiseProduct(input_weights[static_cast<std::size_t>(k)]).dot(uk);
  }
  return j;
}

LinearExpr worst_case_box(QpBuilder& qp, const AffineRow& row, const Eigen::VectorXd& d_stacked) {
  require(static_cast<Index>(row.size()) == d_stacked.size(), "worst_case_box: row and half-widths differ in size");
  LinearExpr bound;
  std::vector<Index> need;
  for (Index j = 0; j < d_stacked.size(); ++j) {
    require(d_stacked(j) >= 0.0, "worst_case_box: negative half-width");
    if (d_stacked(j) == 0.0) continue;
    const LinearExpr& a = row[static_cast<std::size_t>(j)];
    if (a.is_constant())
      bound.constant += d_stacked(j) * std::abs(a.constant);
    else
      need.push_back(j);
  }
  if (need.empty()) return bound;
  const Index off = qp.add_variables("lambda", static_cast<Index>(need.size()));
  for (std::size_t k = 0; k < need.size(); ++k) {
    const Index lam = off + static_cast<Index>(k);
    const LinearExpr& a = row[static_cast<std::size_t>(need[k])];
    LinearExpr plus = a, minus = a;
    plus *= -1.0;
    plus.add(lam, 1.0);  // lam - a >= 0
    minus.add(lam, 1.0);  // lam + a >= 0
    qp.add_row(plus, 0.0, kInf);
    qp.add_row(minus, 0.0, kInf);
    bound.add(lam, d_stacked(need[k]));
  }
  return bound;
}

LinearExpr worst_case_polytope(QpBuilder& qp, const AffineRow& row, const Eigen::MatrixXd& M,
                               const Eigen::VectorXd& h) {
  const Index n = M.cols(), q = M.rows();
  require(n > 0 && static_cast<Index>(row.size()) % n == 0, "worst_case_polytope: row length must be a multiple of n");
  const Index stages = static_cast<Index>(row.size()) / n;
  LinearExpr bound;
  for (Index t = 0; t < stages; ++t) {
    bool all_zero = true;
    for (Index e = 0; e < n; ++e) {
      const LinearExpr& a = row[static_cast<std::size_t>(t * n + e)];
      if (!a.is_constant() || a.constant != 0.0) all_zero = false;
    }
    if (all_zero) continue;
    const Index off = qp.add_variables("dual", q);
    for (Index i = 0; i < q; ++i) {
      LinearExpr nonneg;
      nonneg.add(off + i, 1.0);
      qp.add_row(nonneg, 0.0, kInf);
      bound.add(off + i, h(i));
    }
    // M' z - a_t = 0
    for (Index e = 0; e < n; ++e) {
      LinearExpr eq = row[static_cast<std::size_t>(t * n + e)];
      eq *= -1.0;
      for (Index i = 0; i < q; ++i) eq.add(off + i, M(i, e));
      qp.add_row(eq, 0.0, 0.0);
    }
  }
  return bound;
}

double box_support(const Eigen::VectorXd& a, const Eigen::VectorXd& d_stacked) {
  require(a.size() == d_stacked.size(), "box_support: size mismatch");
  return a.cwiseAbs().dot(d_stacked);
}

Eigen::VectorXd polytope_argmax(const Eigen::VectorXd& a, const Eigen::MatrixXd& M, const Eigen::VectorXd& h) {
  require(a.size() == M.cols() && M.rows() == h.size(), "polytope_argmax: size mismatch");
  QpBuilder b;
  const Index n = M.cols();
  const Index off = b.add_variables("w", n);
  for (Index e = 0; e < n; ++e) b.add_linear(off + e, -a(e));
  for (Index i = 0; i < M.rows(); ++i) {
    LinearExpr r;
    for (Index e = 0; e < n; ++e) r.add(off + e, M(i, e));
    b.add_row(r, -kInf, h(i));
  }
  SolverSettings st;
  st.eps_abs = 1e-10;
  st.eps_rel = 1e-10;
  const SolverResult res = solve(b.build(), st);
  if (res.status == SolverStatus::infeasible) throw std::invalid_argument("polytope_argmax: empty set");
  if (res.status == SolverStatus::unbounded) throw std::invalid_argument("polytope_argmax: unbounded set");
  if (res.status != SolverStatus::optimal) throw std::runtime_error("polytope_argmax: LP did not converge");
  return res.x;
}

double polytope_support(const Eigen::VectorXd& a, const Eigen::MatrixXd& M, const Eigen::VectorXd& h) {
  if (a.isZero(0.0)) return 0.0;
  return a.dot(polytope_argmax(a, M, h));
}

QpProblem assemble_qp(const StackedSystem& ss, const GssSpec& spec, const CostSpec& cost,
                      const DisturbanceSet& dist, bool allow_uncertified) {
  const Index n = ss.n(), m = ss.m();
  const int N = ss.N;
  require(spec.rows() == ss.rows_u() && spec.cols() == ss.cols_y(), "assemble_qp: spec dimensions do not match the stacked system");
  require(ss.F.cols() == ss.rows_u() && ss.G.cols() == n * (N + 1), "assemble_qp: constraints not lifted");
  cost.validate(n, m, N);
  dist.validate(n);
  if (!allow_uncertified) {
    const SparsityCertificate cert = certify_sparsity_preserving(spec.T, spec.Y, ss.Sbold);
    if (!cert.pass) throw std::invalid_argument("assemble_qp: (T, Y) is not certified sparsity preserving");
  }

  QpBuilder b;
  const Index d = spec.dim();
  const Index qoff = b.add_variables("q_params", d);
  const Index nv = ss.rows_u();
  const Index voff = b.add_variables("v", nv);

  // Objective on the nominal trajectory x = Abold x0 + Bbold v.
  Eigen::VectorXd wx(n * (N + 1)), ref(n * (N + 1)), wu = Eigen::VectorXd::Zero(nv);
  for (int k = 0; k <= N; ++k) {
    wx.segment(k * n, n) = cost.state_weights[static_cast<std::size_t>(k)];
    ref.segment(k * n, n) = cost.state_refs[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < N; ++k) wu.segment(k * m, m) = cost.input_weights[static_cast<std::size_t>(k)];
  const Eigen::VectorXd e0 = ss.Abold * ss.x0 - ref;
  const Eigen::MatrixXd WB = wx.asDiagonal() * ss.Bbold;
  const Eigen::MatrixXd hess = 2.0 * (ss.Bbold.transpose() * WB);
  const Eigen::VectorXd lin = 2.0 * (WB.transpose() * e0);
  for (Index j = 0; j < nv; ++j) {
    for (Index i = j; i < nv; ++i) {
      double hv = hess(i, j);
      if (i == j) hv += 2.0 * wu(i);
      b.add_hessian(voff + i, voff + j, hv);
    }
    if (lin(j) != 0.0) b.add_linear(voff + j, lin(j));
  }
  b.add_constant(e0.cwiseProduct(wx).dot(e0));

  // Disturbance response Z = Q P on stages 0..N-1, one variable per
  // structurally nonzero entry.
  const Index nw = active_w(ss);
  const Eigen::MatrixXd Pw = ss.P.leftCols(nw);
  std::map<Index, std::vector<std::pair<Index, Eigen::VectorXd>>> rows_of_q;  // row -> (param, b_k P)
  for (Index k = 0; k < d; ++k) {
    const BasisElement& be = spec.basis[static_cast<std::size_t>(k)];
    Eigen::VectorXd bp = Eigen::VectorXd::Zero(nw);
    for (std::size_t t = 0; t < be.cols.size(); ++t) bp += be.values(static_cast<Index>(t)) * Pw.row(be.cols[t]).transpose();
    rows_of_q[be.row].emplace_back(qoff + k, bp);
  }
  std::map<std::pair<Index, Index>, Index> zvar;
  b.begin_row_group("disturbance_response");
  for (const auto& [r, elems] : rows_of_q) {
    for (Index j = 0; j < nw; ++j) {
      LinearExpr def;
      for (const auto& [var, bp] : elems)
        if (bp(j) != 0.0) def.add(var, -bp(j));
      if (def.is_constant()) continue;
      const Index z = b.add_variables("z", 1);
      def.add(z, 1.0);
      b.add_row(def, 0.0, 0.0);
      zvar.emplace(std::make_pair(r, j), z);
    }
  }

  // Robust rows: F_i v + max_w a_i(w) <= c_i with a_i = F_i Z + G_i.
  b.begin_row_group("robustness");
  std::vector<LinearExpr> bounds;
  const Index nrows = ss.F.rows();
  const Eigen::VectorXd dstack = dist.kind == DisturbanceSet::Kind::box ? dist.stacked_half_widths(N) : Eigen::VectorXd();
  for (Index i = 0; i < nrows; ++i) {
    AffineRow row(static_cast<std::size_t>(nw));
    for (Index j = 0; j < nw; ++j) row[static_cast<std::size_t>(j)].constant = ss.G(i, j);
    for (Index r = 0; r < nv; ++r) {
      const double f = ss.F(i, r);
      if (f == 0.0) continue;
      for (Index j = 0; j < nw; ++j) {
        auto it = zvar.find({r, j});
        if (it != zvar.end()) row[static_cast<std::size_t>(j)].add(it->second, f);
      }
    }
    bounds.push_back(dist.kind == DisturbanceSet::Kind::box ? worst_case_box(b, row, dstack)
                                                            : worst_case_polytope(b, row, dist.M, dist.h));
  }
  b.begin_row_group("constraints");
  for (Index i = 0; i < nrows; ++i) {
    LinearExpr e = bounds[static_cast<std::size_t>(i)];
    for (Index r = 0; r < nv; ++r)
      if (ss.F(i, r) != 0.0) e.add(voff + r, ss.F(i, r));
    b.add_row(e, -kInf, ss.c(i));
  }
  b.begin_row_group("terminal_input");
  for (Index r = m * N; r < nv; ++r) {
    LinearExpr e;
    e.add(voff + r, 1.0);
    b.add_row(e, 0.0, 0.0);
  }
  return b.build();
}

Eigen::VectorXd worst_case_slacks(const StackedSystem& ss, const Eigen::MatrixXd& Q, const Eigen::VectorXd& v,
                                  const DisturbanceSet& dist) {
  const Index nw = active_w(ss);
  const Eigen::MatrixXd Mw = ss.F * (Q * ss.P.leftCols(nw)) + ss.G.leftCols(nw);
  Eigen::VectorXd slack = ss.c - ss.F * v;
  const Index n = ss.n();
  for (Index i = 0; i < Mw.rows(); ++i) {
    if (dist.kind == DisturbanceSet::Kind::box) {
      slack(i) -= box_support(Mw.row(i).transpose(), dist.stacked_half_widths(ss.N));
    } else {
      for (int t = 0; t < ss.N; ++t)
        slack(i) -= polytope_support(Mw.row(i).segment(t * n, n).transpose(), dist.M, dist.h);
    }
  }
  return slack;
}

double nominal_cost(const StackedSystem& ss, const CostSpec& cost, const Eigen::VectorXd& v) {
  const Eigen::VectorXd x = ss.Abold * ss.x0 + ss.Bbold * v;
  return cost.evaluate(x, v, ss.N);
}

SynthesisResult extract_solution(const QpProblem& qp, const SolverResult& raw, const StackedSystem& ss,
                                 const GssSpec& spec, const DisturbanceSet& dist, const BinMatrix& target) {
  SynthesisResult out;
  out.status = raw.status;
  out.iterations = raw.iterations;
  out.prim_res = raw.prim_res;
  out.dual_res = raw.dual_res;
  out.polished = raw.polished;
  out.objective = raw.objective;
  out.sparsity_certified = certify_sparsity_preserving(spec.T, spec.Y, ss.Sbold).pass;
  out.qi_pattern = qi_check_pattern(spec.T, ss.Delta);
  if (raw.status == SolverStatus::infeasible || raw.status == SolverStatus::unbounded) return out;

  const Span& qs = qp.var_span("q_params");
  const Span& vs = qp.var_span("v");
  out.q_params = raw.x.segment(qs.offset, qs.size);
  out.v = raw.x.segment(vs.offset, vs.size);
  out.Q = spec.combine(out.q_params);
  const OutputFeedback fb = q_to_l(out.Q, out.v, ss.CB, ss.CAx0);
  out.L = fb.L;
  out.g = fb.g;
  out.l_violation = sparse_violation(out.L, target);
  out.l_in_target = sparse_member(out.L, target, 1e-6);
  if (!out.l_in_target) out.defect = "recovered L leaves the target pattern";
  out.worst_slacks = worst_case_slacks(ss, out.Q, out.v, dist);
  out.min_slack = out.worst_slacks.size() ? out.worst_slacks.minCoeff() : kInf;
  if (out.min_slack < -1e-6 && out.defect.empty()) out.defect = "worst-case constraint violated";
  return out;
}

SynthesisResult synthesize(const StackedSystem& ss, const GssSpec& spec, const CostSpec& cost,
                           const DisturbanceSet& dist, const SolverSettings& settings, bool allow_uncertified) {
  const QpProblem qp = assemble_qp(ss, spec, cost, dist, allow_uncertified);
  const SolverResult raw = solve(qp, settings);
  const BinMatrix& target = allow_uncertified ? spec.T : ss.Sbold;
  return extract_solution(qp, raw, ss, spec, dist, target);
}

}  // namespace gssctl
