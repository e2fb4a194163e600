#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double objective(const MatrixXd& H, const VectorXd& f, const VectorXd& x) {
  return 0.5 * x.dot(H * x) + f.dot(x);
}

// Goldfarb-Idnani on A x <= b with H positive definite.
QpSolution goldfarb_idnani(const MatrixXd& H, const VectorXd& f, const MatrixXd& A, const VectorXd& b) {
  const Index n = H.rows(), m = A.rows();
  QpSolution out;
  Eigen::LLT<MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) throw std::invalid_argument("goldfarb_idnani: H not positive definite");
  // J = L^{-T} Q, R upper triangular with Q' L^{-1} N = [R; 0] for the active normals N.
  MatrixXd J = llt.matrixU().solve(MatrixXd::Identity(n, n));
  MatrixXd R = MatrixXd::Zero(n, n);
  VectorXd x = -llt.solve(f);
  std::vector<Index> active;
  std::vector<double> u;
  Index q = 0;

  auto add = [&](const VectorXd& np) {
    VectorXd d = J.transpose() * np;
    for (Index j = n - 1; j > q; --j) {
      const double h = std::hypot(d(j - 1), d(j));
      if (h == 0.0) continue;
      const double c = d(j - 1) / h, s = d(j) / h;
      d(j - 1) = h;
      d(j) = 0.0;
      const VectorXd a = J.col(j - 1), bcol = J.col(j);
      J.col(j - 1) = c * a + s * bcol;
      J.col(j) = -s * a + c * bcol;
    }
    R.col(q).head(q + 1) = d.head(q + 1);
    ++q;
  };
  auto drop = [&](Index k) {
    for (Index j = k; j + 1 < q; ++j) R.col(j) = R.col(j + 1);
    R.col(q - 1).setZero();
    for (Index j = k; j + 1 < q; ++j) {
      const double h = std::hypot(R(j, j), R(j + 1, j));
      if (h == 0.0) continue;
      const double c = R(j, j) / h, s = R(j + 1, j) / h;
      for (Index col = j; col + 1 < q; ++col) {
        const double r1 = R(j, col), r2 = R(j + 1, col);
        R(j, col) = c * r1 + s * r2;
        R(j + 1, col) = -s * r1 + c * r2;
      }
      const VectorXd a = J.col(j), bcol = J.col(j + 1);
      J.col(j) = c * a + s * bcol;
      J.col(j + 1) = -s * a + c * bcol;
    }
    active.erase(active.begin() + k);
    u.erase(u.begin() + k);
    --q;
  };

  const double scale = 1.0 + A.cwiseAbs().maxCoeff() + b.cwiseAbs().maxCoeff();
  for (long iter = 0; iter < 50 * (m + n) + 1000; ++iter) {
    const VectorXd slack = b - A * x;
    Index p = -1;
    double worst = 0.0;
    for (Index i = 0; i < m; ++i) {
      if (std::find(active.begin(), active.end(), i) != active.end()) continue;
      const double tol = 1e-11 * (1.0 + std::abs(b(i)) + A.row(i).cwiseAbs().dot(x.cwiseAbs()));
      const double s = slack(i) / (1.0 + A.row(i).norm());
      if (slack(i) < -tol && s < worst) {
        worst = s;
        p = i;
      }
    }
    if (p < 0) {
      out.feasible = true;
      out.x = x;
      out.objective = objective(H, f, x);
      return out;
    }
    const VectorXd np = -A.row(p).transpose();
    double up = 0.0;
    for (;;) {
      const VectorXd d = J.transpose() * np;
      const VectorXd z = J.rightCols(n - q) * d.tail(n - q);
      const VectorXd r = R.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));
      double t1 = kInf;
      Index l = -1;
      for (Index j = 0; j < q; ++j)
        if (r(j) > 1e-14 * scale && u[static_cast<std::size_t>(j)] / r(j) < t1) {
          t1 = u[static_cast<std::size_t>(j)] / r(j);
          l = j;
        }
      const double sp = b(p) - A.row(p).dot(x);
      const double zn = z.dot(np);
      const double t2 = (z.norm() > 1e-13 * scale && zn > 0.0) ? -sp / zn : kInf;
      if (t1 == kInf && t2 == kInf) return out;  // infeasible
      if (t2 == kInf) {
        for (Index j = 0; j < q; ++j) u[static_cast<std::size_t>(j)] -= t1 * r(j);
        up += t1;
        drop(l);
        continue;
      }
      const double t = std::min(t1, t2);
      x += t * z;
      for (Index j = 0; j < q; ++j) u[static_cast<std::size_t>(j)] -= t * r(j);
      up += t;
      if (t2 <= t1) {
        add(np);
        active.push_back(p);
        u.push_back(up);
        break;
      }
      drop(l);
    }
  }
  throw std::runtime_error("goldfarb_idnani: iteration limit");
}

struct Reduced {
  MatrixXd Z;
  VectorXd xp;
};

Reduced eliminate(const MatrixXd& Aeq, const VectorXd& beq, Index n) {
  Reduced r;
  if (Aeq.rows() == 0) {
    r.Z = MatrixXd::Identity(n, n);
    r.xp = VectorXd::Zero(n);
    return r;
  }
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Aeq);
  r.xp = cod.solve(beq);
  if ((Aeq * r.xp - beq).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + beq.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("eliminate: inconsistent equalities");
  Eigen::FullPivLU<MatrixXd> lu(Aeq);
  MatrixXd K = lu.kernel();
  if (lu.rank() == n) K = MatrixXd::Zero(n, 0);
  r.Z = K.householderQr().householderQ() * MatrixXd::Identity(n, K.cols());
  return r;
}

}  // namespace

BinMatrix bool_product(const BinMatrix& a, const BinMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("bool_product: dimension mismatch");
  BinMatrix out(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j) {
      int acc = 0;
      for (Index k = 0; k < a.cols(); ++k) acc |= static_cast<int>(a(i, k)) & static_cast<int>(b(k, j));
      out.set(i, j, acc != 0);
    }
  return out;
}

BinMatrix random_pattern(Rng& rng, Index rows, Index cols, double density) {
  std::bernoulli_distribution coin(density);
  BinMatrix x(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) x.set(i, j, coin(rng));
  return x;
}

MatrixXd random_matrix(Rng& rng, Index rows, Index cols) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

gssctl::SystemModel random_system(Rng& rng, Index n, Index m, Index p) {
  gssctl::SystemModel s;
  s.A = 1.5 * random_matrix(rng, n, n);
  s.B = random_matrix(rng, n, m);
  s.C = random_matrix(rng, p, n);
  s.D = random_matrix(rng, n, n);
  s.H = random_matrix(rng, p, n);
  return s;
}

MatrixXd random_in_pattern(Rng& rng, const BinMatrix& x) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  MatrixXd m = MatrixXd::Zero(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j)
      if (x(i, j)) m(i, j) = sign(rng) ? mag(rng) : -mag(rng);
  return m;
}

BinMatrix pattern3(unsigned bits) {
  BinMatrix x(3, 3);
  for (int k = 0; k < 9; ++k) x.set(k / 3, k % 3, (bits >> k) & 1U);
  return x;
}

QpSolution active_set_enumeration(const DenseQp& qp, double tol) {
  const Index n = qp.H.rows(), me = qp.Aeq.rows(), mi = qp.Ain.rows();
  QpSolution best;
  best.objective = kInf;
  std::vector<Index> set;
  const Index cap = std::min(mi, n - me);
  std::function<void(Index)> visit = [&](Index start) {
    const Index k = static_cast<Index>(set.size());
    MatrixXd K = MatrixXd::Zero(n + me + k, n + me + k);
    VectorXd rhs(n + me + k);
    K.topLeftCorner(n, n) = qp.H;
    rhs.head(n) = -qp.f;
    if (me > 0) {
      K.block(n, 0, me, n) = qp.Aeq;
      K.block(0, n, n, me) = qp.Aeq.transpose();
      rhs.segment(n, me) = qp.beq;
    }
    for (Index t = 0; t < k; ++t) {
      const Index i = set[static_cast<std::size_t>(t)];
      K.block(n + me + t, 0, 1, n) = qp.Ain.row(i);
      K.block(0, n + me + t, n, 1) = qp.Ain.row(i).transpose();
      rhs(n + me + t) = qp.bin(i);
    }
    Eigen::FullPivLU<MatrixXd> lu(K);
    if (lu.rank() == K.rows()) {
      const VectorXd sol = lu.solve(rhs);
      const VectorXd x = sol.head(n);
      bool ok = true;
      for (Index t = 0; t < k && ok; ++t) ok = sol(n + me + t) >= -tol;
      if (ok && mi > 0) ok = ((qp.Ain * x - qp.bin).array() <= tol * (1.0 + qp.bin.cwiseAbs().array())).all();
      if (ok) {
        const double obj = objective(qp.H, qp.f, x);
        if (obj < best.objective) {
          best.feasible = true;
          best.x = x;
          best.objective = obj;
        }
      }
    }
    if (k == cap) return;
    for (Index i = start; i < mi; ++i) {
      set.push_back(i);
      visit(i + 1);
      set.pop_back();
    }
  };
  visit(0);
  return best;
}

QpSolution dual_active_set(const DenseQp& qp) {
  const Index n = qp.H.rows();
  const Reduced r = eliminate(qp.Aeq, qp.beq, n);
  const MatrixXd H = r.Z.transpose() * qp.H * r.Z;
  const VectorXd f = r.Z.transpose() * (qp.H * r.xp + qp.f);
  MatrixXd A(qp.Ain.rows(), r.Z.cols());
  VectorXd b(qp.Ain.rows());
  if (qp.Ain.rows() > 0) {
    A = qp.Ain * r.Z;
    b = qp.bin - qp.Ain * r.xp;
  }
  QpSolution s = goldfarb_idnani(H, f, A, b);
  if (!s.feasible) return s;
  s.x = r.xp + r.Z * s.x;
  s.objective = objective(qp.H, qp.f, s.x);
  return s;
}

double box_vertex_max(const VectorXd& a, const VectorXd& d) {
  const Index k = a.size();
  if (k > 24) throw std::invalid_argument("box_vertex_max: too many coordinates");
  double best = -kInf;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    double v = 0.0;
    for (Index j = 0; j < k; ++j) v += a(j) * ((mask >> j) & 1U ? d(j) : -d(j));
    best = std::max(best, v);
  }
  return best;
}

double polytope_vertex_max(const VectorXd& a, const MatrixXd& M, const VectorXd& h) {
  const Index n = M.cols(), m = M.rows();
  double best = -kInf;
  std::vector<Index> rows;
  std::function<void(Index)> visit = [&](Index start) {
    if (static_cast<Index>(rows.size()) == n) {
      MatrixXd S(n, n);
      VectorXd rhs(n);
      for (Index t = 0; t < n; ++t) {
        S.row(t) = M.row(rows[static_cast<std::size_t>(t)]);
        rhs(t) = h(rows[static_cast<std::size_t>(t)]);
      }
      Eigen::FullPivLU<MatrixXd> lu(S);
      if (lu.rank() < n) return;
      const VectorXd w = lu.solve(rhs);
      if (((M * w - h).array() <= 1e-9 * (1.0 + h.cwiseAbs().array())).all()) best = std::max(best, a.dot(w));
      return;
    }
    for (Index i = start; i < m; ++i) {
      rows.push_back(i);
      visit(i + 1);
      rows.pop_back();
    }
  };
  visit(0);
  return best;
}

std::vector<MatrixXd> subspace_basis(const BinMatrix& T, const BinMatrix& Y, const MatrixXd& CB) {
  std::vector<std::pair<Index, Index>> free;
  for (Index i = 0; i < T.rows(); ++i)
    for (Index j = 0; j < T.cols(); ++j)
      if (T(i, j)) free.emplace_back(i, j);
  std::vector<std::pair<Index, Index>> zeros;
  for (Index i = 0; i < Y.rows(); ++i)
    for (Index j = 0; j < Y.cols(); ++j)
      if (!Y(i, j)) zeros.emplace_back(i, j);
  const Index nf = static_cast<Index>(free.size());
  // (Q CB)(i, j) = sum_k Q(i, k) CB(k, j)
  MatrixXd M = MatrixXd::Zero(static_cast<Index>(zeros.size()), nf);
  for (Index r = 0; r < M.rows(); ++r)
    for (Index f = 0; f < nf; ++f)
      if (free[f].first == zeros[r].first) M(r, f) = CB(free[f].second, zeros[r].second);
  std::vector<MatrixXd> out;
  if (nf == 0) return out;
  MatrixXd K;
  if (M.rows() == 0) {
    K = MatrixXd::Identity(nf, nf);
  } else {
    Eigen::FullPivLU<MatrixXd> lu(M);
    lu.setThreshold(1e-10);
    K = lu.kernel();
    if (lu.rank() == nf) K.resize(nf, 0);
  }
  for (Index c = 0; c < K.cols(); ++c) {
    MatrixXd q = MatrixXd::Zero(T.rows(), T.cols());
    for (Index f = 0; f < nf; ++f) q(free[f].first, free[f].second) = K(f, c);
    out.push_back(q);
  }
  return out;
}

std::vector<MatrixXd> coordinate_basis(const BinMatrix& T) {
  std::vector<MatrixXd> out;
  for (Index i = 0; i < T.rows(); ++i)
    for (Index j = 0; j < T.cols(); ++j)
      if (T(i, j)) {
        out.push_back(MatrixXd::Zero(T.rows(), T.cols()));
        out.back()(i, j) = 1.0;
      }
  return out;
}

std::vector<MatrixXd> basis_of(const gssctl::GssSpec& spec) {
  std::vector<MatrixXd> out;
  for (Index k = 0; k < spec.dim(); ++k) out.push_back(spec.element(k));
  return out;
}

ScenarioResult scenario_synthesis(const gssctl::StackedSystem& ss, const std::vector<MatrixXd>& basis,
                                  const gssctl::CostSpec& cost, const VectorXd& half_widths) {
  const Index n = ss.n(), m = ss.m();
  const int N = ss.N;
  const Index d = static_cast<Index>(basis.size()), nv = m * N, rows = ss.F.rows();

  // nominal cost as a quadratic in the free inputs
  const Index nx = n * (N + 1);
  VectorXd W(nx), ref(nx);
  for (int k = 0; k <= N; ++k) {
    W.segment(k * n, n) = cost.state_weights[static_cast<std::size_t>(k)];
    ref.segment(k * n, n) = cost.state_refs[static_cast<std::size_t>(k)];
  }
  VectorXd Ru(nv);
  for (int k = 0; k < N; ++k) Ru.segment(k * m, m) = cost.input_weights[static_cast<std::size_t>(k)];
  const MatrixXd Bf = ss.Bbold.leftCols(nv);
  const VectorXd e0 = ss.Abold * ss.x0 - ref;

  DenseQp qp;
  qp.H = MatrixXd::Zero(d + nv, d + nv);
  qp.f = VectorXd::Zero(d + nv);
  qp.H.topLeftCorner(d, d) = 1e-8 * MatrixXd::Identity(d, d);
  qp.H.bottomRightCorner(nv, nv) = 2.0 * (Bf.transpose() * W.asDiagonal() * Bf);
  qp.H.bottomRightCorner(nv, nv).diagonal() += 2.0 * Ru;
  qp.f.tail(nv) = 2.0 * Bf.transpose() * W.asDiagonal() * e0;

  // positive-width coordinates of the stacked disturbance, stages 0..N-1
  std::vector<Index> coord;
  std::vector<double> width;
  for (int k = 0; k < N; ++k)
    for (Index j = 0; j < n; ++j)
      if (half_widths(j) > 0) {
        coord.push_back(k * n + j);
        width.push_back(half_widths(j));
      }
  if (coord.size() > 20) throw std::invalid_argument("scenario_synthesis: too many vertices");
  const std::uint64_t nvert = std::uint64_t{1} << coord.size();

  qp.Ain.resize(static_cast<Index>(nvert) * rows, d + nv);
  qp.bin.resize(static_cast<Index>(nvert) * rows);
  VectorXd w = VectorXd::Zero(n * (N + 1));
  Index r = 0;
  for (std::uint64_t mask = 0; mask < nvert; ++mask) {
    for (std::size_t t = 0; t < coord.size(); ++t) w(coord[t]) = (mask >> t) & 1U ? width[t] : -width[t];
    const VectorXd pw = ss.P * w;
    const VectorXd gw = ss.G * w;
    MatrixXd coef(rows, d);  // column k: F * basis_k * P w
    for (Index k = 0; k < d; ++k) coef.col(k) = ss.F * (basis[static_cast<std::size_t>(k)] * pw);
    for (Index i = 0; i < rows; ++i, ++r) {
      qp.Ain.row(r).head(d) = coef.row(i);
      qp.Ain.row(r).tail(nv) = ss.F.row(i).head(nv);
      qp.bin(r) = ss.c(i) - gw(i);
    }
  }

  ScenarioResult out;
  out.scenarios = static_cast<long>(nvert);
  const QpSolution s = dual_active_set(qp);
  if (!s.feasible) return out;
  out.feasible = true;
  out.q_params = s.x.head(d);
  out.v = s.x.tail(nv);
  out.cost = s.x.tail(nv).dot(qp.H.bottomRightCorner(nv, nv) * s.x.tail(nv)) * 0.5 + qp.f.tail(nv).dot(out.v) +
             e0.dot(W.asDiagonal() * e0);
  return out;
}

}  // namespace oracle
