#include "gssctl/gss.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <Eigen/SVD>

namespace gssctl {

namespace {

// Dense orthonormal basis (cols x d_r) of the elements living in each row.
std::vector<Eigen::MatrixXd> row_bases(const GssSpec& spec, std::vector<std::vector<Index>>& members) {
  members.assign(static_cast<std::size_t>(spec.rows()), {});
  for (Index k = 0; k < spec.dim(); ++k)
    members[static_cast<std::size_t>(spec.basis[static_cast<std::size_t>(k)].row)].push_back(k);
  std::vector<Eigen::MatrixXd> out(members.size());
  for (std::size_t r = 0; r < members.size(); ++r) {
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(spec.cols(), static_cast<Index>(members[r].size()));
    for (std::size_t c = 0; c < members[r].size(); ++c) {
      const auto& e = spec.basis[static_cast<std::size_t>(members[r][c])];
      for (std::size_t t = 0; t < e.cols.size(); ++t) v(e.cols[t], static_cast<Index>(c)) = e.values(static_cast<Index>(t));
    }
    out[r] = std::move(v);
  }
  return out;
}

void require_strictly_lower(const Eigen::MatrixXd& M, const char* what) {
  for (Index j = 0; j < M.cols(); ++j)
    for (Index i = 0; i <= std::min(j, M.rows() - 1); ++i)
      if (M(i, j) != 0.0)
        throw std::invalid_argument(std::string(what) +
                                    ": feedback is not causal (product with CB has nonzero "
                                    "entries on or above the diagonal)");
}

}  // namespace

Eigen::MatrixXd GssSpec::element(Index k) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows(), cols());
  const auto& e = basis.at(static_cast<std::size_t>(k));
  for (std::size_t t = 0; t < e.cols.size(); ++t) out(e.row, e.cols[t]) = e.values(static_cast<Index>(t));
  return out;
}

Eigen::MatrixXd GssSpec::combine(const Eigen::VectorXd& params) const {
  if (params.size() != dim()) throw std::invalid_argument("GssSpec::combine: wrong parameter count");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows(), cols());
  for (Index k = 0; k < dim(); ++k) {
    const auto& e = basis[static_cast<std::size_t>(k)];
    for (std::size_t t = 0; t < e.cols.size(); ++t)
      out(e.row, e.cols[t]) += params(k) * e.values(static_cast<Index>(t));
  }
  return out;
}

Eigen::VectorXd GssSpec::coordinates(const Eigen::MatrixXd& q) const {
  if (q.rows() != rows() || q.cols() != cols())
    throw std::invalid_argument("GssSpec::coordinates: shape mismatch");
  Eigen::VectorXd out(dim());
  for (Index k = 0; k < dim(); ++k) {
    const auto& e = basis[static_cast<std::size_t>(k)];
    double acc = 0.0;
    for (std::size_t t = 0; t < e.cols.size(); ++t) acc += e.values(static_cast<Index>(t)) * q(e.row, e.cols[t]);
    out(k) = acc;
  }
  return out;
}

double GssSpec::projection_residual(const Eigen::MatrixXd& q) const {
  return (q - combine(coordinates(q))).norm();
}

BinMatrix ymax(const BinMatrix& T) {
  const Index a = T.rows(), b = T.cols();
  BinMatrix Y = BinMatrix::ones(a, a);
  for (Index i = 0; i < a; ++i)
    for (Index j = 0; j < a; ++j)
      for (Index k = 0; k < b; ++k)
        if (!T(i, k) && T(j, k)) {
          Y.set(i, j, false);
          break;
        }
  return Y;
}

GssSpec gss_parametrize(const BinMatrix& T, const BinMatrix& Y, const Eigen::MatrixXd& CB,
                        double rank_tol) {
  if (CB.rows() != T.cols() || CB.cols() != T.rows())
    throw std::invalid_argument("gss_parametrize: CB must be cols(T) x rows(T)");
  if (Y.rows() != T.rows() || Y.cols() != T.rows())
    throw std::invalid_argument("gss_parametrize: Y must be rows(T) x rows(T)");

  GssSpec spec;
  spec.T = T;
  spec.Y = Y;

  std::vector<Index> support, zeros, coupled;
  for (Index i = 0; i < T.rows(); ++i) {
    support.clear();
    zeros.clear();
    for (Index l = 0; l < T.cols(); ++l)
      if (T(i, l)) support.push_back(l);
    if (support.empty()) continue;
    for (Index j = 0; j < Y.cols(); ++j)
      if (!Y(i, j)) zeros.push_back(j);

    // Entries of the row that never meet a constrained column are free.
    coupled.clear();
    for (Index l : support) {
      bool touches = false;
      for (Index j : zeros)
        if (CB(l, j) != 0.0) {
          touches = true;
          break;
        }
      if (touches) {
        coupled.push_back(l);
      } else {
        BasisElement e;
        e.row = i;
        e.cols = {l};
        e.values = Eigen::VectorXd::Ones(1);
        spec.basis.push_back(std::move(e));
      }
    }
    if (coupled.empty()) continue;

    // Null space of (Q(i, coupled) -> (Q CB)(i, zeros)).
    Eigen::MatrixXd M(static_cast<Index>(zeros.size()), static_cast<Index>(coupled.size()));
    for (std::size_t a = 0; a < zeros.size(); ++a)
      for (std::size_t c = 0; c < coupled.size(); ++c)
        M(static_cast<Index>(a), static_cast<Index>(c)) = CB(coupled[c], zeros[a]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(M, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() > 0 ? sv(0) : 0.0;
    Index rank = 0;
    for (Index t = 0; t < sv.size(); ++t)
      if (sv(t) > rank_tol * smax) ++rank;
    const Eigen::MatrixXd& V = svd.matrixV();
    for (Index c = rank; c < V.cols(); ++c) {
      BasisElement e;
      e.row = i;
      e.cols = coupled;
      e.values = V.col(c);
      // Fix the sign so the largest entry is positive.
      Index arg = 0;
      e.values.cwiseAbs().maxCoeff(&arg);
      if (e.values(arg) < 0) e.values = -e.values;
      spec.basis.push_back(std::move(e));
    }
  }
  return spec;
}

SparsityCertificate certify_sparsity_preserving(const BinMatrix& T, const BinMatrix& Y,
                                                const BinMatrix& S) {
  if (T.rows() != S.rows() || T.cols() != S.cols())
    throw std::invalid_argument("certify_sparsity_preserving: T and S shapes differ");
  if (Y.rows() != T.rows() || Y.cols() != T.rows())
    throw std::invalid_argument("certify_sparsity_preserving: Y must be rows(T) x rows(T)");
  SparsityCertificate cert;
  cert.t_outside_s = leq_violations(T, S);
  cert.yt_outside_t = leq_violations(bool_mul(Y, T), T);
  cert.pass = cert.t_outside_s.empty() && cert.yt_outside_t.empty();
  return cert;
}

bool qi_check_pattern(const BinMatrix& T, const BinMatrix& delta) {
  return leq(bool_mul(bool_mul(T, delta), T), T);
}

std::vector<std::pair<Index, Index>> qi_pattern_witnesses(const BinMatrix& T,
                                                          const BinMatrix& delta) {
  return leq_violations(bool_mul(bool_mul(T, delta), T), T);
}

QiSubspaceReport qi_subspace_report(const GssSpec& spec, const Eigen::MatrixXd& CB, double tol) {
  if (CB.rows() != spec.cols() || CB.cols() != spec.rows())
    throw std::invalid_argument("qi_subspace_report: CB shape mismatch");
  QiSubspaceReport rep;
  const Index d = spec.dim();
  if (d == 0) return rep;

  std::vector<std::vector<Index>> members;
  const auto bases = row_bases(spec, members);

  // Q_i CB Q_j = alpha * (row vector of Q_j placed in the row of Q_i), with
  // alpha = (Q_i CB)(row_i, row_j).
  std::map<std::pair<Index, Index>, double> cache;
  auto residual_in_row = [&](Index r, Index j) {
    auto key = std::make_pair(r, j);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(spec.cols());
    const auto& e = spec.basis[static_cast<std::size_t>(j)];
    for (std::size_t t = 0; t < e.cols.size(); ++t) x(e.cols[t]) = e.values(static_cast<Index>(t));
    const auto& V = bases[static_cast<std::size_t>(r)];
    const double res = V.cols() == 0 ? x.norm() : (x - V * (V.transpose() * x)).norm();
    cache.emplace(key, res);
    return res;
  };

  for (Index i = 0; i < d; ++i) {
    const auto& ei = spec.basis[static_cast<std::size_t>(i)];
    Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(CB.cols());
    for (std::size_t t = 0; t < ei.cols.size(); ++t) w += ei.values(static_cast<Index>(t)) * CB.row(ei.cols[t]);
    for (Index j = 0; j < d; ++j) {
      const double alpha = w(spec.basis[static_cast<std::size_t>(j)].row);
      if (alpha == 0.0) continue;
      const double res = std::abs(alpha) * residual_in_row(ei.row, j);
      const double ratio = res / (1.0 + std::abs(alpha));
      if (ratio > rep.worst_residual) {
        rep.worst_residual = ratio;
        rep.worst_i = i;
        rep.worst_j = j;
      }
    }
  }
  rep.qi = rep.worst_residual <= tol;
  return rep;
}

bool qi_check_subspace(const GssSpec& spec, const Eigen::MatrixXd& CB, double tol) {
  return qi_subspace_report(spec, CB, tol).qi;
}

OutputFeedback q_to_l(const Eigen::MatrixXd& Q, const Eigen::VectorXd& v,
                      const Eigen::MatrixXd& CB, const Eigen::VectorXd& CAx0) {
  if (CB.rows() != Q.cols() || CB.cols() != Q.rows() || v.size() != Q.rows() ||
      CAx0.size() != Q.cols())
    throw std::invalid_argument("q_to_l: dimension mismatch");
  Eigen::MatrixXd M = Q * CB;
  require_strictly_lower(M, "q_to_l");
  M.diagonal().array() += 1.0;
  // (I + Q CB) L = Q by forward substitution; I + Q CB is unit lower triangular.
  OutputFeedback out;
  out.L = M.triangularView<Eigen::UnitLower>().solve(Q);
  out.g = v - out.L * (CB * v + CAx0);
  return out;
}

DisturbanceFeedback l_to_q(const Eigen::MatrixXd& L, const Eigen::VectorXd& g,
                           const Eigen::MatrixXd& CB, const Eigen::VectorXd& CAx0) {
  if (CB.rows() != L.cols() || CB.cols() != L.rows() || g.size() != L.rows() ||
      CAx0.size() != L.cols())
    throw std::invalid_argument("l_to_q: dimension mismatch");
  Eigen::MatrixXd M = -(L * CB);
  require_strictly_lower(M, "l_to_q");
  M.diagonal().array() += 1.0;
  DisturbanceFeedback out;
  out.Q = M.triangularView<Eigen::UnitLower>().solve(L);
  out.v = out.Q * (CB * g + CAx0) + g;
  return out;
}

Eigen::MatrixXd power_series_l(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& CB, int N) {
  if (CB.rows() != Q.cols() || CB.cols() != Q.rows())
    throw std::invalid_argument("power_series_l: dimension mismatch");
  if (N < 1) throw std::invalid_argument("power_series_l: horizon must be at least 1");
  const Eigen::MatrixXd QCB = Q * CB;
  require_strictly_lower(QCB, "power_series_l");
  Eigen::MatrixXd term = Q;
  Eigen::MatrixXd sum = Q;
  for (int i = 1; i < N; ++i) {
    term = -(QCB * term);
    sum += term;
  }
  return sum;
}

std::vector<SharingViolation> audit_input_sharing(const BinMatrix& T, const BinMatrix& Y, Index m,
                                                  Index p) {
  if (Y.rows() != T.rows() || Y.cols() != T.rows())
    throw std::invalid_argument("audit_input_sharing: Y must be rows(T) x rows(T)");
  if (m <= 0 || p <= 0 || T.rows() % m != 0 || T.cols() % p != 0)
    throw std::invalid_argument("audit_input_sharing: T is not an (m x p)-block matrix");
  std::vector<SharingViolation> out;
  for (Index i = 0; i < Y.rows(); ++i)
    for (Index k = 0; k < Y.cols(); ++k) {
      if (!Y(i, k)) continue;
      for (Index j = 0; j < T.cols(); ++j) {
        if (!T(k, j) || T(i, j)) continue;
        SharingViolation sv;
        sv.i = i;
        sv.k = k;
        sv.j = j;
        sv.a = i % m;
        sv.s = i / m;
        sv.b = k % m;
        sv.t = k / m;
        sv.c = j % p;
        sv.v = j / p;
        out.push_back(sv);
      }
    }
  return out;
}

}  // namespace gssctl
