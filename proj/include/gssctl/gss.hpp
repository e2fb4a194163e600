#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gssctl/binmatrix.hpp"

namespace gssctl {

/// One basis matrix of a generalized sparsity subspace. The constraint map
/// Q -> (Q at zeros of T, Q*CB at zeros of Y) acts row by row, so every basis
/// element lives in a single row of Q.
struct BasisElement {
  Index row = 0;
  std::vector<Index> cols;
  Eigen::VectorXd values;  // same length as cols, unit Euclidean norm
};

/// {Q : Q in Sparse(T), Q*CB in Sparse(Y)} with an orthonormal basis under the
/// entrywise inner product.
struct GssSpec {
  BinMatrix T;
  BinMatrix Y;
  std::vector<BasisElement> basis;

  Index rows() const { return T.rows(); }
  Index cols() const { return T.cols(); }
  Index dim() const { return static_cast<Index>(basis.size()); }

  Eigen::MatrixXd element(Index k) const;
  /// Q = sum_k params(k) * basis_k.
  Eigen::MatrixXd combine(const Eigen::VectorXd& params) const;
  /// Coordinates of the orthogonal projection of q onto the subspace.
  Eigen::VectorXd coordinates(const Eigen::MatrixXd& q) const;
  /// Frobenius norm of q minus its projection onto the subspace.
  double projection_residual(const Eigen::MatrixXd& q) const;
};

/// Largest Y with Y*T <= T: Y(i,j) = 0 iff some k has T(i,k) = 0 and T(j,k) = 1.
BinMatrix ymax(const BinMatrix& T);

/// Basis of the GSS defined by (T, Y) for the coupling matrix CB. Singular
/// values below rank_tol times the largest one of a row block count as zero.
GssSpec gss_parametrize(const BinMatrix& T, const BinMatrix& Y, const Eigen::MatrixXd& CB,
                        double rank_tol = 1e-10);

struct SparsityCertificate {
  bool pass = false;
  std::vector<std::pair<Index, Index>> t_outside_s;   // T(i,j) = 1, S(i,j) = 0
  std::vector<std::pair<Index, Index>> yt_outside_t;  // (YT)(i,j) = 1, T(i,j) = 0
};

/// T <= S and Y*T <= T: every Q in the GSS maps to an L in Sparse(S).
SparsityCertificate certify_sparsity_preserving(const BinMatrix& T, const BinMatrix& Y,
                                                const BinMatrix& S);

/// Sparse(T) is QI w.r.t. a matrix with pattern delta iff T*delta*T <= T.
bool qi_check_pattern(const BinMatrix& T, const BinMatrix& delta);
std::vector<std::pair<Index, Index>> qi_pattern_witnesses(const BinMatrix& T,
                                                          const BinMatrix& delta);

struct QiSubspaceReport {
  bool qi = true;
  double worst_residual = 0.0;  // largest residual / (1 + |Qi CB Qj|)
  Index worst_i = -1;
  Index worst_j = -1;
};

/// Numerical QI test over all basis pairs: Q_i*CB*Q_j must stay in the span.
QiSubspaceReport qi_subspace_report(const GssSpec& spec, const Eigen::MatrixXd& CB,
                                    double tol = 1e-8);
bool qi_check_subspace(const GssSpec& spec, const Eigen::MatrixXd& CB, double tol = 1e-8);

struct OutputFeedback {
  Eigen::MatrixXd L;
  Eigen::VectorXd g;
};

struct DisturbanceFeedback {
  Eigen::MatrixXd Q;
  Eigen::VectorXd v;
};

/// L = Q (CB Q + I)^{-1},  g = v - L (CB v + CAx0).
/// Throws std::invalid_argument if Q*CB is not strictly lower triangular.
OutputFeedback q_to_l(const Eigen::MatrixXd& Q, const Eigen::VectorXd& v,
                      const Eigen::MatrixXd& CB, const Eigen::VectorXd& CAx0);

/// Q = L (I - CB L)^{-1},  v = Q (CB g + CAx0) + g.
DisturbanceFeedback l_to_q(const Eigen::MatrixXd& L, const Eigen::VectorXd& g,
                           const Eigen::MatrixXd& CB, const Eigen::VectorXd& CAx0);

/// sum_{i=0}^{N-1} (-1)^i (Q CB)^i Q.
Eigen::MatrixXd power_series_l(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& CB, int N);

/// Input u_s^a reads input u_t^b (Y(i,k) = 1), which reads output y_v^c
/// (T(k,j) = 1), but u_s^a itself does not read y_v^c (T(i,j) = 0).
/// All indices are zero-based.
struct SharingViolation {
  Index i = 0, k = 0, j = 0;
  Index a = 0, s = 0;
  Index b = 0, t = 0;
  Index c = 0, v = 0;
};

std::vector<SharingViolation> audit_input_sharing(const BinMatrix& T, const BinMatrix& Y, Index m,
                                                  Index p);

}  // namespace gssctl
