#pragma once

#include <map>
#include <utility>

#include <Eigen/Dense>

#include "gssctl/binmatrix.hpp"

namespace gssctl {

/// x_{k+1} = A x_k + B u_k + D w_k,  y_k = C x_k + H w_k.
///
/// The same w_k drives the state update and corrupts the measurement.
struct SystemModel {
  Eigen::MatrixXd A, B, C, D, H;

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
  Index p() const { return C.rows(); }

  /// Throws std::invalid_argument on inconsistent dimensions.
  void validate() const;
};

/// Stage constraints U x + V u <= b (k = 0..N-1) and terminal R x_N <= z.
/// s = 0 or r = 0 is allowed.
struct ConstraintSet {
  Eigen::MatrixXd U, V, R;
  Eigen::VectorXd b, z;

  Index s() const { return U.rows(); }
  Index r() const { return R.rows(); }

  static ConstraintSet empty(Index n, Index m);
  void validate(Index n, Index m) const;
};

/// Which outputs each input may use: block (k, j), j <= k <= N-1, is the m x p
/// pattern S_{k,j}. Missing blocks mean "no information".
struct InfoStructure {
  int horizon = 0;
  std::map<std::pair<int, int>, BinMatrix> blocks;

  /// The same block for every admissible (k, j).
  static InfoStructure repeated(int horizon, const BinMatrix& block);
};

/// Horizon-lifted matrices. The stacked input and disturbance vectors carry an
/// explicit zero terminal block, so every stacked object has N+1 block rows.
struct StackedSystem {
  SystemModel sys;
  ConstraintSet cons;
  int N = 0;
  Eigen::VectorXd x0;

  Eigen::MatrixXd Abold;  // n(N+1) x n
  Eigen::MatrixXd E;      // n(N+1) x n(N+1)
  Eigen::MatrixXd Bbold;  // n(N+1) x m(N+1)
  Eigen::MatrixXd ED;     // n(N+1) x n(N+1)
  Eigen::MatrixXd Cbold;  // p(N+1) x n(N+1)
  Eigen::MatrixXd Hbold;  // p(N+1) x n(N+1)
  Eigen::MatrixXd P;      // Cbold * ED + Hbold
  Eigen::MatrixXd CB;     // Cbold * Bbold
  Eigen::VectorXd CAx0;   // Cbold * Abold * x0

  // Stacked constraints F v + max_w (F Q P + G) w <= c.
  Eigen::MatrixXd Ubold, Vbold;
  Eigen::MatrixXd F, G;
  Eigen::VectorXd c;

  BinMatrix Sbold;  // m(N+1) x p(N+1)
  BinMatrix Delta;  // Struct(CB)

  Index n() const { return sys.n(); }
  Index m() const { return sys.m(); }
  Index p() const { return sys.p(); }
  Index s() const { return cons.s(); }
  Index r() const { return cons.r(); }
  Index rows_u() const { return m() * (N + 1); }
  Index cols_y() const { return p() * (N + 1); }
};

/// Fills Abold, E, Bbold, ED, Cbold, Hbold, P, CB and CAx0.
StackedSystem lift_dynamics(const SystemModel& sys, int N, const Eigen::VectorXd& x0);

struct LiftedConstraints {
  Eigen::MatrixXd Ubold, Vbold, F, G;
  Eigen::VectorXd c;
};

LiftedConstraints lift_constraints(const StackedSystem& ss, const ConstraintSet& cons);

/// Recompute only the x0-dependent pieces (CAx0 and c) for a new initial state.
void set_initial_state(StackedSystem& ss, const Eigen::VectorXd& x0);

BinMatrix stack_info_structure(const InfoStructure& info, Index m, Index p);

/// Ones on every block (k, j) with j <= k <= N-1.
BinMatrix causal_mask(int N, Index m, Index p);

/// Everything at once: dynamics, constraints, information structure, Delta.
StackedSystem build_stacked(const SystemModel& sys, const ConstraintSet& cons,
                            const InfoStructure& info, int N, const Eigen::VectorXd& x0);

}  // namespace gssctl
