#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "gssctl/gss.hpp"
#include "gssctl/robust.hpp"
#include "gssctl/stacked.hpp"

namespace gssctl {

struct Trajectory {
  std::vector<Eigen::VectorXd> x;  // x_0..x_N
  std::vector<Eigen::VectorXd> u;  // u_0..u_{N-1}
  std::vector<Eigen::VectorXd> y;  // y_0..y_N
  std::vector<Eigen::VectorXd> w;  // w_0..w_{N-1}

  int horizon() const { return static_cast<int>(u.size()); }
  /// Stacked x (n(N+1)), u (m(N+1), zero terminal block) and y.
  Eigen::VectorXd stacked_x() const;
  Eigen::VectorXd stacked_u() const;
  Eigen::VectorXd stacked_y() const;
  /// Largest |x_{k+1} - A x_k - B u_k - D w_k| over all stages.
  double dynamics_residual(const SystemModel& sys) const;
};

/// Split a stacked n*N disturbance vector into stages.
std::vector<Eigen::VectorXd> split_stages(const Eigen::VectorXd& w, Index n, int N);

/// u_k = sum_{j<=k} L_{k,j} y_j + g_k.
Trajectory simulate_explicit(const SystemModel& sys, const Eigen::MatrixXd& L, const Eigen::VectorXd& g,
                             const Eigen::VectorXd& x0, const std::vector<Eigen::VectorXd>& w);

/// u = Q y - Q CB u + (I + Q CB) g evaluated block row by block row.
Trajectory simulate_implicit(const SystemModel& sys, const Eigen::MatrixXd& Q, const Eigen::VectorXd& g,
                             const Eigen::VectorXd& x0, const std::vector<Eigen::VectorXd>& w);

struct SlackReport {
  Eigen::VectorXd slacks;  // N*s stage rows, then r terminal rows
  double min_slack = kInf;
  Index worst_row = -1;  // index into slacks
  int worst_stage = -1;
};

/// b - U x_k - V u_k for k < N, then z - R x_N.
SlackReport verify_constraints(const Trajectory& traj, const ConstraintSet& cons);

struct SweepReport {
  double worst_slack = kInf;
  int worst_stage = -1;
  Index worst_row = -1;
  long rollouts = 0;
  bool exhaustive = false;
};

/// Worst slack over disturbance vertex sequences. Boxes are enumerated when
/// 2^(free coordinates) <= budget and sampled otherwise; polytope vertices
/// come from random-direction LPs.
SweepReport vertex_sweep(const SystemModel& sys, const OutputFeedback& ctrl, const ConstraintSet& cons,
                         const DisturbanceSet& dist, const Eigen::VectorXd& x0, long budget,
                         std::uint64_t seed = 1);

}  // namespace gssctl
