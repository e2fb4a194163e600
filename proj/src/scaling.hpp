#pragma once

#include "gssctl/qp.hpp"

namespace gssctl::detail {

inline double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

/// Ruiz-equilibrated copy of a QP plus the factors that undo it.
struct Scaled {
  SparseMatrix P, A;
  Eigen::VectorXd q, l, u;
  Eigen::VectorXd D, E;  // x = D xs, z = E^{-1} zs, y = E ys / c
  double c = 1.0;
};

Scaled equilibrate(const QpProblem& qp, int iterations);

struct PolishOutcome {
  bool ok = false;
  Eigen::VectorXd x, y, z;
};

/// Equality-constrained QP on the active set guessed from (z, y), in scaled space.
PolishOutcome polish(const Scaled& s, const Eigen::VectorXd& x, const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                     const SolverSettings& st);

}  // namespace gssctl::detail
