#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gssctl/gss.hpp"
#include "gssctl/qp.hpp"
#include "gssctl/stacked.hpp"

namespace gssctl {

/// Per-stage disturbance set, identical for stages 0..N-1; w_N = 0.
struct DisturbanceSet {
  enum class Kind { box, polytope };
  Kind kind = Kind::box;
  Eigen::VectorXd d;  // box half-widths
  Eigen::MatrixXd M;  // polytope {w : M w <= h}
  Eigen::VectorXd h;

  static DisturbanceSet box(const Eigen::VectorXd& half_widths);
  static DisturbanceSet polytope(const Eigen::MatrixXd& M, const Eigen::VectorXd& h);

  Index dim() const { return kind == Kind::box ? d.size() : M.cols(); }
  void validate(Index n) const;
  /// d repeated for stages 0..N-1 (box only).
  Eigen::VectorXd stacked_half_widths(int N) const;
  /// Vertices of one stage set: 2^n sign patterns for a box, enumeration for a polytope.
  std::vector<Eigen::VectorXd> stage_vertices() const;
};

/// sum_k (x_k - ref_k)' diag(qx_k) (x_k - ref_k) + sum_{k<N} u_k' diag(ru_k) u_k.
struct CostSpec {
  std::vector<Eigen::VectorXd> state_weights;  // N+1 entries
  std::vector<Eigen::VectorXd> input_weights;  // N entries
  std::vector<Eigen::VectorXd> state_refs;     // N+1 entries

  static CostSpec zero(Index n, Index m, int N);
  void validate(Index n, Index m, int N) const;
  /// Cost of a nominal trajectory x (n(N+1)) and input u (m(N+1)).
  double evaluate(const Eigen::VectorXd& x, const Eigen::VectorXd& u, int N) const;
};

/// One robust constraint row as affine functions of the decision vector, one
/// per stacked disturbance coordinate of stages 0..N-1.
using AffineRow = std::vector<LinearExpr>;

/// Bound sum_j d_j |a_j(x)| through epigraph variables appended to the builder.
LinearExpr worst_case_box(QpBuilder& qp, const AffineRow& row, const Eigen::VectorXd& d_stacked);

/// Bound max_{M w_t <= h} sum_t a_t' w_t through nonnegative dual variables.
LinearExpr worst_case_polytope(QpBuilder& qp, const AffineRow& row, const Eigen::MatrixXd& M,
                               const Eigen::VectorXd& h);

/// sum_j d_j |a_j|.
double box_support(const Eigen::VectorXd& a, const Eigen::VectorXd& d_stacked);
/// max a'w over {M w <= h}, by linear programming.
double polytope_support(const Eigen::VectorXd& a, const Eigen::MatrixXd& M, const Eigen::VectorXd& h);
/// Maximizer of a'w over {M w <= h}.
Eigen::VectorXd polytope_argmax(const Eigen::VectorXd& a, const Eigen::MatrixXd& M, const Eigen::VectorXd& h);

/// Decision layout: "q_params" (GSS coordinates), "v" (m(N+1) nominal inputs),
/// "z" (disturbance response Q*P restricted to its structural support), then
/// "lambda" (box) or "dual" (polytope) auxiliaries.
QpProblem assemble_qp(const StackedSystem& ss, const GssSpec& spec, const CostSpec& cost,
                      const DisturbanceSet& dist, bool allow_uncertified = false);

struct SynthesisResult {
  SolverStatus status = SolverStatus::max_iter;
  Eigen::MatrixXd Q, L;
  Eigen::VectorXd v, g;
  Eigen::VectorXd q_params;
  double objective = 0.0;
  int iterations = 0;
  double prim_res = 0.0, dual_res = 0.0;
  bool polished = false;
  bool sparsity_certified = false;  // T <= S and Y T <= T
  bool qi_pattern = false;          // T Delta T <= T
  bool l_in_target = false;         // L in Sparse(target) at 1e-6
  double l_violation = 0.0;
  Eigen::VectorXd worst_slacks;  // c - F v - max_w (F Q P + G) w
  double min_slack = kInf;
  std::string defect;  // nonempty if the recovered controller fails a check

  bool optimal() const { return status == SolverStatus::optimal; }
};

/// c - F v - max_w (F Q P + G) w, row by row.
Eigen::VectorXd worst_case_slacks(const StackedSystem& ss, const Eigen::MatrixXd& Q, const Eigen::VectorXd& v,
                                  const DisturbanceSet& dist);

/// Cost of the disturbance-free trajectory driven by v.
double nominal_cost(const StackedSystem& ss, const CostSpec& cost, const Eigen::VectorXd& v);

/// Rebuild (Q, v, L, g) from a raw solve and re-verify it; `target` is the
/// pattern L must respect.
SynthesisResult extract_solution(const QpProblem& qp, const SolverResult& raw, const StackedSystem& ss,
                                 const GssSpec& spec, const DisturbanceSet& dist, const BinMatrix& target);

/// assemble_qp, solve, extract_solution. Certified specs are checked against
/// ss.Sbold; with allow_uncertified the target is spec.T.
SynthesisResult synthesize(const StackedSystem& ss, const GssSpec& spec, const CostSpec& cost,
                           const DisturbanceSet& dist, const SolverSettings& settings = {},
                           bool allow_uncertified = false);

}  // namespace gssctl
