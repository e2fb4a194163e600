#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace gssctl {

using Index = Eigen::Index;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Named contiguous range of variables or constraint rows.
struct Span {
  std::string name;
  Index offset = 0;
  Index size = 0;
};

/// minimize 0.5 x'Px + q'x + constant  subject to  l <= A x <= u.
///
/// Equalities are rows with l == u; one-sided inequalities use +/- infinity.
struct QpProblem {
  SparseMatrix P;  // symmetric, both triangles stored
  Eigen::VectorXd q;
  double constant = 0.0;
  SparseMatrix A;
  Eigen::VectorXd l, u;
  std::vector<Span> vars;
  std::vector<Span> rows;

  Index num_vars() const { return q.size(); }
  Index num_rows() const { return l.size(); }
  bool is_equality(Index row) const { return l(row) == u(row); }

  /// Throws std::out_of_range for an unknown name.
  const Span& var_span(const std::string& name) const;
  const Span* find_var_span(const std::string& name) const;

  double objective(const Eigen::VectorXd& x) const;
  void validate() const;
};

/// Sparse linear expression sum_k coeff_k * x[var_k] + constant.
struct LinearExpr {
  std::vector<std::pair<Index, double>> terms;
  double constant = 0.0;

  void add(Index var, double coeff) {
    if (coeff != 0.0) terms.emplace_back(var, coeff);
  }
  bool is_constant() const { return terms.empty(); }
  LinearExpr& operator+=(const LinearExpr& other);
  LinearExpr& operator*=(double s);
  double evaluate(const Eigen::VectorXd& x) const;
};

/// Incremental QP assembly with named variable blocks.
class QpBuilder {
 public:
  /// Appends `count` variables and returns the offset of the first one.
  /// Consecutive blocks with the same name merge into one span.
  Index add_variables(const std::string& name, Index count);
  Index num_vars() const { return nvars_; }
  Index num_rows() const { return static_cast<Index>(lower_.size()); }

  /// lo <= expr <= hi (the expression constant is moved to the bounds).
  Index add_row(const LinearExpr& expr, double lo, double hi);
  void begin_row_group(const std::string& name);

  void add_hessian(Index i, Index j, double value);  // adds to (i,j) and (j,i) if i != j
  void add_linear(Index i, double value);
  void add_constant(double value) { constant_ += value; }

  QpProblem build() const;

 private:
  void close_row_group();

  Index nvars_ = 0;
  std::vector<Span> vars_;
  std::vector<Span> rows_;
  std::vector<Eigen::Triplet<double, int>> a_;
  std::vector<Eigen::Triplet<double, int>> p_;
  std::vector<std::pair<Index, double>> linear_;
  std::vector<double> lower_, upper_;
  double constant_ = 0.0;
};

enum class SolverMethod { interior_point, admm };

struct SolverSettings {
  SolverMethod method = SolverMethod::interior_point;
  double eps_abs = 1e-8;
  double eps_rel = 1e-8;
  double eps_prim_inf = 1e-6;
  double eps_dual_inf = 1e-6;
  int max_iter = 200000;  // ADMM iterations
  int ipm_max_iter = 200;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  bool adaptive_rho = true;
  bool polish = true;
  int polish_refine_iter = 5;
  double polish_delta = 1e-7;
  int scaling_iter = 10;
  int check_interval = 10;
  bool verbose = false;

  void validate() const;
};

enum class SolverStatus { optimal, max_iter, infeasible, unbounded };

const char* to_string(SolverStatus s);

struct SolverResult {
  SolverStatus status = SolverStatus::max_iter;
  Eigen::VectorXd x;  // primal
  Eigen::VectorXd y;  // duals of l <= Ax <= u (positive on active upper bounds)
  double objective = 0.0;
  int iterations = 0;
  double prim_res = 0.0;
  double dual_res = 0.0;
  bool polished = false;
};

/// Any solver satisfying the solve contract can replace the internal one.
class QpBackend {
 public:
  virtual ~QpBackend() = default;
  virtual SolverResult solve(const QpProblem& qp, const SolverSettings& settings,
                             const Eigen::VectorXd* initial_x) = 0;
};

/// Operator-splitting solver with Ruiz equilibration, adaptive step size and
/// active-set polishing.
class AdmmSolver final : public QpBackend {
 public:
  SolverResult solve(const QpProblem& qp, const SolverSettings& settings,
                     const Eigen::VectorXd* initial_x = nullptr) override;
};

/// Primal-dual interior point method (Mehrotra predictor-corrector) on the
/// equilibrated problem, one quasi-definite LDL' factorization per iteration.
class InteriorPointSolver final : public QpBackend {
 public:
  SolverResult solve(const QpProblem& qp, const SolverSettings& settings,
                     const Eigen::VectorXd* initial_x = nullptr) override;
};

/// Solve with the selected internal backend. An interior point run that stops
/// without a verdict is handed to ADMM, which can certify infeasibility.
SolverResult solve(const QpProblem& qp, const SolverSettings& settings = {});

/// Unscaled KKT residuals of (x, y): equality/inequality violation and
/// stationarity, both in the infinity norm.
std::pair<double, double> kkt_residuals(const QpProblem& qp, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y);

/// Throws std::invalid_argument unless P + 1e-10*scale*I admits an LDL'
/// factorization with positive pivots.
void require_psd(const SparseMatrix& P);

}  // namespace gssctl
