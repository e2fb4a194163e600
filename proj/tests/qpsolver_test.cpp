#include "doctest.h"

#include <Eigen/SparseCore>

#include "gssctl/qp.hpp"
#include "support/oracles.hpp"
#include "supernodal.hpp"

using namespace gssctl;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

QpProblem to_problem(const oracle::DenseQp& d) {
  QpBuilder b;
  const Index n = d.f.size();
  b.add_variables("x", n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i; j < n; ++j)
      if (d.H(i, j) != 0) b.add_hessian(i, j, d.H(i, j));
    b.add_linear(i, d.f(i));
  }
  auto row = [&](const MatrixXd& a, Index r) {
    LinearExpr e;
    for (Index j = 0; j < n; ++j) e.add(j, a(r, j));
    return e;
  };
  b.begin_row_group("eq");
  for (Index r = 0; r < d.Aeq.rows(); ++r) b.add_row(row(d.Aeq, r), d.beq(r), d.beq(r));
  b.begin_row_group("in");
  for (Index r = 0; r < d.Ain.rows(); ++r) b.add_row(row(d.Ain, r), -kInf, d.bin(r));
  return b.build();
}

oracle::DenseQp random_qp(oracle::Rng& rng, Index n, Index meq, Index min, bool singular) {
  oracle::DenseQp d;
  const MatrixXd m = oracle::random_matrix(rng, singular ? n / 2 + 1 : n, n);
  d.H = m.transpose() * m + (singular ? 1e-3 : 0.1) * MatrixXd::Identity(n, n);
  d.f = 3 * oracle::random_matrix(rng, n, 1);
  const VectorXd x0 = oracle::random_matrix(rng, n, 1);
  d.Aeq = oracle::random_matrix(rng, meq, n);
  d.beq = d.Aeq * x0;
  d.Ain = oracle::random_matrix(rng, min, n);
  std::uniform_real_distribution<double> gap(0.05, 0.5);
  d.bin = d.Ain * x0;
  for (Index i = 0; i < min; ++i) d.bin(i) += gap(rng);
  return d;
}

SolverSettings with(SolverMethod m) {
  SolverSettings s;
  s.method = m;
  return s;
}

QpProblem scalar_clamp() {
  QpBuilder b;
  b.add_variables("x", 1);
  b.add_hessian(0, 0, 2);
  b.add_linear(0, -2);
  b.add_constant(1);
  LinearExpr e;
  e.add(0, 1);
  b.add_row(e, -kInf, 0);
  return b.build();
}

QpProblem projection() {
  QpBuilder b;
  b.add_variables("x", 2);
  b.add_hessian(0, 0, 2);
  b.add_hessian(1, 1, 2);
  LinearExpr e;
  e.add(0, 1);
  e.add(1, 1);
  b.add_row(e, 2, 2);
  return b.build();
}

}  // namespace

TEST_CASE("trivial problems on both backends") {
  for (SolverMethod m : {SolverMethod::interior_point, SolverMethod::admm}) {
    CAPTURE(static_cast<int>(m));
    const SolverResult a = solve(scalar_clamp(), with(m));
    REQUIRE(a.status == SolverStatus::optimal);
    CHECK(a.x(0) == doctest::Approx(0).epsilon(1e-7).scale(1));
    CHECK(a.objective == doctest::Approx(1).epsilon(1e-7));
    CHECK(a.y(0) == doctest::Approx(2).epsilon(1e-6));

    const SolverResult b = solve(projection(), with(m));
    REQUIRE(b.status == SolverStatus::optimal);
    CHECK(b.x(0) == doctest::Approx(1).epsilon(1e-7));
    CHECK(b.x(1) == doctest::Approx(1).epsilon(1e-7));
    CHECK(b.objective == doctest::Approx(2).epsilon(1e-7));
  }
}

TEST_CASE("oracles agree with each other") {
  oracle::Rng rng(43);
  for (int t = 0; t < 60; ++t) {
    const oracle::DenseQp d = random_qp(rng, 5, t % 3, 7, false);
    const auto e = oracle::active_set_enumeration(d);
    const auto g = oracle::dual_active_set(d);
    REQUIRE(e.feasible);
    REQUIRE(g.feasible);
    CHECK(e.objective == doctest::Approx(g.objective).epsilon(1e-9));
    CHECK((e.x - g.x).norm() < 1e-7);
  }
}

TEST_CASE("random strictly feasible QPs match the enumeration oracle") {
  oracle::Rng rng(47);
  for (int t = 0; t < 80; ++t) {
    std::uniform_int_distribution<int> nd(1, 7);
    const Index n = nd(rng);
    const oracle::DenseQp d = random_qp(rng, n, t % 2 ? std::min<Index>(2, n - 1) : 0, 9, t % 4 == 3);
    const auto ref = oracle::active_set_enumeration(d);
    REQUIRE(ref.feasible);
    const QpProblem qp = to_problem(d);
    for (SolverMethod m : {SolverMethod::interior_point, SolverMethod::admm}) {
      const SolverResult r = solve(qp, with(m));
      REQUIRE(r.status == SolverStatus::optimal);
      CHECK(r.objective == doctest::Approx(ref.objective).epsilon(1e-6));
    }
  }
}

TEST_CASE("QPs up to 50 variables match the dual active-set oracle") {
  oracle::Rng rng(53);
  for (int t = 0; t < 30; ++t) {
    std::uniform_int_distribution<int> nd(10, 50);
    const Index n = nd(rng);
    const oracle::DenseQp d = random_qp(rng, n, n / 5, 2 * n, t % 3 == 2);
    const auto ref = oracle::dual_active_set(d);
    REQUIRE(ref.feasible);
    const QpProblem qp = to_problem(d);
    for (SolverMethod m : {SolverMethod::interior_point, SolverMethod::admm}) {
      const SolverResult r = solve(qp, with(m));
      REQUIRE(r.status == SolverStatus::optimal);
      CHECK(r.objective == doctest::Approx(ref.objective).epsilon(1e-6));
      const auto [pr, dr] = kkt_residuals(qp, r.x, r.y);
      CHECK(pr < 1e-6);
      CHECK(dr < 1e-6);
    }
  }
}

TEST_CASE("infeasible and unbounded problems") {
  QpBuilder b;
  b.add_variables("x", 2);
  b.add_hessian(0, 0, 1);
  LinearExpr e;
  e.add(0, 1);
  e.add(1, 1);
  b.add_row(e, -kInf, -1);
  b.add_row(e, 1, kInf);
  const SolverResult inf = solve(b.build());
  CHECK(inf.status == SolverStatus::infeasible);

  QpBuilder u;
  u.add_variables("x", 2);
  u.add_hessian(0, 0, 1);
  u.add_linear(1, -1);
  LinearExpr f;
  f.add(0, 1);
  u.add_row(f, -1, 1);
  const SolverResult unb = solve(u.build());
  CHECK(unb.status == SolverStatus::unbounded);
}

TEST_CASE("determinism and scaling") {
  oracle::Rng rng(59);
  const oracle::DenseQp d = random_qp(rng, 20, 3, 30, false);
  const QpProblem qp = to_problem(d);
  for (SolverMethod m : {SolverMethod::interior_point, SolverMethod::admm}) {
    const SolverResult a = solve(qp, with(m));
    const SolverResult b = solve(qp, with(m));
    CHECK(a.iterations == b.iterations);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);

    QpProblem s = qp;
    s.P *= 7.0;
    s.q *= 7.0;
    s.A *= 0.25;
    s.l *= 0.25;
    s.u *= 0.25;
    const SolverResult c = solve(s, with(m));
    REQUIRE(c.status == SolverStatus::optimal);
    CHECK((c.x - a.x).norm() < 1e-6 * (1 + a.x.norm()));
  }
}

TEST_CASE("input validation") {
  SparseMatrix indefinite(2, 2);
  indefinite.insert(0, 0) = 1;
  indefinite.insert(0, 1) = 2;
  indefinite.insert(1, 0) = 2;
  indefinite.insert(1, 1) = 1;
  CHECK_THROWS_AS(require_psd(indefinite), std::invalid_argument);
  SparseMatrix singular(2, 2);
  singular.insert(0, 0) = 1;
  singular.insert(0, 1) = 1;
  singular.insert(1, 0) = 1;
  singular.insert(1, 1) = 1;
  CHECK_NOTHROW(require_psd(singular));

  QpProblem bad = projection();
  bad.P = indefinite;
  CHECK_THROWS_AS(solve(bad), std::invalid_argument);

  SolverSettings st;
  st.alpha = 2.0;
  CHECK_THROWS_AS(solve(projection(), st), std::invalid_argument);
  st = {};
  st.eps_abs = 0;
  CHECK_THROWS_AS(solve(projection(), st), std::invalid_argument);

  QpProblem crossed = projection();
  crossed.l(0) = 3;
  CHECK_THROWS_AS(solve(crossed), std::invalid_argument);
  CHECK_THROWS_AS(projection().var_span("nope"), std::out_of_range);
}

TEST_CASE("builder layout") {
  QpBuilder b;
  CHECK(b.add_variables("a", 2) == 0);
  CHECK(b.add_variables("b", 3) == 2);
  CHECK(b.add_variables("a", 1) == 5);
  b.begin_row_group("g1");
  LinearExpr e;
  e.add(4, 2.0);
  e.constant = 1.0;
  b.add_row(e, 0, 5);
  const QpProblem qp = b.build();
  CHECK(qp.num_vars() == 6);
  CHECK(qp.var_span("b").offset == 2);
  CHECK(qp.var_span("b").size == 3);
  REQUIRE(qp.rows.size() == 1);
  CHECK(qp.rows[0].name == "g1");
  CHECK(qp.l(0) == -1);
  CHECK(qp.u(0) == 4);
  CHECK(qp.A.coeff(0, 4) == 2);
}

namespace {

SparseMatrix lower_of(const MatrixXd& k) {
  SparseMatrix s = k.sparseView();
  return s.triangularView<Eigen::Lower>();
}

// Quasi-definite [H + I, A'; A, -I] with random sparse H and A.
MatrixXd random_kkt(oracle::Rng& rng, Index n, Index m, double density) {
  const MatrixXd h = oracle::random_in_pattern(rng, oracle::random_pattern(rng, n, n, density));
  const MatrixXd a = oracle::random_in_pattern(rng, oracle::random_pattern(rng, m, n, density));
  MatrixXd k = MatrixXd::Zero(n + m, n + m);
  k.topLeftCorner(n, n) = h.transpose() * h + MatrixXd::Identity(n, n);
  k.bottomLeftCorner(m, n) = a;
  k.topRightCorner(n, m) = a.transpose();
  k.bottomRightCorner(m, m) = -MatrixXd::Identity(m, m);
  return k;
}

}  // namespace

TEST_CASE("supernodal LDL' against a dense solve") {
  oracle::Rng rng(61);
  for (auto [n, m, density] : {std::tuple{5, 3, 0.5}, {40, 30, 0.05}, {300, 200, 0.01}, {200, 150, 0.2}}) {
    const MatrixXd k = random_kkt(rng, n, m, density);
    const SparseMatrix lo = lower_of(k);
    detail::SupernodalLdlt f;
    f.analyze(lo);
    REQUIRE(f.factorize(lo));
    CHECK(f.rows() == n + m);
    CHECK(f.supernodes() >= 1);
    CHECK(f.factor_nonzeros() >= lo.nonZeros());
    const VectorXd b = oracle::random_matrix(rng, n + m, 1);
    const VectorXd ref = k.partialPivLu().solve(b);
    CHECK((f.solve(b) - ref).norm() < 1e-9 * (1 + ref.norm()));

    // Same pattern, new values.
    const MatrixXd k2 = 2 * k;
    REQUIRE(f.factorize(lower_of(k2)));
    CHECK((f.solve(b) - 0.5 * ref).norm() < 1e-9 * (1 + ref.norm()));

    std::vector<int> natural(n + m);
    for (int i = 0; i < n + m; ++i) natural[i] = i;
    detail::SupernodalLdlt g;
    g.analyze(lo, &natural);
    REQUIRE(g.factorize(lo));
    CHECK((g.solve(b) - ref).norm() < 1e-9 * (1 + ref.norm()));
  }
}

TEST_CASE("supernodal LDL' reports a zero pivot") {
  MatrixXd k = MatrixXd::Zero(2, 2);
  k(0, 0) = 1;
  k(1, 0) = 1;
  k(1, 1) = 1;
  SparseMatrix lo = k.sparseView();
  detail::SupernodalLdlt f;
  f.analyze(lo);
  CHECK_FALSE(f.factorize(lo));
}
