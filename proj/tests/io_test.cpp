#include "doctest.h"

#include <sstream>

#include "gssctl/io.hpp"
#include "gssctl/platoon.hpp"
#include "support/oracles.hpp"

using namespace gssctl;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

int error_line(const std::string& text, auto reader) {
  std::istringstream in(text);
  try {
    reader(in);
  } catch (const FormatError& e) {
    return e.line();
  }
  return -1;
}

ProblemData platoon_problem() {
  PlatoonConfig cfg;
  cfg.n_vehicles = 2;
  cfg.N = 3;
  const PlatoonModel pm = build_platoon(cfg);
  ProblemData pd;
  pd.sys = pm.sys;
  pd.cons = pm.cons;
  pd.info = pm.info;
  pd.N = pm.N;
  pd.x0 = pm.x0;
  pd.dist = pm.dist;
  pd.cost = pm.cost;
  return pd;
}

}  // namespace

TEST_CASE("pattern files") {
  const BinMatrix s = BinMatrix::from_rows({{1, 1, 0}, {0, 1, 1}, {1, 0, 0}});
  std::ostringstream out;
  write_pattern(out, s);
  std::istringstream in(out.str());
  CHECK(read_pattern(in) == s);

  std::istringstream commented("# worked example\n2 3\n1 0 1  # first\n\n0 1 0\n");
  CHECK(read_pattern(commented) == BinMatrix::from_rows({{1, 0, 1}, {0, 1, 0}}));

  auto rd = [](std::istream& i) { return read_pattern(i); };
  CHECK(error_line("2 2\n1 0\n0 2\n", rd) == 3);
  CHECK(error_line("2 2\n1 0\n", rd) > 0);
  CHECK(error_line("2 x\n", rd) == 1);
  CHECK(error_line("2 2\n1 0 1\n0 1\n", rd) == 2);
}

TEST_CASE("keyed files") {
  std::istringstream in(
      "gssctl-problem 1\n# comment\nint N 3\nreal eps 1e-3\nvector w 3 1 -inf\n  inf\n"
      "matrix M 2 2 1 2\n3 4\npattern P 1 2 0 1\n");
  const KeyedFile kf = KeyedFile::parse(in, kProblemMagic, "t");
  CHECK(kf.version() == 1);
  CHECK(kf.get_int("N") == 3);
  CHECK(kf.get_real("eps") == 1e-3);
  const VectorXd w = kf.get_vector("w", 3);
  CHECK(w(1) == -kInf);
  CHECK(w(2) == kInf);
  CHECK(kf.get_matrix("M") == (MatrixXd(2, 2) << 1, 2, 3, 4).finished());
  CHECK(kf.get_pattern("P") == BinMatrix::from_rows({{0, 1}}));
  CHECK_THROWS_AS(kf.get_matrix("M", 3, 2), FormatError);
  CHECK_THROWS_AS(kf.get_int("eps"), FormatError);
  CHECK_THROWS_AS(kf.get_real("missing"), FormatError);

  auto parse = [](std::istream& i) { KeyedFile::parse(i, kProblemMagic, "t"); };
  CHECK(error_line("gssctl-controller 1\n", parse) == 1);
  CHECK(error_line("gssctl-problem 2\n", parse) == 1);
  CHECK(error_line("gssctl-problem 1\nint N 3\nint N 4\n", parse) == 3);
  CHECK(error_line("gssctl-problem 1\nmatrix M 2 2\n1 2\n3 oops\n", parse) == 4);
  CHECK(error_line("gssctl-problem 1\nfoo X 1\n", parse) == 2);
  CHECK(error_line("gssctl-problem 1\nvector v 3 1 2\n", parse) > 0);
}

TEST_CASE("problem files round-trip exactly") {
  ProblemData pd = platoon_problem();
  pd.sys.A(0, 1) = 0.1 + 0.2;  // not representable in 12 digits
  std::ostringstream out;
  write_problem(out, pd);
  std::istringstream in(out.str());
  const ProblemData back = read_problem(in);
  CHECK(back.N == pd.N);
  CHECK(back.sys.A == pd.sys.A);
  CHECK(back.sys.B == pd.sys.B);
  CHECK(back.sys.C == pd.sys.C);
  CHECK(back.cons.U == pd.cons.U);
  CHECK(back.cons.V == pd.cons.V);
  CHECK(back.cons.b == pd.cons.b);
  CHECK(back.cons.R == pd.cons.R);
  CHECK(back.cons.z == pd.cons.z);
  CHECK(back.x0 == pd.x0);
  CHECK(back.dist.d == pd.dist.d);
  CHECK(back.info.blocks == pd.info.blocks);
  for (std::size_t k = 0; k < pd.cost.state_weights.size(); ++k) {
    CHECK(back.cost.state_weights[k] == pd.cost.state_weights[k]);
    CHECK(back.cost.state_refs[k] == pd.cost.state_refs[k]);
  }
  CHECK_FALSE(back.T.has_value());

  const Index n = pd.sys.n();
  MatrixXd M(2 * n, n);
  M << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
  pd.dist = DisturbanceSet::polytope(M, VectorXd::Constant(2 * n, 0.1));
  const BinMatrix T = causal_mask(3, 2, 4);
  pd.T = T;
  pd.Y = ymax(T);
  std::ostringstream out2;
  write_problem(out2, pd);
  std::istringstream in2(out2.str());
  const ProblemData b2 = read_problem(in2);
  CHECK(b2.dist.kind == DisturbanceSet::Kind::polytope);
  CHECK(b2.dist.M == M);
  CHECK(*b2.T == T);
  CHECK(*b2.Y == ymax(T));
}

TEST_CASE("problem validation") {
  const std::string base =
      "gssctl-problem 1\nint N 2\nmatrix A 1 1 1\nmatrix B 1 1 1\nmatrix C 1 1 1\nvector x0 1 0\n";
  auto rd = [](std::istream& i) { read_problem(i); };
  CHECK(error_line(base + "pattern S 1 1 1\nvector dist_box 1 0.1\n", rd) == -1);
  CHECK(error_line(base + "vector dist_box 1 0.1\n", rd) == 0);
  CHECK(error_line(base + "pattern S 1 1 1\n", rd) == 0);
  CHECK(error_line(base + "pattern S 1 1 1\nvector dist_box 1 -0.1\n", rd) == 8);
  CHECK(error_line(base + "pattern S 1 2 1 1\nvector dist_box 1 0.1\n", rd) == 7);
  CHECK(error_line(base + "pattern S_2_0 1 1 1\nvector dist_box 1 0.1\n", rd) == 7);
  std::istringstream ok(base + "pattern S_1_0 1 1 1\nvector dist_box 1 0.1\n");
  const ProblemData pd = read_problem(ok);
  CHECK(pd.info.blocks.size() == 1);
  CHECK(pd.sys.D.isIdentity(0));
  CHECK(pd.cons.s() == 0);
}

TEST_CASE("controller files") {
  oracle::Rng rng(127);
  ControllerData cd;
  cd.n = 2;
  cd.m = 1;
  cd.p = 2;
  cd.N = 2;
  cd.L = oracle::random_in_pattern(rng, causal_mask(2, 1, 2));
  cd.g = oracle::random_matrix(rng, 3, 1);
  cd.Q = oracle::random_matrix(rng, 3, 6);
  cd.v = oracle::random_matrix(rng, 3, 1);
  std::ostringstream out;
  write_controller(out, cd);
  std::istringstream in(out.str());
  const ControllerData back = read_controller(in);
  CHECK(back.L == cd.L);
  CHECK(back.g == cd.g);
  CHECK(back.Q == cd.Q);
  CHECK(back.v == cd.v);
  CHECK(back.N == 2);

  std::istringstream bad("gssctl-controller 1\nint n 2\nint m 1\nint p 2\nint N 2\nmatrix L 2 6\n" +
                         std::string(12, '0') + "\n");
  CHECK_THROWS_AS(read_controller(bad), FormatError);
}

TEST_CASE("reports and number formatting") {
  CHECK(fmt(1.0 / 3.0) == "0.333333333333");
  CHECK(fmt(kInf) == "inf");
  CHECK(fmt(-kInf) == "-inf");
  CHECK(fmt(std::nan("")) == "nan");
  Report r;
  r.add("J", 2.5);
  r.add("dim", 7);
  r.add("ok", true);
  r.add("status", "optimal");
  std::ostringstream out;
  r.write(out);
  CHECK(out.str() == "gssctl-report 1\nJ 2.5\ndim 7\nok true\nstatus optimal\n");
}

TEST_CASE("trajectory table") {
  const ProblemData pd = platoon_problem();
  const Trajectory t = simulate_explicit(pd.sys, MatrixXd::Zero(8, 16), VectorXd::Zero(8), pd.x0,
                                         std::vector<VectorXd>(3, VectorXd::Zero(4)));
  std::ostringstream out;
  write_trajectory(out, t, pd.cons);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "# gssctl-trajectory 1");
  std::getline(in, line);
  std::istringstream hs(line);
  std::vector<std::string> head{std::istream_iterator<std::string>(hs), {}};
  CHECK(head.front() == "stage");
  CHECK(head.size() == static_cast<std::size_t>(1 + 4 + 2 + 4 + 4 + pd.cons.s() + pd.cons.r()));
  int rows = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<std::string> f{std::istream_iterator<std::string>(ls), {}};
    CHECK(f.size() == head.size());
    CHECK(f[0] == std::to_string(rows));
    ++rows;
  }
  CHECK(rows == 4);
}

TEST_CASE("QP triplets round-trip") {
  PlatoonConfig cfg;
  cfg.n_vehicles = 2;
  cfg.N = 2;
  const PlatoonModel pm = build_platoon(cfg);
  const StackedSystem ss = build_stacked(pm.sys, pm.cons, pm.info, pm.N, pm.x0);
  const GssSpec spec = gss_parametrize(ss.Sbold, ymax(ss.Sbold), ss.CB);
  const QpProblem qp = assemble_qp(ss, spec, pm.cost, pm.dist);
  std::ostringstream out;
  write_qp(out, qp);
  std::istringstream in(out.str());
  const QpProblem back = read_qp(in);
  CHECK(MatrixXd(back.P) == MatrixXd(qp.P));
  CHECK(MatrixXd(back.A) == MatrixXd(qp.A));
  CHECK(back.q == qp.q);
  CHECK(back.l == qp.l);
  CHECK(back.u == qp.u);
  CHECK(back.constant == qp.constant);
  REQUIRE(back.vars.size() == qp.vars.size());
  REQUIRE(back.rows.size() == qp.rows.size());
  for (std::size_t i = 0; i < qp.rows.size(); ++i) {
    CHECK(back.rows[i].name == qp.rows[i].name);
    CHECK(back.rows[i].size == qp.rows[i].size);
  }
  CHECK(solve(back).objective == doctest::Approx(solve(qp).objective).epsilon(1e-12));

  auto rd = [](std::istream& i) { read_qp(i); };
  CHECK(error_line("gssctl-qp 1\ndims 2 1\nA 3 0 1\n", rd) == 3);
  CHECK(error_line("gssctl-qp 2\n", rd) == 1);
}
