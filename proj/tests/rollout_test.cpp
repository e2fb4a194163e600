#include "doctest.h"

#include "gssctl/platoon.hpp"
#include "gssctl/rollout.hpp"
#include "support/oracles.hpp"

using namespace gssctl;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<VectorXd> random_w(oracle::Rng& rng, Index n, int N, double scale = 1.0) {
  std::vector<VectorXd> w;
  for (int k = 0; k < N; ++k) w.push_back(scale * oracle::random_matrix(rng, n, 1));
  return w;
}

std::vector<VectorXd> add(const std::vector<VectorXd>& a, const std::vector<VectorXd>& b) {
  std::vector<VectorXd> c = a;
  for (std::size_t k = 0; k < c.size(); ++k) c[k] += b[k];
  return c;
}

VectorXd stacked_w(const std::vector<VectorXd>& w, Index n) {
  VectorXd s = VectorXd::Zero(n * (static_cast<Index>(w.size()) + 1));
  for (std::size_t k = 0; k < w.size(); ++k) s.segment(static_cast<Index>(k) * n, n) = w[k];
  return s;
}

}  // namespace

TEST_CASE("autonomous rollout") {
  oracle::Rng rng(101);
  const SystemModel s = oracle::random_system(rng, 2, 1, 2);
  const int N = 4;
  const VectorXd x0 = oracle::random_matrix(rng, 2, 1);
  const Trajectory t = simulate_explicit(s, MatrixXd::Zero(5, 10), VectorXd::Zero(5), x0,
                                         std::vector<VectorXd>(N, VectorXd::Zero(2)));
  REQUIRE(t.x.size() == 5);
  REQUIRE(t.horizon() == N);
  VectorXd x = x0;
  for (int k = 0; k <= N; ++k) {
    CHECK((t.x[static_cast<std::size_t>(k)] - x).norm() < 1e-12);
    if (k < N) CHECK(t.u[static_cast<std::size_t>(k)].isZero(0));
    x = s.A * x;
  }
  CHECK(t.dynamics_residual(s) < 1e-12);
}

TEST_CASE("explicit rollout matches the stacked closed loop") {
  oracle::Rng rng(103);
  const int N = 3;
  for (int t = 0; t < 30; ++t) {
    const SystemModel s = oracle::random_system(rng, 2, 2, 2);
    const VectorXd x0 = oracle::random_matrix(rng, 2, 1);
    const StackedSystem ss = lift_dynamics(s, N, x0);
    const MatrixXd L = oracle::random_in_pattern(rng, causal_mask(N, 2, 2));
    VectorXd g = oracle::random_matrix(rng, 8, 1);
    g.tail(2).setZero();
    const auto w = random_w(rng, 2, N);
    const Trajectory tr = simulate_explicit(s, L, g, x0, w);
    const VectorXd ws = stacked_w(w, 2);
    // u = L (CB u + P w + CAx0) + g solved directly
    const MatrixXd I = MatrixXd::Identity(8, 8);
    const VectorXd u = (I - L * ss.CB).lu().solve(L * (ss.P * ws + ss.CAx0) + g);
    const VectorXd x = ss.Abold * x0 + ss.Bbold * u + ss.ED * ws;
    CHECK((tr.stacked_u() - u).norm() < 1e-10 * (1 + u.norm()));
    CHECK((tr.stacked_x() - x).norm() < 1e-10 * (1 + x.norm()));
    CHECK((tr.stacked_u() - (L * tr.stacked_y() + g)).norm() < 1e-10 * (1 + u.norm()));
    CHECK(tr.dynamics_residual(s) < 1e-10 * (1 + x.norm()));
  }
}

TEST_CASE("implicit rollout equals explicit rollout") {
  oracle::Rng rng(107);
  const int N = 3;
  for (int t = 0; t < 50; ++t) {
    const SystemModel s = oracle::random_system(rng, 2, 2, 3);
    const VectorXd x0 = oracle::random_matrix(rng, 2, 1);
    const StackedSystem ss = lift_dynamics(s, N, x0);
    const MatrixXd Q = t == 0 ? MatrixXd::Zero(8, 12) : oracle::random_in_pattern(rng, causal_mask(N, 2, 3));
    VectorXd v = oracle::random_matrix(rng, 8, 1);
    v.tail(2).setZero();
    const OutputFeedback fb = q_to_l(Q, v, ss.CB, ss.CAx0);
    const auto w = random_w(rng, 2, N);
    const Trajectory te = simulate_explicit(s, fb.L, fb.g, x0, w);
    const Trajectory ti = simulate_implicit(s, Q, fb.g, x0, w);
    CHECK((te.stacked_x() - ti.stacked_x()).norm() < 1e-8);
    CHECK((te.stacked_u() - ti.stacked_u()).norm() < 1e-8);
    if (t == 0) CHECK((ti.stacked_u() - fb.g).norm() < 1e-14);
  }
}

TEST_CASE("superposition") {
  oracle::Rng rng(109);
  const int N = 4;
  const SystemModel s = oracle::random_system(rng, 3, 2, 2);
  const MatrixXd L = oracle::random_in_pattern(rng, causal_mask(N, 2, 2));
  const VectorXd g = VectorXd::Zero(10);
  const VectorXd x0 = oracle::random_matrix(rng, 3, 1);
  const auto w1 = random_w(rng, 3, N), w2 = random_w(rng, 3, N);
  const auto zero = std::vector<VectorXd>(N, VectorXd::Zero(3));
  const VectorXd base = simulate_explicit(s, L, g, x0, zero).stacked_x();
  const VectorXd r1 = simulate_explicit(s, L, g, x0, w1).stacked_x() - base;
  const VectorXd r2 = simulate_explicit(s, L, g, x0, w2).stacked_x() - base;
  const VectorXd r12 = simulate_explicit(s, L, g, x0, add(w1, w2)).stacked_x() - base;
  CHECK((r12 - r1 - r2).norm() < 1e-10 * (1 + r12.norm()));
}

TEST_CASE("constraint verification") {
  SystemModel s;
  s.A = s.B = s.C = s.D = MatrixXd::Ones(1, 1);
  s.H = MatrixXd::Zero(1, 1);
  Trajectory t = simulate_explicit(s, MatrixXd::Zero(3, 3), (VectorXd(3) << 0.5, 1.0, 0).finished(),
                                   VectorXd::Zero(1), {VectorXd::Zero(1), VectorXd::Zero(1)});
  // x = 0, 0.5, 1.5
  ConstraintSet cons;
  cons.U = MatrixXd::Ones(1, 1);
  cons.V = MatrixXd::Zero(1, 1);
  cons.b = VectorXd::Ones(1);
  cons.R = MatrixXd::Ones(1, 1);
  cons.z = VectorXd::Constant(1, 1.0);
  SlackReport r = verify_constraints(t, cons);
  REQUIRE(r.slacks.size() == 3);
  CHECK(r.min_slack == doctest::Approx(-0.5));
  CHECK(r.worst_stage == 2);
  cons.z(0) = 2;
  cons.b(0) = 0.25;
  r = verify_constraints(t, cons);
  CHECK(r.min_slack == doctest::Approx(-0.25));
  CHECK(r.worst_stage == 1);
  CHECK(r.worst_row == 1);

  const SlackReport none = verify_constraints(t, ConstraintSet::empty(1, 1));
  CHECK(none.slacks.size() == 0);
  CHECK(none.min_slack == kInf);
  CHECK_THROWS_AS(simulate_explicit(s, MatrixXd::Zero(2, 2), VectorXd::Zero(3), VectorXd::Zero(1),
                                    {VectorXd::Zero(1), VectorXd::Zero(1)}),
                  std::invalid_argument);
}

TEST_CASE("vertex sweeps of a synthesized platoon controller") {
  PlatoonConfig cfg;
  cfg.n_vehicles = 2;
  cfg.N = 3;
  const PlatoonModel pm = build_platoon(cfg);
  const StackedSystem ss = build_stacked(pm.sys, pm.cons, pm.info, pm.N, pm.x0);
  const GssSpec spec = gss_parametrize(ss.Sbold, ymax(ss.Sbold), ss.CB);
  const SynthesisResult r = synthesize(ss, spec, pm.cost, pm.dist);
  REQUIRE(r.optimal());
  const OutputFeedback fb{r.L, r.g};

  const SweepReport ex = vertex_sweep(pm.sys, fb, pm.cons, pm.dist, pm.x0, 10000);
  CHECK(ex.exhaustive);
  CHECK(ex.rollouts == 4096);
  CHECK(ex.worst_slack >= -1e-6);
  CHECK(ex.worst_slack == doctest::Approx(r.worst_slacks.minCoeff()).epsilon(1e-6).scale(1));

  const SweepReport sampled = vertex_sweep(pm.sys, fb, pm.cons, pm.dist, pm.x0, 500, 3);
  CHECK_FALSE(sampled.exhaustive);
  CHECK(sampled.rollouts == 500);
  CHECK(sampled.worst_slack >= ex.worst_slack - 1e-12);

  DisturbanceSet flat = DisturbanceSet::box(VectorXd::Zero(4));
  const SweepReport one = vertex_sweep(pm.sys, fb, pm.cons, flat, pm.x0, 10000);
  CHECK(one.rollouts == 1);
  CHECK(one.exhaustive);

  MatrixXd M(8, 4);
  M << MatrixXd::Identity(4, 4), -MatrixXd::Identity(4, 4);
  const DisturbanceSet poly = DisturbanceSet::polytope(M, (VectorXd(8) << pm.dist.d, pm.dist.d).finished());
  const SweepReport ps = vertex_sweep(pm.sys, fb, pm.cons, poly, pm.x0, 200, 5);
  CHECK(ps.rollouts > 0);
  CHECK(ps.worst_slack >= ex.worst_slack - 1e-9);

  oracle::Rng rng(113);
  double lemma3 = 0;
  for (int t = 0; t < 100; ++t) {
    std::vector<VectorXd> w;
    for (int k = 0; k < pm.N; ++k)
      w.push_back(pm.dist.d.cwiseProduct(oracle::random_matrix(rng, 4, 1)));
    const Trajectory te = simulate_explicit(pm.sys, r.L, r.g, pm.x0, w);
    const Trajectory ti = simulate_implicit(pm.sys, r.Q, r.g, pm.x0, w);
    lemma3 = std::max(lemma3, (te.stacked_x() - ti.stacked_x()).lpNorm<Eigen::Infinity>());
    CHECK(verify_constraints(te, pm.cons).min_slack >= -1e-6);
  }
  CHECK(lemma3 < 1e-8);
}
