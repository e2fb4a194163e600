#include "gssctl/rollout.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace gssctl {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

int horizon_of(const Eigen::MatrixXd& K, Index m, Index p, const char* who) {
  require(m > 0 && p > 0 && K.rows() % m == 0 && K.cols() % p == 0 && K.rows() / m == K.cols() / p,
          std::string(who) + ": controller must be m(N+1) x p(N+1)");
  const int N = static_cast<int>(K.rows() / m) - 1;
  require(N >= 1, std::string(who) + ": horizon must be at least 1");
  require(sparse_member(K, causal_mask(N, m, p), 0.0), std::string(who) + ": controller is not causal");
  return N;
}

void check_inputs(const SystemModel& sys, const Eigen::VectorXd& g, const Eigen::VectorXd& x0,
                  const std::vector<Eigen::VectorXd>& w, int N, const char* who) {
  sys.validate();
  require(g.size() == sys.m() * (N + 1), std::string(who) + ": g must have m(N+1) entries");
  require(x0.size() == sys.n(), std::string(who) + ": x0 must have n entries");
  require(static_cast<int>(w.size()) == N, std::string(who) + ": need N disturbance vectors");
  for (const auto& wk : w) require(wk.size() == sys.n(), std::string(who) + ": disturbances must be n-vectors");
}

Eigen::VectorXd stack(const std::vector<Eigen::VectorXd>& parts, Index width, int blocks) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(width * blocks);
  for (std::size_t k = 0; k < parts.size(); ++k) out.segment(static_cast<Index>(k) * width, width) = parts[k];
  return out;
}

}  // namespace

Eigen::VectorXd Trajectory::stacked_x() const { return stack(x, x.front().size(), static_cast<int>(x.size())); }

Eigen::VectorXd Trajectory::stacked_u() const {
  const Index m = u.empty() ? 0 : u.front().size();
  return stack(u, m, horizon() + 1);
}

Eigen::VectorXd Trajectory::stacked_y() const { return stack(y, y.front().size(), static_cast<int>(y.size())); }

double Trajectory::dynamics_residual(const SystemModel& sys) const {
  double worst = 0.0;
  for (int k = 0; k < horizon(); ++k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    const Eigen::VectorXd r = x[kk + 1] - sys.A * x[kk] - sys.B * u[kk] - sys.D * w[kk];
    worst = std::max(worst, r.lpNorm<Eigen::Infinity>());
  }
  return worst;
}

std::vector<Eigen::VectorXd> split_stages(const Eigen::VectorXd& w, Index n, int N) {
  require(w.size() >= n * N, "split_stages: vector too short");
  std::vector<Eigen::VectorXd> out;
  for (int k = 0; k < N; ++k) out.push_back(w.segment(k * n, n));
  return out;
}

Trajectory simulate_explicit(const SystemModel& sys, const Eigen::MatrixXd& L, const Eigen::VectorXd& g,
                             const Eigen::VectorXd& x0, const std::vector<Eigen::VectorXd>& w) {
  const Index m = sys.m(), p = sys.p();
  const int N = horizon_of(L, m, p, "simulate_explicit");
  check_inputs(sys, g, x0, w, N, "simulate_explicit");
  Trajectory t;
  t.w = w;
  t.x.push_back(x0);
  Eigen::VectorXd ys(p * (N + 1));
  for (int k = 0; k <= N; ++k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    Eigen::VectorXd yk = sys.C * t.x[kk];
    if (k < N) yk += sys.H * w[kk];
    t.y.push_back(yk);
    ys.segment(k * p, p) = yk;
    if (k == N) break;
    const Eigen::VectorXd uk = L.block(k * m, 0, m, (k + 1) * p) * ys.head((k + 1) * p) + g.segment(k * m, m);
    t.u.push_back(uk);
    t.x.push_back(sys.A * t.x[kk] + sys.B * uk + sys.D * w[kk]);
  }
  return t;
}

Trajectory simulate_implicit(const SystemModel& sys, const Eigen::MatrixXd& Q, const Eigen::VectorXd& g,
                             const Eigen::VectorXd& x0, const std::vector<Eigen::VectorXd>& w) {
  const Index m = sys.m(), p = sys.p();
  const int N = horizon_of(Q, m, p, "simulate_implicit");
  check_inputs(sys, g, x0, w, N, "simulate_implicit");
  const StackedSystem ss = lift_dynamics(sys, N, x0);
  const Eigen::MatrixXd QCB = Q * ss.CB;

  Trajectory t;
  t.w = w;
  t.x.push_back(x0);
  Eigen::VectorXd ys(p * (N + 1)), us = Eigen::VectorXd::Zero(m * (N + 1));
  for (int k = 0; k <= N; ++k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    Eigen::VectorXd yk = sys.C * t.x[kk];
    if (k < N) yk += sys.H * w[kk];
    t.y.push_back(yk);
    ys.segment(k * p, p) = yk;
    if (k == N) break;
    // Block row k of Q CB only involves u_0..u_{k-1}.
    const auto qcb = QCB.block(k * m, 0, m, k * m);
    const Eigen::VectorXd uk = Q.block(k * m, 0, m, (k + 1) * p) * ys.head((k + 1) * p) -
                               qcb * us.head(k * m) + g.segment(k * m, m) + qcb * g.head(k * m);
    us.segment(k * m, m) = uk;
    t.u.push_back(uk);
    t.x.push_back(sys.A * t.x[kk] + sys.B * uk + sys.D * w[kk]);
  }
  return t;
}

SlackReport verify_constraints(const Trajectory& traj, const ConstraintSet& cons) {
  const int N = traj.horizon();
  const Index s = cons.s(), r = cons.r();
  SlackReport rep;
  rep.slacks.resize(N * s + r);
  for (int k = 0; k < N; ++k) {
    const std::size_t kk = static_cast<std::size_t>(k);
    rep.slacks.segment(k * s, s) = cons.b - cons.U * traj.x[kk] - cons.V * traj.u[kk];
  }
  rep.slacks.tail(r) = cons.z - cons.R * traj.x.back();
  for (Index i = 0; i < rep.slacks.size(); ++i) {
    if (rep.slacks(i) < rep.min_slack) {
      rep.min_slack = rep.slacks(i);
      rep.worst_row = i;
      rep.worst_stage = (s > 0 && i < N * s) ? static_cast<int>(i / s) : N;
    }
  }
  return rep;
}

SweepReport vertex_sweep(const SystemModel& sys, const OutputFeedback& ctrl, const ConstraintSet& cons,
                         const DisturbanceSet& dist, const Eigen::VectorXd& x0, long budget, std::uint64_t seed) {
  require(budget >= 1, "vertex_sweep: budget must be positive");
  const Index n = sys.n();
  dist.validate(n);
  const int N = horizon_of(ctrl.L, sys.m(), sys.p(), "vertex_sweep");
  SweepReport rep;
  auto run = [&](const std::vector<Eigen::VectorXd>& w) {
    const SlackReport s = verify_constraints(simulate_explicit(sys, ctrl.L, ctrl.g, x0, w), cons);
    ++rep.rollouts;
    if (s.min_slack < rep.worst_slack) {
      rep.worst_slack = s.min_slack;
      rep.worst_row = s.worst_row;
      rep.worst_stage = s.worst_stage;
    }
  };
  std::mt19937_64 rng(seed);

  if (dist.kind == DisturbanceSet::Kind::box) {
    std::vector<std::pair<int, Index>> free;  // (stage, coordinate) with nonzero width
    for (int k = 0; k < N; ++k)
      for (Index e = 0; e < n; ++e)
        if (dist.d(e) > 0.0) free.emplace_back(k, e);
    auto build = [&](auto&& sign) {
      std::vector<Eigen::VectorXd> w(static_cast<std::size_t>(N), Eigen::VectorXd::Zero(n));
      for (std::size_t f = 0; f < free.size(); ++f)
        w[static_cast<std::size_t>(free[f].first)](free[f].second) = sign(f) ? dist.d(free[f].second) : -dist.d(free[f].second);
      return w;
    };
    if (free.size() < 62 && (1L << free.size()) <= budget) {
      rep.exhaustive = true;
      for (long mask = 0; mask < (1L << free.size()); ++mask) run(build([&](std::size_t f) { return (mask >> f) & 1; }));
    } else {
      std::bernoulli_distribution coin(0.5);
      for (long it = 0; it < budget; ++it) {
        std::vector<bool> bits(free.size());
        for (std::size_t f = 0; f < free.size(); ++f) bits[f] = coin(rng);
        run(build([&](std::size_t f) { return bits[f]; }));
      }
    }
    return rep;
  }

  // Pool of stage vertices from LPs in random directions.
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Eigen::VectorXd> pool;
  const long pool_size = std::min<long>(budget, 64);
  for (long it = 0; it < pool_size; ++it) {
    Eigen::VectorXd dir(n);
    for (Index e = 0; e < n; ++e) dir(e) = gauss(rng);
    pool.push_back(polytope_argmax(dir, dist.M, dist.h));
  }
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  for (long it = 0; it < budget; ++it) {
    std::vector<Eigen::VectorXd> w;
    for (int k = 0; k < N; ++k) w.push_back(pool[pick(rng)]);
    run(w);
  }
  return rep;
}

}  // namespace gssctl
