#include "gssctl/platoon.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace gssctl {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void PlatoonConfig::validate() const {
  require(n_vehicles >= 1, "PlatoonConfig: need at least one vehicle");
  require(N >= 1, "PlatoonConfig: horizon must be at least 1");
  require(mass > 0 && Ts > 0 && thrust_limit > 0 && safety_distance > 0,
          "PlatoonConfig: physical parameters must be positive");
  require(dist_pos >= 0 && dist_vel >= 0, "PlatoonConfig: disturbance half-widths must be nonnegative");
  require(w_pos >= 0 && w_vel >= 0 && w_pos_terminal >= 0 && w_vel_terminal >= 0,
          "PlatoonConfig: cost weights must be nonnegative");
  const Index n = n_vehicles;
  require(x0.size() == 0 || x0.size() == 2 * n, "PlatoonConfig: x0 must have 2n entries");
  require(targets.size() == 0 || targets.size() == n, "PlatoonConfig: targets must have n entries");
  const Eigen::VectorXd s = initial_state();
  for (Index i = 1; i < n; ++i)
    require(s(i - 1) - s(i) >= safety_distance, "PlatoonConfig: initial gaps must respect the safety distance");
}

Eigen::VectorXd PlatoonConfig::initial_state() const {
  if (x0.size()) return x0;
  Eigen::VectorXd s = Eigen::VectorXd::Zero(2 * n_vehicles);
  for (int i = 0; i < n_vehicles; ++i) s(i) = -5.0 * i + 0.0;
  return s;
}

Eigen::VectorXd PlatoonConfig::target_positions() const {
  if (targets.size()) return targets;
  return initial_state().head(n_vehicles).array() + 10.0;
}

PlatoonModel build_platoon(const PlatoonConfig& cfg) {
  cfg.validate();
  const Index n = cfg.n_vehicles;
  const Index nx = 2 * n;
  Eigen::MatrixXd Ac = Eigen::MatrixXd::Zero(nx, nx), Bc = Eigen::MatrixXd::Zero(nx, n);
  Ac.topRightCorner(n, n).setIdentity();
  // Inputs in kN.
  Bc.bottomRows(n) = Eigen::MatrixXd::Identity(n, n) * (kForceUnit / cfg.mass);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(nx, nx);

  PlatoonModel pm;
  pm.N = cfg.N;
  pm.sys.A = I + Ac * cfg.Ts;
  pm.sys.B = (I + Ac * cfg.Ts / 2.0) * Bc * cfg.Ts;
  // Output pair (2i, 2i+1): leader position or gap to the predecessor, then own velocity.
  pm.sys.C = Eigen::MatrixXd::Zero(nx, nx);
  for (Index i = 0; i < n; ++i) {
    pm.sys.C(2 * i, i) = 1.0;
    if (i > 0) {
      pm.sys.C(2 * i, i - 1) = 1.0;
      pm.sys.C(2 * i, i) = -1.0;
    }
    pm.sys.C(2 * i + 1, n + i) = 1.0;
  }
  pm.sys.D = I;
  pm.sys.H = I;

  // |u_i| <= thrust and p_{i-1} - p_i >= safety.
  const Index s = 2 * n + (n - 1);
  pm.cons.U = Eigen::MatrixXd::Zero(s, nx);
  pm.cons.V = Eigen::MatrixXd::Zero(s, n);
  pm.cons.b = Eigen::VectorXd::Zero(s);
  for (Index i = 0; i < n; ++i) {
    pm.cons.V(i, i) = 1.0;
    pm.cons.V(n + i, i) = -1.0;
    pm.cons.b(i) = cfg.thrust_limit / kForceUnit;
    pm.cons.b(n + i) = cfg.thrust_limit / kForceUnit;
  }
  pm.cons.R = Eigen::MatrixXd::Zero(n - 1, nx);
  pm.cons.z = Eigen::VectorXd::Constant(n - 1, -cfg.safety_distance);
  for (Index i = 1; i < n; ++i) {
    const Index row = 2 * n + i - 1;
    pm.cons.U(row, i - 1) = -1.0;
    pm.cons.U(row, i) = 1.0;
    pm.cons.b(row) = -cfg.safety_distance;
    pm.cons.R(i - 1, i - 1) = -1.0;
    pm.cons.R(i - 1, i) = 1.0;
  }

  Eigen::VectorXd d(nx);
  d.head(n).setConstant(cfg.dist_pos);
  d.tail(n).setConstant(cfg.dist_vel);
  pm.dist = DisturbanceSet::box(d);

  pm.cost = CostSpec::zero(nx, n, cfg.N);
  Eigen::VectorXd ref = Eigen::VectorXd::Zero(nx);
  ref.head(n) = cfg.target_positions();
  for (int k = 0; k <= cfg.N; ++k) {
    Eigen::VectorXd w(nx);
    const bool term = k == cfg.N;
    w.head(n).setConstant(term ? cfg.w_pos_terminal : cfg.w_pos);
    w.tail(n).setConstant(term ? cfg.w_vel_terminal : cfg.w_vel);
    pm.cost.state_weights[static_cast<std::size_t>(k)] = w;
    pm.cost.state_refs[static_cast<std::size_t>(k)] = ref;
  }

  pm.info = InfoStructure::repeated(cfg.N, platoon_block_S(cfg.n_vehicles));
  pm.x0 = cfg.initial_state();
  return pm;
}

BinMatrix platoon_block_S(int n) {
  return kron(BinMatrix::identity(n), BinMatrix::ones(1, 2));
}

BinMatrix qi_subset_T(int n) {
  require(n >= 1, "qi_subset_T: need at least one vehicle");
  BinMatrix T(n, 2 * n);
  for (int i = 0; i < n; ++i) {
    if (i % 2 == 0) {
      T.set(i, 2 * i);
      T.set(i, 2 * i + 1);
    } else if (i == n - 1) {
      T.set(i, 2 * i + 1);
    }
  }
  return T;
}

InfoStructure relaxed_superset_S(int n, int N) {
  require(n >= 1 && N >= 1, "relaxed_superset_S: invalid size");
  InfoStructure info;
  info.horizon = N;
  for (int k = 0; k < N; ++k)
    for (int j = 0; j <= k; ++j) {
      BinMatrix block(n, 2 * n);
      for (int i = 0; i < n; ++i)
        for (int l = 0; l <= i; ++l)
          if (k - j >= i - l) {
            block.set(i, 2 * l);
            block.set(i, 2 * l + 1);
          }
      info.blocks.emplace(std::make_pair(k, j), block);
    }
  return info;
}

namespace {

void finish_variant(VariantResult& vr, const PlatoonModel& pm, const BenchmarkOptions& opt, std::uint64_t seed) {
  const SynthesisResult& sr = vr.synth;
  vr.J = sr.objective;
  if (sr.Q.size() == 0) return;
  const int N = pm.N;
  const Index n = pm.sys.n();
  const std::vector<Eigen::VectorXd> zero(static_cast<std::size_t>(N), Eigen::VectorXd::Zero(n));
  vr.nominal = simulate_explicit(pm.sys, sr.L, sr.g, pm.x0, zero);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int it = 0; it < opt.lemma3_samples; ++it) {
    std::vector<Eigen::VectorXd> w;
    for (int k = 0; k < N; ++k) {
      Eigen::VectorXd wk(n);
      for (Index e = 0; e < n; ++e) wk(e) = pm.dist.d(e) * uni(rng);
      w.push_back(wk);
    }
    const Trajectory te = simulate_explicit(pm.sys, sr.L, sr.g, pm.x0, w);
    const Trajectory ti = simulate_implicit(pm.sys, sr.Q, sr.g, pm.x0, w);
    vr.lemma3_max_diff = std::max({vr.lemma3_max_diff, (te.stacked_y() - ti.stacked_y()).lpNorm<Eigen::Infinity>(),
                                   (te.stacked_x() - ti.stacked_x()).lpNorm<Eigen::Infinity>()});
  }
  if (opt.sweep_budget > 0)
    vr.sweep = vertex_sweep(pm.sys, OutputFeedback{sr.L, sr.g}, pm.cons, pm.dist, pm.x0, opt.sweep_budget, seed + 1);
}

}  // namespace

PlatoonReport run_benchmark(const PlatoonConfig& cfg, const BenchmarkOptions& opt) {
  PlatoonReport rep;
  rep.cfg = cfg;
  const PlatoonModel pm = build_platoon(cfg);
  const StackedSystem ss = build_stacked(pm.sys, pm.cons, pm.info, pm.N, pm.x0);
  SolverSettings st = opt.solver;
  st.verbose = st.verbose || opt.verbose;

  auto run = [&](VariantResult& vr, const std::string& name, const GssSpec& spec, bool relax, std::uint64_t seed) {
    const auto t0 = std::chrono::steady_clock::now();
    vr.name = name;
    vr.dim = spec.dim();
    vr.synth = synthesize(ss, spec, pm.cost, pm.dist, st, relax);
    finish_variant(vr, pm, opt, seed);
    vr.seconds = elapsed(t0);
    if (opt.verbose)
      std::fprintf(stderr, "%s: dim=%ld status=%s J=%.10g (%.1fs)\n", name.c_str(), static_cast<long>(vr.dim),
                   to_string(vr.synth.status), vr.J, vr.seconds);
  };

  // Upper bound through the largest GSS inside Sparse(S).
  run(rep.gss, "gss", gss_parametrize(ss.Sbold, ymax(ss.Sbold), ss.CB), false, opt.seed);

  // Upper bound through a QI sparsity subspace of S.
  const BinMatrix Tb = stack_info_structure(InfoStructure::repeated(cfg.N, qi_subset_T(cfg.n_vehicles)),
                                            pm.sys.m(), pm.sys.p());
  run(rep.qi, "qi_subset", gss_parametrize(Tb, bool_mul(Tb, ss.Delta), ss.CB), false, opt.seed + 100);

  // Lower bound through a QI superset of S.
  const BinMatrix Rb = stack_info_structure(relaxed_superset_S(cfg.n_vehicles, cfg.N), pm.sys.m(), pm.sys.p());
  run(rep.low, "relaxed", gss_parametrize(Rb, bool_mul(Rb, ss.Delta), ss.CB), true, opt.seed + 200);

  const double tol = 1e-6 * std::max(1.0, std::abs(rep.qi.J));
  rep.ordering = rep.low.J <= rep.gss.J + tol && rep.gss.J <= rep.qi.J + tol;
  rep.strict_improvement = rep.gss.J < rep.qi.J - tol;
  rep.improvement = rep.qi.J != 0.0 ? 1.0 - rep.gss.J / rep.qi.J : 0.0;
  rep.gap = rep.low.J != 0.0 ? (rep.gss.J - rep.low.J) / rep.low.J : 0.0;
  return rep;
}

}  // namespace gssctl
