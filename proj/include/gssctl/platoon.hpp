#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gssctl/robust.hpp"
#include "gssctl/rollout.hpp"

namespace gssctl {

/// Newtons per model input unit: inputs, thrust bounds and controller gains are in kN.
inline constexpr double kForceUnit = 1000.0;

/// Vehicle chain with force inputs. Empty x0/targets select the defaults:
/// at rest, 5 m apart (p_i = -5 i), each target 10 m ahead of its start.
struct PlatoonConfig {
  int n_vehicles = 8;
  double mass = 1700.0;
  double Ts = 0.2;
  int N = 15;
  double thrust_limit = 20000.0;
  double safety_distance = 2.0;
  double dist_pos = 0.1;
  double dist_vel = 0.1;
  double w_pos = 0.01;
  double w_vel = 0.002;
  double w_pos_terminal = 0.2;
  double w_vel_terminal = 0.2;
  Eigen::VectorXd x0;       // [positions; velocities]
  Eigen::VectorXd targets;  // target positions

  void validate() const;
  Eigen::VectorXd initial_state() const;
  Eigen::VectorXd target_positions() const;
};

struct PlatoonModel {
  SystemModel sys;
  ConstraintSet cons;
  CostSpec cost;
  DisturbanceSet dist;
  InfoStructure info;
  Eigen::VectorXd x0;
  int N = 0;
};

PlatoonModel build_platoon(const PlatoonConfig& cfg);

/// Own outputs of vehicle i: columns 2i (position or gap) and 2i+1 (velocity).
BinMatrix platoon_block_S(int n);

/// Leader block repeated on even vehicles, odd vehicles blind, a last odd
/// vehicle keeps its own velocity.
BinMatrix qi_subset_T(int n);

/// Vehicle i also receives the outputs of vehicle l < i, delayed by i - l steps.
InfoStructure relaxed_superset_S(int n, int N);

struct VariantResult {
  std::string name;
  SynthesisResult synth;
  Index dim = 0;
  double J = 0.0;
  SweepReport sweep;
  double lemma3_max_diff = 0.0;  // explicit vs implicit rollouts
  Trajectory nominal;            // w = 0 rollout
  double seconds = 0.0;
};

struct BenchmarkOptions {
  SolverSettings solver;
  long sweep_budget = 10000;
  int lemma3_samples = 100;
  std::uint64_t seed = 7;
  bool verbose = false;
};

struct PlatoonReport {
  PlatoonConfig cfg;
  VariantResult gss, qi, low;
  bool ordering = false;         // J_low <= J_GSS <= J_QI
  bool strict_improvement = false;  // J_GSS < J_QI
  double improvement = 0.0;      // 1 - J_GSS / J_QI
  double gap = 0.0;              // (J_GSS - J_low) / J_low
  bool all_optimal() const { return gss.synth.optimal() && qi.synth.optimal() && low.synth.optimal(); }
};

PlatoonReport run_benchmark(const PlatoonConfig& cfg, const BenchmarkOptions& opt = {});

}  // namespace gssctl
