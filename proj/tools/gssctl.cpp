#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "gssctl/gss.hpp"
#include "gssctl/io.hpp"
#include "gssctl/platoon.hpp"
#include "gssctl/robust.hpp"
#include "gssctl/rollout.hpp"
#include "gssctl/stacked.hpp"

using namespace gssctl;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kInputError = 2;

struct Options {
  std::string problem, controller, output, report, pattern, T, Y, S, delta, w_file, traj_dir, export_problem;
  std::string solver = "ipm";
  double eps_abs = 1e-8, eps_rel = 1e-8;
  int max_iter = 200000, ipm_max_iter = 200;
  double slack_tol = 1e-6, sparsity_tol = 1e-6;
  long sweep = 0;
  std::uint64_t seed = 7;
  bool allow_uncertified = false, verbose = false, basis = false;
  PlatoonConfig platoon;
  int lemma3_samples = 100;
};

SolverSettings solver_settings(const Options& o) {
  SolverSettings st;
  st.method = o.solver == "admm" ? SolverMethod::admm : SolverMethod::interior_point;
  st.eps_abs = o.eps_abs;
  st.eps_rel = o.eps_rel;
  st.max_iter = o.max_iter;
  st.ipm_max_iter = o.ipm_max_iter;
  st.verbose = o.verbose;
  st.validate();
  return st;
}

// Writes to `path`, or stdout when it is empty or "-".
template <class F>
void emit(const std::string& path, F&& body) {
  if (path.empty() || path == "-") {
    body(std::cout);
    return;
  }
  std::ofstream f(path);
  if (!f) throw FormatError(path, 0, "", "cannot open for writing");
  body(f);
}

void print_pairs(const char* label, const std::vector<std::pair<Index, Index>>& v) {
  std::printf("%s %zu\n", label, v.size());
  for (const auto& [i, j] : v) std::printf("  (%ld, %ld)\n", static_cast<long>(i), static_cast<long>(j));
}

StackedSystem stacked_of(const ProblemData& pd) { return build_stacked(pd.sys, pd.cons, pd.info, pd.N, pd.x0); }

GssSpec spec_of(const ProblemData& pd, const StackedSystem& ss) {
  const BinMatrix T = pd.T ? *pd.T : ss.Sbold;
  const BinMatrix Y = pd.Y ? *pd.Y : ymax(T);
  return gss_parametrize(T, Y, ss.CB);
}

int cmd_ymax(const Options& o) {
  const BinMatrix T = load_pattern(o.pattern);
  emit(o.output, [&](std::ostream& out) { write_pattern(out, ymax(T)); });
  return kOk;
}

int cmd_certify(const Options& o) {
  const BinMatrix T = load_pattern(o.T), Y = load_pattern(o.Y), S = load_pattern(o.S);
  if (Y.rows() != T.rows() || Y.cols() != T.rows())
    throw FormatError(o.Y, 0, "dims", "Y must be square with as many rows as T");
  if (S.rows() != T.rows() || S.cols() != T.cols()) throw FormatError(o.S, 0, "dims", "S must match T");
  const SparsityCertificate c = certify_sparsity_preserving(T, Y, S);
  std::printf("sparsity_preserving %s\n", c.pass ? "true" : "false");
  print_pairs("T_outside_S", c.t_outside_s);
  print_pairs("YT_outside_T", c.yt_outside_t);
  return c.pass ? kOk : kFailed;
}

int cmd_qi_check(const Options& o) {
  bool qi = true;
  if (!o.problem.empty()) {
    const ProblemData pd = load_problem(o.problem);
    const StackedSystem ss = stacked_of(pd);
    const GssSpec spec = spec_of(pd, ss);
    const auto wit = qi_pattern_witnesses(spec.T, ss.Delta);
    const QiSubspaceReport rep = qi_subspace_report(spec, ss.CB);
    std::printf("pattern_qi %s\n", wit.empty() ? "true" : "false");
    print_pairs("witnesses", wit);
    std::printf("subspace_dim %ld\n", static_cast<long>(spec.dim()));
    std::printf("subspace_qi %s\n", rep.qi ? "true" : "false");
    std::printf("worst_residual %s\n", fmt(rep.worst_residual).c_str());
    qi = wit.empty() && rep.qi;
  } else {
    const BinMatrix T = load_pattern(o.T), D = load_pattern(o.delta);
    if (D.rows() != T.cols() || D.cols() != T.rows())
      throw FormatError(o.delta, 0, "dims", "Delta must be cols(T) x rows(T)");
    const auto wit = qi_pattern_witnesses(T, D);
    std::printf("pattern_qi %s\n", wit.empty() ? "true" : "false");
    print_pairs("witnesses", wit);
    qi = wit.empty();
  }
  return qi ? kOk : kFailed;
}

int cmd_parametrize(const Options& o) {
  const ProblemData pd = load_problem(o.problem);
  const StackedSystem ss = stacked_of(pd);
  const GssSpec spec = spec_of(pd, ss);
  const SparsityCertificate cert = certify_sparsity_preserving(spec.T, spec.Y, ss.Sbold);
  std::printf("dim %ld\n", static_cast<long>(spec.dim()));
  std::printf("rows %ld cols %ld\n", static_cast<long>(spec.rows()), static_cast<long>(spec.cols()));
  std::printf("sparsity_preserving %s\n", cert.pass ? "true" : "false");
  if (o.basis)
    for (Index k = 0; k < spec.dim(); ++k) {
      const BasisElement& b = spec.basis[static_cast<std::size_t>(k)];
      std::printf("basis %ld row %ld", static_cast<long>(k), static_cast<long>(b.row));
      for (std::size_t t = 0; t < b.cols.size(); ++t)
        std::printf(" %ld:%s", static_cast<long>(b.cols[t]), fmt(b.values(static_cast<Index>(t))).c_str());
      std::printf("\n");
    }
  return kOk;
}

int cmd_synth(const Options& o) {
  const ProblemData pd = load_problem(o.problem);
  const StackedSystem ss = stacked_of(pd);
  const GssSpec spec = spec_of(pd, ss);
  const SynthesisResult r = synthesize(ss, spec, pd.cost, pd.dist, solver_settings(o), o.allow_uncertified);

  Report rep;
  rep.add("status", to_string(r.status));
  rep.add("objective", r.objective);
  rep.add("iterations", r.iterations);
  rep.add("prim_res", r.prim_res);
  rep.add("dual_res", r.dual_res);
  rep.add("polished", r.polished);
  rep.add("gss_dim", static_cast<long>(spec.dim()));
  rep.add("sparsity_certified", r.sparsity_certified);
  rep.add("qi_pattern", r.qi_pattern);
  rep.add("l_in_target", r.l_in_target);
  rep.add("l_violation", r.l_violation);
  rep.add("min_worst_case_slack", r.min_slack);
  if (!r.defect.empty()) rep.add("defect", r.defect);
  emit(o.report, [&](std::ostream& out) { rep.write(out); });

  if (!o.output.empty() && r.Q.size()) {
    ControllerData cd{pd.sys.n(), pd.sys.m(), pd.sys.p(), pd.N, r.L, r.Q, r.g, r.v};
    emit(o.output, [&](std::ostream& out) { write_controller(out, cd); });
  }
  const bool ok = r.optimal() && r.defect.empty() && r.min_slack >= -o.slack_tol &&
                  r.l_violation <= o.sparsity_tol;
  return ok ? kOk : kFailed;
}

int cmd_rollout(const Options& o) {
  const ProblemData pd = load_problem(o.problem);
  const ControllerData cd = load_controller(o.controller);
  if (cd.n != pd.sys.n() || cd.m != pd.sys.m() || cd.p != pd.sys.p() || cd.N != pd.N)
    throw FormatError(o.controller, 0, "dims", "controller dimensions do not match the problem");
  const Index n = pd.sys.n();
  std::vector<Eigen::VectorXd> w(static_cast<std::size_t>(pd.N), Eigen::VectorXd::Zero(n));
  if (!o.w_file.empty()) {
    const KeyedFile kf = KeyedFile::load(o.w_file, "gssctl-disturbance");
    w = split_stages(kf.get_vector("w", n * pd.N), n, pd.N);
  }
  const Trajectory tr = simulate_explicit(pd.sys, cd.L, cd.g, pd.x0, w);
  const SlackReport sr = verify_constraints(tr, pd.cons);
  emit(o.output, [&](std::ostream& out) { write_trajectory(out, tr, pd.cons); });
  double worst = sr.min_slack;
  if (o.sweep > 0) {
    const SweepReport sw = vertex_sweep(pd.sys, OutputFeedback{cd.L, cd.g}, pd.cons, pd.dist, pd.x0, o.sweep, o.seed);
    std::fprintf(stderr, "sweep rollouts %ld exhaustive %s worst_slack %s stage %d row %ld\n", sw.rollouts,
                 sw.exhaustive ? "true" : "false", fmt(sw.worst_slack).c_str(), sw.worst_stage,
                 static_cast<long>(sw.worst_row));
    worst = std::min(worst, sw.worst_slack);
  }
  std::fprintf(stderr, "min_slack %s\n", fmt(worst).c_str());
  return worst >= -o.slack_tol ? kOk : kFailed;
}

void variant_report(Report& rep, const std::string& pre, const VariantResult& v) {
  rep.add(pre + ".status", to_string(v.synth.status));
  rep.add(pre + ".J", v.J);
  rep.add(pre + ".dim", static_cast<long>(v.dim));
  rep.add(pre + ".iterations", v.synth.iterations);
  rep.add(pre + ".l_in_target", v.synth.l_in_target);
  rep.add(pre + ".l_violation", v.synth.l_violation);
  rep.add(pre + ".min_worst_case_slack", v.synth.min_slack);
  rep.add(pre + ".sweep_rollouts", v.sweep.rollouts);
  rep.add(pre + ".sweep_worst_slack", v.sweep.worst_slack);
  rep.add(pre + ".implicit_explicit_diff", v.lemma3_max_diff);
  rep.add(pre + ".seconds", v.seconds);
  if (!v.synth.defect.empty()) rep.add(pre + ".defect", v.synth.defect);
}

std::string vec_str(const Eigen::VectorXd& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v(i));
  return s;
}

int cmd_platoon(const Options& o) {
  const PlatoonConfig& cfg = o.platoon;
  cfg.validate();
  if (!o.export_problem.empty()) {
    const PlatoonModel pm = build_platoon(cfg);
    ProblemData pd{pm.sys, pm.cons, pm.info, pm.N, pm.x0, pm.dist, pm.cost, std::nullopt, std::nullopt};
    emit(o.export_problem, [&](std::ostream& out) { write_problem(out, pd); });
  }
  BenchmarkOptions opt;
  opt.solver = solver_settings(o);
  opt.sweep_budget = o.sweep > 0 ? o.sweep : 10000;
  opt.lemma3_samples = o.lemma3_samples;
  opt.seed = o.seed;
  opt.verbose = o.verbose;
  const PlatoonReport r = run_benchmark(cfg, opt);

  std::printf("%-10s %8s %14s %10s %8s %14s\n", "variant", "dim", "J", "status", "L_ok", "worst_slack");
  for (const VariantResult* v : {&r.gss, &r.qi, &r.low})
    std::printf("%-10s %8ld %14s %10s %8s %14s\n", v->name.c_str(), static_cast<long>(v->dim), fmt(v->J).c_str(),
                to_string(v->synth.status), v->synth.l_in_target ? "yes" : "no",
                fmt(std::min(v->synth.min_slack, v->sweep.worst_slack)).c_str());
  std::printf("ordering J_low <= J_GSS <= J_QI: %s (strict J_GSS < J_QI: %s)\n", r.ordering ? "holds" : "VIOLATED",
              r.strict_improvement ? "yes" : "no");
  std::printf("improvement over QI subset %.2f%%, gap to lower bound %.2f%%\n", 100.0 * r.improvement, 100.0 * r.gap);

  Report rep;
  rep.add("n_vehicles", static_cast<long>(cfg.n_vehicles));
  rep.add("N", static_cast<long>(cfg.N));
  rep.add("x0", vec_str(cfg.initial_state()));
  rep.add("targets", vec_str(cfg.target_positions()));
  variant_report(rep, "gss", r.gss);
  variant_report(rep, "qi", r.qi);
  variant_report(rep, "low", r.low);
  rep.add("ordering", r.ordering);
  rep.add("strict_improvement", r.strict_improvement);
  rep.add("improvement", r.improvement);
  rep.add("gap", r.gap);
  if (!o.report.empty()) emit(o.report, [&](std::ostream& out) { rep.write(out); });

  if (!o.traj_dir.empty()) {
    const PlatoonModel pm = build_platoon(cfg);
    std::filesystem::create_directories(o.traj_dir);
    for (const VariantResult* v : {&r.gss, &r.qi, &r.low})
      if (v->nominal.horizon() > 0)
        emit(o.traj_dir + "/" + v->name + ".traj", [&](std::ostream& out) { write_trajectory(out, v->nominal, pm.cons); });
  }
  const double worst = std::min(r.gss.sweep.worst_slack, r.qi.sweep.worst_slack);
  const bool ok = r.all_optimal() && r.ordering && r.gss.synth.l_in_target && r.qi.synth.l_in_target &&
                  worst >= -o.slack_tol;
  return ok ? kOk : kFailed;
}

int cmd_export_qp(const Options& o) {
  const ProblemData pd = load_problem(o.problem);
  const StackedSystem ss = stacked_of(pd);
  const QpProblem qp = assemble_qp(ss, spec_of(pd, ss), pd.cost, pd.dist, o.allow_uncertified);
  emit(o.output, [&](std::ostream& out) { write_qp(out, qp); });
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gssctl: structured robust controller synthesis over generalized sparsity subspaces"};
  app.require_subcommand(1);
  Options o;

  auto solver_opts = [&](CLI::App* c) {
    c->add_option("--solver", o.solver, "QP backend")->check(CLI::IsMember({"ipm", "admm"}));
    c->add_option("--eps-abs", o.eps_abs, "absolute tolerance")->check(CLI::PositiveNumber);
    c->add_option("--eps-rel", o.eps_rel, "relative tolerance")->check(CLI::PositiveNumber);
    c->add_option("--max-iter", o.max_iter, "ADMM iteration cap")->check(CLI::PositiveNumber);
    c->add_option("--ipm-max-iter", o.ipm_max_iter, "interior point iteration cap")->check(CLI::PositiveNumber);
    c->add_option("--slack-tol", o.slack_tol, "allowed constraint violation");
    c->add_option("--sparsity-tol", o.sparsity_tol, "allowed |L| outside the target pattern");
    c->add_flag("-v,--verbose", o.verbose, "solver progress on stderr");
  };

  auto* ymax_cmd = app.add_subcommand("ymax", "largest Y with Y T <= T for a pattern file");
  ymax_cmd->add_option("pattern", o.pattern, "pattern file")->required()->check(CLI::ExistingFile);
  ymax_cmd->add_option("-o,--output", o.output, "output pattern file");

  auto* cert_cmd = app.add_subcommand("certify", "check T <= S and Y T <= T");
  cert_cmd->add_option("--T", o.T)->required()->check(CLI::ExistingFile);
  cert_cmd->add_option("--Y", o.Y)->required()->check(CLI::ExistingFile);
  cert_cmd->add_option("--S", o.S)->required()->check(CLI::ExistingFile);

  auto* qi_cmd = app.add_subcommand("qi-check", "quadratic invariance of a pattern or of a problem's subspace");
  qi_cmd->add_option("--T", o.T)->check(CLI::ExistingFile);
  qi_cmd->add_option("--delta", o.delta, "pattern of the plant coupling")->check(CLI::ExistingFile);
  qi_cmd->add_option("--problem", o.problem)->check(CLI::ExistingFile);

  auto* par_cmd = app.add_subcommand("parametrize", "GSS dimension and basis for a problem");
  par_cmd->add_option("problem", o.problem)->required()->check(CLI::ExistingFile);
  par_cmd->add_flag("--basis", o.basis, "print the basis");

  auto* syn_cmd = app.add_subcommand("synth", "robust synthesis over the GSS");
  syn_cmd->add_option("problem", o.problem)->required()->check(CLI::ExistingFile);
  syn_cmd->add_option("-o,--output", o.output, "controller file");
  syn_cmd->add_option("--report", o.report, "report file (stdout by default)");
  syn_cmd->add_flag("--allow-uncertified", o.allow_uncertified, "accept (T, Y) that fail the sparsity certificate");
  solver_opts(syn_cmd);

  auto* roll_cmd = app.add_subcommand("rollout", "simulate a saved controller");
  roll_cmd->add_option("--problem", o.problem)->required()->check(CLI::ExistingFile);
  roll_cmd->add_option("--controller", o.controller)->required()->check(CLI::ExistingFile);
  roll_cmd->add_option("--w", o.w_file, "disturbance file (vector w of length nN)")->check(CLI::ExistingFile);
  roll_cmd->add_option("--sweep", o.sweep, "vertex rollouts to check")->check(CLI::NonNegativeNumber);
  roll_cmd->add_option("--seed", o.seed);
  roll_cmd->add_option("--slack-tol", o.slack_tol);
  roll_cmd->add_option("-o,--output", o.output, "trajectory table");

  auto* pl_cmd = app.add_subcommand("platoon", "vehicle platoon benchmark");
  PlatoonConfig& pc = o.platoon;
  std::vector<double> x0, targets;
  pl_cmd->add_option("--vehicles", pc.n_vehicles)->check(CLI::PositiveNumber);
  pl_cmd->add_option("--horizon", pc.N)->check(CLI::PositiveNumber);
  pl_cmd->add_option("--mass", pc.mass);
  pl_cmd->add_option("--ts", pc.Ts);
  pl_cmd->add_option("--thrust", pc.thrust_limit, "N");
  pl_cmd->add_option("--safety", pc.safety_distance, "m");
  pl_cmd->add_option("--dist-pos", pc.dist_pos);
  pl_cmd->add_option("--dist-vel", pc.dist_vel);
  pl_cmd->add_option("--x0", x0, "2n initial positions then velocities")->delimiter(',');
  pl_cmd->add_option("--targets", targets, "n target positions")->delimiter(',');
  pl_cmd->add_option("--sweep", o.sweep, "vertex rollouts per controller (default 10000)");
  pl_cmd->add_option("--samples", o.lemma3_samples, "random sequences for the implicit/explicit comparison");
  pl_cmd->add_option("--seed", o.seed);
  pl_cmd->add_option("--report", o.report, "machine-readable report file");
  pl_cmd->add_option("--trajectories", o.traj_dir, "directory for nominal trajectory tables");
  pl_cmd->add_option("--export-problem", o.export_problem, "write the benchmark as a problem file");
  solver_opts(pl_cmd);

  auto* exp_cmd = app.add_subcommand("export-qp", "write the assembled QP as triplets");
  exp_cmd->add_option("problem", o.problem)->required()->check(CLI::ExistingFile);
  exp_cmd->add_option("-o,--output", o.output);
  exp_cmd->add_flag("--allow-uncertified", o.allow_uncertified);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (!x0.empty()) pc.x0 = Eigen::Map<Eigen::VectorXd>(x0.data(), static_cast<Index>(x0.size()));
    if (!targets.empty()) pc.targets = Eigen::Map<Eigen::VectorXd>(targets.data(), static_cast<Index>(targets.size()));
    if (*ymax_cmd) return cmd_ymax(o);
    if (*cert_cmd) return cmd_certify(o);
    if (*qi_cmd) {
      if (o.problem.empty() && (o.T.empty() || o.delta.empty()))
        throw std::invalid_argument("qi-check needs --problem or both --T and --delta");
      return cmd_qi_check(o);
    }
    if (*par_cmd) return cmd_parametrize(o);
    if (*syn_cmd) return cmd_synth(o);
    if (*roll_cmd) return cmd_rollout(o);
    if (*pl_cmd) return cmd_platoon(o);
    if (*exp_cmd) return cmd_export_qp(o);
  } catch (const FormatError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInputError;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  }
  return kInputError;
}
