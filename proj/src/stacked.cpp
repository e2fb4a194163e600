#include "gssctl/stacked.hpp"

#include <sstream>
#include <stdexcept>

namespace gssctl {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::string shape(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

// I_{count} (x) block, placed on the block diagonal.
Eigen::MatrixXd block_diag_repeat(const Eigen::MatrixXd& block, int count) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(block.rows() * count, block.cols() * count);
  for (int k = 0; k < count; ++k)
    out.block(k * block.rows(), k * block.cols(), block.rows(), block.cols()) = block;
  return out;
}

}  // namespace

void SystemModel::validate() const {
  const Index nn = A.rows();
  require(nn > 0 && A.cols() == nn, "SystemModel: A must be square and nonempty, got " + shape(A));
  require(B.rows() == nn && B.cols() > 0, "SystemModel: B must be n x m, got " + shape(B));
  require(C.cols() == nn && C.rows() > 0, "SystemModel: C must be p x n, got " + shape(C));
  require(D.rows() == nn && D.cols() == nn, "SystemModel: D must be n x n, got " + shape(D));
  require(H.rows() == C.rows() && H.cols() == nn, "SystemModel: H must be p x n, got " + shape(H));
}

ConstraintSet ConstraintSet::empty(Index n, Index m) {
  ConstraintSet out;
  out.U.resize(0, n);
  out.V.resize(0, m);
  out.R.resize(0, n);
  out.b.resize(0);
  out.z.resize(0);
  return out;
}

void ConstraintSet::validate(Index n, Index m) const {
  require(U.cols() == n, "ConstraintSet: U must have n columns, got " + shape(U));
  require(V.rows() == U.rows() && V.cols() == m, "ConstraintSet: V must be s x m, got " + shape(V));
  require(b.size() == U.rows(), "ConstraintSet: b must have s entries");
  require(R.cols() == n, "ConstraintSet: R must have n columns, got " + shape(R));
  require(z.size() == R.rows(), "ConstraintSet: z must have r entries");
}

InfoStructure InfoStructure::repeated(int horizon, const BinMatrix& block) {
  InfoStructure out;
  out.horizon = horizon;
  for (int k = 0; k < horizon; ++k)
    for (int j = 0; j <= k; ++j) out.blocks.emplace(std::make_pair(k, j), block);
  return out;
}

StackedSystem lift_dynamics(const SystemModel& sys, int N, const Eigen::VectorXd& x0) {
  require(N >= 1, "lift_dynamics: horizon must be at least 1");
  sys.validate();
  const Index n = sys.n();
  require(x0.size() == n, "lift_dynamics: x0 must have n entries");

  StackedSystem ss;
  ss.sys = sys;
  ss.N = N;
  ss.x0 = x0;
  const int K = N + 1;

  // Powers A^0..A^N.
  std::vector<Eigen::MatrixXd> pw(static_cast<std::size_t>(K));
  pw[0] = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k < K; ++k) pw[static_cast<std::size_t>(k)] = sys.A * pw[static_cast<std::size_t>(k - 1)];

  ss.Abold.resize(n * K, n);
  for (int k = 0; k < K; ++k) ss.Abold.block(k * n, 0, n, n) = pw[static_cast<std::size_t>(k)];

  // Block (k, j) of E is A^{k-1-j} for j < k.
  ss.E = Eigen::MatrixXd::Zero(n * K, n * K);
  for (int k = 1; k < K; ++k)
    for (int j = 0; j < k; ++j) ss.E.block(k * n, j * n, n, n) = pw[static_cast<std::size_t>(k - 1 - j)];

  ss.Bbold = ss.E * block_diag_repeat(sys.B, K);
  ss.ED = ss.E * block_diag_repeat(sys.D, K);
  ss.Cbold = block_diag_repeat(sys.C, K);
  ss.Hbold = block_diag_repeat(sys.H, K);
  ss.P = ss.Cbold * ss.ED + ss.Hbold;
  ss.CB = ss.Cbold * ss.Bbold;
  ss.CAx0 = ss.Cbold * (ss.Abold * x0);
  ss.Delta = struct_of(ss.CB);
  ss.cons = ConstraintSet::empty(n, sys.m());
  ss.Ubold.resize(0, n * K);
  ss.Vbold.resize(0, sys.m() * K);
  ss.F.resize(0, sys.m() * K);
  ss.G.resize(0, n * K);
  ss.c.resize(0);
  ss.Sbold = causal_mask(N, sys.m(), sys.p());
  return ss;
}

LiftedConstraints lift_constraints(const StackedSystem& ss, const ConstraintSet& cons) {
  const Index n = ss.n(), m = ss.m();
  cons.validate(n, m);
  const int N = ss.N;
  const Index s = cons.s(), r = cons.r();
  const Index rows = N * s + r;

  LiftedConstraints out;
  out.Ubold = Eigen::MatrixXd::Zero(rows, n * (N + 1));
  out.Vbold = Eigen::MatrixXd::Zero(rows, m * (N + 1));
  for (int k = 0; k < N; ++k) {
    out.Ubold.block(k * s, k * n, s, n) = cons.U;
    out.Vbold.block(k * s, k * m, s, m) = cons.V;
  }
  out.Ubold.block(N * s, N * n, r, n) = cons.R;

  out.F = out.Ubold * ss.Bbold + out.Vbold;
  out.G = out.Ubold * ss.ED;
  out.c.resize(rows);
  for (int k = 0; k < N; ++k) out.c.segment(k * s, s) = cons.b;
  out.c.tail(r) = cons.z;
  out.c -= out.Ubold * (ss.Abold * ss.x0);
  return out;
}

void set_initial_state(StackedSystem& ss, const Eigen::VectorXd& x0) {
  require(x0.size() == ss.n(), "set_initial_state: x0 must have n entries");
  ss.x0 = x0;
  ss.CAx0 = ss.Cbold * (ss.Abold * x0);
  const int N = ss.N;
  const Index s = ss.s(), r = ss.r();
  ss.c.resize(N * s + r);
  for (int k = 0; k < N; ++k) ss.c.segment(k * s, s) = ss.cons.b;
  ss.c.tail(r) = ss.cons.z;
  ss.c -= ss.Ubold * (ss.Abold * x0);
}

BinMatrix stack_info_structure(const InfoStructure& info, Index m, Index p) {
  const int N = info.horizon;
  require(N >= 1, "stack_info_structure: horizon must be at least 1");
  BinMatrix out(m * (N + 1), p * (N + 1));
  for (const auto& [kj, block] : info.blocks) {
    const auto [k, j] = kj;
    require(k >= 0 && k < N && j >= 0 && j <= k, "stack_info_structure: block index out of range");
    require(block.rows() == m && block.cols() == p, "stack_info_structure: block must be m x p");
    out.set_block(k * m, j * p, block);
  }
  return out;
}

BinMatrix causal_mask(int N, Index m, Index p) {
  BinMatrix out(m * (N + 1), p * (N + 1));
  const BinMatrix full = BinMatrix::ones(m, p);
  for (int k = 0; k < N; ++k)
    for (int j = 0; j <= k; ++j) out.set_block(k * m, j * p, full);
  return out;
}

StackedSystem build_stacked(const SystemModel& sys, const ConstraintSet& cons,
                            const InfoStructure& info, int N, const Eigen::VectorXd& x0) {
  StackedSystem ss = lift_dynamics(sys, N, x0);
  require(info.horizon == N, "build_stacked: information structure horizon differs from N");
  LiftedConstraints lc = lift_constraints(ss, cons);
  ss.cons = cons;
  ss.Ubold = std::move(lc.Ubold);
  ss.Vbold = std::move(lc.Vbold);
  ss.F = std::move(lc.F);
  ss.G = std::move(lc.G);
  ss.c = std::move(lc.c);
  ss.Sbold = stack_info_structure(info, sys.m(), sys.p());
  return ss;
}

}  // namespace gssctl
