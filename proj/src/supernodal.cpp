#include "supernodal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/OrderingMethods>

#ifdef GSSCTL_HAVE_CHOLMOD
#include <cholmod.h>
#endif

namespace gssctl::detail {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Permuted lower pattern plus the strict upper pattern by column (row k of the lower part).
struct Pattern {
  std::vector<int> cp, ri, src;  // lower CSC
  std::vector<int> up, ui;       // upper CSC, strict
  std::vector<int> parent;
};

Pattern permute(const SparseMatrix& a, const std::vector<int>& iperm) {
  const int n = static_cast<int>(a.rows());
  Pattern pt;
  pt.cp.assign(static_cast<std::size_t>(n) + 1, 0);
  pt.up.assign(static_cast<std::size_t>(n) + 1, 0);
  for (int j = 0; j < n; ++j)
    for (SparseMatrix::InnerIterator it(a, j); it; ++it) {
      const int r = iperm[static_cast<std::size_t>(it.row())], c = iperm[static_cast<std::size_t>(j)];
      ++pt.cp[static_cast<std::size_t>(std::min(r, c)) + 1];
      if (r != c) ++pt.up[static_cast<std::size_t>(std::max(r, c)) + 1];
    }
  for (int j = 0; j < n; ++j) {
    pt.cp[static_cast<std::size_t>(j) + 1] += pt.cp[static_cast<std::size_t>(j)];
    pt.up[static_cast<std::size_t>(j) + 1] += pt.up[static_cast<std::size_t>(j)];
  }
  pt.ri.resize(static_cast<std::size_t>(pt.cp.back()));
  pt.src.resize(pt.ri.size());
  pt.ui.resize(static_cast<std::size_t>(pt.up.back()));
  std::vector<int> fill(pt.cp.begin(), pt.cp.end() - 1), ufill(pt.up.begin(), pt.up.end() - 1);
  const int* outer = a.outerIndexPtr();
  for (int j = 0; j < n; ++j)
    for (int p = outer[j]; p < outer[j + 1]; ++p) {
      const int r = iperm[static_cast<std::size_t>(a.innerIndexPtr()[p])], c = iperm[static_cast<std::size_t>(j)];
      const int lo = std::min(r, c), hi = std::max(r, c);
      const int q = fill[static_cast<std::size_t>(lo)]++;
      pt.ri[static_cast<std::size_t>(q)] = hi;
      pt.src[static_cast<std::size_t>(q)] = p;
      if (r != c) pt.ui[static_cast<std::size_t>(ufill[static_cast<std::size_t>(hi)]++)] = lo;
    }
  // elimination tree
  pt.parent.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> anc(static_cast<std::size_t>(n), -1);
  for (int k = 0; k < n; ++k)
    for (int p = pt.up[static_cast<std::size_t>(k)]; p < pt.up[static_cast<std::size_t>(k) + 1]; ++p) {
      int i = pt.ui[static_cast<std::size_t>(p)];
      while (i != -1 && i < k) {
        const int next = anc[static_cast<std::size_t>(i)];
        anc[static_cast<std::size_t>(i)] = k;
        if (next == -1) pt.parent[static_cast<std::size_t>(i)] = k;
        i = next;
      }
    }
  return pt;
}

std::vector<int> postorder(const std::vector<int>& parent) {
  const int n = static_cast<int>(parent.size());
  std::vector<int> head(static_cast<std::size_t>(n), -1), next(static_cast<std::size_t>(n), -1), order, stack;
  order.reserve(static_cast<std::size_t>(n));
  for (int j = n - 1; j >= 0; --j) {
    const int p = parent[static_cast<std::size_t>(j)];
    if (p < 0) continue;
    next[static_cast<std::size_t>(j)] = head[static_cast<std::size_t>(p)];
    head[static_cast<std::size_t>(p)] = j;
  }
  for (int r = 0; r < n; ++r) {
    if (parent[static_cast<std::size_t>(r)] >= 0) continue;
    stack.push_back(r);
    while (!stack.empty()) {
      const int j = stack.back();
      const int c = head[static_cast<std::size_t>(j)];
      if (c >= 0) {
        head[static_cast<std::size_t>(j)] = next[static_cast<std::size_t>(c)];
        stack.push_back(c);
      } else {
        stack.pop_back();
        order.push_back(j);
      }
    }
  }
  return order;
}

// Factor the leading ns columns of the dense front F in place (lower part) and
// apply their update to the trailing block.
bool partial_ldlt(MatrixXd& F, Index ns, double* d) {
  const Index f = F.rows();
  constexpr Index nb = 64;
  VectorXd t;
  for (Index k = 0; k < ns; k += nb) {
    const Index b = std::min(nb, ns - k);
    for (Index j = k; j < k + b; ++j) {
      const Index len = f - j;
      if (j > k) {
        t = Eigen::Map<const VectorXd>(d + k, j - k).cwiseProduct(F.row(j).segment(k, j - k).transpose());
        F.col(j).tail(len).noalias() -= F.block(j, k, len, j - k) * t;
      }
      const double dj = F(j, j);
      if (!std::isfinite(dj) || dj == 0.0) return false;
      d[j] = dj;
      F.col(j).tail(len - 1) /= dj;
    }
    const Index r = f - k - b;
    if (r > 0) {
      const auto L21 = F.block(k + b, k, r, b);
      const MatrixXd W = L21 * Eigen::Map<const VectorXd>(d + k, b).asDiagonal();
      F.bottomRightCorner(r, r).triangularView<Eigen::Lower>() -= W * L21.transpose();
    }
  }
  return true;
}

std::vector<int> amd_order(const SparseMatrix& lower) {
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> amd;
  Eigen::AMDOrdering<int>()(lower, amd);
  return std::vector<int>(amd.indices().data(), amd.indices().data() + amd.size());
}

#ifdef GSSCTL_HAVE_CHOLMOD
// Best of AMD and nested dissection as judged by CHOLMOD's symbolic analysis.
std::vector<int> cholmod_order(const SparseMatrix& lower) {
  SparseMatrix a = lower;
  cholmod_common c;
  cholmod_start(&c);
  c.print = 0;
  c.nmethods = 2;
  c.method[0].ordering = CHOLMOD_AMD;
  c.method[1].ordering = CHOLMOD_METIS;
  c.postorder = 1;
  c.supernodal = CHOLMOD_SIMPLICIAL;
  cholmod_sparse A{};
  A.nrow = A.ncol = static_cast<std::size_t>(a.rows());
  A.nzmax = static_cast<std::size_t>(a.nonZeros());
  A.p = a.outerIndexPtr();
  A.i = a.innerIndexPtr();
  A.x = a.valuePtr();
  A.stype = -1;
  A.itype = CHOLMOD_INT;
  A.xtype = CHOLMOD_REAL;
  A.dtype = CHOLMOD_DOUBLE;
  A.sorted = 1;
  A.packed = 1;
  std::vector<int> perm;
  if (cholmod_factor* L = cholmod_analyze(&A, &c)) {
    const int* p = static_cast<const int*>(L->Perm);
    if (c.status == CHOLMOD_OK && p) perm.assign(p, p + a.rows());
    cholmod_free_factor(&L, &c);
  }
  cholmod_finish(&c);
  return perm.empty() ? amd_order(lower) : perm;
}
#endif

}  // namespace

void SupernodalLdlt::analyze(const SparseMatrix& lower, const std::vector<int>* order) {
  if (lower.rows() != lower.cols()) throw std::invalid_argument("supernodal ldlt: matrix not square");
  if (!lower.isCompressed()) throw std::invalid_argument("supernodal ldlt: matrix not compressed");
  n_ = lower.rows();
  const int n = static_cast<int>(n_);
  const std::size_t un = static_cast<std::size_t>(n);

  std::vector<int> perm, iperm(un);
  if (order) {
    perm = *order;
  } else {
#ifdef GSSCTL_HAVE_CHOLMOD
    perm = cholmod_order(lower);
#else
    perm = amd_order(lower);
#endif
  }
  for (int k = 0; k < n; ++k) iperm[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = k;

  // relabel in postorder so every subtree is a contiguous column range
  {
    const Pattern pre = permute(lower, iperm);
    const std::vector<int> post = postorder(pre.parent);
    std::vector<int> p2(un);
    for (int k = 0; k < n; ++k) p2[static_cast<std::size_t>(k)] = perm[static_cast<std::size_t>(post[static_cast<std::size_t>(k)])];
    perm = std::move(p2);
    for (int k = 0; k < n; ++k) iperm[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])] = k;
  }
  perm_ = perm;
  const Pattern pt = permute(lower, iperm);
  col_ptr_ = pt.cp;
  row_idx_ = pt.ri;
  src_ = pt.src;
  const std::vector<int>& parent = pt.parent;

  // column counts from row subtrees
  std::vector<long long> cc(un, 1);
  std::vector<int> flag(un, -1), nchild(un, 0);
  for (int k = 0; k < n; ++k) {
    flag[static_cast<std::size_t>(k)] = k;
    for (int p = pt.up[static_cast<std::size_t>(k)]; p < pt.up[static_cast<std::size_t>(k) + 1]; ++p)
      for (int j = pt.ui[static_cast<std::size_t>(p)]; flag[static_cast<std::size_t>(j)] != k;
           j = parent[static_cast<std::size_t>(j)]) {
        ++cc[static_cast<std::size_t>(j)];
        flag[static_cast<std::size_t>(j)] = k;
      }
    if (parent[static_cast<std::size_t>(k)] >= 0) ++nchild[static_cast<std::size_t>(parent[static_cast<std::size_t>(k)])];
  }

  // fundamental supernodes
  std::vector<int> fs;
  for (int j = 0; j < n; ++j) {
    const std::size_t uj = static_cast<std::size_t>(j);
    if (j == 0 || parent[uj - 1] != j || nchild[uj] != 1 || cc[uj - 1] != cc[uj] + 1) fs.push_back(j);
  }
  fs.push_back(n);
  const int nfs = static_cast<int>(fs.size()) - 1;
  std::vector<int> col_fs(un);
  for (int s = 0; s < nfs; ++s)
    for (int j = fs[static_cast<std::size_t>(s)]; j < fs[static_cast<std::size_t>(s) + 1]; ++j) col_fs[static_cast<std::size_t>(j)] = s;

  // relaxed amalgamation of a child with the supernode that follows it
  std::vector<long long> ncols(static_cast<std::size_t>(nfs)), nrows(static_cast<std::size_t>(nfs)), nz(static_cast<std::size_t>(nfs), 0);
  std::vector<char> starts(static_cast<std::size_t>(nfs), 1);
  for (int s = 0; s < nfs; ++s) {
    const std::size_t us = static_cast<std::size_t>(s);
    ncols[us] = fs[us + 1] - fs[us];
    nrows[us] = cc[static_cast<std::size_t>(fs[us])];
    for (int j = fs[us]; j < fs[us + 1]; ++j) nz[us] += cc[static_cast<std::size_t>(j)];
  }
  for (int s = nfs - 2; s >= 0; --s) {
    const std::size_t us = static_cast<std::size_t>(s), ut = us + 1;
    const int last = fs[us + 1] - 1;
    if (parent[static_cast<std::size_t>(last)] != fs[ut]) continue;
    const long long nc = ncols[us] + ncols[ut], nr = ncols[us] + nrows[ut];
    const long long total = nc * nr - nc * (nc - 1) / 2, nzs = nz[us] + nz[ut];
    const double z = static_cast<double>(total - nzs) / static_cast<double>(total);
    const bool merge = nc <= 4 || (nc <= 16 && z < 0.8) || (nc <= 48 && z < 0.1) || z < 0.05;
    if (!merge) continue;
    ncols[us] = nc;
    nrows[us] = nr;
    nz[us] = total;  // explicit zeros count as stored entries from here on
    starts[ut] = 0;
  }

  first_.clear();
  for (int s = 0; s < nfs; ++s)
    if (starts[static_cast<std::size_t>(s)]) first_.push_back(fs[static_cast<std::size_t>(s)]);
  first_.push_back(n);
  const int ns = static_cast<int>(first_.size()) - 1;
  std::vector<int> col_s(un);
  for (int s = 0; s < ns; ++s)
    for (int j = first_[static_cast<std::size_t>(s)]; j < first_[static_cast<std::size_t>(s) + 1]; ++j) col_s[static_cast<std::size_t>(j)] = s;
  sparent_.assign(static_cast<std::size_t>(ns), -1);
  children_.assign(static_cast<std::size_t>(ns), {});
  for (int s = 0; s < ns; ++s) {
    const int p = parent[static_cast<std::size_t>(first_[static_cast<std::size_t>(s) + 1] - 1)];
    if (p < 0) continue;
    sparent_[static_cast<std::size_t>(s)] = col_s[static_cast<std::size_t>(p)];
    children_[static_cast<std::size_t>(col_s[static_cast<std::size_t>(p)])].push_back(s);
  }

  // row structure of each supernode
  rows_.assign(static_cast<std::size_t>(ns), {});
  std::fill(flag.begin(), flag.end(), -1);
  for (int s = 0; s < ns; ++s) {
    const std::size_t us = static_cast<std::size_t>(s);
    const int f0 = first_[us], f1 = first_[us + 1];
    std::vector<int>& rs = rows_[us];
    for (int j = f0; j < f1; ++j) rs.push_back(j);
    auto add = [&](int r) {
      if (r >= f1 && flag[static_cast<std::size_t>(r)] != s) {
        flag[static_cast<std::size_t>(r)] = s;
        rs.push_back(r);
      }
    };
    for (int j = f0; j < f1; ++j)
      for (int p = col_ptr_[static_cast<std::size_t>(j)]; p < col_ptr_[static_cast<std::size_t>(j) + 1]; ++p)
        add(row_idx_[static_cast<std::size_t>(p)]);
    for (int c : children_[us]) {
      const std::vector<int>& cr = rows_[static_cast<std::size_t>(c)];
      const std::size_t cn = static_cast<std::size_t>(first_[static_cast<std::size_t>(c) + 1] - first_[static_cast<std::size_t>(c)]);
      for (std::size_t i = cn; i < cr.size(); ++i) add(cr[i]);
    }
    std::sort(rs.begin() + (f1 - f0), rs.end());
  }
  fronts_.assign(static_cast<std::size_t>(ns), {});
  d_.resize(n_);
}

bool SupernodalLdlt::factorize(const SparseMatrix& lower) {
  if (lower.rows() != n_ || lower.nonZeros() != static_cast<Index>(src_.size()))
    throw std::invalid_argument("supernodal ldlt: pattern differs from analyze()");
  const double* val = lower.valuePtr();
  const int ns = static_cast<int>(first_.size()) - 1;
  std::vector<int> pos(static_cast<std::size_t>(n_), -1);
  std::vector<MatrixXd> update(static_cast<std::size_t>(ns));
  for (int s = 0; s < ns; ++s) {
    const std::size_t us = static_cast<std::size_t>(s);
    const std::vector<int>& rs = rows_[us];
    const Index f = static_cast<Index>(rs.size());
    const int f0 = first_[us], nc = first_[us + 1] - f0;
    for (Index i = 0; i < f; ++i) pos[static_cast<std::size_t>(rs[static_cast<std::size_t>(i)])] = static_cast<int>(i);
    MatrixXd F = MatrixXd::Zero(f, f);
    for (int j = f0; j < f0 + nc; ++j)
      for (int p = col_ptr_[static_cast<std::size_t>(j)]; p < col_ptr_[static_cast<std::size_t>(j) + 1]; ++p)
        F(pos[static_cast<std::size_t>(row_idx_[static_cast<std::size_t>(p)])], j - f0) += val[src_[static_cast<std::size_t>(p)]];
    for (int c : children_[us]) {
      const std::size_t uc = static_cast<std::size_t>(c);
      MatrixXd& U = update[uc];
      const std::vector<int>& cr = rows_[uc];
      const std::size_t off = static_cast<std::size_t>(first_[uc + 1] - first_[uc]);
      std::vector<int> rel(cr.size() - off);
      for (std::size_t i = 0; i < rel.size(); ++i) rel[i] = pos[static_cast<std::size_t>(cr[off + i])];
      const Index m = static_cast<Index>(rel.size());
      for (Index jj = 0; jj < m; ++jj) {
        const int cj = rel[static_cast<std::size_t>(jj)];
        for (Index ii = jj; ii < m; ++ii) F(rel[static_cast<std::size_t>(ii)], cj) += U(ii, jj);
      }
      U.resize(0, 0);
    }
    if (!partial_ldlt(F, nc, d_.data() + f0)) return false;
    fronts_[us].L = F.leftCols(nc);
    if (f > nc) update[us] = F.bottomRightCorner(f - nc, f - nc);
  }
  return true;
}

VectorXd SupernodalLdlt::solve(const VectorXd& b) const {
  VectorXd x(n_);
  for (Index k = 0; k < n_; ++k) x(k) = b(perm_[static_cast<std::size_t>(k)]);
  const int ns = static_cast<int>(first_.size()) - 1;
  VectorXd t;
  for (int s = 0; s < ns; ++s) {
    const std::size_t us = static_cast<std::size_t>(s);
    const MatrixXd& L = fronts_[us].L;
    const Index nc = L.cols(), below = L.rows() - nc;
    auto xs = x.segment(first_[us], nc);
    L.topRows(nc).triangularView<Eigen::UnitLower>().solveInPlace(xs);
    if (below == 0) continue;
    t.noalias() = L.bottomRows(below) * xs;
    const std::vector<int>& rs = rows_[us];
    for (Index i = 0; i < below; ++i) x(rs[static_cast<std::size_t>(nc + i)]) -= t(i);
  }
  x.array() /= d_.array();
  for (int s = ns - 1; s >= 0; --s) {
    const std::size_t us = static_cast<std::size_t>(s);
    const MatrixXd& L = fronts_[us].L;
    const Index nc = L.cols(), below = L.rows() - nc;
    auto xs = x.segment(first_[us], nc);
    if (below > 0) {
      const std::vector<int>& rs = rows_[us];
      t.resize(below);
      for (Index i = 0; i < below; ++i) t(i) = x(rs[static_cast<std::size_t>(nc + i)]);
      xs.noalias() -= L.bottomRows(below).transpose() * t;
    }
    L.topRows(nc).triangularView<Eigen::UnitLower>().transpose().solveInPlace(xs);
  }
  VectorXd out(n_);
  for (Index k = 0; k < n_; ++k) out(perm_[static_cast<std::size_t>(k)]) = x(k);
  return out;
}

long long SupernodalLdlt::factor_nonzeros() const {
  long long nnz = 0;
  for (std::size_t s = 0; s + 1 < first_.size(); ++s) {
    const long long nc = first_[s + 1] - first_[s], f = static_cast<long long>(rows_[s].size());
    nnz += nc * f - nc * (nc - 1) / 2;
  }
  return nnz;
}

double SupernodalLdlt::factor_flops() const {
  double fl = 0;
  for (std::size_t s = 0; s + 1 < first_.size(); ++s) {
    const double nc = first_[s + 1] - first_[s], f = static_cast<double>(rows_[s].size());
    for (double i = 0; i < nc; ++i) fl += (f - i) * (f - i);
  }
  return fl;
}

}  // namespace gssctl::detail
