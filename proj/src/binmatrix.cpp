#include "gssctl/binmatrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gssctl {

namespace {

void require_same_shape(const BinMatrix& a, const BinMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
       << b.cols();
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

BinMatrix::BinMatrix(Index rows, Index cols, bool value) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("BinMatrix: negative dimension");
  bits_.assign(static_cast<std::size_t>(rows * cols), value ? 1 : 0);
}

BinMatrix BinMatrix::identity(Index n) {
  BinMatrix out(n, n);
  for (Index i = 0; i < n; ++i) out.set(i, i);
  return out;
}

BinMatrix BinMatrix::from_rows(std::initializer_list<std::initializer_list<int>> rows) {
  const auto nr = static_cast<Index>(rows.size());
  const auto nc = nr == 0 ? Index{0} : static_cast<Index>(rows.begin()->size());
  BinMatrix out(nr, nc);
  Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != nc) throw std::invalid_argument("BinMatrix: ragged rows");
    Index j = 0;
    for (int v : row) {
      if (v != 0 && v != 1) throw std::invalid_argument("BinMatrix: entries must be 0 or 1");
      out.set(i, j++, v == 1);
    }
    ++i;
  }
  return out;
}

Index BinMatrix::count() const {
  return static_cast<Index>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BinMatrix BinMatrix::transpose() const {
  BinMatrix out(cols_, rows_);
  for (Index i = 0; i < rows_; ++i)
    for (Index j = 0; j < cols_; ++j) out.set(j, i, (*this)(i, j));
  return out;
}

Eigen::MatrixXd BinMatrix::to_real() const {
  Eigen::MatrixXd out(rows_, cols_);
  for (Index i = 0; i < rows_; ++i)
    for (Index j = 0; j < cols_; ++j) out(i, j) = (*this)(i, j) ? 1.0 : 0.0;
  return out;
}

void BinMatrix::set_block(Index row, Index col, const BinMatrix& block) {
  if (row < 0 || col < 0 || row + block.rows() > rows_ || col + block.cols() > cols_)
    throw std::invalid_argument("BinMatrix::set_block: block out of range");
  for (Index i = 0; i < block.rows(); ++i)
    for (Index j = 0; j < block.cols(); ++j) set(row + i, col + j, block(i, j));
}

BinMatrix BinMatrix::block(Index row, Index col, Index rows, Index cols) const {
  if (row < 0 || col < 0 || row + rows > rows_ || col + cols > cols_)
    throw std::invalid_argument("BinMatrix::block: block out of range");
  BinMatrix out(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) out.set(i, j, (*this)(row + i, col + j));
  return out;
}

std::string BinMatrix::to_string() const {
  std::ostringstream os;
  for (Index i = 0; i < rows_; ++i) {
    for (Index j = 0; j < cols_; ++j) os << (j ? " " : "") << ((*this)(i, j) ? 1 : 0);
    os << '\n';
  }
  return os.str();
}

BinMatrix struct_of(const Eigen::MatrixXd& m, double eps) {
  if (!(eps >= 0.0)) throw std::invalid_argument("struct_of: eps must be nonnegative");
  BinMatrix out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (std::abs(m(i, j)) > eps) out.set(i, j);
  return out;
}

BinMatrix bool_mul(const BinMatrix& x1, const BinMatrix& x2) {
  if (x1.cols() != x2.rows()) {
    std::ostringstream os;
    os << "bool_mul: inner dimensions differ (" << x1.cols() << " vs " << x2.rows() << ")";
    throw std::invalid_argument(os.str());
  }
  BinMatrix out(x1.rows(), x2.cols());
  for (Index i = 0; i < x1.rows(); ++i)
    for (Index k = 0; k < x1.cols(); ++k) {
      if (!x1(i, k)) continue;
      for (Index j = 0; j < x2.cols(); ++j)
        if (x2(k, j)) out.set(i, j);
    }
  return out;
}

BinMatrix bool_pow(const BinMatrix& x, int r) {
  if (x.rows() != x.cols()) throw std::invalid_argument("bool_pow: pattern must be square");
  if (r < 1) throw std::invalid_argument("bool_pow: exponent must be positive");
  BinMatrix out = x;
  for (int i = 1; i < r; ++i) out = bool_mul(out, x);
  return out;
}

BinMatrix bool_or(const BinMatrix& a, const BinMatrix& b) {
  require_same_shape(a, b, "bool_or");
  BinMatrix out = a;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      if (b(i, j)) out.set(i, j);
  return out;
}

BinMatrix bool_and(const BinMatrix& a, const BinMatrix& b) {
  require_same_shape(a, b, "bool_and");
  BinMatrix out(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.set(i, j, a(i, j) && b(i, j));
  return out;
}

BinMatrix kron(const BinMatrix& a, const BinMatrix& b) {
  BinMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      if (a(i, j)) out.set_block(i * b.rows(), j * b.cols(), b);
  return out;
}

bool leq(const BinMatrix& x, const BinMatrix& y) {
  require_same_shape(x, y, "leq");
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j)
      if (x(i, j) && !y(i, j)) return false;
  return true;
}

bool lt(const BinMatrix& x, const BinMatrix& y) { return leq(x, y) && !(x == y); }

bool not_leq(const BinMatrix& x, const BinMatrix& y) { return !leq(x, y); }

std::vector<std::pair<Index, Index>> leq_violations(const BinMatrix& x, const BinMatrix& y) {
  require_same_shape(x, y, "leq_violations");
  std::vector<std::pair<Index, Index>> out;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j)
      if (x(i, j) && !y(i, j)) out.emplace_back(i, j);
  return out;
}

bool sparse_member(const Eigen::MatrixXd& m, const BinMatrix& x, double tol) {
  if (m.rows() != x.rows() || m.cols() != x.cols())
    throw std::invalid_argument("sparse_member: shape mismatch");
  return sparse_violation(m, x) <= tol;
}

double sparse_violation(const Eigen::MatrixXd& m, const BinMatrix& x) {
  if (m.rows() != x.rows() || m.cols() != x.cols())
    throw std::invalid_argument("sparse_violation: shape mismatch");
  double worst = 0.0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (!x(i, j)) worst = std::max(worst, std::abs(m(i, j)));
  return worst;
}

}  // namespace gssctl
