#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gssctl {

using Index = Eigen::Index;

/// Dense 0/1 matrix used for sparsity patterns.
///
/// Products and powers follow the boolean convention XX' := Struct(XX'),
/// i.e. entries are combined with OR/AND and never exceed one.
class BinMatrix {
 public:
  BinMatrix() = default;
  BinMatrix(Index rows, Index cols, bool value = false);

  static BinMatrix zeros(Index rows, Index cols) { return {rows, cols, false}; }
  static BinMatrix ones(Index rows, Index cols) { return {rows, cols, true}; }
  static BinMatrix identity(Index n);
  static BinMatrix from_rows(std::initializer_list<std::initializer_list<int>> rows);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index size() const { return rows_ * cols_; }

  bool operator()(Index i, Index j) const { return bits_[static_cast<std::size_t>(i * cols_ + j)] != 0; }
  void set(Index i, Index j, bool value = true) {
    bits_[static_cast<std::size_t>(i * cols_ + j)] = value ? 1 : 0;
  }

  /// Number of ones.
  Index count() const;
  bool all_zero() const { return count() == 0; }

  BinMatrix transpose() const;
  Eigen::MatrixXd to_real() const;

  /// Copy `block` into this matrix with its top-left corner at (row, col).
  void set_block(Index row, Index col, const BinMatrix& block);
  BinMatrix block(Index row, Index col, Index rows, Index cols) const;

  std::string to_string() const;

  friend bool operator==(const BinMatrix& a, const BinMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.bits_ == b.bits_;
  }

 private:
  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Pattern of entries with |M(i,j)| > eps.
BinMatrix struct_of(const Eigen::MatrixXd& m, double eps = 0.0);

/// Boolean product: out(i,j) = OR_k (x1(i,k) AND x2(k,j)).
BinMatrix bool_mul(const BinMatrix& x1, const BinMatrix& x2);

/// r-fold boolean product of a square pattern with itself (r >= 1).
BinMatrix bool_pow(const BinMatrix& x, int r);

BinMatrix bool_or(const BinMatrix& a, const BinMatrix& b);
BinMatrix bool_and(const BinMatrix& a, const BinMatrix& b);

/// Kronecker product of two patterns.
BinMatrix kron(const BinMatrix& a, const BinMatrix& b);

bool leq(const BinMatrix& x, const BinMatrix& y);
bool lt(const BinMatrix& x, const BinMatrix& y);
bool not_leq(const BinMatrix& x, const BinMatrix& y);

/// Entries (i,j) where x(i,j) = 1 but y(i,j) = 0.
std::vector<std::pair<Index, Index>> leq_violations(const BinMatrix& x, const BinMatrix& y);

/// True iff |m(i,j)| <= tol wherever x(i,j) = 0.
bool sparse_member(const Eigen::MatrixXd& m, const BinMatrix& x, double tol = 0.0);

/// Largest |m(i,j)| over the zeros of x.
double sparse_violation(const Eigen::MatrixXd& m, const BinMatrix& x);

}  // namespace gssctl
