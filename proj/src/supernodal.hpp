#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gssctl/qp.hpp"

namespace gssctl::detail {

// Unpivoted multifrontal LDL' for symmetric matrices whose pivots are safe in
// any symmetric order (quasi-definite KKT systems). Input holds the lower
// triangle, column-major, pattern fixed between analyze() and factorize().
class SupernodalLdlt {
 public:
  // perm (new -> old) overrides the fill-reducing ordering.
  void analyze(const SparseMatrix& lower, const std::vector<int>* perm = nullptr);
  bool factorize(const SparseMatrix& lower);
  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;

  Index rows() const { return n_; }
  Index supernodes() const { return static_cast<Index>(first_.size()) - 1; }
  long long factor_nonzeros() const;
  double factor_flops() const;

 private:
  struct Front {
    Eigen::MatrixXd L;  // rows(s) x ncols(s); unit diagonal implied
  };

  Index n_ = 0;
  std::vector<int> perm_;    // new -> old
  std::vector<int> first_;   // supernode s owns columns [first_[s], first_[s+1])
  std::vector<int> sparent_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<int>> rows_;  // sorted row indices, own columns first
  std::vector<int> col_ptr_, row_idx_, src_;  // permuted lower pattern, src_ = index into input values
  std::vector<Front> fronts_;
  Eigen::VectorXd d_;
};

}  // namespace gssctl::detail
