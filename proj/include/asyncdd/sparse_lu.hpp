#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "asyncdd/linalg.hpp"

namespace asyncdd {

class SingularMatrixError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Ordering { natural, reverse_cuthill_mckee };

/// Symmetric fill-reducing permutation (new position -> old index).
std::vector<std::size_t> reverse_cuthill_mckee(const CsrMatrix& a);

/// Left-looking sparse LU (Gilbert-Peierls) of P A P^T without row pivoting.
///
/// Intended for the SPD matrices produced by the FEM assembly. A pivot whose
/// magnitude drops below 1e-14 times the largest entry of its row raises
/// SingularMatrixError. The object is immutable after factor(); solves with
/// caller-provided scratch may run concurrently.
class SparseLu {
 public:
  static constexpr double kPivotTolerance = 1e-14;

  static SparseLu factor(const CsrMatrix& a, Ordering ordering = Ordering::reverse_cuthill_mckee);

  std::size_t size() const noexcept { return n_; }
  std::size_t nnz_l() const noexcept { return l_rows_.size(); }
  std::size_t nnz_u() const noexcept { return u_rows_.size() + n_; }
  std::span<const std::size_t> permutation() const noexcept { return perm_; }
  double min_abs_pivot() const;
  bool all_pivots_positive() const;

  /// x = A^{-1} b; `scratch` must hold size() entries. b and x may alias.
  void solve(std::span<const double> b, std::span<double> x, std::span<double> scratch) const;
  Vector solve(std::span<const double> b) const;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> perm_;
  // Strictly lower part of L (unit diagonal), column-wise.
  std::vector<std::size_t> l_offsets_{0};
  std::vector<std::size_t> l_rows_;
  Vector l_vals_;
  // Strictly upper part of U, column-wise, plus the diagonal.
  std::vector<std::size_t> u_offsets_{0};
  std::vector<std::size_t> u_rows_;
  Vector u_vals_;
  Vector u_diag_;
};

}  // namespace asyncdd
