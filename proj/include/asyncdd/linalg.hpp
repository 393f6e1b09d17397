#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace asyncdd {

using Vector = std::vector<double>;

/// Raised when a caller breaks a documented precondition (sizes, ranges).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed sparse row matrix with strictly increasing column indices per row.
///
/// Instances are immutable once built; every constructor validates the CSR
/// invariants and throws ContractError on violation.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(std::size_t nrows, std::size_t ncols, std::vector<std::size_t> row_offsets,
            std::vector<std::size_t> col_indices, std::vector<double> values);

  /// Duplicate (row, col) pairs are summed in input order.
  static CsrMatrix from_triplets(std::size_t nrows, std::size_t ncols,
                                 std::vector<Triplet> entries);
  static CsrMatrix identity(std::size_t n);

  std::size_t nrows() const noexcept { return nrows_; }
  std::size_t ncols() const noexcept { return ncols_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  bool is_square() const noexcept { return nrows_ == ncols_; }

  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<const std::size_t> row_cols(std::size_t i) const {
    return {col_indices_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
  }
  std::span<const double> row_values(std::size_t i) const {
    return {values_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
  }

  /// Entry (i, j), zero when not stored.
  double coeff(std::size_t i, std::size_t j) const;

  CsrMatrix transpose() const;

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;

 private:
  std::size_t nrows_ = 0;
  std::size_t ncols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

Vector spmv(const CsrMatrix& a, std::span<const double> x);
void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y);

/// Sparse product a*b (Gustavson), sorted columns.
CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b);

/// Rows `rows` and columns `cols` of a, both given as sorted global index lists.
CsrMatrix extract(const CsrMatrix& a, std::span<const std::size_t> rows,
                  std::span<const std::size_t> cols);

double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);

/// Throws ContractError if any entry is NaN or infinite.
void require_finite(std::span<const double> x, const std::string& what);

// MatrixMarket coordinate real general, 1-based indices.
void write_matrix_market(std::ostream& out, const CsrMatrix& a);
CsrMatrix read_matrix_market(std::istream& in);

}  // namespace asyncdd
