#include "asyncdd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace asyncdd {

CsrMatrix::CsrMatrix(std::size_t nrows, std::size_t ncols, std::vector<std::size_t> row_offsets,
                     std::vector<std::size_t> col_indices, std::vector<double> values)
    : nrows_(nrows),
      ncols_(ncols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  if (row_offsets_.size() != nrows_ + 1 || row_offsets_.front() != 0) {
    throw ContractError("CsrMatrix: row_offsets must have nrows+1 entries starting at 0");
  }
  if (col_indices_.size() != values_.size() || row_offsets_.back() != values_.size()) {
    throw ContractError("CsrMatrix: inconsistent nnz");
  }
  for (std::size_t i = 0; i < nrows_; ++i) {
    if (row_offsets_[i + 1] < row_offsets_[i]) {
      throw ContractError("CsrMatrix: row_offsets must be nondecreasing");
    }
    for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
      if (col_indices_[k] >= ncols_) throw ContractError("CsrMatrix: column index out of range");
      if (k > row_offsets_[i] && col_indices_[k] <= col_indices_[k - 1]) {
        throw ContractError("CsrMatrix: column indices must be strictly increasing per row");
      }
    }
  }
}

CsrMatrix CsrMatrix::from_triplets(std::size_t nrows, std::size_t ncols,
                                   std::vector<Triplet> entries) {
  for (const auto& t : entries) {
    if (t.row >= nrows || t.col >= ncols) throw ContractError("from_triplets: index out of range");
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> offsets(nrows + 1, 0);
  std::vector<std::size_t> cols;
  std::vector<double> vals;
  cols.reserve(entries.size());
  vals.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& t = entries[k];
    if (k > 0 && entries[k - 1].row == t.row && entries[k - 1].col == t.col) {
      vals.back() += t.value;
      continue;
    }
    cols.push_back(t.col);
    vals.push_back(t.value);
    ++offsets[t.row + 1];
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  return CsrMatrix(nrows, ncols, std::move(offsets), std::move(cols), std::move(vals));
}

CsrMatrix CsrMatrix::identity(std::size_t n) {
  std::vector<std::size_t> offsets(n + 1);
  std::iota(offsets.begin(), offsets.end(), std::size_t{0});
  std::vector<std::size_t> cols(n);
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  return CsrMatrix(n, n, std::move(offsets), std::move(cols), Vector(n, 1.0));
}

double CsrMatrix::coeff(std::size_t i, std::size_t j) const {
  if (i >= nrows_ || j >= ncols_) throw ContractError("coeff: index out of range");
  auto cols = row_cols(i);
  auto it = std::lower_bound(cols.begin(), cols.end(), j);
  if (it == cols.end() || *it != j) return 0.0;
  return values_[row_offsets_[i] + static_cast<std::size_t>(it - cols.begin())];
}

CsrMatrix CsrMatrix::transpose() const {
  std::vector<std::size_t> offsets(ncols_ + 1, 0);
  for (auto c : col_indices_) ++offsets[c + 1];
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<std::size_t> next(offsets.begin(), offsets.end() - 1);
  std::vector<std::size_t> cols(nnz());
  Vector vals(nnz());
  for (std::size_t i = 0; i < nrows_; ++i) {
    for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
      const std::size_t dst = next[col_indices_[k]]++;
      cols[dst] = i;
      vals[dst] = values_[k];
    }
  }
  return CsrMatrix(ncols_, nrows_, std::move(offsets), std::move(cols), std::move(vals));
}

void spmv(const CsrMatrix& a, std::span<const double> x, std::span<double> y) {
  if (x.size() != a.ncols() || y.size() != a.nrows()) {
    throw ContractError("spmv: dimension mismatch");
  }
  const auto offsets = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  for (std::size_t i = 0; i < a.nrows(); ++i) {
    double sum = 0.0;
    for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) sum += vals[k] * x[cols[k]];
    y[i] = sum;
  }
}

Vector spmv(const CsrMatrix& a, std::span<const double> x) {
  Vector y(a.nrows());
  spmv(a, x, y);
  return y;
}

CsrMatrix multiply(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.ncols() != b.nrows()) throw ContractError("multiply: dimension mismatch");
  constexpr auto kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> marker(b.ncols(), kUnset);
  Vector acc(b.ncols(), 0.0);
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> cols;
  Vector vals;
  std::vector<std::size_t> pattern;
  for (std::size_t i = 0; i < a.nrows(); ++i) {
    pattern.clear();
    auto acols = a.row_cols(i);
    auto avals = a.row_values(i);
    for (std::size_t p = 0; p < acols.size(); ++p) {
      const std::size_t k = acols[p];
      auto bcols = b.row_cols(k);
      auto bvals = b.row_values(k);
      for (std::size_t q = 0; q < bcols.size(); ++q) {
        const std::size_t j = bcols[q];
        if (marker[j] != i) {
          marker[j] = i;
          acc[j] = 0.0;
          pattern.push_back(j);
        }
        acc[j] += avals[p] * bvals[q];
      }
    }
    std::sort(pattern.begin(), pattern.end());
    for (auto j : pattern) {
      cols.push_back(j);
      vals.push_back(acc[j]);
    }
    offsets.push_back(cols.size());
  }
  return CsrMatrix(a.nrows(), b.ncols(), std::move(offsets), std::move(cols), std::move(vals));
}

CsrMatrix extract(const CsrMatrix& a, std::span<const std::size_t> rows,
                  std::span<const std::size_t> cols) {
  constexpr auto kAbsent = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> local(a.ncols(), kAbsent);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] >= a.ncols() || (k > 0 && cols[k] <= cols[k - 1])) {
      throw ContractError("extract: column list must be sorted, unique and in range");
    }
    local[cols[k]] = k;
  }
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> out_cols;
  Vector out_vals;
  for (auto r : rows) {
    if (r >= a.nrows()) throw ContractError("extract: row out of range");
    auto rc = a.row_cols(r);
    auto rv = a.row_values(r);
    for (std::size_t k = 0; k < rc.size(); ++k) {
      if (local[rc[k]] != kAbsent) {
        out_cols.push_back(local[rc[k]]);
        out_vals.push_back(rv[k]);
      }
    }
    offsets.push_back(out_cols.size());
  }
  return CsrMatrix(rows.size(), cols.size(), std::move(offsets), std::move(out_cols),
                   std::move(out_vals));
}

double dot(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ContractError("dot: dimension mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += x[i] * y[i];
  return sum;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void require_finite(std::span<const double> x, const std::string& what) {
  for (double v : x) {
    if (!std::isfinite(v)) throw ContractError(what + ": non-finite entry");
  }
}

void write_matrix_market(std::ostream& out, const CsrMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.nrows() << ' ' << a.ncols() << ' ' << a.nnz() << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < a.nrows(); ++i) {
    auto cols = a.row_cols(i);
    auto vals = a.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      out << i + 1 << ' ' << cols[k] + 1 << ' ' << vals[k] << '\n';
    }
  }
}

CsrMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0) {
    throw ContractError("MatrixMarket: missing banner");
  }
  const bool symmetric = line.find("symmetric") != std::string::npos;
  if (line.find("coordinate") == std::string::npos) {
    throw ContractError("MatrixMarket: only coordinate format is supported");
  }
  while (std::getline(in, line) && (line.empty() || line[0] == '%')) {
  }
  std::istringstream header(line);
  std::size_t nrows = 0, ncols = 0, nnz = 0;
  if (!(header >> nrows >> ncols >> nnz)) throw ContractError("MatrixMarket: bad size line");
  std::vector<Triplet> entries;
  entries.reserve(symmetric ? 2 * nnz : nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    std::size_t i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v) || i == 0 || j == 0) {
      throw ContractError("MatrixMarket: bad entry");
    }
    entries.push_back({i - 1, j - 1, v});
    if (symmetric && i != j) entries.push_back({j - 1, i - 1, v});
  }
  return CsrMatrix::from_triplets(nrows, ncols, std::move(entries));
}

}  // namespace asyncdd
