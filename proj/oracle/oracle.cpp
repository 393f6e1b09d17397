#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace asyncdd::oracle {

MatrixXd dense(const CsrMatrix& a) {
  MatrixXd d = MatrixXd::Zero(static_cast<Eigen::Index>(a.nrows()),
                              static_cast<Eigen::Index>(a.ncols()));
  for (std::size_t i = 0; i < a.nrows(); ++i) {
    const auto cols = a.row_cols(i);
    const auto vals = a.row_values(i);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(cols[k])) += vals[k];
    }
  }
  return d;
}

VectorXd to_eigen(const std::vector<double>& v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

MatrixXd restriction(const decomp::IndexSet& overlap, std::size_t global_size) {
  MatrixXd r = MatrixXd::Zero(static_cast<Eigen::Index>(overlap.size()),
                              static_cast<Eigen::Index>(global_size));
  for (std::size_t l = 0; l < overlap.size(); ++l) {
    r(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(overlap[l])) = 1.0;
  }
  return r;
}

MatrixXd ownership(const decomp::IndexSet& base, const decomp::IndexSet& overlap) {
  const std::set<std::size_t> owned(base.begin(), base.end());
  MatrixXd d = MatrixXd::Zero(static_cast<Eigen::Index>(overlap.size()),
                              static_cast<Eigen::Index>(overlap.size()));
  for (std::size_t l = 0; l < overlap.size(); ++l) {
    if (owned.count(overlap[l])) d(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(l)) = 1.0;
  }
  return d;
}

MatrixXd js_mask(const decomp::SubdomainMap& p, const decomp::SubdomainMap& q) {
  const auto m = static_cast<Eigen::Index>(q.overlap.size());
  if (p.id == q.id) return MatrixXd::Identity(m, m);
  const std::set<std::size_t> base_q(q.base.begin(), q.base.end());
  const std::set<std::size_t> ext_p(p.overlap.begin(), p.overlap.end());
  MatrixXd d = MatrixXd::Zero(m, m);
  for (std::size_t l = 0; l < q.overlap.size(); ++l) {
    const std::size_t j = q.overlap[l];
    if (base_q.count(j) && !ext_p.count(j)) {
      d(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(l)) = 1.0;
    }
  }
  return d;
}

std::set<std::size_t> closure(const CsrMatrix& a, const decomp::IndexSet& base, std::size_t depth) {
  std::set<std::size_t> current(base.begin(), base.end());
  for (std::size_t layer = 0; layer < depth; ++layer) {
    std::set<std::size_t> next = current;
    for (std::size_t i : current) {
      for (std::size_t j = 0; j < a.ncols(); ++j) {
        if (a.coeff(i, j) != 0.0) next.insert(j);
      }
    }
    current = std::move(next);
  }
  return current;
}

MatrixXd ras_preconditioner(const CsrMatrix& a, const std::vector<decomp::SubdomainMap>& maps) {
  const MatrixXd ad = dense(a);
  const auto n = ad.rows();
  MatrixXd m = MatrixXd::Zero(n, n);
  for (const auto& map : maps) {
    const MatrixXd r = restriction(map.overlap, a.nrows());
    const MatrixXd ap = r * ad * r.transpose();
    const MatrixXd d = ownership(map.base, map.overlap);
    m += r.transpose() * d * ap.partialPivLu().inverse() * r;
  }
  return m;
}

MatrixXd coarse_correction(const CsrMatrix& a, const CsrMatrix& r0) {
  const MatrixXd ad = dense(a);
  const MatrixXd r = dense(r0);
  const MatrixXd a0 = r * ad * r.transpose();
  return r.transpose() * a0.partialPivLu().inverse() * r;
}

std::vector<VectorXd> richardson(const MatrixXd& a, const VectorXd& f, const MatrixXd& m,
                                 std::size_t iterations) {
  std::vector<VectorXd> out;
  VectorXd u = VectorXd::Zero(f.size());
  for (std::size_t k = 0; k < iterations; ++k) {
    u += m * (f - a * u);
    out.push_back(u);
  }
  return out;
}

std::vector<std::vector<VectorXd>> js_iterates(const CsrMatrix& a, const std::vector<double>& f,
                                               const std::vector<decomp::SubdomainMap>& maps,
                                               std::size_t iterations) {
  const MatrixXd ad = dense(a);
  const VectorXd fd = to_eigen(f);
  const std::size_t parts = maps.size();
  std::vector<MatrixXd> r(parts);
  std::vector<MatrixXd> ap(parts);
  std::vector<VectorXd> w(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    r[p] = restriction(maps[p].overlap, a.nrows());
    ap[p] = r[p] * ad * r[p].transpose();
    w[p] = VectorXd::Zero(r[p].rows());
  }
  std::vector<std::vector<VectorXd>> out;
  for (std::size_t k = 0; k < iterations; ++k) {
    std::vector<VectorXd> next(parts);
    for (std::size_t p = 0; p < parts; ++p) {
      VectorXd rp = VectorXd::Zero(r[p].rows());
      for (std::size_t q = 0; q < parts; ++q) {
        const MatrixXd d = js_mask(maps[p], maps[q]);
        rp += r[p] * r[q].transpose() * (d * r[q] * fd - ap[q] * d * w[q]);
      }
      next[p] = w[p] + gaussian_solve(ap[p], rp);
    }
    w = next;
    out.push_back(w);
  }
  return out;
}

VectorXd accumulate(const std::vector<decomp::SubdomainMap>& maps, std::size_t p,
                    const std::vector<std::vector<double>>& t, std::size_t global_size) {
  const MatrixXd rp = restriction(maps[p].overlap, global_size);
  VectorXd out = VectorXd::Zero(rp.rows());
  for (std::size_t q = 0; q < maps.size(); ++q) {
    out += rp * restriction(maps[q].overlap, global_size).transpose() * to_eigen(t[q]);
  }
  return out;
}

VectorXd gaussian_solve(MatrixXd a, VectorXd b) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.size() != n) throw std::invalid_argument("gaussian_solve: shape");
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index piv = k;
    for (Eigen::Index i = k + 1; i < n; ++i) {
      if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
    }
    if (a(piv, k) == 0.0) throw std::runtime_error("gaussian_solve: singular");
    a.row(k).swap(a.row(piv));
    std::swap(b(k), b(piv));
    for (Eigen::Index i = k + 1; i < n; ++i) {
      const double l = a(i, k) / a(k, k);
      a.row(i).tail(n - k) -= l * a.row(k).tail(n - k);
      b(i) -= l * b(k);
    }
  }
  VectorXd x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = b(i);
    for (Eigen::Index j = i + 1; j < n; ++j) s -= a(i, j) * x(j);
    x(i) = s / a(i, i);
  }
  return x;
}

}  // namespace asyncdd::oracle
