#include "asyncdd/sparse_lu.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace asyncdd {
namespace {

constexpr auto kNone = std::numeric_limits<std::size_t>::max();

// Symmetrized adjacency (pattern of A + A^T without the diagonal).
std::vector<std::vector<std::size_t>> symmetric_graph(const CsrMatrix& a) {
  std::vector<std::vector<std::size_t>> adj(a.nrows());
  for (std::size_t i = 0; i < a.nrows(); ++i) {
    for (auto j : a.row_cols(i)) {
      if (j == i) continue;
      adj[i].push_back(j);
      adj[j].push_back(i);
    }
  }
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return adj;
}

// BFS from `root` over nodes not yet `done`; fills `level`, returns visit order.
std::vector<std::size_t> bfs(const std::vector<std::vector<std::size_t>>& adj, std::size_t root,
                             const std::vector<char>& done, std::vector<std::size_t>& level) {
  std::vector<std::size_t> order{root};
  level[root] = 0;
  for (std::size_t head = 0; head < order.size(); ++head) {
    const auto v = order[head];
    for (auto w : adj[v]) {
      if (!done[w] && level[w] == kNone) {
        level[w] = level[v] + 1;
        order.push_back(w);
      }
    }
  }
  return order;
}

std::size_t pseudo_peripheral(const std::vector<std::vector<std::size_t>>& adj,
                              std::size_t start, const std::vector<char>& done) {
  std::vector<std::size_t> level(adj.size(), kNone);
  std::size_t root = start;
  std::size_t ecc = 0;
  for (int sweep = 0; sweep < 16; ++sweep) {
    auto order = bfs(adj, root, done, level);
    const std::size_t depth = level[order.back()];
    std::size_t best = order.back();
    for (auto v : order) {
      if (level[v] == depth && adj[v].size() < adj[best].size()) best = v;
    }
    for (auto v : order) level[v] = kNone;
    if (sweep > 0 && depth <= ecc) break;
    ecc = depth;
    root = best;
  }
  return root;
}

}  // namespace

std::vector<std::size_t> reverse_cuthill_mckee(const CsrMatrix& a) {
  if (!a.is_square()) throw ContractError("reverse_cuthill_mckee: matrix must be square");
  const auto adj = symmetric_graph(a);
  const std::size_t n = a.nrows();
  std::vector<char> done(n, 0);
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<std::size_t> by_degree(n);
  std::iota(by_degree.begin(), by_degree.end(), std::size_t{0});
  std::stable_sort(by_degree.begin(), by_degree.end(),
                   [&](std::size_t x, std::size_t y) { return adj[x].size() < adj[y].size(); });
  std::vector<std::size_t> nbrs;
  for (auto seed : by_degree) {
    if (done[seed]) continue;
    const auto root = pseudo_peripheral(adj, seed, done);
    const std::size_t first = order.size();
    order.push_back(root);
    done[root] = 1;
    for (std::size_t head = first; head < order.size(); ++head) {
      nbrs.clear();
      for (auto w : adj[order[head]]) {
        if (!done[w]) nbrs.push_back(w);
      }
      std::stable_sort(nbrs.begin(), nbrs.end(),
                       [&](std::size_t x, std::size_t y) { return adj[x].size() < adj[y].size(); });
      for (auto w : nbrs) {
        done[w] = 1;
        order.push_back(w);
      }
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

SparseLu SparseLu::factor(const CsrMatrix& a, Ordering ordering) {
  if (!a.is_square()) throw ContractError("lu_factor: matrix must be square");
  SparseLu f;
  const std::size_t n = a.nrows();
  f.n_ = n;
  if (ordering == Ordering::reverse_cuthill_mckee) {
    f.perm_ = reverse_cuthill_mckee(a);
  } else {
    f.perm_.resize(n);
    std::iota(f.perm_.begin(), f.perm_.end(), std::size_t{0});
  }
  std::vector<std::size_t> inv(n);
  for (std::size_t k = 0; k < n; ++k) inv[f.perm_[k]] = k;

  // Column k of P A P^T is column perm[k] of A, i.e. row perm[k] of A^T.
  const CsrMatrix at = a.transpose();
  Vector row_max(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (double v : a.row_values(i)) row_max[inv[i]] = std::max(row_max[inv[i]], std::abs(v));
  }

  Vector x(n, 0.0);
  std::vector<std::size_t> mark(n, kNone);
  std::vector<std::size_t> topo;
  std::vector<std::pair<std::size_t, std::size_t>> stack;  // (node, next child)
  f.u_diag_.resize(n);

  for (std::size_t k = 0; k < n; ++k) {
    // Reach of column k's pattern in the graph of L(:, 0:k-1); DFS postorder.
    topo.clear();
    auto src_cols = at.row_cols(f.perm_[k]);
    auto src_vals = at.row_values(f.perm_[k]);
    for (auto old_row : src_cols) {
      const std::size_t start = inv[old_row];
      if (mark[start] == k) continue;
      mark[start] = k;
      stack.emplace_back(start, 0);
      while (!stack.empty()) {
        auto& [node, child] = stack.back();
        bool pushed = false;
        if (node < k) {
          const std::size_t begin = f.l_offsets_[node];
          const std::size_t end = f.l_offsets_[node + 1];
          while (begin + child < end) {
            const std::size_t r = f.l_rows_[begin + child];
            ++child;
            if (mark[r] != k) {
              mark[r] = k;
              stack.emplace_back(r, 0);
              pushed = true;
              break;
            }
          }
        }
        if (!pushed) {
          topo.push_back(node);
          stack.pop_back();
        }
      }
    }
    for (std::size_t p = 0; p < src_cols.size(); ++p) x[inv[src_cols[p]]] = src_vals[p];
    // Reverse postorder is a topological order of the dependency DAG.
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
      const std::size_t j = *it;
      if (j >= k) continue;
      const double xj = x[j];
      for (std::size_t p = f.l_offsets_[j]; p < f.l_offsets_[j + 1]; ++p) {
        x[f.l_rows_[p]] -= f.l_vals_[p] * xj;
      }
    }
    const double pivot = mark[k] == k ? x[k] : 0.0;
    if (!(std::abs(pivot) >= kPivotTolerance * row_max[k]) || row_max[k] == 0.0) {
      throw SingularMatrixError("lu_factor: zero or tiny pivot at position " + std::to_string(k));
    }
    f.u_diag_[k] = pivot;
    std::sort(topo.begin(), topo.end());
    for (auto j : topo) {
      if (j < k) {
        f.u_rows_.push_back(j);
        f.u_vals_.push_back(x[j]);
      } else if (j > k) {
        f.l_rows_.push_back(j);
        f.l_vals_.push_back(x[j] / pivot);
      }
      x[j] = 0.0;
    }
    f.u_offsets_.push_back(f.u_rows_.size());
    f.l_offsets_.push_back(f.l_rows_.size());
  }
  return f;
}

double SparseLu::min_abs_pivot() const {
  double m = std::numeric_limits<double>::infinity();
  for (double d : u_diag_) m = std::min(m, std::abs(d));
  return m;
}

bool SparseLu::all_pivots_positive() const {
  return std::all_of(u_diag_.begin(), u_diag_.end(), [](double d) { return d > 0.0; });
}

void SparseLu::solve(std::span<const double> b, std::span<double> x,
                     std::span<double> scratch) const {
  if (b.size() != n_ || x.size() != n_ || scratch.size() < n_) {
    throw ContractError("lu_solve: dimension mismatch");
  }
  auto y = scratch.first(n_);
  for (std::size_t k = 0; k < n_; ++k) y[k] = b[perm_[k]];
  for (std::size_t j = 0; j < n_; ++j) {
    const double yj = y[j];
    if (yj == 0.0) continue;
    for (std::size_t p = l_offsets_[j]; p < l_offsets_[j + 1]; ++p) y[l_rows_[p]] -= l_vals_[p] * yj;
  }
  for (std::size_t j = n_; j-- > 0;) {
    y[j] /= u_diag_[j];
    const double yj = y[j];
    for (std::size_t p = u_offsets_[j]; p < u_offsets_[j + 1]; ++p) y[u_rows_[p]] -= u_vals_[p] * yj;
  }
  for (std::size_t k = 0; k < n_; ++k) x[perm_[k]] = y[k];
}

Vector SparseLu::solve(std::span<const double> b) const {
  Vector x(n_);
  Vector scratch(n_);
  solve(b, x, scratch);
  return x;
}

}  // namespace asyncdd
