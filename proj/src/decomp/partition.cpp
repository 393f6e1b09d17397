#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <string>

#include "asyncdd/decomp.hpp"

namespace asyncdd::decomp {
namespace {

constexpr auto kUnassigned = std::numeric_limits<std::size_t>::max();

std::vector<std::vector<std::size_t>> adjacency(const CsrMatrix& a) {
  std::vector<std::vector<std::size_t>> adj(a.nrows());
  for (std::size_t i = 0; i < a.nrows(); ++i) {
    for (auto j : a.row_cols(i)) {
      if (j != i) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
    }
  }
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return adj;
}

std::vector<IndexSet> sets_from_owner(const std::vector<std::size_t>& owner, std::size_t parts) {
  std::vector<IndexSet> sets(parts);
  for (std::size_t g = 0; g < owner.size(); ++g) sets[owner[g]].push_back(g);
  return sets;
}

}  // namespace

std::pair<std::size_t, std::size_t> near_square_factors(std::size_t parts) {
  if (parts == 0) throw ContractError("near_square_factors: parts must be positive");
  auto py = static_cast<std::size_t>(std::sqrt(static_cast<double>(parts)));
  while (py > 1 && parts % py != 0) --py;
  return {parts / py, py};
}

std::vector<IndexSet> partition_rectangular(std::size_t n, std::size_t px, std::size_t py,
                                            double imbalance) {
  if (n < 2) throw ContractError("partition_rectangular: n must be at least 2");
  const std::size_t m = n - 1;
  if (px == 0 || py == 0 || px > m || py > m) {
    throw ContractError("partition_rectangular: px and py must lie in [1, n-1]");
  }
  if (!(imbalance >= 1.0)) throw ContractError("partition_rectangular: imbalance must be >= 1");
  const std::size_t parts = px * py;
  std::vector<std::size_t> owner(m * m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t by = std::min(py - 1, j * py / m);
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t bx = std::min(px - 1, i * px / m);
      owner[j * m + i] = by * px + bx;
    }
  }
  if (parts > 1 && imbalance > 1.0) {
    std::size_t width = 0, height = 0;
    while (width < m && owner[width] == 0) ++width;
    while (height < m && owner[height * m] == 0) ++height;
    const double target = imbalance * static_cast<double>(m * m) / static_cast<double>(parts);
    std::vector<std::size_t> count(parts, 0);
    for (auto o : owner) ++count[o];
    while (static_cast<double>(count[0]) < target) {
      const bool can_x = width < m;
      const bool can_y = height < m;
      if (!can_x && !can_y) throw ContractError("partition_rectangular: infeasible imbalance");
      const bool grow_x = can_x && (!can_y || (width + 1) * height <= width * (height + 1));
      const std::size_t x_end = grow_x ? width + 1 : width;
      const std::size_t y_end = grow_x ? height : height + 1;
      for (std::size_t j = 0; j < y_end; ++j) {
        for (std::size_t i = 0; i < x_end; ++i) {
          auto& o = owner[j * m + i];
          if (o != 0) {
            --count[o];
            ++count[0];
            o = 0;
          }
        }
      }
      width = x_end;
      height = y_end;
      for (std::size_t p = 1; p < parts; ++p) {
        if (count[p] == 0) {
          throw ContractError("partition_rectangular: imbalance " + std::to_string(imbalance) +
                              " empties subdomain " + std::to_string(p));
        }
      }
    }
  }
  return sets_from_owner(owner, parts);
}

std::vector<IndexSet> partition_graph(const CsrMatrix& a, std::size_t parts, std::uint64_t seed) {
  const std::size_t n = a.nrows();
  if (!a.is_square()) throw ContractError("partition_graph: matrix must be square");
  if (parts == 0 || parts > n) throw ContractError("partition_graph: need 1 <= P <= N");
  const auto adj = adjacency(a);

  // Farthest-point seeds: each new seed maximizes BFS distance to the previous ones.
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> seeds{std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)};
  std::vector<std::size_t> dist(n, kUnassigned);
  std::deque<std::size_t> queue;
  auto relax_from = [&](std::size_t s) {
    dist[s] = 0;
    queue.assign(1, s);
    while (!queue.empty()) {
      const auto v = queue.front();
      queue.pop_front();
      for (auto w : adj[v]) {
        if (dist[w] > dist[v] + 1) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
      }
    }
  };
  relax_from(seeds[0]);
  while (seeds.size() < parts) {
    std::size_t best = 0;
    for (std::size_t v = 0; v < n; ++v) {
      if (dist[v] != 0 && (dist[best] == 0 || dist[v] > dist[best])) best = v;
    }
    seeds.push_back(best);
    relax_from(best);
  }

  // Balanced growth: the smallest part with a live frontier claims one node per step.
  std::vector<std::size_t> owner(n, kUnassigned);
  std::vector<std::size_t> size(parts, 0);
  std::vector<std::deque<std::size_t>> frontier(parts);
  auto claim = [&](std::size_t v, std::size_t p) {
    owner[v] = p;
    ++size[p];
    for (auto w : adj[v]) {
      if (owner[w] == kUnassigned) frontier[p].push_back(w);
    }
  };
  for (std::size_t p = 0; p < parts; ++p) claim(seeds[p], p);
  std::size_t assigned = parts;
  while (assigned < n) {
    std::size_t pick = kUnassigned;
    for (std::size_t p = 0; p < parts; ++p) {
      while (!frontier[p].empty() && owner[frontier[p].front()] != kUnassigned) {
        frontier[p].pop_front();
      }
      if (!frontier[p].empty() && (pick == kUnassigned || size[p] < size[pick])) pick = p;
    }
    if (pick == kUnassigned) {
      // Disconnected remainder: restart from the first free node in the smallest part.
      pick = static_cast<std::size_t>(std::min_element(size.begin(), size.end()) - size.begin());
      const auto v = static_cast<std::size_t>(
          std::find(owner.begin(), owner.end(), kUnassigned) - owner.begin());
      claim(v, pick);
    } else {
      const auto v = frontier[pick].front();
      frontier[pick].pop_front();
      claim(v, pick);
    }
    ++assigned;
  }

  // One smoothing pass over boundary nodes, bounded to +-10% of the mean size.
  const double mean = static_cast<double>(n) / static_cast<double>(parts);
  const auto lower = static_cast<std::size_t>(std::floor(0.9 * mean));
  const auto upper = static_cast<std::size_t>(std::ceil(1.1 * mean));
  std::vector<std::size_t> links(parts, 0);
  for (std::size_t v = 0; v < n; ++v) {
    const auto cur = owner[v];
    for (auto w : adj[v]) ++links[owner[w]];
    std::size_t best = cur;
    for (auto w : adj[v]) {
      const auto q = owner[w];
      if (links[q] > links[best]) best = q;
    }
    if (best != cur && size[cur] > std::max<std::size_t>(lower, 1) && size[best] < upper) {
      owner[v] = best;
      --size[cur];
      ++size[best];
    }
    for (auto w : adj[v]) links[owner[w]] = 0;
    links[cur] = 0;
  }
  return sets_from_owner(owner, parts);
}

std::size_t edge_cut(const CsrMatrix& a, const std::vector<IndexSet>& parts) {
  std::vector<std::size_t> owner(a.nrows(), kUnassigned);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (auto g : parts[p]) owner[g] = p;
  }
  std::size_t cut = 0;
  for (std::size_t i = 0; i < a.nrows(); ++i) {
    for (auto j : a.row_cols(i)) {
      if (j > i && owner[i] != owner[j]) ++cut;
    }
  }
  return cut;
}

}  // namespace asyncdd::decomp
