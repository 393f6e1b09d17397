#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "asyncdd/fem.hpp"
#include "asyncdd/linalg.hpp"

namespace asyncdd::decomp {

/// Sorted list of global unknown indices.
using IndexSet = std::vector<std::size_t>;

/// Shared unknowns N_p ∩ N_q seen from p: p-local indices ordered by global
/// index, so that the list held by q for p names the same unknowns in the same
/// order. Together the two lists realize R_p R_q^T.
struct NeighborLink {
  std::size_t neighbor = 0;
  std::vector<std::size_t> local;
};

/// Overlapping subdomain p: base set N_p^(0), extended set N_p, ownership
/// (the Boolean partition of unity D_p) and the exchange lists.
struct SubdomainMap {
  std::size_t id = 0;
  IndexSet base;
  IndexSet overlap;
  std::vector<std::size_t> owner;  // owner subdomain of each local index
  std::vector<char> owned;         // diag(D_p)
  std::vector<NeighborLink> neighbors;

  std::size_t size() const noexcept { return overlap.size(); }
  /// Local index of a global unknown; throws if it is not in N_p.
  std::size_t local_of(std::size_t global) const;
  bool contains(std::size_t global) const;
};

/// (px, py) with px*py == parts, px >= py and the two as close as possible.
std::pair<std::size_t, std::size_t> near_square_factors(std::size_t parts);

/// Lexicographic px-by-py tiling of the (n-1)x(n-1) unknown grid. With
/// imbalance > 1 the block of subdomain 0 grows at the expense of its east and
/// north neighbours until it holds at least imbalance*N/P unknowns.
std::vector<IndexSet> partition_rectangular(std::size_t n, std::size_t px, std::size_t py,
                                            double imbalance = 1.0);

/// Greedy graph growing from farthest-point seeds plus one boundary smoothing
/// pass. Deterministic for a given seed.
std::vector<IndexSet> partition_graph(const CsrMatrix& a, std::size_t parts, std::uint64_t seed);

/// Number of matrix-graph edges {i, j}, i < j, whose endpoints lie in different sets.
std::size_t edge_cut(const CsrMatrix& a, const std::vector<IndexSet>& parts);

/// Adds `depth` rounds of graph-neighbour closure to each base set.
std::vector<SubdomainMap> extend_overlap(const CsrMatrix& a, const std::vector<IndexSet>& base,
                                         std::size_t depth);

/// A_p = R_p A R_p^T.
CsrMatrix local_matrix(const CsrMatrix& a, const SubdomainMap& map);

/// R_p as an |N_p| x N sparse matrix.
CsrMatrix restriction(const SubdomainMap& map, std::size_t global_size);

/// Per-subdomain family of masks D_q^(p): masks[q] lives on N_q.
struct JsPartition {
  std::size_t id = 0;
  std::vector<std::vector<char>> masks;
};

std::vector<JsPartition> build_js_partitions(const std::vector<SubdomainMap>& maps);

/// R_0 R_p^T restricted to the coarse unknowns it touches, and its transpose.
struct CoarseLink {
  std::vector<std::size_t> coarse_rows;
  CsrMatrix to_coarse;    // |coarse_rows| x |N_p|
  CsrMatrix from_coarse;  // |N_p| x |coarse_rows|
};

struct CoarseSpace {
  std::size_t coarse_cells = 0;
  CsrMatrix restriction;  // R_0, N_0 x N
  CsrMatrix a0;           // R_0 A R_0^T
  std::vector<CoarseLink> links;

  std::size_t size() const noexcept { return a0.nrows(); }
};

/// P1 interpolation from the vertices of an nc-cell mesh to those of an
/// n-cell mesh, (n+1)^2 x (nc+1)^2. Requires nc to divide n.
CsrMatrix vertex_interpolation(std::size_t n, std::size_t nc);

/// Divisor nc of n, 2 <= nc < n, whose (nc-1)^2 is closest (in ratio) to
/// target_ratio * parts. Throws if n has no such divisor.
std::size_t choose_coarse_cells(std::size_t n, std::size_t parts, double target_ratio);

CoarseSpace build_coarse(const fem::DiscreteProblem& problem, const std::vector<SubdomainMap>& maps,
                         double target_ratio);
CoarseSpace build_coarse_with_cells(const fem::DiscreteProblem& problem,
                                    const std::vector<SubdomainMap>& maps, std::size_t coarse_cells);

/// JSON dump with per-subdomain base/overlap index arrays.
void write_partition_json(std::ostream& out, std::size_t n, const std::vector<SubdomainMap>& maps);

}  // namespace asyncdd::decomp
