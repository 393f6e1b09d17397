#include <algorithm>
#include <limits>
#include <string>

#include "asyncdd/decomp.hpp"

namespace asyncdd::decomp {
namespace {
constexpr auto kNone = std::numeric_limits<std::size_t>::max();
}

std::size_t SubdomainMap::local_of(std::size_t global) const {
  auto it = std::lower_bound(overlap.begin(), overlap.end(), global);
  if (it == overlap.end() || *it != global) {
    throw ContractError("SubdomainMap::local_of: unknown " + std::to_string(global) +
                        " not in subdomain " + std::to_string(id));
  }
  return static_cast<std::size_t>(it - overlap.begin());
}

bool SubdomainMap::contains(std::size_t global) const {
  return std::binary_search(overlap.begin(), overlap.end(), global);
}

std::vector<SubdomainMap> extend_overlap(const CsrMatrix& a, const std::vector<IndexSet>& base,
                                         std::size_t depth) {
  if (depth == 0) {
    throw ContractError("extend_overlap: depth must be >= 1 so owned unknowns stay interior");
  }
  const std::size_t n = a.nrows();
  std::vector<std::size_t> owner(n, kNone);
  for (std::size_t p = 0; p < base.size(); ++p) {
    if (base[p].empty()) throw ContractError("extend_overlap: empty base set");
    for (auto g : base[p]) {
      if (g >= n || owner[g] != kNone) {
        throw ContractError("extend_overlap: base sets must partition the unknowns");
      }
      owner[g] = p;
    }
  }
  if (std::find(owner.begin(), owner.end(), kNone) != owner.end()) {
    throw ContractError("extend_overlap: base sets do not cover all unknowns");
  }

  std::vector<SubdomainMap> maps(base.size());
  std::vector<std::size_t> seen(n, kNone);
  std::vector<std::vector<std::size_t>> members(n);
  for (std::size_t p = 0; p < base.size(); ++p) {
    auto& map = maps[p];
    map.id = p;
    map.base = base[p];
    std::sort(map.base.begin(), map.base.end());
    IndexSet set = map.base;
    for (auto g : set) seen[g] = p;
    std::size_t layer_begin = 0;
    for (std::size_t round = 0; round < depth; ++round) {
      const std::size_t layer_end = set.size();
      for (std::size_t k = layer_begin; k < layer_end; ++k) {
        for (auto w : a.row_cols(set[k])) {
          if (seen[w] != p) {
            seen[w] = p;
            set.push_back(w);
          }
        }
      }
      layer_begin = layer_end;
    }
    std::sort(set.begin(), set.end());
    map.overlap = std::move(set);
    map.owner.reserve(map.overlap.size());
    map.owned.reserve(map.overlap.size());
    for (auto g : map.overlap) {
      map.owner.push_back(owner[g]);
      map.owned.push_back(owner[g] == p);
      members[g].push_back(p);
    }
  }

  std::vector<std::size_t> slot(base.size(), kNone);
  for (auto& map : maps) {
    for (std::size_t l = 0; l < map.overlap.size(); ++l) {
      for (auto q : members[map.overlap[l]]) {
        if (q == map.id) continue;
        if (slot[q] == kNone) {
          slot[q] = map.neighbors.size();
          map.neighbors.push_back({q, {}});
        }
        map.neighbors[slot[q]].local.push_back(l);
      }
    }
    std::sort(map.neighbors.begin(), map.neighbors.end(),
              [](const NeighborLink& x, const NeighborLink& y) { return x.neighbor < y.neighbor; });
    for (const auto& link : map.neighbors) slot[link.neighbor] = kNone;
  }
  return maps;
}

CsrMatrix local_matrix(const CsrMatrix& a, const SubdomainMap& map) {
  return extract(a, map.overlap, map.overlap);
}

CsrMatrix restriction(const SubdomainMap& map, std::size_t global_size) {
  std::vector<Triplet> entries;
  entries.reserve(map.overlap.size());
  for (std::size_t l = 0; l < map.overlap.size(); ++l) entries.push_back({l, map.overlap[l], 1.0});
  return CsrMatrix::from_triplets(map.overlap.size(), global_size, std::move(entries));
}

std::vector<JsPartition> build_js_partitions(const std::vector<SubdomainMap>& maps) {
  std::vector<JsPartition> out(maps.size());
  for (std::size_t p = 0; p < maps.size(); ++p) {
    out[p].id = p;
    out[p].masks.resize(maps.size());
    for (std::size_t q = 0; q < maps.size(); ++q) {
      const auto& mq = maps[q];
      auto& mask = out[p].masks[q];
      if (q == p) {
        mask.assign(mq.size(), 1);
        continue;
      }
      mask.resize(mq.size());
      for (std::size_t l = 0; l < mq.size(); ++l) {
        mask[l] = mq.owned[l] && !maps[p].contains(mq.overlap[l]);
      }
    }
  }
  return out;
}

}  // namespace asyncdd::decomp
