#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "asyncdd/decomp.hpp"

namespace asyncdd::decomp {

CsrMatrix vertex_interpolation(std::size_t n, std::size_t nc) {
  if (nc == 0 || nc > n || n % nc != 0) {
    throw ContractError("vertex_interpolation: coarse cells must divide fine cells");
  }
  const std::size_t m = n / nc;
  const auto md = static_cast<double>(m);
  std::vector<Triplet> entries;
  entries.reserve((n + 1) * (n + 1) * 3);
  auto coarse = [nc](std::size_t ci, std::size_t cj) { return cj * (nc + 1) + ci; };
  for (std::size_t j = 0; j <= n; ++j) {
    const std::size_t cj = std::min(j / m, nc - 1);
    const std::size_t b = j - cj * m;
    for (std::size_t i = 0; i <= n; ++i) {
      const std::size_t ci = std::min(i / m, nc - 1);
      const std::size_t a = i - ci * m;
      const std::size_t row = j * (n + 1) + i;
      // Coarse cells carry the same diagonal as the fine mesh.
      if (a >= b) {
        entries.push_back({row, coarse(ci, cj), static_cast<double>(m - a) / md});
        entries.push_back({row, coarse(ci + 1, cj), static_cast<double>(a - b) / md});
        entries.push_back({row, coarse(ci + 1, cj + 1), static_cast<double>(b) / md});
      } else {
        entries.push_back({row, coarse(ci, cj), static_cast<double>(m - b) / md});
        entries.push_back({row, coarse(ci + 1, cj + 1), static_cast<double>(a) / md});
        entries.push_back({row, coarse(ci, cj + 1), static_cast<double>(b - a) / md});
      }
    }
  }
  std::erase_if(entries, [](const Triplet& t) { return t.value == 0.0; });
  return CsrMatrix::from_triplets((n + 1) * (n + 1), (nc + 1) * (nc + 1), std::move(entries));
}

std::size_t choose_coarse_cells(std::size_t n, std::size_t parts, double target_ratio) {
  if (!(target_ratio > 0.0) || parts == 0) {
    throw ContractError("choose_coarse_cells: target ratio and P must be positive");
  }
  const double target = target_ratio * static_cast<double>(parts);
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t d = 2; d < n; ++d) {
    if (n % d != 0) continue;
    const double size = static_cast<double>((d - 1) * (d - 1));
    const double score = std::abs(std::log(size / target));
    if (score < best_score) {
      best_score = score;
      best = d;
    }
  }
  if (best == 0) {
    throw ContractError("choose_coarse_cells: n=" + std::to_string(n) +
                        " has no proper divisor >= 2 to build a coarse mesh");
  }
  return best;
}

CoarseSpace build_coarse(const fem::DiscreteProblem& problem, const std::vector<SubdomainMap>& maps,
                         double target_ratio) {
  return build_coarse_with_cells(problem, maps,
                                 choose_coarse_cells(problem.n, maps.size(), target_ratio));
}

CoarseSpace build_coarse_with_cells(const fem::DiscreteProblem& problem,
                                    const std::vector<SubdomainMap>& maps,
                                    std::size_t coarse_cells) {
  const std::size_t n = problem.n;
  const std::size_t nc = coarse_cells;
  if (nc < 2) throw ContractError("build_coarse: coarse mesh needs at least 2 cells per side");
  const CsrMatrix full = vertex_interpolation(n, nc);
  std::vector<std::size_t> fine_interior;
  for (std::size_t j = 1; j < n; ++j) {
    for (std::size_t i = 1; i < n; ++i) fine_interior.push_back(j * (n + 1) + i);
  }
  std::vector<std::size_t> coarse_interior;
  for (std::size_t j = 1; j < nc; ++j) {
    for (std::size_t i = 1; i < nc; ++i) coarse_interior.push_back(j * (nc + 1) + i);
  }

  CoarseSpace space;
  space.coarse_cells = nc;
  const CsrMatrix prolongation = extract(full, fine_interior, coarse_interior);
  space.restriction = prolongation.transpose();
  space.a0 = multiply(space.restriction, multiply(problem.a, prolongation));

  const std::size_t n0 = space.size();
  space.links.reserve(maps.size());
  std::vector<std::size_t> all_coarse(n0);
  std::iota(all_coarse.begin(), all_coarse.end(), std::size_t{0});
  for (const auto& map : maps) {
    const CsrMatrix block = extract(space.restriction, all_coarse, map.overlap);
    CoarseLink link;
    for (std::size_t c = 0; c < n0; ++c) {
      if (!block.row_cols(c).empty()) link.coarse_rows.push_back(c);
    }
    std::vector<std::size_t> local_cols(map.size());
    std::iota(local_cols.begin(), local_cols.end(), std::size_t{0});
    link.to_coarse = extract(block, link.coarse_rows, local_cols);
    link.from_coarse = link.to_coarse.transpose();
    space.links.push_back(std::move(link));
  }
  return space;
}

void write_partition_json(std::ostream& out, std::size_t n, const std::vector<SubdomainMap>& maps) {
  nlohmann::json doc;
  doc["n"] = n;
  doc["num_subdomains"] = maps.size();
  auto& subs = doc["subdomains"] = nlohmann::json::array();
  for (const auto& map : maps) {
    subs.push_back({{"id", map.id}, {"base", map.base}, {"overlap", map.overlap}});
  }
  out << doc.dump(2) << '\n';
}

}  // namespace asyncdd::decomp
