#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>

#include "asyncdd/fem.hpp"

namespace asyncdd::fem {

Mesh build_mesh(std::size_t n) {
  if (n < 2) throw ContractError("build_mesh: need at least 2 cells per side");
  Mesh mesh;
  mesh.n = n;
  mesh.h = 1.0 / static_cast<double>(n);
  mesh.vertices.reserve((n + 1) * (n + 1));
  mesh.boundary.reserve((n + 1) * (n + 1));
  for (std::size_t j = 0; j <= n; ++j) {
    for (std::size_t i = 0; i <= n; ++i) {
      mesh.vertices.push_back({static_cast<double>(i) * mesh.h, static_cast<double>(j) * mesh.h});
      mesh.boundary.push_back(i == 0 || j == 0 || i == n || j == n);
    }
  }
  mesh.triangles.reserve(2 * n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto v00 = mesh.vertex(i, j);
      const auto v10 = mesh.vertex(i + 1, j);
      const auto v11 = mesh.vertex(i + 1, j + 1);
      const auto v01 = mesh.vertex(i, j + 1);
      mesh.triangles.push_back({v00, v10, v11});
      mesh.triangles.push_back({v00, v11, v01});
    }
  }
  return mesh;
}

double source_term(const Point& p) {
  using std::numbers::pi;
  return 2.0 * pi * pi * std::sin(pi * p[0]) * std::sin(pi * p[1]);
}

double exact_value(const Point& p) {
  using std::numbers::pi;
  return std::sin(pi * p[0]) * std::sin(pi * p[1]);
}

DiscreteProblem assemble(const Mesh& mesh) {
  const std::size_t n = mesh.n;
  if (n < 2 || mesh.vertices.size() != (n + 1) * (n + 1)) {
    throw ContractError("assemble: invalid mesh");
  }
  DiscreteProblem problem;
  problem.n = n;
  const std::size_t unknowns = (n - 1) * (n - 1);
  constexpr auto kBoundary = static_cast<std::size_t>(-1);
  std::vector<std::size_t> dof_of(mesh.vertices.size(), kBoundary);
  problem.dof_coords.reserve(unknowns);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (!mesh.boundary[v]) {
      dof_of[v] = problem.dof_coords.size();
      problem.dof_coords.push_back(mesh.vertices[v]);
    }
  }
  problem.f.assign(unknowns, 0.0);

  // The 2D P1 stiffness matrix is scale invariant, so it is computed on the
  // integer lattice to keep stencil values exact.
  const double area = 0.5 * mesh.h * mesh.h;
  std::vector<Triplet> entries;
  entries.reserve(mesh.triangles.size() * 9);
  for (const auto& tri : mesh.triangles) {
    std::array<std::array<double, 2>, 3> lattice{};
    for (int a = 0; a < 3; ++a) {
      const auto v = tri[a];
      lattice[a] = {static_cast<double>(v % (n + 1)), static_cast<double>(v / (n + 1))};
    }
    // Edge opposite vertex a, rotated: grad(phi_a) = rot(e_a) / (2|T|).
    std::array<std::array<double, 2>, 3> edge{};
    for (int a = 0; a < 3; ++a) {
      const auto& p = lattice[(a + 1) % 3];
      const auto& q = lattice[(a + 2) % 3];
      edge[a] = {q[0] - p[0], q[1] - p[1]};
    }
    const double twice_area =
        edge[2][0] * (-edge[1][1]) - edge[2][1] * (-edge[1][0]);  // (p1-p0) x (p2-p0)
    for (int a = 0; a < 3; ++a) {
      const auto row = dof_of[tri[a]];
      if (row == kBoundary) continue;
      problem.f[row] += source_term(mesh.vertices[tri[a]]) * area / 3.0;
      for (int b = 0; b < 3; ++b) {
        const auto col = dof_of[tri[b]];
        if (col == kBoundary) continue;
        const double k = (edge[a][0] * edge[b][0] + edge[a][1] * edge[b][1]) / (2.0 * twice_area);
        // Couplings across the cut diagonal vanish exactly (right angle); keep
        // them out of the pattern so the graph is the five-point stencil.
        if (k != 0.0) entries.push_back({row, col, k});
      }
    }
  }
  problem.a = CsrMatrix::from_triplets(unknowns, unknowns, std::move(entries));
  return problem;
}

DiscreteProblem poisson_problem(std::size_t n) { return assemble(build_mesh(n)); }

Vector exact_solution(const DiscreteProblem& problem) {
  Vector u(problem.dof_coords.size());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = exact_value(problem.dof_coords[k]);
  return u;
}

NodalError nodal_error(std::span<const double> uh, const DiscreteProblem& problem) {
  if (uh.size() != problem.size()) throw ContractError("nodal_error: dimension mismatch");
  NodalError err;
  double sq = 0.0;
  for (std::size_t k = 0; k < uh.size(); ++k) {
    const double e = std::abs(uh[k] - exact_value(problem.dof_coords[k]));
    err.max_err = std::max(err.max_err, e);
    sq += e * e;
  }
  err.l2_err = problem.h() * std::sqrt(sq);
  return err;
}

std::uint64_t checksum(const DiscreteProblem& problem) {
  std::uint64_t hash = 1469598103934665603ULL;
  auto feed = [&hash](const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < bytes; ++k) {
      hash ^= p[k];
      hash *= 1099511628211ULL;
    }
  };
  const auto& a = problem.a;
  feed(a.row_offsets().data(), a.row_offsets().size_bytes());
  feed(a.col_indices().data(), a.col_indices().size_bytes());
  feed(a.values().data(), a.values().size_bytes());
  feed(problem.f.data(), problem.f.size() * sizeof(double));
  return hash;
}

}  // namespace asyncdd::fem
