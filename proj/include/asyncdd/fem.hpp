#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "asyncdd/linalg.hpp"

namespace asyncdd::fem {

using Point = std::array<double, 2>;

/// Uniform triangulation of the unit square: n cells per side, each cell cut
/// along its lower-left to upper-right diagonal. Vertex (i, j) sits at
/// (i*h, j*h) with index j*(n+1)+i.
struct Mesh {
  std::size_t n = 0;
  double h = 0.0;
  std::vector<Point> vertices;
  std::vector<std::array<std::size_t, 3>> triangles;
  std::vector<char> boundary;

  std::size_t vertex(std::size_t i, std::size_t j) const { return j * (n + 1) + i; }
};

/// -Laplace(u) = f on the unit square, homogeneous Dirichlet data eliminated.
/// Unknowns are interior vertices numbered lexicographically by (y, x).
struct DiscreteProblem {
  std::size_t n = 0;  // cells per side of the underlying mesh
  CsrMatrix a;
  Vector f;
  std::vector<Point> dof_coords;

  std::size_t size() const noexcept { return f.size(); }
  double h() const noexcept { return 1.0 / static_cast<double>(n); }
  /// Grid position (i, j), 1 <= i, j <= n-1, of an unknown.
  std::array<std::size_t, 2> grid(std::size_t dof) const {
    return {dof % (n - 1) + 1, dof / (n - 1) + 1};
  }
  std::size_t dof(std::size_t i, std::size_t j) const { return (j - 1) * (n - 1) + (i - 1); }
};

Mesh build_mesh(std::size_t n);

/// P1 stiffness matrix and vertex-rule load for f = 2 pi^2 sin(pi x) sin(pi y).
DiscreteProblem assemble(const Mesh& mesh);

/// Convenience: build_mesh + assemble.
DiscreteProblem poisson_problem(std::size_t n);

double source_term(const Point& p);
double exact_value(const Point& p);

/// Nodal interpolant of sin(pi x) sin(pi y) on the unknowns.
Vector exact_solution(const DiscreteProblem& problem);

struct NodalError {
  double max_err = 0.0;
  double l2_err = 0.0;  // h * ||e||_2
};

NodalError nodal_error(std::span<const double> uh, const DiscreteProblem& problem);

/// FNV-1a digest of the matrix and load vector bytes.
std::uint64_t checksum(const DiscreteProblem& problem);

}  // namespace asyncdd::fem
