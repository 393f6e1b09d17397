#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "asyncdd/decomp.hpp"
#include "asyncdd/fem.hpp"
#include "asyncdd/solvers.hpp"

namespace asyncdd::testing {

struct Instance {
  fem::DiscreteProblem problem;
  std::vector<decomp::SubdomainMap> maps;
};

inline Instance rectangular_instance(std::size_t n, std::size_t parts, std::size_t depth,
                                     double imbalance = 1.0) {
  Instance in{fem::poisson_problem(n), {}};
  const auto [px, py] = decomp::near_square_factors(parts);
  in.maps = decomp::extend_overlap(in.problem.a,
                                   decomp::partition_rectangular(n, px, py, imbalance), depth);
  return in;
}

inline solvers::SchwarzSetup setup_for(const Instance& in, solvers::Method method,
                                       std::optional<std::size_t> coarse_cells = std::nullopt) {
  std::optional<decomp::CoarseSpace> coarse;
  if (method == solvers::Method::ras2) {
    coarse = coarse_cells ? decomp::build_coarse_with_cells(in.problem, in.maps, *coarse_cells)
                          : decomp::build_coarse(in.problem, in.maps, 16.0);
  }
  return solvers::make_setup(in.problem, in.maps, method, std::move(coarse));
}

inline solvers::SolverOptions fixed_iterations(std::size_t k) {
  solvers::SolverOptions o;
  o.tol = 1e-300;
  o.max_iter = k;
  o.collective_timeout = std::chrono::milliseconds(20000);
  return o;
}

}  // namespace asyncdd::testing
