#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "../support.hpp"
#include "asyncdd/linalg.hpp"
#include "asyncdd/sparse_lu.hpp"
#include "oracle.hpp"

using namespace asyncdd;

namespace {

CsrMatrix tridiag(std::size_t n) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    t.push_back({i, i, 2.0});
    if (i > 0) t.push_back({i, i - 1, -1.0});
    if (i + 1 < n) t.push_back({i, i + 1, -1.0});
  }
  return CsrMatrix::from_triplets(n, n, t);
}

Vector random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

double relative_residual(const CsrMatrix& a, const Vector& x, const Vector& b) {
  const Vector ax = spmv(a, x);
  Vector r(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) r[i] = ax[i] - b[i];
  return norm2(r) / norm2(b);
}

}  // namespace

TEST_CASE("spmv on small matrices") {
  const Vector x{1, 2, 3};
  CHECK(spmv(CsrMatrix::identity(3), x) == x);
  CHECK(spmv(tridiag(3), Vector{1, 1, 1}) == Vector{1, 0, 1});
  CHECK_THROWS_AS(spmv(tridiag(3), Vector{1, 1}), ContractError);
}

TEST_CASE("five-point stencil applied to sin(pi x) sin(pi y) gives the scaled load") {
  const auto problem = fem::poisson_problem(32);
  const Vector u = fem::exact_solution(problem);
  const Vector au = spmv(problem.a, u);
  const oracle::VectorXd dense_au = oracle::dense(problem.a) * oracle::to_eigen(u);
  const double h = problem.h();
  double worst = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    CHECK(au[i] == doctest::Approx(dense_au(static_cast<Eigen::Index>(i))).epsilon(1e-14));
    const double target = h * h * fem::source_term(problem.dof_coords[i]);
    worst = std::max(worst, std::abs(au[i] - target));
  }
  // Truncation error of the stencil: h^4/12 (u_xxxx + u_yyyy) <= pi^4 h^4 / 6.
  CHECK(worst <= std::pow(std::numbers::pi, 4) / 6.0 * std::pow(h, 4) * 1.01);
}

TEST_CASE("CSR construction enforces its invariants") {
  CHECK_THROWS_AS(CsrMatrix(2, 2, {0, 1, 1}, {0, 0}, {1, 1}), ContractError);
  CHECK_THROWS_AS(CsrMatrix(1, 2, {0, 2}, {1, 0}, {1, 1}), ContractError);
  CHECK_THROWS_AS(CsrMatrix(1, 2, {0, 2}, {1, 1}, {1, 1}), ContractError);
  CHECK_THROWS_AS(CsrMatrix(1, 2, {0, 1}, {2}, {1}), ContractError);
  const auto m = CsrMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 2, 0.5}, {1, 0, 3.0}});
  CHECK(m.nnz() == 3);
  CHECK(m.coeff(1, 2) == 1.5);
  CHECK(m.coeff(0, 0) == 0.0);
  CHECK(m.coeff(1, 0) == 3.0);
}

TEST_CASE("transpose is an involution on framework matrices") {
  for (std::size_t n : {2u, 8u, 17u}) {
    const auto a = fem::poisson_problem(n).a;
    CHECK(a.transpose().transpose() == a);
  }
  const auto in = testing::rectangular_instance(16, 4, 2);
  const auto coarse = decomp::build_coarse_with_cells(in.problem, in.maps, 4);
  CHECK(coarse.restriction.transpose().transpose() == coarse.restriction);
  for (const auto& map : in.maps) {
    const auto r = decomp::restriction(map, in.problem.size());
    CHECK(r.transpose().transpose() == r);
  }
}

TEST_CASE("sparse product and extraction agree with dense algebra") {
  const auto in = testing::rectangular_instance(8, 4, 1);
  const auto coarse = decomp::build_coarse_with_cells(in.problem, in.maps, 4);
  const auto& r0 = coarse.restriction;
  const auto ad = oracle::dense(in.problem.a);
  const oracle::MatrixXd expected = oracle::dense(r0) * ad * oracle::dense(r0).transpose();
  const oracle::MatrixXd got = oracle::dense(multiply(r0, multiply(in.problem.a, r0.transpose())));
  CHECK((got - expected).cwiseAbs().maxCoeff() <= 1e-14);

  const auto& map = in.maps[2];
  const auto sub = oracle::dense(extract(in.problem.a, map.overlap, map.overlap));
  const auto r = oracle::restriction(map.overlap, in.problem.size());
  CHECK((sub - r * ad * r.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dot and norm") {
  CHECK(dot(Vector{1, 2}, Vector{3, 4}) == 11.0);
  CHECK(norm2(Vector(5, 0.0)) == 0.0);
  CHECK_THROWS_AS(dot(Vector{1}, Vector{1, 2}), ContractError);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = random_vector(100 + seed, seed);
    const double n = norm2(x);
    CHECK(dot(x, x) == doctest::Approx(n * n).epsilon(1e-15));
  }
}

TEST_CASE("finite checks") {
  CHECK_NOTHROW(require_finite(Vector{1.0, -2.0}, "x"));
  CHECK_THROWS_AS(require_finite(Vector{1.0, std::nan("")}, "x"), ContractError);
  CHECK_THROWS_AS(require_finite(Vector{HUGE_VAL}, "x"), ContractError);
}

TEST_CASE("LU on tiny systems") {
  const auto one = CsrMatrix::from_triplets(1, 1, {{0, 0, 2.0}});
  CHECK(SparseLu::factor(one).solve(Vector{4.0}) == Vector{2.0});

  const auto t4 = tridiag(4);
  const Vector b{1, 1, 1, 1};
  const Vector x = SparseLu::factor(t4).solve(b);
  const auto expected = oracle::gaussian_solve(oracle::dense(t4), oracle::to_eigen(b));
  const Vector hand{2, 3, 3, 2};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(x[i] == doctest::Approx(expected(static_cast<Eigen::Index>(i))).epsilon(1e-14));
    CHECK(x[i] == doctest::Approx(hand[i]).epsilon(1e-14));
  }
}

TEST_CASE("LU residual on the FEM matrix") {
  const auto a = fem::poisson_problem(8).a;
  for (auto ordering : {Ordering::natural, Ordering::reverse_cuthill_mckee}) {
    const auto lu = SparseLu::factor(a, ordering);
    CHECK(lu.all_pivots_positive());
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto b = random_vector(a.nrows(), seed);
      CHECK(relative_residual(a, lu.solve(b), b) <= 1e-12);
    }
  }
}

TEST_CASE("LU recovers x from A x on framework matrices up to n=128") {
  std::vector<CsrMatrix> mats;
  for (std::size_t n : {16u, 64u, 128u}) mats.push_back(fem::poisson_problem(n).a);
  const auto in = testing::rectangular_instance(128, 8, 2);
  for (const auto& map : in.maps) mats.push_back(decomp::local_matrix(in.problem.a, map));
  mats.push_back(decomp::build_coarse(in.problem, in.maps, 16.0).a0);
  for (const auto& a : mats) {
    const auto lu = SparseLu::factor(a);
    const auto x = random_vector(a.nrows(), a.nrows());
    const auto y = lu.solve(spmv(a, x));
    Vector d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = y[i] - x[i];
    CHECK(norm2(d) / norm2(x) <= 1e-10);
  }
}

TEST_CASE("LU rejects singular and malformed input") {
  const auto singular = CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}});
  CHECK_THROWS_AS(SparseLu::factor(singular, Ordering::natural), SingularMatrixError);
  const auto empty_row = CsrMatrix::from_triplets(2, 2, {{0, 0, 1.0}});
  CHECK_THROWS_AS(SparseLu::factor(empty_row), SingularMatrixError);
  CHECK_THROWS_AS(SparseLu::factor(CsrMatrix::from_triplets(2, 3, {})), ContractError);
  const auto lu = SparseLu::factor(tridiag(3));
  CHECK_THROWS_AS(lu.solve(Vector{1, 2}), ContractError);
}

TEST_CASE("solves with aliased input and concurrent scratch buffers") {
  const auto a = fem::poisson_problem(16).a;
  const auto lu = SparseLu::factor(a);
  auto b = random_vector(a.nrows(), 9);
  const auto expected = lu.solve(b);
  Vector scratch(a.nrows());
  lu.solve(b, b, scratch);
  CHECK(b == expected);
}

TEST_CASE("reverse Cuthill-McKee is a bandwidth-reducing permutation") {
  const auto a = fem::poisson_problem(16).a;
  auto perm = reverse_cuthill_mckee(a);
  std::vector<std::size_t> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(a.nrows());
  std::iota(iota.begin(), iota.end(), std::size_t{0});
  CHECK(sorted == iota);
  const auto natural = SparseLu::factor(a, Ordering::natural);
  const auto rcm = SparseLu::factor(a, Ordering::reverse_cuthill_mckee);
  CHECK(rcm.nnz_l() <= natural.nnz_l());
}

TEST_CASE("MatrixMarket round trip") {
  const auto a = fem::poisson_problem(6).a;
  std::stringstream s;
  write_matrix_market(s, a);
  CHECK(s.str().rfind("%%MatrixMarket matrix coordinate real general", 0) == 0);
  CHECK(read_matrix_market(s) == a);
  std::istringstream sym(
      "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 4\n2 1 -1\n");
  const auto m = read_matrix_market(sym);
  CHECK(m.coeff(0, 1) == -1.0);
  CHECK(m.coeff(1, 0) == -1.0);
  std::istringstream bad("%%MatrixMarket matrix array real general\n1 1\n1\n");
  CHECK_THROWS_AS(read_matrix_market(bad), ContractError);
}
