#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "../support.hpp"
#include "asyncdd/metrics.hpp"
#include "oracle.hpp"

using namespace asyncdd;
using testing::fixed_iterations;
using testing::rectangular_instance;
using testing::setup_for;

namespace {

double max_diff(const Vector& a, const oracle::VectorXd& b) {
  REQUIRE(a.size() == static_cast<std::size_t>(b.size()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b(static_cast<Eigen::Index>(i))));
  }
  return m;
}

bool bitwise_equal(const std::vector<Vector>& a, const std::vector<Vector>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t p = 0; p < a.size(); ++p) {
    if (a[p].size() != b[p].size()) return false;
    for (std::size_t i = 0; i < a[p].size(); ++i) {
      if (std::bit_cast<std::uint64_t>(a[p][i]) != std::bit_cast<std::uint64_t>(b[p][i])) {
        return false;
      }
    }
  }
  return true;
}

solvers::SolveResult round_robin(const solvers::SchwarzSetup& setup, solvers::SolverOptions o) {
  o.schedule = solvers::Schedule::round_robin;
  return solvers::solve_async(setup, o);
}

}  // namespace

TEST_CASE("local residual with zero iterate is the masked load") {
  const auto in = rectangular_instance(8, 4, 2);
  const auto setup = setup_for(in, solvers::Method::ras);
  for (const auto& sub : setup.subs) {
    Vector w(sub.f.size(), 0.0), scratch(sub.f.size()), t(sub.f.size());
    solvers::local_residual(sub, w, scratch, t);
    CHECK(t == sub.masked_f);
  }
}

TEST_CASE("local residual for one subdomain is f - A w") {
  const auto in = rectangular_instance(8, 1, 1);
  const auto setup = setup_for(in, solvers::Method::ras);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector w(setup.global_size());
  for (auto& x : w) x = dist(rng);
  Vector scratch(w.size()), t(w.size());
  solvers::local_residual(setup.subs[0], w, scratch, t);
  const Vector aw = spmv(in.problem.a, w);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(t[i] == doctest::Approx(in.problem.f[i] - aw[i]));
}

TEST_CASE("local residual matches the dense formula on n=8, P=4") {
  const auto in = rectangular_instance(8, 4, 2);
  const auto setup = setup_for(in, solvers::Method::ras);
  const auto ad = oracle::dense(in.problem.a);
  const auto fd = oracle::to_eigen(in.problem.f);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  oracle::VectorXd wg(static_cast<Eigen::Index>(setup.global_size()));
  for (Eigen::Index i = 0; i < wg.size(); ++i) wg(i) = dist(rng);
  for (std::size_t p = 0; p < setup.parts(); ++p) {
    const auto& map = in.maps[p];
    const auto r = oracle::restriction(map.overlap, setup.global_size());
    const auto d = oracle::ownership(map.base, map.overlap);
    const oracle::VectorXd expected = d * r * fd - (r * ad * r.transpose()) * d * r * wg;
    const oracle::VectorXd wp_dense = r * wg;
    Vector wp(wp_dense.data(), wp_dense.data() + wp_dense.size());
    Vector scratch(wp.size()), t(wp.size());
    solvers::local_residual(setup.subs[p], wp, scratch, t);
    CHECK(max_diff(t, expected) <= 1e-13);
  }
}

TEST_CASE("one subdomain converges after a single direct solve") {
  const auto in = rectangular_instance(16, 1, 1);
  for (auto method : {solvers::Method::ras, solvers::Method::js}) {
    const auto setup = setup_for(in, method);
    solvers::SolverOptions o;
    o.tol = 1e-10;
    const auto res = solvers::solve_sync(setup, o);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
  }
}

TEST_CASE("synchronous RAS follows Richardson with the RAS preconditioner") {
  const auto in = rectangular_instance(8, 4, 2);
  const auto setup = setup_for(in, solvers::Method::ras);
  const auto m = oracle::ras_preconditioner(in.problem.a, in.maps);
  const auto expected = oracle::richardson(oracle::dense(in.problem.a),
                                           oracle::to_eigen(in.problem.f), m, 10);
  for (std::size_t k = 1; k <= 10; ++k) {
    const auto res = solvers::solve_sync(setup, fixed_iterations(k));
    CHECK(res.iterations == k);
    CHECK(max_diff(res.u, expected[k - 1]) <= 1e-12);
  }
}

TEST_CASE("synchronous RAS converges on n=64, P=4, depth 2") {
  const auto in = rectangular_instance(64, 4, 2);
  const auto setup = setup_for(in, solvers::Method::ras);
  solvers::SolverOptions o;
  o.tol = 1e-8;
  const auto res = solvers::solve_sync(setup, o);
  CHECK(res.converged);
  CHECK(res.iterations > 1);
  CHECK(res.iterations < 1000);
  CHECK(res.final_residual_norm <= 1e-8);
  CHECK(res.history.front().residual_norm > res.history.back().residual_norm);
  MESSAGE("RAS n=64 P=4 depth 2 iterations: " << res.iterations);
}

TEST_CASE("post-processed solution reproduces the solver's residual norm") {
  for (auto method : {solvers::Method::ras, solvers::Method::js, solvers::Method::ras2}) {
    const auto in = rectangular_instance(32, 4, 2);
    const auto setup = setup_for(in, method, 8);
    solvers::SolverOptions o;
    o.tol = 1e-9;
    const auto res = solvers::solve_sync(setup, o);
    REQUIRE(res.converged);
    CHECK(std::abs(res.true_residual_norm - res.final_residual_norm) <= 1e-10);
    CHECK(metrics::async_degree(res.update_counts) == 1.0);
    for (auto c : res.update_counts) CHECK(c == res.iterations);
  }
}

TEST_CASE("synchronous runs are bitwise reproducible") {
  const auto in = rectangular_instance(16, 4, 2);
  for (auto method : {solvers::Method::ras, solvers::Method::js, solvers::Method::ras2}) {
    const auto setup = setup_for(in, method, 4);
    const auto a = solvers::solve_sync(setup, fixed_iterations(12));
    const auto b = solvers::solve_sync(setup, fixed_iterations(12));
    CHECK(bitwise_equal(a.w, b.w));
  }
}

TEST_CASE("round-robin asynchronous runs reproduce the synchronous iterates bitwise") {
  const auto in = rectangular_instance(8, 4, 2);
  for (auto method : {solvers::Method::ras, solvers::Method::js, solvers::Method::ras2}) {
    CAPTURE(solvers::to_string(method));
    const auto setup = setup_for(in, method, 2);
    for (std::size_t k : {1u, 5u, 17u}) {
      const auto s = solvers::solve_sync(setup, fixed_iterations(k));
      const auto a = round_robin(setup, fixed_iterations(k));
      CHECK(bitwise_equal(s.w, a.w));
      CHECK(a.iterations == s.iterations);
    }
    solvers::SolverOptions o;
    o.tol = 1e-9;
    const auto s = solvers::solve_sync(setup, o);
    const auto a = round_robin(setup, o);
    CHECK(s.converged);
    CHECK(a.converged);
    CHECK(a.iterations == s.iterations);
    CHECK(bitwise_equal(s.w, a.w));
  }
}

TEST_CASE("lock-per-access mode gives the same round-robin trajectory") {
  const auto in = rectangular_instance(8, 4, 2);
  const auto setup = setup_for(in, solvers::Method::ras);
  auto o = fixed_iterations(6);
  o.schedule = solvers::Schedule::round_robin;
  o.lock_overhead = std::chrono::nanoseconds(100);
  const auto a = solvers::solve_async(setup, o, comm::AccessMode::lock_per_access);
  const auto s = solvers::solve_sync(setup, fixed_iterations(6));
  CHECK(bitwise_equal(s.w, a.w));
}

TEST_CASE("free-running asynchronous RAS reaches the tolerance") {
  const auto in = rectangular_instance(256, 8, 2);
  const auto setup = setup_for(in, solvers::Method::ras);
  solvers::SolverOptions o;
  o.tol = 1e-7;
  o.max_time = std::chrono::seconds(120);
  const auto res = solvers::solve_async(setup, o);
  CHECK(res.converged);
  CHECK(res.true_residual_norm <= 10 * o.tol);
  MESSAGE("async RAS n=256 P=8: true residual " << res.true_residual_norm << ", wall "
                                                << res.wall_time << " s");
}

TEST_CASE("free-running asynchronous Jacobi-Schwarz reaches the tolerance") {
  const auto in = rectangular_instance(64, 4, 2);
  const auto setup = setup_for(in, solvers::Method::js);
  solvers::SolverOptions o;
  o.tol = 1e-8;
  o.max_time = std::chrono::seconds(60);
  const auto res = solvers::solve_async(setup, o);
  CHECK(res.converged);
  CHECK(res.true_residual_norm <= 10 * o.tol);
  CHECK(*std::min_element(res.update_counts.begin(), res.update_counts.end()) > 1);
}

TEST_CASE("imbalanced asynchronous runs do not progress in lockstep") {
  const auto in = rectangular_instance(64, 4, 2, 1.5);
  const auto setup = setup_for(in, solvers::Method::ras);
  solvers::SolverOptions o;
  o.tol = 1e-8;
  const auto res = solvers::solve_async(setup, o);
  CHECK(res.converged);
  CHECK(metrics::async_degree(res.update_counts) < 1.0);
}

TEST_CASE("stamped audit sees only iterates that were already produced") {
  const auto in = rectangular_instance(32, 4, 2);
  const auto setup = setup_for(in, solvers::Method::ras);
  solvers::SolverOptions o;
  o.tol = 1e-8;
  o.audit = true;
  o.jitter = std::chrono::microseconds(50);
  const auto res = solvers::solve_async(setup, o);
  CHECK(res.converged);
  CHECK(res.audit.reads > 0);
  CHECK(res.audit.violations == 0);
}

TEST_CASE("Jacobi-Schwarz with one subdomain is RAS") {
  const auto in = rectangular_instance(16, 1, 1);
  const auto js = solvers::solve_sync(setup_for(in, solvers::Method::js), fixed_iterations(1));
  const auto ras = solvers::solve_sync(setup_for(in, solvers::Method::ras), fixed_iterations(1));
  CHECK(bitwise_equal(js.w, ras.w));
}

TEST_CASE("synchronous Jacobi-Schwarz follows its local-form definition") {
  const auto in = rectangular_instance(8, 4, 2);
  const auto setup = setup_for(in, solvers::Method::js);
  const auto expected = oracle::js_iterates(in.problem.a, in.problem.f, in.maps, 10);
  for (std::size_t k = 1; k <= 10; ++k) {
    const auto res = solvers::solve_sync(setup, fixed_iterations(k));
    for (std::size_t p = 0; p < setup.parts(); ++p) {
      CHECK(max_diff(res.w[p], expected[k - 1][p]) <= 1e-12);
    }
  }
}

TEST_CASE("Jacobi-Schwarz and RAS differ once subdomains overlap") {
  const auto in = rectangular_instance(8, 4, 2);
  const auto js_setup = setup_for(in, solvers::Method::js);
  const auto ras_setup = setup_for(in, solvers::Method::ras);
  // From w = 0 both accumulate R_p f, so the first update coincides.
  const auto js1 = solvers::solve_sync(js_setup, fixed_iterations(1));
  const auto ras1 = solvers::solve_sync(ras_setup, fixed_iterations(1));
  for (std::size_t p = 0; p < js1.w.size(); ++p) {
    for (std::size_t i = 0; i < js1.w[p].size(); ++i) {
      CHECK(js1.w[p][i] == doctest::Approx(ras1.w[p][i]).epsilon(1e-12));
    }
  }
  const auto js2 = solvers::solve_sync(js_setup, fixed_iterations(2));
  const auto ras2 = solvers::solve_sync(ras_setup, fixed_iterations(2));
  double diff = 0.0;
  for (std::size_t p = 0; p < js2.w.size(); ++p) {
    for (std::size_t i = 0; i < js2.w[p].size(); ++i) {
      diff = std::max(diff, std::abs(js2.w[p][i] - ras2.w[p][i]));
    }
  }
  CHECK(diff > 1e-6);
}

TEST_CASE("two-level iteration follows Richardson with the additive preconditioner") {
  const auto in = rectangular_instance(16, 4, 2);
  const auto setup = setup_for(in, solvers::Method::ras2, 4);
  const auto ad = oracle::dense(in.problem.a);
  const oracle::MatrixXd m = 0.5 * oracle::ras_preconditioner(in.problem.a, in.maps) +
                             0.5 * oracle::coarse_correction(in.problem.a, setup.coarse->restriction);
  const auto expected = oracle::richardson(ad, oracle::to_eigen(in.problem.f), m, 10);
  for (std::size_t k = 1; k <= 10; ++k) {
    const auto res = solvers::solve_sync(setup, fixed_iterations(k));
    CHECK(max_diff(res.u, expected[k - 1]) <= 1e-12);
  }
}

TEST_CASE("degenerate coarsening turns the coarse step into an exact solve") {
  // One subdomain: both halves are exact, so one step already solves.
  {
    const auto in = rectangular_instance(16, 1, 1);
    const auto setup = setup_for(in, solvers::Method::ras2, 16);
    solvers::SolverOptions o;
    o.tol = 1e-8;
    const auto res = solvers::solve_sync(setup, o);
    CHECK(res.converged);
    CHECK(res.iterations <= 3);
  }
  // Several subdomains: the error is multiplied by (I - M_RAS A)/2 each step,
  // so the contraction is at most one half.
  {
    const auto in = rectangular_instance(16, 4, 2);
    const auto setup = setup_for(in, solvers::Method::ras2, 16);
    solvers::SolverOptions o;
    o.tol = 1e-8;
    const auto res = solvers::solve_sync(setup, o);
    CHECK(res.converged);
    const double rho = metrics::rho_tilde(res.history.front().residual_norm,
                                          res.final_residual_norm, res.iterations);
    CHECK(rho <= 0.5);
    MESSAGE("degenerate coarse, P=4: " << res.iterations << " iterations, rho " << rho);
  }
}

TEST_CASE("round-robin two-level run applies every coarse correction exactly once") {
  const auto in = rectangular_instance(16, 4, 2);
  const auto setup = setup_for(in, solvers::Method::ras2, 4);
  auto o = fixed_iterations(9);
  const auto res = round_robin(setup, o);
  CHECK(res.coarse.performed == 10);
  CHECK(res.coarse.sent == 10 * setup.parts());
  CHECK(res.coarse.applied == 9 * setup.parts());
  CHECK(res.coarse.sent == res.coarse.applied + res.coarse.pending);
}

TEST_CASE("free-running two-level RAS converges with uneven progress") {
  const auto in = rectangular_instance(128, 8, 2);
  const auto setup = setup_for(in, solvers::Method::ras2);
  solvers::SolverOptions o;
  o.tol = 1e-8;
  o.max_time = std::chrono::seconds(120);
  const auto res = solvers::solve_async(setup, o);
  CHECK(res.converged);
  CHECK(res.true_residual_norm <= 10 * o.tol);
  const auto [lo, hi] = std::minmax_element(res.update_counts.begin(), res.update_counts.end());
  CHECK(*hi - *lo >= 1);
  CHECK(res.coarse.performed >= 1);
  CHECK(res.coarse.performed <= res.coarse.attempted);
  CHECK(res.coarse.sent == res.coarse.applied + res.coarse.pending);
  MESSAGE("async two-level n=128 P=8 updates " << *lo << ".." << *hi << ", coarse solves "
                                               << res.coarse.performed << "/"
                                               << res.coarse.attempted);
}

TEST_CASE("sleep adaptation moves the interval toward the target ratio") {
  const std::chrono::nanoseconds base(1000000);
  CHECK(solvers::adapt_sleep(base, 50, 50) < base);
  CHECK(solvers::adapt_sleep(base, 50, 0) > base);
  CHECK(solvers::adapt_sleep(std::chrono::nanoseconds(10000), 50, 50) ==
        std::chrono::nanoseconds(10000));
  CHECK(solvers::adapt_sleep(std::chrono::nanoseconds(100000000), 50, 0) ==
        std::chrono::nanoseconds(100000000));
  CHECK(solvers::adapt_sleep(base, 50, 50).count() == doctest::Approx(1000000 / 1.5).epsilon(1e-6));

  solvers::SleepController c;
  const auto start = c.interval();
  for (int i = 0; i < 49; ++i) CHECK_FALSE(c.record(false));
  CHECK(c.record(false));
  CHECK(c.interval() > start);
  for (int i = 0; i < 50; ++i) c.record(true);
  CHECK(c.attempted() == 100);
  CHECK(c.performed() == 50);
}

TEST_CASE("post-processing") {
  SUBCASE("one subdomain returns the iterate") {
    const auto in = rectangular_instance(8, 1, 1);
    const auto setup = setup_for(in, solvers::Method::ras);
    Vector w(setup.global_size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(i) * 0.25;
    CHECK(solvers::post_process(setup, {w}) == w);
  }
  SUBCASE("owned entries come from their owner and match the dense sum") {
    const auto in = rectangular_instance(8, 4, 2);
    const auto setup = setup_for(in, solvers::Method::ras);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<Vector> w;
    oracle::VectorXd expected = oracle::VectorXd::Zero(static_cast<Eigen::Index>(setup.global_size()));
    for (const auto& map : in.maps) {
      Vector wp(map.size());
      for (auto& x : wp) x = dist(rng);
      expected += oracle::restriction(map.overlap, setup.global_size()).transpose() *
                  oracle::ownership(map.base, map.overlap) * oracle::to_eigen(wp);
      w.push_back(std::move(wp));
    }
    const auto u = solvers::post_process(setup, w);
    CHECK(max_diff(u, expected) == 0.0);
    for (std::size_t p = 0; p < in.maps.size(); ++p) {
      for (std::size_t i = 0; i < in.maps[p].size(); ++i) {
        if (in.maps[p].owned[i]) CHECK(u[in.maps[p].overlap[i]] == w[p][i]);
      }
    }
    const auto local = solvers::local_solutions(setup, u);
    for (std::size_t p = 0; p < in.maps.size(); ++p) {
      for (std::size_t i = 0; i < in.maps[p].size(); ++i) {
        CHECK(local[p][i] == u[in.maps[p].overlap[i]]);
      }
    }
  }
}

TEST_CASE("solver options are validated") {
  const auto in = rectangular_instance(8, 2, 1);
  const auto setup = setup_for(in, solvers::Method::ras);
  solvers::SolverOptions o;
  o.tol = 0.0;
  CHECK_THROWS_AS(solvers::solve_sync(setup, o), ContractError);
  CHECK_THROWS_AS(solvers::make_setup(in.problem, in.maps, solvers::Method::ras2), ContractError);
  CHECK(solvers::parse_method("js") == solvers::Method::js);
  CHECK(solvers::parse_mode("async-lock-emulated") == solvers::Mode::async_lock);
  CHECK_THROWS_AS(solvers::parse_mode("bogus"), ContractError);
  CHECK(solvers::effective_max_iter(solvers::Method::ras, {}) == 100000);
  CHECK(solvers::effective_max_iter(solvers::Method::ras2, {}) == 10000);
}
