#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "../support.hpp"
#include "asyncdd/metrics.hpp"
#include "oracle.hpp"

using namespace asyncdd;
using metrics::HistoryPoint;

TEST_CASE("local residual contributions") {
  CHECK(metrics::local_residual_contrib(std::vector<double>(4, 0.0), std::vector<char>(4, 1)) == 0.0);
  const std::vector<double> r{3.0, 4.0};
  CHECK(metrics::local_residual_contrib(r, std::vector<char>{1, 1}) == 25.0);
  CHECK(metrics::local_residual_contrib(r, std::vector<char>{0, 1}) == 16.0);
  CHECK_THROWS_AS(metrics::local_residual_contrib(r, std::vector<char>{1}), ContractError);
}

TEST_CASE("contributions sum to the global residual norm") {
  const auto in = testing::rectangular_instance(8, 4, 1);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector u(in.problem.size());
  for (auto& x : u) x = dist(rng);
  const oracle::VectorXd r = oracle::to_eigen(in.problem.f) -
                             oracle::dense(in.problem.a) * oracle::to_eigen(u);
  double sum = 0.0;
  for (const auto& m : in.maps) {
    std::vector<double> rp(m.size());
    for (std::size_t l = 0; l < m.size(); ++l) rp[l] = r(static_cast<Eigen::Index>(m.overlap[l]));
    sum += metrics::local_residual_contrib(rp, m.owned);
  }
  CHECK(sum == doctest::Approx(r.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("convergence monitor") {
  metrics::ConvergenceMonitor zero(3, 1e-8);
  CHECK(std::isinf(zero.refresh()));
  CHECK_FALSE(zero.converged());
  zero.publish(0, 0.0);
  zero.publish(1, 0.0);
  CHECK_FALSE(zero.check_converged(2, 0.0));  // not yet refreshed
  CHECK(zero.refresh() == 0.0);
  CHECK(zero.check_converged(2, 0.0));

  metrics::ConvergenceMonitor m(2, 1.0);
  m.publish(0, 9.0);
  m.publish(1, 16.0);
  CHECK(m.norm_now() == 5.0);
  CHECK(m.refresh() == 5.0);
  CHECK(m.estimate() == 5.0);
  CHECK_FALSE(m.converged());
  m.publish(0, 0.25);
  m.publish(1, 0.5);
  CHECK(m.refresh() == doctest::Approx(std::sqrt(0.75)));
  CHECK(m.converged());
  // Latched even if later contributions grow.
  m.publish(1, 100.0);
  m.refresh();
  CHECK(m.converged());
  CHECK(m.refreshes() == 3);
  CHECK_THROWS_AS(m.publish(2, 1.0), ContractError);
}

TEST_CASE("monitor master loop refreshes until stopped") {
  metrics::ConvergenceMonitor m(1, 1e-3);
  std::atomic<bool> stop{false};
  std::vector<double> seen;
  std::thread master([&] {
    m.run_master(stop, std::chrono::microseconds(200), [&](double e) { seen.push_back(e); });
  });
  m.publish(0, 1.0);
  while (m.estimate() != 1.0) std::this_thread::yield();
  m.publish(0, 1e-8);
  while (!m.converged()) std::this_thread::yield();
  stop.store(true);
  master.join();
  REQUIRE(!seen.empty());
  CHECK(seen.front() == 1.0);
  CHECK(seen.back() == doctest::Approx(1e-4));
}

TEST_CASE("synchronous detection matches the first oracle crossing") {
  const auto in = testing::rectangular_instance(32, 4, 2);
  const auto setup = testing::setup_for(in, solvers::Method::ras);
  const auto ad = oracle::dense(in.problem.a);
  const auto f = oracle::to_eigen(in.problem.f);
  const auto iterates = oracle::richardson(ad, f, oracle::ras_preconditioner(in.problem.a, in.maps), 200);
  for (double tol : {1e-4, 1e-7, 1e-10}) {
    std::size_t crossing = 0;
    if (f.norm() > tol) {
      for (std::size_t k = 0; k < iterates.size(); ++k) {
        if ((f - ad * iterates[k]).norm() <= tol) {
          crossing = k + 1;
          break;
        }
      }
    }
    REQUIRE(crossing > 0);
    solvers::SolverOptions opts;
    opts.tol = tol;
    const auto res = solvers::solve(setup, solvers::Mode::sync, opts);
    CHECK(res.converged);
    CHECK(res.iterations == crossing);
  }
}

TEST_CASE("rho metrics") {
  CHECK(metrics::rho_tilde(3.0, 3.0, 7) == 1.0);
  CHECK(metrics::rho_tilde(1.0, 1e-8, 110) == doctest::Approx(0.8457).epsilon(1e-4));
  CHECK(metrics::rho_tilde(4.0, 1.0, 2) == 0.5);
  CHECK_THROWS_AS(metrics::rho_tilde(0.0, 1.0, 2), ContractError);
  CHECK_THROWS_AS(metrics::rho_tilde(1.0, 1.0, 0), ContractError);

  const double tau = 0.013;
  for (std::size_t k : {1u, 17u, 110u}) {
    const double t = tau * static_cast<double>(k);
    CHECK(metrics::rho_hat(2.0, 1e-6, t, tau) == doctest::Approx(metrics::rho_tilde(2.0, 1e-6, k)).epsilon(1e-14));
  }
  CHECK(metrics::rho_hat(2.0, 0.5, tau, tau) == 0.25);
  const double full = metrics::rho_hat(1.0, 1e-6, 2.0, 0.1);
  CHECK(metrics::rho_hat(1.0, 1e-6, 1.0, 0.1) == doctest::Approx(full * full).epsilon(1e-14));
  CHECK_THROWS_AS(metrics::rho_hat(1.0, 0.5, 0.0, tau), ContractError);
  CHECK_THROWS_AS(metrics::rho_hat(1.0, 0.5, 1.0, -1.0), ContractError);
}

TEST_CASE("asynchronous degree") {
  CHECK(metrics::async_degree(std::vector<std::uint64_t>{5, 5, 5}) == 1.0);
  CHECK(metrics::async_degree(std::vector<std::uint64_t>{11000, 16000}) == 0.6875);
  CHECK(metrics::async_degree(std::vector<std::uint64_t>{1, 2}) == 0.5);
  CHECK_THROWS_AS(metrics::async_degree(std::vector<std::uint64_t>{}), ContractError);
  CHECK_THROWS_AS(metrics::async_degree(std::vector<std::uint64_t>{0, 3}), ContractError);
}

TEST_CASE("stop and repeat with a runner that converges immediately") {
  std::vector<metrics::RunBudget> budgets;
  const auto history = metrics::stop_and_repeat(
      [&](const metrics::RunBudget& b) {
        budgets.push_back(b);
        return metrics::RunOutcome{0.5, 5, 0.0};
      },
      1e-6);
  CHECK(history.reached);
  CHECK(history.alpha_s == 0.1);
  REQUIRE(history.points.size() == 1);
  CHECK(history.points[0].budget_s == 0.1);
  REQUIRE(budgets.size() == 2);
  CHECK(budgets[0].max_iter == 5u);
  CHECK_FALSE(budgets[0].max_time_s.has_value());
  CHECK(budgets[1].max_time_s == 0.1);
}

TEST_CASE("stop and repeat budgets grow linearly and give up honestly") {
  int calls = 0;
  const auto history = metrics::stop_and_repeat(
      [&](const metrics::RunBudget& b) {
        ++calls;
        const double spent = b.max_time_s ? *b.max_time_s : 0.25 * static_cast<double>(*b.max_iter);
        return metrics::RunOutcome{spent, b.max_iter.value_or(0), 1.0 / (1.0 + spent)};
      },
      1e-9, 4, 6);
  CHECK_FALSE(history.reached);
  CHECK(history.alpha_s == 0.25);
  REQUIRE(history.points.size() == 6);
  for (std::size_t r = 0; r < 6; ++r) {
    CHECK(history.points[r].repeat == r + 1);
    CHECK(history.points[r].budget_s == static_cast<double>(r + 1) * 0.25);
  }
  CHECK(calls == 7);
}

TEST_CASE("stop and repeat on a synchronous solver gives a nonincreasing error") {
  const auto in = testing::rectangular_instance(64, 4, 2);
  const auto setup = testing::setup_for(in, solvers::Method::ras);
  const auto direct = fem::nodal_error(SparseLu::factor(in.problem.a).solve(in.problem.f), in.problem);
  const double eps = 1.05 * direct.max_err;
  const auto runner = [&](const metrics::RunBudget& b) {
    solvers::SolverOptions opts;
    opts.tol = 1e-300;
    opts.max_iter = b.max_iter.value_or(1000000);
    if (b.max_time_s) opts.max_time = std::chrono::duration<double>(*b.max_time_s);
    const auto res = solvers::solve(setup, solvers::Mode::sync, opts);
    return metrics::RunOutcome{res.wall_time, res.iterations,
                               fem::nodal_error(res.u, in.problem).max_err};
  };
  const auto history = metrics::stop_and_repeat(runner, eps, 5, 400);
  MESSAGE("alpha " << history.alpha_s << " s, repeats " << history.points.size());
  CHECK(history.reached);
  REQUIRE(history.points.size() >= 2);
  std::size_t rises = 0;
  for (std::size_t r = 1; r < history.points.size(); ++r) {
    if (history.points[r].error > history.points[r - 1].error * (1.0 + 1e-12)) ++rises;
  }
  // Timing noise can let a longer budget complete one iteration fewer; the
  // trend itself must be decreasing.
  CHECK(rises * 10 <= history.points.size());
  CHECK(history.points.back().error < history.points.front().error);
}

TEST_CASE("history CSV") {
  std::ostringstream plain;
  const std::vector<HistoryPoint> h{{0, 0.0, 1.0, std::nullopt}, {1, 0.5, 0.25, std::nullopt}};
  metrics::write_history_csv(plain, h);
  CHECK(plain.str() == "step,time_s,residual_norm\n0,0,1\n1,0.5,0.25\n");

  std::ostringstream with_error;
  const std::vector<HistoryPoint> e{{2, 0.1, 0.1, 0.125}};
  metrics::write_history_csv(with_error, e);
  CHECK(with_error.str() ==
        "step,time_s,residual_norm,true_error\n2,0.10000000000000001,0.10000000000000001,0.125\n");
}

TEST_CASE("asynchronous detection slack stays within ten times the tolerance") {
  const auto in = testing::rectangular_instance(128, 8, 2);
  const auto setup = testing::setup_for(in, solvers::Method::ras);
  const double tol = 1e-8;
  int within = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    solvers::SolverOptions opts;
    opts.tol = tol;
    opts.seed = seed;
    opts.jitter = std::chrono::microseconds(20);
    const auto res = solvers::solve(setup, solvers::Mode::async, opts);
    if (res.converged && res.true_residual_norm <= 10.0 * tol) ++within;
  }
  MESSAGE(within << " of 20 runs within 10 tol");
  CHECK(within >= 19);
}
