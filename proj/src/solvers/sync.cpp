#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

#include "engine.hpp"

namespace asyncdd::solvers {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

// Lockstep iteration. Per step: residual, coarse slot and neighbour puts;
// barrier; accumulate and norm contribution while the coarse thread solves;
// barrier; every thread evaluates the same stopping test, then updates.
SolveResult solve_sync(const SchwarzSetup& setup, const SolverOptions& options) {
  if (!(options.tol > 0.0)) throw ContractError("solve: tolerance must be positive");
  detail::Engine engine(setup, options, comm::AccessMode::lock_all);
  const std::size_t parts = setup.parts();
  const bool two_level = engine.two_level();
  const std::size_t threads = parts + (two_level ? 1 : 0);
  const std::size_t max_iter = effective_max_iter(setup.method, options);
  const double max_time = options.max_time.count();
  comm::Barrier barrier(threads, options.collective_timeout);

  SolveResult result;
  result.oversubscribed = detail::oversubscribed(threads);
  std::atomic<bool> timed_out{false};
  std::mutex error_mutex;
  std::exception_ptr error;
  const auto start = Clock::now();

  auto fail = [&](std::exception_ptr e) {
    {
      std::lock_guard lock(error_mutex);
      if (!error) error = e;
    }
    barrier.abort();
  };
  auto should_stop = [&](std::size_t k, double norm) {
    return norm <= options.tol || k >= max_iter || timed_out.load(std::memory_order_relaxed);
  };

  auto worker = [&](std::size_t p) {
    if (options.pin_threads) detail::pin_current_thread(p);
    try {
      for (std::size_t k = 0;; ++k) {
        engine.residual(p);
        if (two_level) engine.write_coarse_rhs(p);
        engine.publish(p);
        barrier.arrive_and_wait();
        engine.accumulate(p);
        if (p == 0) timed_out.store(seconds_since(start) > max_time, std::memory_order_relaxed);
        barrier.arrive_and_wait();
        const double norm = engine.monitor().norm_now();
        if (p == 0 && options.record_history) {
          result.history.push_back({k, seconds_since(start), norm, std::nullopt});
        }
        if (should_stop(k, norm)) {
          if (p == 0) {
            result.iterations = k;
            result.final_residual_norm = norm;
            result.converged = norm <= options.tol;
            result.timed_out = !result.converged && timed_out.load(std::memory_order_relaxed);
          }
          break;
        }
        engine.update(p);
        if (two_level) engine.fold_coarse(p);
      }
    } catch (...) {
      fail(std::current_exception());
    }
  };

  auto coarse = [&] {
    if (options.pin_threads) detail::pin_current_thread(parts);
    try {
      for (std::size_t k = 0;; ++k) {
        barrier.arrive_and_wait();
        engine.coarse_solve();
        barrier.arrive_and_wait();
        if (should_stop(k, engine.monitor().norm_now())) break;
      }
    } catch (...) {
      fail(std::current_exception());
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t p = 0; p < parts; ++p) pool.emplace_back(worker, p);
  if (two_level) pool.emplace_back(coarse);
  for (auto& t : pool) t.join();
  result.wall_time = seconds_since(start);
  if (error) std::rethrow_exception(error);

  detail::finalize(result, setup, engine);
  // The last coarse solve overlaps the final norm evaluation and is never folded.
  result.coarse.pending = result.coarse.sent - result.coarse.applied;
  return result;
}

}  // namespace asyncdd::solvers
