#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

#include "engine.hpp"

namespace asyncdd::solvers {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Every worker steps once per round on the calling thread: residual, coarse
// slot and puts for all; one coarse attempt; accumulation for all; monitor
// refresh and stop test; updates for all.
SolveResult run_round_robin(const SchwarzSetup& setup, const SolverOptions& options,
                            comm::AccessMode access) {
  detail::Engine engine(setup, options, access);
  const std::size_t parts = setup.parts();
  const bool two_level = engine.two_level();
  const std::size_t max_iter = effective_max_iter(setup.method, options);
  const double max_time = options.max_time.count();
  SolveResult result;
  const auto start = Clock::now();

  for (std::size_t k = 0;; ++k) {
    for (std::size_t p = 0; p < parts; ++p) {
      engine.residual(p);
      if (two_level) engine.try_write_coarse_rhs(p);
      engine.publish(p);
    }
    if (two_level) engine.try_coarse_solve();
    for (std::size_t p = 0; p < parts; ++p) engine.accumulate(p);
    const double est = engine.monitor().refresh();
    const double now = seconds_since(start);
    if (options.record_history) result.history.push_back({k, now, est, std::nullopt});
    const bool converged = engine.monitor().converged();
    if (converged || k >= max_iter || now > max_time) {
      result.iterations = k;
      result.final_residual_norm = est;
      result.converged = converged;
      result.timed_out = !converged && now > max_time;
      break;
    }
    for (std::size_t p = 0; p < parts; ++p) {
      engine.update(p);
      if (two_level) engine.try_fold_coarse(p);
    }
  }
  result.wall_time = seconds_since(start);
  detail::finalize(result, setup, engine);
  return result;
}

// P free-running subdomain workers, a coarse worker with adaptive polling and
// the calling thread acting as the monitor that owns the global estimate.
SolveResult run_free(const SchwarzSetup& setup, const SolverOptions& options,
                     comm::AccessMode access) {
  detail::Engine engine(setup, options, access);
  const std::size_t parts = setup.parts();
  const bool two_level = engine.two_level();
  const std::size_t threads = parts + (two_level ? 1 : 0) + 1;
  const std::size_t max_iter = effective_max_iter(setup.method, options);
  const double max_time = options.max_time.count();

  SolveResult result;
  result.oversubscribed = detail::oversubscribed(threads);
  const bool yield = options.yield_when_oversubscribed && result.oversubscribed;
  std::atomic<bool> stop{false};
  std::atomic<bool> workers_done{false};
  std::atomic<std::size_t> running{parts};
  std::mutex error_mutex;
  std::exception_ptr error;
  const auto start = Clock::now();

  auto fail = [&](std::exception_ptr e) {
    std::lock_guard lock(error_mutex);
    if (!error) error = e;
    stop.store(true, std::memory_order_release);
  };

  auto worker = [&](std::size_t p) {
    if (options.pin_threads) detail::pin_current_thread(p);
    std::mt19937_64 rng(options.seed * 7919 + p + 1);
    std::uniform_int_distribution<std::int64_t> pause(0, options.jitter.count());
    try {
      auto& state = engine.state(p);
      while (!stop.load(std::memory_order_acquire)) {
        engine.residual(p);
        if (two_level) engine.try_write_coarse_rhs(p);
        engine.publish(p);
        engine.accumulate(p);
        if (engine.monitor().converged() || state.updates >= max_iter) break;
        engine.update(p);
        if (two_level) engine.try_fold_coarse(p);
        if (options.jitter.count() > 0) {
          std::this_thread::sleep_for(std::chrono::microseconds(pause(rng)));
        }
        if (yield) std::this_thread::yield();
      }
    } catch (...) {
      fail(std::current_exception());
    }
    running.fetch_sub(1, std::memory_order_acq_rel);
  };

  auto coarse = [&] {
    if (options.pin_threads) detail::pin_current_thread(parts);
    SleepController controller;
    try {
      while (!workers_done.load(std::memory_order_acquire)) {
        controller.record(engine.try_coarse_solve());
        std::this_thread::sleep_for(controller.interval());
      }
    } catch (...) {
      fail(std::current_exception());
    }
    engine.set_final_sleep(controller.interval());
  };

  std::vector<std::thread> pool;
  pool.reserve(parts);
  for (std::size_t p = 0; p < parts; ++p) pool.emplace_back(worker, p);
  std::thread coarse_thread;
  if (two_level) coarse_thread = std::thread(coarse);

  if (options.pin_threads) detail::pin_current_thread(parts + 1);
  std::size_t refresh = 0;
  while (running.load(std::memory_order_acquire) > 0) {
    const double est = engine.monitor().refresh();
    const double now = seconds_since(start);
    if (options.record_history && std::isfinite(est)) {
      result.history.push_back({refresh++, now, est, std::nullopt});
    }
    if (now > max_time && !stop.load(std::memory_order_relaxed)) {
      result.timed_out = true;
      stop.store(true, std::memory_order_release);
    }
    std::this_thread::sleep_for(options.monitor_cadence);
  }
  for (auto& t : pool) t.join();
  workers_done.store(true, std::memory_order_release);
  if (coarse_thread.joinable()) coarse_thread.join();
  result.wall_time = seconds_since(start);
  if (error) std::rethrow_exception(error);

  result.final_residual_norm = engine.monitor().refresh();
  result.converged = engine.monitor().converged();
  if (result.converged) result.timed_out = false;
  if (options.record_history) {
    result.history.push_back({refresh, result.wall_time, result.final_residual_norm, std::nullopt});
  }
  detail::finalize(result, setup, engine);
  return result;
}

}  // namespace

SolveResult solve_async(const SchwarzSetup& setup, const SolverOptions& options,
                        comm::AccessMode access) {
  if (!(options.tol > 0.0)) throw ContractError("solve: tolerance must be positive");
  if (options.schedule == Schedule::round_robin) return run_round_robin(setup, options, access);
  return run_free(setup, options, access);
}

}  // namespace asyncdd::solvers
