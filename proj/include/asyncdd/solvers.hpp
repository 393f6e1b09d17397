#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asyncdd/comm.hpp"
#include "asyncdd/decomp.hpp"
#include "asyncdd/fem.hpp"
#include "asyncdd/linalg.hpp"
#include "asyncdd/metrics.hpp"
#include "asyncdd/sparse_lu.hpp"

namespace asyncdd::solvers {

/// One-level restricted additive Schwarz, Jacobi-Schwarz, or RAS with an
/// additive coarse grid (both corrections weighted 1/2).
enum class Method { ras, js, ras2 };

/// async_lock brackets every remote put with a lock/unlock pair.
enum class Mode { sync, async, async_lock };

/// round_robin steps every worker in a fixed order on the calling thread; it
/// exists to make asynchronous runs reproducible.
enum class Schedule { free_running, round_robin };

std::string to_string(Method m);
std::string to_string(Mode m);
Method parse_method(const std::string& s);
Mode parse_mode(const std::string& s);

struct SolverOptions {
  double tol = 1e-8;  // absolute, on ||f - A u||_2
  // 0 selects 100000 (one-level) or 10000 (two-level); per worker when asynchronous.
  std::size_t max_iter = 0;
  std::chrono::duration<double> max_time{300.0};
  std::chrono::milliseconds collective_timeout{60000};
  std::chrono::nanoseconds lock_overhead{20000};
  Schedule schedule = Schedule::free_running;
  /// Upper bound of a uniform random pause after each asynchronous sweep.
  std::chrono::microseconds jitter{0};
  std::uint64_t seed = 0;
  bool audit = false;
  /// Yield after each asynchronous sweep when workers outnumber cores.
  bool yield_when_oversubscribed = true;
  bool pin_threads = false;
  std::chrono::microseconds monitor_cadence{1000};
  bool record_history = true;
};

std::size_t effective_max_iter(Method method, const SolverOptions& options);

struct CoarseStats {
  std::uint64_t attempted = 0;
  std::uint64_t performed = 0;
  std::uint64_t rhs_written = 0;
  std::uint64_t sent = 0;     // corrections written to subdomains
  std::uint64_t applied = 0;  // corrections folded into w_p
  std::uint64_t pending = 0;  // sent but not yet folded when the run stopped
  double final_sleep_us = 0.0;

  friend bool operator==(const CoarseStats&, const CoarseStats&) = default;
};

struct SolveResult {
  Vector u;
  std::vector<Vector> w;
  std::vector<std::uint64_t> update_counts;
  double wall_time = 0.0;
  std::size_t iterations = 0;  // K, synchronous runs only
  std::vector<metrics::HistoryPoint> history;
  double initial_residual_norm = 0.0;
  double final_residual_norm = 0.0;  // the solver's own (possibly estimated) norm
  double true_residual_norm = 0.0;   // ||f - A u|| recomputed after the run
  bool converged = false;
  bool timed_out = false;
  bool oversubscribed = false;
  CoarseStats coarse;
  comm::AuditCounters audit;
};

struct Subdomain {
  CsrMatrix a;
  SparseLu lu;
  Vector f;                 // R_p f
  Vector masked_f;          // D_p R_p f
  std::vector<char> owned;  // diag(D_p)
  // Jacobi-Schwarz only: mask D_p^(q) and D_p^(q) R_p f for each exchange route q.
  std::vector<std::vector<char>> route_masks;
  std::vector<Vector> route_f;
};

/// Everything that is fixed before iterating: local matrices and their
/// factorizations, masks, exchange plans and the optional coarse space.
struct SchwarzSetup {
  Method method = Method::ras;
  CsrMatrix a;
  Vector f;
  std::vector<decomp::SubdomainMap> maps;
  std::vector<Subdomain> subs;
  std::vector<comm::ExchangePlan> plans;
  std::optional<decomp::CoarseSpace> coarse;
  std::optional<SparseLu> coarse_lu;

  std::size_t parts() const noexcept { return maps.size(); }
  std::size_t global_size() const noexcept { return f.size(); }
};

SchwarzSetup make_setup(const fem::DiscreteProblem& problem, std::vector<decomp::SubdomainMap> maps,
                        Method method, std::optional<decomp::CoarseSpace> coarse = std::nullopt);

/// t_p = D_p f_p - A_p D_p w_p. `masked_w` is scratch of size |N_p|.
void local_residual(const Subdomain& sub, std::span<const double> w, std::span<double> masked_w,
                    std::span<double> t);

/// u = sum_q R_q^T D_q w_q.
Vector post_process(const SchwarzSetup& setup, const std::vector<Vector>& w);

/// u_p = R_p u for every subdomain.
std::vector<Vector> local_solutions(const SchwarzSetup& setup, std::span<const double> u);

/// ||f - A u||_2.
double global_residual_norm(const SchwarzSetup& setup, std::span<const double> u);

SolveResult solve(const SchwarzSetup& setup, Mode mode, const SolverOptions& options);
SolveResult solve_sync(const SchwarzSetup& setup, const SolverOptions& options);
SolveResult solve_async(const SchwarzSetup& setup, const SolverOptions& options,
                        comm::AccessMode access = comm::AccessMode::lock_all);

struct SleepParams {
  double target = 1.0 / 20.0;  // performed / attempted
  double factor = 1.5;
  std::chrono::nanoseconds min_interval{10000};
  std::chrono::nanoseconds max_interval{100000000};
  std::uint64_t window = 50;
};

/// One multiplicative step for a window with the given counts: a ratio above
/// the target shrinks the interval, below it grows it; the result is clamped.
std::chrono::nanoseconds adapt_sleep(std::chrono::nanoseconds interval, std::uint64_t attempted,
                                     std::uint64_t performed, const SleepParams& params = {});

/// Adaptive poll interval of the coarse worker, re-evaluated every
/// `params.window` attempts.
class SleepController {
 public:
  explicit SleepController(SleepParams params = {},
                           std::chrono::nanoseconds initial = std::chrono::microseconds(100));

  /// Records one attempt; returns true when the interval was re-evaluated.
  bool record(bool performed);
  std::chrono::nanoseconds interval() const noexcept { return interval_; }
  std::uint64_t attempted() const noexcept { return attempted_; }
  std::uint64_t performed() const noexcept { return performed_; }

 private:
  SleepParams params_;
  std::chrono::nanoseconds interval_;
  std::uint64_t attempted_ = 0;
  std::uint64_t performed_ = 0;
  std::uint64_t window_attempted_ = 0;
  std::uint64_t window_performed_ = 0;
};

}  // namespace asyncdd::solvers
