#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "asyncdd/comm.hpp"

namespace asyncdd::metrics {

struct HistoryPoint {
  std::size_t step = 0;
  double time_s = 0.0;
  double residual_norm = 0.0;
  std::optional<double> true_error;

  friend bool operator==(const HistoryPoint&, const HistoryPoint&) = default;
};

/// r_p . (D_p r_p); summed over p this is ||r||^2.
double local_residual_contrib(std::span<const double> r, std::span<const char> owned);

/// Master-side aggregation of locally published residual contributions.
///
/// Workers put r_p.(D_p r_p) into slot p of the master window; refresh()
/// sums the slots in subdomain order and publishes sqrt of the sum. The
/// estimate stays +inf until every worker has published once. Once an
/// estimate at or below the tolerance has been published the monitor latches
/// converged(), so that workers stopping early cannot make the others chase a
/// target that their frozen contributions no longer allow.
class ConvergenceMonitor {
 public:
  ConvergenceMonitor(std::size_t parts, double tol);

  std::size_t parts() const noexcept { return parts_; }
  double tolerance() const noexcept { return tol_; }

  void publish(std::size_t p, double contrib);
  /// Recomputes and publishes the estimate; returns it.
  double refresh();
  /// The value refresh() would publish, without publishing it.
  double norm_now() const;
  double estimate() const noexcept { return estimate_.load(std::memory_order_acquire); }
  bool converged() const noexcept { return latched_.get(); }
  /// publish() followed by a read of the latched decision.
  bool check_converged(std::size_t p, double contrib);
  std::uint64_t refreshes() const noexcept { return refreshes_.load(std::memory_order_relaxed); }

  /// Refresh loop with a fixed cadence until `stop` becomes true. `on_refresh`
  /// (may be empty) sees each finite estimate.
  void run_master(const std::atomic<bool>& stop, std::chrono::microseconds cadence,
                  const std::function<void(double)>& on_refresh = {});

 private:
  std::size_t parts_;
  double tol_;
  comm::Window window_;
  std::unique_ptr<comm::Flag[]> published_;
  std::atomic<double> estimate_;
  std::atomic<std::uint64_t> refreshes_{0};
  comm::Flag latched_;
};

/// (r_final / r0)^(1/K).
double rho_tilde(double r0, double rfinal, std::size_t iterations);
/// (r_final / r0)^(tau_sync / T).
double rho_hat(double r0, double rfinal, double wall_time, double tau_sync);
/// min / max of the per-worker update counts.
double async_degree(std::span<const std::uint64_t> counts);

struct RunBudget {
  std::optional<std::size_t> max_iter;
  std::optional<double> max_time_s;
};

struct RunOutcome {
  double wall_time_s = 0.0;
  std::size_t iterations = 0;
  double error = 0.0;  // global error of the run's final iterate
};

struct RepeatPoint {
  std::size_t repeat = 0;
  double budget_s = 0.0;
  double error = 0.0;
};

struct RepeatHistory {
  double alpha_s = 0.0;
  std::vector<RepeatPoint> points;
  bool reached = false;
};

/// Convergence history by rerunning from scratch with growing time budgets
/// r*alpha, where alpha is the mean time per iteration over a first run
/// limited to `discard` iterations. Stops once the error is at most `eps` or
/// after `max_repeats` runs (reached == false then).
RepeatHistory stop_and_repeat(const std::function<RunOutcome(const RunBudget&)>& runner,
                              double eps, std::size_t discard = 5, std::size_t max_repeats = 1000);

/// CSV `step,time_s,residual_norm[,true_error]`; the last column appears when
/// any point carries an error.
void write_history_csv(std::ostream& out, std::span<const HistoryPoint> history);

}  // namespace asyncdd::metrics
