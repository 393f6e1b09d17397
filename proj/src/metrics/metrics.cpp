#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <thread>

#include "asyncdd/metrics.hpp"

namespace asyncdd::metrics {

double local_residual_contrib(std::span<const double> r, std::span<const char> owned) {
  if (r.size() != owned.size()) throw ContractError("local_residual_contrib: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (owned[i]) s += r[i] * r[i];
  }
  return s;
}

ConvergenceMonitor::ConvergenceMonitor(std::size_t parts, double tol)
    : parts_(parts),
      tol_(tol),
      window_(0, parts),
      published_(std::make_unique<comm::Flag[]>(parts)),
      estimate_(std::numeric_limits<double>::infinity()) {
  if (parts == 0) throw ContractError("ConvergenceMonitor: need at least one worker");
  if (!(tol >= 0.0)) throw ContractError("ConvergenceMonitor: tolerance must be nonnegative");
  window_.lock_all();
}

void ConvergenceMonitor::publish(std::size_t p, double contrib) {
  if (p >= parts_) throw ContractError("ConvergenceMonitor: worker id out of range");
  if (!(contrib >= 0.0)) throw ContractError("ConvergenceMonitor: contribution must be >= 0");
  const double value[1] = {contrib};
  window_.put(p, value);
  published_[p].set(true);
}

double ConvergenceMonitor::norm_now() const {
  for (std::size_t p = 0; p < parts_; ++p) {
    if (!published_[p].get()) return std::numeric_limits<double>::infinity();
  }
  double sum = 0.0;
  for (std::size_t p = 0; p < parts_; ++p) sum += window_.get(p);
  return std::sqrt(sum);
}

double ConvergenceMonitor::refresh() {
  const double est = norm_now();
  if (!std::isfinite(est)) return estimate();
  estimate_.store(est, std::memory_order_release);
  refreshes_.fetch_add(1, std::memory_order_relaxed);
  if (est <= tol_) latched_.set(true);
  return est;
}

bool ConvergenceMonitor::check_converged(std::size_t p, double contrib) {
  publish(p, contrib);
  return converged();
}

void ConvergenceMonitor::run_master(const std::atomic<bool>& stop,
                                    std::chrono::microseconds cadence,
                                    const std::function<void(double)>& on_refresh) {
  while (!stop.load(std::memory_order_acquire)) {
    const double est = refresh();
    if (on_refresh && std::isfinite(est)) on_refresh(est);
    std::this_thread::sleep_for(cadence);
  }
}

double rho_tilde(double r0, double rfinal, std::size_t iterations) {
  if (!(r0 > 0.0)) throw ContractError("rho_tilde: r0 must be positive");
  if (iterations == 0) throw ContractError("rho_tilde: need at least one iteration");
  return std::pow(rfinal / r0, 1.0 / static_cast<double>(iterations));
}

double rho_hat(double r0, double rfinal, double wall_time, double tau_sync) {
  if (!(r0 > 0.0)) throw ContractError("rho_hat: r0 must be positive");
  if (!(wall_time > 0.0) || !(tau_sync > 0.0)) {
    throw ContractError("rho_hat: durations must be positive");
  }
  return std::pow(rfinal / r0, tau_sync / wall_time);
}

double async_degree(std::span<const std::uint64_t> counts) {
  if (counts.empty()) throw ContractError("async_degree: no update counts");
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (*lo == 0) throw ContractError("async_degree: every worker needs at least one update");
  return static_cast<double>(*lo) / static_cast<double>(*hi);
}

RepeatHistory stop_and_repeat(const std::function<RunOutcome(const RunBudget&)>& runner,
                              double eps, std::size_t discard, std::size_t max_repeats) {
  if (discard == 0) throw ContractError("stop_and_repeat: discard must be positive");
  RepeatHistory history;
  const RunOutcome first = runner(RunBudget{discard, std::nullopt});
  const std::size_t done = std::max<std::size_t>(first.iterations, 1);
  history.alpha_s = first.wall_time_s / static_cast<double>(done);
  if (!(history.alpha_s > 0.0)) history.alpha_s = std::numeric_limits<double>::min();
  for (std::size_t r = 1; r <= max_repeats; ++r) {
    const double budget = static_cast<double>(r) * history.alpha_s;
    const RunOutcome out = runner(RunBudget{std::nullopt, budget});
    history.points.push_back({r, budget, out.error});
    if (out.error <= eps) {
      history.reached = true;
      break;
    }
  }
  return history;
}

void write_history_csv(std::ostream& out, std::span<const HistoryPoint> history) {
  const bool with_error = std::any_of(history.begin(), history.end(),
                                      [](const HistoryPoint& h) { return h.true_error.has_value(); });
  out << "step,time_s,residual_norm" << (with_error ? ",true_error" : "") << '\n';
  const auto old_precision = out.precision(17);
  for (const auto& h : history) {
    out << h.step << ',' << h.time_s << ',' << h.residual_norm;
    if (with_error) {
      out << ',';
      if (h.true_error) out << *h.true_error;
    }
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace asyncdd::metrics
