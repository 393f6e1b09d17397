#pragma once

// Per-worker step functions shared by every execution path. Synchronous
// threads, the round-robin scheduler and free-running workers all call the
// same routines in the same order per worker, which is what makes the
// scheduler-forced runs bitwise equal to the synchronous ones.

#include <atomic>
#include <memory>
#include <vector>

#include "asyncdd/solvers.hpp"

namespace asyncdd::solvers::detail {

struct WorkerState {
  Vector w;
  Vector masked_w;
  Vector t;
  Vector r;
  Vector v;
  Vector c;
  Vector scratch;
  Vector gather;
  Vector coarse_buf;
  Vector mt;  // JS only: RAS-form residual feeding the stopping test
  Vector mr;
  std::uint64_t updates = 0;
};

class Engine {
 public:
  Engine(const SchwarzSetup& setup, const SolverOptions& options, comm::AccessMode access);
  ~Engine();

  std::size_t parts() const noexcept { return setup_.parts(); }
  bool two_level() const noexcept { return setup_.method == Method::ras2; }
  metrics::ConvergenceMonitor& monitor() { return monitor_; }
  comm::Neighborhood& hood() { return hood_; }
  WorkerState& state(std::size_t p) { return states_[p]; }

  /// Own residual term: t_p (RAS) or f_p - A_p w_p (JS). JS also forms the
  /// RAS-form term D_p f_p - A_p D_p w_p, whose accumulated and masked sum is
  /// ||f - A u|| for the post-processed u; its own r_p vanishes on owned rows
  /// after every exact local solve and cannot serve as the estimate.
  void residual(std::size_t p);
  /// Coarse right-hand side slot p <- R_0 R_p^T t_p, unconditionally.
  void write_coarse_rhs(std::size_t p);
  /// Same, guarded by the flag protocol; returns whether it wrote.
  bool try_write_coarse_rhs(std::size_t p);
  /// Sends the neighbour contributions of worker p.
  void publish(std::size_t p);
  /// r_p from the own term and the window; publishes and returns r_p.(D_p r_p).
  double accumulate(std::size_t p);
  /// Local solve and update of w_p.
  void update(std::size_t p);
  /// w_p += c_p / 2, unconditionally.
  void fold_coarse(std::size_t p);
  /// Same, only when a fresh correction is flagged; returns whether it folded.
  bool try_fold_coarse(std::size_t p);
  /// Sums the RHS slots, solves on the coarse grid and writes every c_p.
  void coarse_solve();
  /// Attempt under the flag protocol; returns whether a solve was performed.
  bool try_coarse_solve();

  CoarseStats coarse_stats() const;
  void set_final_sleep(std::chrono::nanoseconds d) { final_sleep_ = d; }
  std::vector<Vector> take_iterates();
  std::vector<std::uint64_t> update_counts() const;

 private:
  const SchwarzSetup& setup_;
  comm::Neighborhood hood_;
  std::unique_ptr<comm::Neighborhood> monitor_hood_;  // JS only
  metrics::ConvergenceMonitor monitor_;
  std::vector<WorkerState> states_;

  // Coarse grid.
  std::unique_ptr<comm::Window> coarse_rhs_;
  std::vector<std::size_t> rhs_offsets_;
  std::vector<std::unique_ptr<comm::Window>> corrections_;
  std::unique_ptr<comm::Flag[]> can_write_rhs_;
  std::unique_ptr<comm::Flag[]> rhs_is_ready_;
  std::unique_ptr<comm::Flag[]> solution_is_ready_;
  Vector r0_;
  Vector v0_;
  Vector scratch0_;
  Vector slot_;
  Vector sub_v0_;
  Vector cp_;
  std::atomic<std::uint64_t> attempted_{0};
  std::atomic<std::uint64_t> performed_{0};
  std::atomic<std::uint64_t> rhs_written_{0};
  std::atomic<std::uint64_t> sent_{0};
  std::atomic<std::uint64_t> applied_{0};
  std::chrono::nanoseconds final_sleep_{0};
};

/// True when `threads` exceeds the hardware parallelism.
bool oversubscribed(std::size_t threads);
/// Best effort; failures are ignored since pinning is only a hint.
void pin_current_thread(std::size_t slot);
/// Post-processing epilogue shared by all drivers: u, true residual, counts.
void finalize(SolveResult& result, const SchwarzSetup& setup, Engine& engine);

}  // namespace asyncdd::solvers::detail
