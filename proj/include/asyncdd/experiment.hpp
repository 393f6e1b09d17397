#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "asyncdd/decomp.hpp"
#include "asyncdd/fem.hpp"
#include "asyncdd/metrics.hpp"
#include "asyncdd/solvers.hpp"

namespace asyncdd::experiment {

enum class Partitioner { rectangular, graph };

std::string to_string(Partitioner p);
Partitioner parse_partitioner(const std::string& s);

struct ExperimentConfig {
  std::size_t n = 64;
  std::size_t parts = 4;
  Partitioner partitioner = Partitioner::rectangular;
  std::size_t depth = 2;
  solvers::Method method = solvers::Method::ras;
  solvers::Mode mode = solvers::Mode::sync;
  solvers::Schedule schedule = solvers::Schedule::free_running;
  double tol = 1e-8;
  std::size_t max_iter = 0;  // 0: solver default
  double max_time_s = 300.0;
  double imbalance = 1.0;
  double coarse_ratio = 16.0;
  std::uint64_t seed = 0;
  double jitter_us = 0.0;
  std::string output;  // JSON record path; empty writes nothing
  std::size_t repeats = 1;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Throws ContractError naming the first offending field.
void validate(const ExperimentConfig& config);

std::string to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const std::string& text);

struct Environment {
  unsigned hardware_threads = 0;
  std::size_t threads_used = 0;  // workers + coarse + monitor
  bool oversubscribed = false;
  bool pinned = false;
  std::string timestamp;  // UTC, ISO 8601

  friend bool operator==(const Environment&, const Environment&) = default;
};

/// Hardware parallelism and pinning hint (ASYNCDD_PIN_THREADS=1) for a run
/// with `threads` concurrent threads.
Environment probe_environment(std::size_t threads);

struct RunRecord {
  ExperimentConfig config;
  std::size_t global_size = 0;
  std::uint64_t problem_checksum = 0;
  std::size_t coarse_size = 0;
  bool converged = false;
  bool timed_out = false;
  std::optional<std::string> error;
  double wall_time_s = 0.0;
  std::size_t iterations = 0;  // synchronous runs
  std::vector<std::uint64_t> update_counts;
  double initial_norm = 0.0;
  double final_norm = 0.0;
  double true_norm = 0.0;
  double max_err = 0.0;  // nodal, against sin(pi x) sin(pi y)
  double l2_err = 0.0;
  double tau_sync_s = 0.0;
  std::optional<double> rho_tilde;
  std::optional<double> rho_hat;
  double async_degree = 0.0;
  solvers::CoarseStats coarse;
  std::vector<metrics::HistoryPoint> history;
  Environment environment;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

std::string to_json(const RunRecord& record);
RunRecord record_from_json(const std::string& text);

/// Problem, base partition and overlapping maps for a configuration.
struct Instance {
  fem::DiscreteProblem problem;
  std::vector<decomp::SubdomainMap> maps;
};
Instance build_instance(const ExperimentConfig& config);

solvers::SolverOptions solver_options(const ExperimentConfig& config);

/// Mean duration of one synchronous iteration of the same setup, measured
/// over `iterations` sweeps.
double measure_tau_sync(const solvers::SchwarzSetup& setup, const solvers::SolverOptions& options,
                        std::size_t iterations = 20);

/// Builds, solves and measures one configuration. With repeats > 1 the run of
/// median wall time is returned. Failures throw.
RunRecord run(const ExperimentConfig& config);

/// JSON record at `path` and history at the same path with a `.history.csv`
/// suffix replacing any `.json` extension.
void write_outputs(const RunRecord& record, const std::string& path);
std::string history_path(const std::string& record_path);

/// 0 converged, 2 finished without converging.
int exit_code(const RunRecord& record);

enum class SweepKind { strong, weak, mesh };

/// strong: values are P at fixed n. weak: values are P, n chosen so that N/P
/// matches the template. mesh: values are n at fixed P.
struct SweepAxis {
  SweepKind kind = SweepKind::strong;
  std::vector<std::size_t> values;
};

SweepKind parse_sweep_kind(const std::string& s);

/// Configuration of one sweep point.
ExperimentConfig sweep_point(const ExperimentConfig& base, SweepKind kind, std::size_t value);

/// Runs every point; a failing point yields a record with `error` set.
std::vector<RunRecord> sweep(const ExperimentConfig& base, const SweepAxis& axis);

/// `axis,solver,mode,time_s,final_norm,rho_hat,async_degree`.
void write_sweep_csv(std::ostream& out, const SweepAxis& axis, const std::vector<RunRecord>& records);

/// Suites: partition, oracle, fem, comm, bench, all. Prints one line per
/// check and returns whether all passed. The bench suite is informational on
/// oversubscribed hardware.
bool verify(const std::string& suite, std::ostream& out);

}  // namespace asyncdd::experiment
