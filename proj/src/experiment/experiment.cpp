#include "asyncdd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>
#include <thread>

namespace asyncdd::experiment {

using nlohmann::json;

std::string to_string(Partitioner p) {
  return p == Partitioner::rectangular ? "rectangular" : "graph";
}

Partitioner parse_partitioner(const std::string& s) {
  if (s == "rectangular") return Partitioner::rectangular;
  if (s == "graph") return Partitioner::graph;
  throw ContractError("unknown partitioner '" + s + "' (expected rectangular|graph)");
}

namespace {

std::string schedule_name(solvers::Schedule s) {
  return s == solvers::Schedule::round_robin ? "round-robin" : "free-running";
}

solvers::Schedule parse_schedule(const std::string& s) {
  if (s == "round-robin") return solvers::Schedule::round_robin;
  if (s == "free-running") return solvers::Schedule::free_running;
  throw ContractError("unknown schedule '" + s + "' (expected free-running|round-robin)");
}

// JSON has no infinities; they only appear in estimates that never got a
// first contribution, which are not worth keeping.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double number_or(const json& j, double fallback) { return j.is_null() ? fallback : j.get<double>(); }

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json config_json(const ExperimentConfig& c) {
  return {{"n", c.n},
          {"P", c.parts},
          {"partitioner", to_string(c.partitioner)},
          {"depth", c.depth},
          {"solver", solvers::to_string(c.method)},
          {"mode", solvers::to_string(c.mode)},
          {"schedule", schedule_name(c.schedule)},
          {"tol", c.tol},
          {"max_iter", c.max_iter},
          {"max_time_s", c.max_time_s},
          {"imbalance", c.imbalance},
          {"coarse_ratio", c.coarse_ratio},
          {"seed", c.seed},
          {"jitter_us", c.jitter_us},
          {"output", c.output},
          {"repeats", c.repeats}};
}

// Missing keys keep their defaults so that partial config files work.
ExperimentConfig config_from(const json& j) {
  if (!j.is_object()) throw ContractError("config: expected a JSON object");
  static const std::vector<std::string> known = {
      "n", "P", "partitioner", "depth", "solver", "mode", "schedule", "tol", "max_iter",
      "max_time_s", "imbalance", "coarse_ratio", "seed", "jitter_us", "output", "repeats"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ContractError("config: unknown key '" + key + "'");
    }
  }
  ExperimentConfig c;
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  take("n", c.n);
  take("P", c.parts);
  take("depth", c.depth);
  take("tol", c.tol);
  take("max_iter", c.max_iter);
  take("max_time_s", c.max_time_s);
  take("imbalance", c.imbalance);
  take("coarse_ratio", c.coarse_ratio);
  take("seed", c.seed);
  take("jitter_us", c.jitter_us);
  take("output", c.output);
  take("repeats", c.repeats);
  if (j.contains("partitioner")) c.partitioner = parse_partitioner(j.at("partitioner"));
  if (j.contains("solver")) c.method = solvers::parse_method(j.at("solver"));
  if (j.contains("mode")) c.mode = solvers::parse_mode(j.at("mode"));
  if (j.contains("schedule")) c.schedule = parse_schedule(j.at("schedule"));
  return c;
}

std::string utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool pin_requested() {
  const char* v = std::getenv("ASYNCDD_PIN_THREADS");
  return v != nullptr && std::string(v) == "1";
}

}  // namespace

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& msg) { throw ContractError("invalid config: " + msg); };
  if (c.n < 2) fail("n must be >= 2");
  const std::size_t unknowns = (c.n - 1) * (c.n - 1);
  if (c.parts == 0) fail("P must be >= 1");
  if (c.parts > unknowns) {
    fail("P=" + std::to_string(c.parts) + " exceeds the " + std::to_string(unknowns) + " unknowns");
  }
  if (c.depth == 0) fail("depth must be >= 1 (owned unknowns must stay interior)");
  if (!(c.tol > 0.0)) fail("tol must be positive");
  if (!(c.max_time_s > 0.0)) fail("max_time_s must be positive");
  if (!(c.imbalance >= 1.0)) fail("imbalance must be >= 1");
  if (c.imbalance != 1.0 && c.partitioner != Partitioner::rectangular) {
    fail("imbalance is only supported by the rectangular partitioner");
  }
  if (c.partitioner == Partitioner::rectangular) {
    const auto [px, py] = decomp::near_square_factors(c.parts);
    if (px > c.n - 1 || py > c.n - 1) fail("rectangular tiling needs at least one grid line per block");
  }
  if (!(c.coarse_ratio > 0.0)) fail("coarse_ratio must be positive");
  if (!(c.jitter_us >= 0.0)) fail("jitter_us must be >= 0");
  if (c.repeats == 0) fail("repeats must be >= 1");
  if (c.method == solvers::Method::ras2) decomp::choose_coarse_cells(c.n, c.parts, c.coarse_ratio);
}

std::string to_json(const ExperimentConfig& config) { return config_json(config).dump(2); }

ExperimentConfig config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ContractError(std::string("config: ") + e.what());
  }
}

Environment probe_environment(std::size_t threads) {
  Environment env;
  env.hardware_threads = std::thread::hardware_concurrency();
  env.threads_used = threads;
  env.oversubscribed = env.hardware_threads == 0 || threads > env.hardware_threads;
  env.pinned = pin_requested();
  env.timestamp = utc_now();
  return env;
}

std::string to_json(const RunRecord& r) {
  json history = json::array();
  for (const auto& h : r.history) {
    history.push_back({h.step, h.time_s, finite_or_null(h.residual_norm),
                       optional_json(h.true_error)});
  }
  const json doc = {
      {"config", config_json(r.config)},
      {"global_size", r.global_size},
      {"problem_checksum", r.problem_checksum},
      {"coarse_size", r.coarse_size},
      {"converged", r.converged},
      {"timed_out", r.timed_out},
      {"error", r.error ? json(*r.error) : json(nullptr)},
      {"wall_time_s", r.wall_time_s},
      {"iterations", r.iterations},
      {"update_counts", r.update_counts},
      {"initial_norm", r.initial_norm},
      {"final_norm", finite_or_null(r.final_norm)},
      {"true_norm", r.true_norm},
      {"max_err", r.max_err},
      {"l2_err", r.l2_err},
      {"tau_sync_s", r.tau_sync_s},
      {"rho_tilde", optional_json(r.rho_tilde)},
      {"rho_hat", optional_json(r.rho_hat)},
      {"async_degree", r.async_degree},
      {"coarse",
       {{"attempted", r.coarse.attempted},
        {"performed", r.coarse.performed},
        {"rhs_written", r.coarse.rhs_written},
        {"sent", r.coarse.sent},
        {"applied", r.coarse.applied},
        {"pending", r.coarse.pending},
        {"final_sleep_us", r.coarse.final_sleep_us}}},
      {"history", history},
      {"environment",
       {{"hardware_threads", r.environment.hardware_threads},
        {"threads_used", r.environment.threads_used},
        {"oversubscribed", r.environment.oversubscribed},
        {"pinned", r.environment.pinned},
        {"timestamp", r.environment.timestamp}}}};
  return doc.dump(2);
}

RunRecord record_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    RunRecord r;
    r.config = config_from(j.at("config"));
    j.at("global_size").get_to(r.global_size);
    j.at("problem_checksum").get_to(r.problem_checksum);
    j.at("coarse_size").get_to(r.coarse_size);
    j.at("converged").get_to(r.converged);
    j.at("timed_out").get_to(r.timed_out);
    if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
    j.at("wall_time_s").get_to(r.wall_time_s);
    j.at("iterations").get_to(r.iterations);
    j.at("update_counts").get_to(r.update_counts);
    j.at("initial_norm").get_to(r.initial_norm);
    r.final_norm = number_or(j.at("final_norm"), INFINITY);
    j.at("true_norm").get_to(r.true_norm);
    j.at("max_err").get_to(r.max_err);
    j.at("l2_err").get_to(r.l2_err);
    j.at("tau_sync_s").get_to(r.tau_sync_s);
    r.rho_tilde = optional_from(j.at("rho_tilde"));
    r.rho_hat = optional_from(j.at("rho_hat"));
    j.at("async_degree").get_to(r.async_degree);
    const auto& c = j.at("coarse");
    c.at("attempted").get_to(r.coarse.attempted);
    c.at("performed").get_to(r.coarse.performed);
    c.at("rhs_written").get_to(r.coarse.rhs_written);
    c.at("sent").get_to(r.coarse.sent);
    c.at("applied").get_to(r.coarse.applied);
    c.at("pending").get_to(r.coarse.pending);
    c.at("final_sleep_us").get_to(r.coarse.final_sleep_us);
    for (const auto& h : j.at("history")) {
      r.history.push_back({h.at(0).get<std::size_t>(), h.at(1).get<double>(),
                           number_or(h.at(2), INFINITY), optional_from(h.at(3))});
    }
    const auto& e = j.at("environment");
    e.at("hardware_threads").get_to(r.environment.hardware_threads);
    e.at("threads_used").get_to(r.environment.threads_used);
    e.at("oversubscribed").get_to(r.environment.oversubscribed);
    e.at("pinned").get_to(r.environment.pinned);
    e.at("timestamp").get_to(r.environment.timestamp);
    return r;
  } catch (const json::exception& e) {
    throw ContractError(std::string("run record: ") + e.what());
  }
}

Instance build_instance(const ExperimentConfig& config) {
  validate(config);
  Instance in{fem::poisson_problem(config.n), {}};
  std::vector<decomp::IndexSet> base;
  if (config.partitioner == Partitioner::rectangular) {
    const auto [px, py] = decomp::near_square_factors(config.parts);
    base = decomp::partition_rectangular(config.n, px, py, config.imbalance);
  } else {
    base = decomp::partition_graph(in.problem.a, config.parts, config.seed);
  }
  in.maps = decomp::extend_overlap(in.problem.a, base, config.depth);
  return in;
}

solvers::SolverOptions solver_options(const ExperimentConfig& config) {
  solvers::SolverOptions o;
  o.tol = config.tol;
  o.max_iter = config.max_iter;
  o.max_time = std::chrono::duration<double>(config.max_time_s);
  o.schedule = config.schedule;
  o.seed = config.seed;
  o.jitter = std::chrono::microseconds(static_cast<std::int64_t>(std::llround(config.jitter_us)));
  o.pin_threads = pin_requested();
  return o;
}

double measure_tau_sync(const solvers::SchwarzSetup& setup, const solvers::SolverOptions& options,
                        std::size_t iterations) {
  auto o = options;
  o.tol = std::numeric_limits<double>::min();
  o.max_iter = iterations;
  o.record_history = false;
  const auto res = solvers::solve_sync(setup, o);
  return res.wall_time / static_cast<double>(std::max<std::size_t>(res.iterations, 1));
}

RunRecord run(const ExperimentConfig& config) {
  const Instance in = build_instance(config);
  std::optional<decomp::CoarseSpace> coarse;
  if (config.method == solvers::Method::ras2) {
    coarse = decomp::build_coarse(in.problem, in.maps, config.coarse_ratio);
  }
  const auto setup = solvers::make_setup(in.problem, in.maps, config.method, std::move(coarse));
  const auto options = solver_options(config);

  std::vector<solvers::SolveResult> runs;
  for (std::size_t r = 0; r < config.repeats; ++r) {
    runs.push_back(solvers::solve(setup, config.mode, options));
  }
  std::sort(runs.begin(), runs.end(),
            [](const auto& a, const auto& b) { return a.wall_time < b.wall_time; });
  solvers::SolveResult res = std::move(runs[runs.size() / 2]);

  RunRecord rec;
  rec.config = config;
  rec.global_size = in.problem.size();
  rec.problem_checksum = fem::checksum(in.problem);
  rec.coarse_size = setup.coarse ? setup.coarse->size() : 0;
  rec.converged = res.converged;
  rec.timed_out = res.timed_out;
  rec.wall_time_s = res.wall_time;
  rec.iterations = res.iterations;
  rec.update_counts = res.update_counts;
  rec.initial_norm = res.initial_residual_norm;
  rec.final_norm = res.final_residual_norm;
  rec.true_norm = res.true_residual_norm;
  const auto err = fem::nodal_error(res.u, in.problem);
  rec.max_err = err.max_err;
  rec.l2_err = err.l2_err;
  rec.coarse = res.coarse;
  rec.history = std::move(res.history);

  const bool sync = config.mode == solvers::Mode::sync;
  rec.tau_sync_s = sync && res.iterations > 0
                       ? res.wall_time / static_cast<double>(res.iterations)
                       : measure_tau_sync(setup, options);
  const bool measurable = rec.initial_norm > 0.0 && rec.true_norm > 0.0;
  if (measurable && sync && res.iterations > 0) {
    rec.rho_tilde = metrics::rho_tilde(rec.initial_norm, rec.true_norm, res.iterations);
  }
  if (measurable && rec.wall_time_s > 0.0 && rec.tau_sync_s > 0.0) {
    rec.rho_hat = metrics::rho_hat(rec.initial_norm, rec.true_norm, rec.wall_time_s, rec.tau_sync_s);
  }
  const bool all_updated = std::all_of(rec.update_counts.begin(), rec.update_counts.end(),
                                       [](std::uint64_t c) { return c > 0; });
  rec.async_degree = all_updated && !rec.update_counts.empty()
                         ? metrics::async_degree(rec.update_counts)
                         : 0.0;
  rec.environment = probe_environment(config.parts + 2);
  return rec;
}

std::string history_path(const std::string& record_path) {
  std::string stem = record_path;
  const std::string ext = ".json";
  if (stem.size() > ext.size() && stem.compare(stem.size() - ext.size(), ext.size(), ext) == 0) {
    stem.resize(stem.size() - ext.size());
  }
  return stem + ".history.csv";
}

void write_outputs(const RunRecord& record, const std::string& path) {
  std::ofstream json_out(path);
  if (!json_out) throw std::runtime_error("cannot write " + path);
  json_out << to_json(record) << '\n';
  const auto csv = history_path(path);
  std::ofstream csv_out(csv);
  if (!csv_out) throw std::runtime_error("cannot write " + csv);
  metrics::write_history_csv(csv_out, record.history);
}

int exit_code(const RunRecord& record) { return record.converged ? 0 : 2; }

SweepKind parse_sweep_kind(const std::string& s) {
  if (s == "strong") return SweepKind::strong;
  if (s == "weak") return SweepKind::weak;
  if (s == "mesh") return SweepKind::mesh;
  throw ContractError("unknown sweep axis '" + s + "' (expected strong|weak|mesh)");
}

ExperimentConfig sweep_point(const ExperimentConfig& base, SweepKind kind, std::size_t value) {
  ExperimentConfig c = base;
  switch (kind) {
    case SweepKind::strong:
      c.parts = value;
      break;
    case SweepKind::mesh:
      c.n = value;
      break;
    case SweepKind::weak: {
      const double per_part = static_cast<double>((base.n - 1) * (base.n - 1)) /
                              static_cast<double>(base.parts);
      const double side = std::sqrt(per_part * static_cast<double>(value));
      c.parts = value;
      c.n = static_cast<std::size_t>(std::llround(side)) + 1;
      if (c.method == solvers::Method::ras2) {
        // Nearest mesh that admits a coarse grid.
        for (std::size_t d = 0; d < c.n; ++d) {
          bool found = false;
          for (std::size_t cand : {c.n + d, c.n - d}) {
            if (cand < 4) continue;
            try {
              decomp::choose_coarse_cells(cand, c.parts, c.coarse_ratio);
              c.n = cand;
              found = true;
              break;
            } catch (const ContractError&) {
            }
          }
          if (found) break;
        }
      }
      break;
    }
  }
  return c;
}

std::vector<RunRecord> sweep(const ExperimentConfig& base, const SweepAxis& axis) {
  if (axis.values.empty()) throw ContractError("sweep: empty axis");
  std::vector<RunRecord> records;
  for (auto v : axis.values) {
    const auto config = sweep_point(base, axis.kind, v);
    try {
      records.push_back(run(config));
    } catch (const std::exception& e) {
      RunRecord failed;
      failed.config = config;
      failed.error = e.what();
      failed.environment = probe_environment(config.parts + 2);
      records.push_back(std::move(failed));
    }
  }
  return records;
}

void write_sweep_csv(std::ostream& out, const SweepAxis& axis, const std::vector<RunRecord>& records) {
  out << "axis,solver,mode,time_s,final_norm,rho_hat,async_degree\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    out << axis.values.at(i) << ',' << solvers::to_string(r.config.method) << ','
        << solvers::to_string(r.config.mode) << ',';
    if (r.error) {
      out << ",,,\n";
      continue;
    }
    out << r.wall_time_s << ',' << r.true_norm << ',';
    if (r.rho_hat) out << *r.rho_hat;
    out << ',' << r.async_degree << '\n';
  }
  out.precision(old);
}

}  // namespace asyncdd::experiment
