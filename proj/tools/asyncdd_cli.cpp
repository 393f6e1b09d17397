// Experiment driver: run one configuration, sweep a scaling axis, or run the
// verification suites.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "asyncdd/experiment.hpp"

using namespace asyncdd;
using experiment::ExperimentConfig;

namespace {

// Flags that override the config file only when given on the command line.
struct ConfigFlags {
  std::string config_path;
  ExperimentConfig values;
  std::string partitioner = "rectangular";
  std::string solver = "ras";
  std::string mode = "sync";
  std::string schedule = "free-running";
  std::vector<std::pair<CLI::Option*, std::function<void(ExperimentConfig&)>>> setters;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    add(app->add_option("--n", values.n, "mesh cells per side"), [this](auto& c) { c.n = values.n; });
    add(app->add_option("--P", values.parts, "number of subdomains"),
        [this](auto& c) { c.parts = values.parts; });
    add(app->add_option("--depth", values.depth, "overlap depth"),
        [this](auto& c) { c.depth = values.depth; });
    add(app->add_option("--partitioner", partitioner, "rectangular|graph"),
        [this](auto& c) { c.partitioner = experiment::parse_partitioner(partitioner); });
    add(app->add_option("--solver", solver, "ras|js|ras2"),
        [this](auto& c) { c.method = solvers::parse_method(solver); });
    add(app->add_option("--mode", mode, "sync|async|async-lock-emulated"),
        [this](auto& c) { c.mode = solvers::parse_mode(mode); });
    add(app->add_option("--schedule", schedule, "free-running|round-robin"),
        [this](auto& c) {
          c.schedule = schedule == "round-robin" ? solvers::Schedule::round_robin
                                                 : solvers::Schedule::free_running;
        });
    add(app->add_option("--tol", values.tol, "absolute residual tolerance"),
        [this](auto& c) { c.tol = values.tol; });
    add(app->add_option("--max-iter", values.max_iter, "iteration cap, 0 for the default"),
        [this](auto& c) { c.max_iter = values.max_iter; });
    add(app->add_option("--max-time", values.max_time_s, "wall-time cap in seconds"),
        [this](auto& c) { c.max_time_s = values.max_time_s; });
    add(app->add_option("--imbalance", values.imbalance, "size factor of subdomain 0"),
        [this](auto& c) { c.imbalance = values.imbalance; });
    add(app->add_option("--coarse-ratio", values.coarse_ratio, "coarse unknowns per subdomain"),
        [this](auto& c) { c.coarse_ratio = values.coarse_ratio; });
    add(app->add_option("--seed", values.seed), [this](auto& c) { c.seed = values.seed; });
    add(app->add_option("--jitter", values.jitter_us, "max random pause per sweep, microseconds"),
        [this](auto& c) { c.jitter_us = values.jitter_us; });
    add(app->add_option("--output,-o", values.output, "record path (JSON)"),
        [this](auto& c) { c.output = values.output; });
    add(app->add_option("--repeats", values.repeats, "runs per configuration, median kept"),
        [this](auto& c) { c.repeats = values.repeats; });
  }

  void add(CLI::Option* opt, std::function<void(ExperimentConfig&)> fn) {
    setters.emplace_back(opt, std::move(fn));
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      std::stringstream ss;
      ss << in.rdbuf();
      c = experiment::config_from_json(ss.str());
    }
    for (const auto& [opt, fn] : setters) {
      if (opt->count() > 0) fn(c);
    }
    experiment::validate(c);
    return c;
  }
};

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const auto v = std::stoull(item, &used);
    if (used != item.size()) throw ContractError("bad list entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void print_summary(std::ostream& out, const experiment::RunRecord& r) {
  out << solvers::to_string(r.config.method) << ' ' << solvers::to_string(r.config.mode)
      << " n=" << r.config.n << " P=" << r.config.parts << " N=" << r.global_size
      << (r.converged ? " converged" : " not converged") << " time=" << r.wall_time_s << "s";
  if (r.config.mode == solvers::Mode::sync) out << " K=" << r.iterations;
  out << " residual=" << r.true_norm << " max_err=" << r.max_err;
  if (r.rho_hat) out << " rho_hat=" << *r.rho_hat;
  out << " async_degree=" << r.async_degree;
  if (r.environment.oversubscribed) out << " [oversubscribed]";
  out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous one- and two-level Schwarz solvers"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "solve one configuration");
  ConfigFlags run_flags;
  run_flags.attach(run_cmd);
  std::string dump_partition;
  run_cmd->add_option("--dump-partition", dump_partition, "write the subdomain sets as JSON");

  auto* sweep_cmd = app.add_subcommand("sweep", "run a scaling study");
  ConfigFlags sweep_flags;
  sweep_flags.attach(sweep_cmd);
  std::string axis_kind = "strong", axis_values, summary_path, records_path;
  sweep_cmd->add_option("--axis", axis_kind, "strong|weak|mesh");
  sweep_cmd->add_option("--values", axis_values, "comma separated P (strong, weak) or n (mesh)")
      ->required();
  sweep_cmd->add_option("--summary", summary_path, "summary CSV path (default stdout)");
  sweep_cmd->add_option("--records", records_path, "JSON array of all run records");

  auto* verify_cmd = app.add_subcommand("verify", "run verification suites");
  std::string suite = "all";
  verify_cmd->add_option("suite", suite, "partition|oracle|fem|comm|bench|all");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      const auto config = run_flags.resolve();
      if (!dump_partition.empty()) {
        const auto in = experiment::build_instance(config);
        std::ofstream out(dump_partition);
        decomp::write_partition_json(out, config.n, in.maps);
      }
      const auto record = experiment::run(config);
      if (!config.output.empty()) experiment::write_outputs(record, config.output);
      print_summary(std::cout, record);
      return experiment::exit_code(record);
    }
    if (*sweep_cmd) {
      const auto base = sweep_flags.resolve();
      const experiment::SweepAxis axis{experiment::parse_sweep_kind(axis_kind),
                                       parse_list(axis_values)};
      const auto records = experiment::sweep(base, axis);
      for (const auto& r : records) {
        if (r.error) {
          std::cerr << "point P=" << r.config.parts << " n=" << r.config.n << " failed: " << *r.error
                    << '\n';
        } else {
          print_summary(std::cerr, r);
        }
      }
      if (summary_path.empty()) {
        experiment::write_sweep_csv(std::cout, axis, records);
      } else {
        std::ofstream out(summary_path);
        experiment::write_sweep_csv(out, axis, records);
      }
      if (!records_path.empty()) {
        std::ofstream out(records_path);
        out << "[\n";
        for (std::size_t i = 0; i < records.size(); ++i) {
          out << experiment::to_json(records[i]) << (i + 1 < records.size() ? ",\n" : "\n");
        }
        out << "]\n";
      }
      const bool all_ok = std::all_of(records.begin(), records.end(),
                                      [](const auto& r) { return !r.error && r.converged; });
      return all_ok ? 0 : 2;
    }
    if (*verify_cmd) {
      return experiment::verify(suite, std::cout) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
