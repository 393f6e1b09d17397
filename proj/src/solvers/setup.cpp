#include <algorithm>
#include <cmath>

#include "asyncdd/solvers.hpp"

namespace asyncdd::solvers {

std::string to_string(Method m) {
  switch (m) {
    case Method::ras: return "ras";
    case Method::js: return "js";
    case Method::ras2: return "ras2";
  }
  return "?";
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::sync: return "sync";
    case Mode::async: return "async";
    case Mode::async_lock: return "async-lock-emulated";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "ras") return Method::ras;
  if (s == "js") return Method::js;
  if (s == "ras2") return Method::ras2;
  throw ContractError("unknown solver '" + s + "' (expected ras, js or ras2)");
}

Mode parse_mode(const std::string& s) {
  if (s == "sync") return Mode::sync;
  if (s == "async") return Mode::async;
  if (s == "async-lock-emulated" || s == "async-lock") return Mode::async_lock;
  throw ContractError("unknown mode '" + s + "' (expected sync, async or async-lock-emulated)");
}

std::size_t effective_max_iter(Method method, const SolverOptions& options) {
  if (options.max_iter != 0) return options.max_iter;
  return method == Method::ras2 ? 10000 : 100000;
}

SchwarzSetup make_setup(const fem::DiscreteProblem& problem, std::vector<decomp::SubdomainMap> maps,
                        Method method, std::optional<decomp::CoarseSpace> coarse) {
  if (maps.empty()) throw ContractError("make_setup: no subdomains");
  if (method == Method::ras2 && !coarse) {
    throw ContractError("make_setup: the two-level method needs a coarse space");
  }
  SchwarzSetup setup;
  setup.method = method;
  setup.a = problem.a;
  setup.f = problem.f;
  setup.maps = std::move(maps);
  setup.plans = comm::make_exchange_plans(setup.maps);

  std::vector<decomp::JsPartition> js;
  if (method == Method::js) js = decomp::build_js_partitions(setup.maps);

  setup.subs.reserve(setup.parts());
  for (std::size_t p = 0; p < setup.parts(); ++p) {
    const auto& map = setup.maps[p];
    Subdomain sub;
    sub.a = decomp::local_matrix(problem.a, map);
    sub.lu = SparseLu::factor(sub.a);
    sub.f.resize(map.size());
    sub.masked_f.resize(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) {
      sub.f[i] = problem.f[map.overlap[i]];
      sub.masked_f[i] = map.owned[i] ? sub.f[i] : 0.0;
    }
    sub.owned = map.owned;
    if (method == Method::js) {
      for (const auto& route : setup.plans[p].routes) {
        auto mask = js[route.neighbor].masks[p];
        Vector rf(map.size());
        for (std::size_t i = 0; i < map.size(); ++i) rf[i] = mask[i] ? sub.f[i] : 0.0;
        sub.route_masks.push_back(std::move(mask));
        sub.route_f.push_back(std::move(rf));
      }
    }
    setup.subs.push_back(std::move(sub));
  }
  if (method == Method::ras2) {
    if (coarse->links.size() != setup.parts()) {
      throw ContractError("make_setup: coarse space built for a different decomposition");
    }
    setup.coarse_lu = SparseLu::factor(coarse->a0);
    setup.coarse = std::move(coarse);
  }
  return setup;
}

void local_residual(const Subdomain& sub, std::span<const double> w, std::span<double> masked_w,
                    std::span<double> t) {
  const std::size_t n = sub.owned.size();
  if (w.size() != n || masked_w.size() != n || t.size() != n) {
    throw ContractError("local_residual: dimension mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) masked_w[i] = sub.owned[i] ? w[i] : 0.0;
  spmv(sub.a, masked_w, t);
  for (std::size_t i = 0; i < n; ++i) t[i] = sub.masked_f[i] - t[i];
}

Vector post_process(const SchwarzSetup& setup, const std::vector<Vector>& w) {
  if (w.size() != setup.parts()) throw ContractError("post_process: one iterate per subdomain");
  Vector u(setup.global_size(), 0.0);
  for (std::size_t p = 0; p < setup.parts(); ++p) {
    const auto& map = setup.maps[p];
    if (w[p].size() != map.size()) throw ContractError("post_process: iterate size mismatch");
    for (std::size_t i = 0; i < map.size(); ++i) {
      if (map.owned[i]) u[map.overlap[i]] = w[p][i];
    }
  }
  return u;
}

std::vector<Vector> local_solutions(const SchwarzSetup& setup, std::span<const double> u) {
  if (u.size() != setup.global_size()) throw ContractError("local_solutions: size mismatch");
  std::vector<Vector> out;
  out.reserve(setup.parts());
  for (const auto& map : setup.maps) {
    Vector up(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) up[i] = u[map.overlap[i]];
    out.push_back(std::move(up));
  }
  return out;
}

double global_residual_norm(const SchwarzSetup& setup, std::span<const double> u) {
  Vector r = spmv(setup.a, u);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = setup.f[i] - r[i];
  return norm2(r);
}

SolveResult solve(const SchwarzSetup& setup, Mode mode, const SolverOptions& options) {
  switch (mode) {
    case Mode::sync: return solve_sync(setup, options);
    case Mode::async: return solve_async(setup, options, comm::AccessMode::lock_all);
    case Mode::async_lock: return solve_async(setup, options, comm::AccessMode::lock_per_access);
  }
  throw ContractError("solve: unknown mode");
}

std::chrono::nanoseconds adapt_sleep(std::chrono::nanoseconds interval, std::uint64_t attempted,
                                     std::uint64_t performed, const SleepParams& params) {
  if (attempted == 0) return interval;
  const double ratio = static_cast<double>(performed) / static_cast<double>(attempted);
  double next = static_cast<double>(interval.count());
  if (ratio > params.target) {
    next /= params.factor;
  } else if (ratio < params.target) {
    next *= params.factor;
  }
  next = std::clamp(next, static_cast<double>(params.min_interval.count()),
                    static_cast<double>(params.max_interval.count()));
  return std::chrono::nanoseconds(static_cast<std::int64_t>(std::llround(next)));
}

SleepController::SleepController(SleepParams params, std::chrono::nanoseconds initial)
    : params_(params), interval_(std::clamp(initial, params.min_interval, params.max_interval)) {
  if (params_.window == 0 || !(params_.factor > 1.0)) {
    throw ContractError("SleepController: window must be positive and factor > 1");
  }
}

bool SleepController::record(bool performed) {
  ++attempted_;
  ++window_attempted_;
  if (performed) {
    ++performed_;
    ++window_performed_;
  }
  if (window_attempted_ < params_.window) return false;
  interval_ = adapt_sleep(interval_, window_attempted_, window_performed_, params_);
  window_attempted_ = 0;
  window_performed_ = 0;
  return true;
}

}  // namespace asyncdd::solvers
