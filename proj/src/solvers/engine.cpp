#include "engine.hpp"

#include <pthread.h>
#include <sched.h>

#include <algorithm>
#include <thread>

namespace asyncdd::solvers::detail {

namespace {

comm::Neighborhood::Options hood_options(const SolverOptions& options, comm::AccessMode access) {
  comm::Neighborhood::Options o;
  o.mode = access;
  o.access_overhead = options.lock_overhead;
  o.audit = options.audit;
  return o;
}

}  // namespace

Engine::Engine(const SchwarzSetup& setup, const SolverOptions& options, comm::AccessMode access)
    : setup_(setup),
      hood_(setup.plans, hood_options(options, access)),
      monitor_(setup.parts(), options.tol) {
  const std::size_t parts = setup.parts();
  states_.resize(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    const std::size_t m = setup.maps[p].size();
    auto& s = states_[p];
    s.w.assign(m, 0.0);
    s.masked_w.assign(m, 0.0);
    s.t.assign(m, 0.0);
    s.r.assign(m, 0.0);
    s.v.assign(m, 0.0);
    s.c.assign(m, 0.0);
    s.scratch.assign(m, 0.0);
    if (setup.method == Method::js) {
      s.mt.assign(m, 0.0);
      s.mr.assign(m, 0.0);
    }
    std::size_t widest = 0;
    for (const auto& route : setup.plans[p].routes) widest = std::max(widest, route.local.size());
    s.gather.assign(widest, 0.0);
  }
  hood_.open_epochs();
  if (setup.method == Method::js) {
    monitor_hood_ = std::make_unique<comm::Neighborhood>(setup.plans, hood_options(options, access));
    monitor_hood_->open_epochs();
  }

  if (two_level()) {
    const auto& coarse = *setup.coarse;
    rhs_offsets_.resize(parts + 1, 0);
    std::size_t widest = 0;
    for (std::size_t p = 0; p < parts; ++p) {
      const std::size_t rows = coarse.links[p].coarse_rows.size();
      rhs_offsets_[p + 1] = rhs_offsets_[p] + rows;
      widest = std::max(widest, rows);
      states_[p].coarse_buf.assign(rows, 0.0);
    }
    coarse_rhs_ = std::make_unique<comm::Window>(parts, rhs_offsets_[parts]);
    coarse_rhs_->set_access_mode(access, options.lock_overhead);
    coarse_rhs_->lock_all();
    for (std::size_t p = 0; p < parts; ++p) {
      auto w = std::make_unique<comm::Window>(p, setup.maps[p].size());
      w->set_access_mode(access, options.lock_overhead);
      w->lock_all();
      corrections_.push_back(std::move(w));
    }
    can_write_rhs_ = std::make_unique<comm::Flag[]>(parts);
    rhs_is_ready_ = std::make_unique<comm::Flag[]>(parts);
    solution_is_ready_ = std::make_unique<comm::Flag[]>(parts);
    for (std::size_t p = 0; p < parts; ++p) can_write_rhs_[p].set(true);
    r0_.assign(coarse.size(), 0.0);
    v0_.assign(coarse.size(), 0.0);
    scratch0_.assign(coarse.size(), 0.0);
    slot_.assign(widest, 0.0);
    sub_v0_.assign(widest, 0.0);
    std::size_t largest = 0;
    for (const auto& map : setup.maps) largest = std::max(largest, map.size());
    cp_.assign(largest, 0.0);
  }
}

Engine::~Engine() {
  hood_.close_epochs();
  if (monitor_hood_) monitor_hood_->close_epochs();
  if (coarse_rhs_) coarse_rhs_->unlock_all();
  for (auto& w : corrections_) w->unlock_all();
}

void Engine::residual(std::size_t p) {
  const auto& sub = setup_.subs[p];
  auto& s = states_[p];
  if (setup_.method == Method::js) {
    // D_p^(p) = I: the own term uses the full iterate.
    spmv(sub.a, s.w, s.t);
    for (std::size_t i = 0; i < s.t.size(); ++i) s.t[i] = sub.f[i] - s.t[i];
    local_residual(sub, s.w, s.masked_w, s.mt);
  } else {
    local_residual(sub, s.w, s.masked_w, s.t);
  }
}

void Engine::write_coarse_rhs(std::size_t p) {
  auto& s = states_[p];
  spmv(setup_.coarse->links[p].to_coarse, s.t, s.coarse_buf);
  coarse_rhs_->put(rhs_offsets_[p], s.coarse_buf);
  rhs_written_.fetch_add(1, std::memory_order_relaxed);
}

bool Engine::try_write_coarse_rhs(std::size_t p) {
  if (!can_write_rhs_[p].get() || solution_is_ready_[p].get()) return false;
  write_coarse_rhs(p);
  can_write_rhs_[p].set(false);
  rhs_is_ready_[p].set(true);
  return true;
}

void Engine::publish(std::size_t p) {
  if (setup_.method != Method::js) {
    hood_.publish(p, states_[p].t);
    return;
  }
  monitor_hood_->publish(p, states_[p].mt);
  // Each receiver q gets D_p^(q) R_p f - A_p D_p^(q) w_p on the shared rows.
  const auto& sub = setup_.subs[p];
  auto& s = states_[p];
  const auto& routes = setup_.plans[p].routes;
  for (std::size_t k = 0; k < routes.size(); ++k) {
    const auto& local = routes[k].local;
    const auto& mask = sub.route_masks[k];
    const auto& rf = sub.route_f[k];
    for (std::size_t i = 0; i < local.size(); ++i) {
      const std::size_t row = local[i];
      const auto cols = sub.a.row_cols(row);
      const auto vals = sub.a.row_values(row);
      double acc = 0.0;
      for (std::size_t e = 0; e < cols.size(); ++e) {
        acc += vals[e] * (mask[cols[e]] ? s.w[cols[e]] : 0.0);
      }
      s.gather[i] = rf[row] - acc;
    }
    hood_.publish_route(p, k, std::span<const double>(s.gather.data(), local.size()));
  }
}

double Engine::accumulate(std::size_t p) {
  auto& s = states_[p];
  hood_.accumulate(p, s.t, s.r);
  const Vector* est = &s.r;
  if (monitor_hood_) {
    monitor_hood_->accumulate(p, s.mt, s.mr);
    est = &s.mr;
  }
  const double contrib = metrics::local_residual_contrib(*est, setup_.subs[p].owned);
  monitor_.publish(p, contrib);
  return contrib;
}

void Engine::update(std::size_t p) {
  auto& s = states_[p];
  setup_.subs[p].lu.solve(s.r, s.v, s.scratch);
  if (two_level()) {
    for (std::size_t i = 0; i < s.w.size(); ++i) s.w[i] += 0.5 * s.v[i];
  } else {
    for (std::size_t i = 0; i < s.w.size(); ++i) s.w[i] += s.v[i];
  }
  ++s.updates;
  hood_.set_generation(p, s.updates);
  if (monitor_hood_) monitor_hood_->set_generation(p, s.updates);
}

void Engine::fold_coarse(std::size_t p) {
  auto& s = states_[p];
  corrections_[p]->get(0, s.c);
  for (std::size_t i = 0; i < s.w.size(); ++i) s.w[i] += 0.5 * s.c[i];
  applied_.fetch_add(1, std::memory_order_relaxed);
}

bool Engine::try_fold_coarse(std::size_t p) {
  if (!solution_is_ready_[p].get()) return false;
  fold_coarse(p);
  solution_is_ready_[p].set(false);
  return true;
}

void Engine::coarse_solve() {
  const auto& coarse = *setup_.coarse;
  std::fill(r0_.begin(), r0_.end(), 0.0);
  for (std::size_t p = 0; p < parts(); ++p) {
    const auto& rows = coarse.links[p].coarse_rows;
    const std::span<double> slot(slot_.data(), rows.size());
    coarse_rhs_->get(rhs_offsets_[p], slot);
    for (std::size_t k = 0; k < rows.size(); ++k) r0_[rows[k]] += slot[k];
  }
  // Consumed regions are cleared so a missing contribution reads as zero.
  coarse_rhs_->fill(0, coarse_rhs_->size(), 0.0);
  setup_.coarse_lu->solve(r0_, v0_, scratch0_);
  for (std::size_t p = 0; p < parts(); ++p) {
    const auto& link = coarse.links[p];
    const std::span<double> sub(sub_v0_.data(), link.coarse_rows.size());
    for (std::size_t k = 0; k < sub.size(); ++k) sub[k] = v0_[link.coarse_rows[k]];
    const std::span<double> cp(cp_.data(), setup_.maps[p].size());
    spmv(link.from_coarse, sub, cp);
    corrections_[p]->put(0, cp);
    sent_.fetch_add(1, std::memory_order_relaxed);
  }
  attempted_.fetch_add(1, std::memory_order_relaxed);
  performed_.fetch_add(1, std::memory_order_relaxed);
}

bool Engine::try_coarse_solve() {
  for (std::size_t p = 0; p < parts(); ++p) {
    if (!rhs_is_ready_[p].get()) {
      attempted_.fetch_add(1, std::memory_order_relaxed);
      return false;
    }
  }
  for (std::size_t p = 0; p < parts(); ++p) rhs_is_ready_[p].set(false);
  coarse_solve();
  for (std::size_t p = 0; p < parts(); ++p) {
    solution_is_ready_[p].set(true);
    can_write_rhs_[p].set(true);
  }
  return true;
}

CoarseStats Engine::coarse_stats() const {
  CoarseStats c;
  c.attempted = attempted_.load();
  c.performed = performed_.load();
  c.rhs_written = rhs_written_.load();
  c.sent = sent_.load();
  c.applied = applied_.load();
  if (solution_is_ready_) {
    for (std::size_t p = 0; p < parts(); ++p) c.pending += solution_is_ready_[p].get() ? 1 : 0;
  }
  c.final_sleep_us = std::chrono::duration<double, std::micro>(final_sleep_).count();
  return c;
}

std::vector<Vector> Engine::take_iterates() {
  std::vector<Vector> out;
  out.reserve(states_.size());
  for (auto& s : states_) out.push_back(std::move(s.w));
  return out;
}

std::vector<std::uint64_t> Engine::update_counts() const {
  std::vector<std::uint64_t> out;
  out.reserve(states_.size());
  for (const auto& s : states_) out.push_back(s.updates);
  return out;
}

bool oversubscribed(std::size_t threads) {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw != 0 && threads > hw;
}

void pin_current_thread(std::size_t slot) {
  const unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) return;
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(static_cast<int>(slot % hw), &set);
  pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
}

void finalize(SolveResult& result, const SchwarzSetup& setup, Engine& engine) {
  result.update_counts = engine.update_counts();
  result.coarse = engine.coarse_stats();
  result.audit = engine.hood().audit();
  result.w = engine.take_iterates();
  result.u = post_process(setup, result.w);
  result.true_residual_norm = global_residual_norm(setup, result.u);
  result.initial_residual_norm = norm2(setup.f);
}

}  // namespace asyncdd::solvers::detail
