#include <algorithm>
#include <thread>

#include "asyncdd/comm.hpp"

namespace asyncdd::comm {

std::vector<ExchangePlan> make_exchange_plans(const std::vector<decomp::SubdomainMap>& maps) {
  std::vector<ExchangePlan> plans(maps.size());
  for (std::size_t p = 0; p < maps.size(); ++p) {
    auto& plan = plans[p];
    plan.owner = p;
    for (const auto& link : maps[p].neighbors) {
      ExchangeRoute route;
      route.neighbor = link.neighbor;
      route.local = link.local;
      route.recv_offset = plan.window_size;
      plan.window_size += link.local.size();
      plan.routes.push_back(std::move(route));
    }
  }
  for (auto& plan : plans) {
    for (auto& route : plan.routes) {
      const auto& other = plans[route.neighbor].routes;
      auto it = std::find_if(other.begin(), other.end(), [&](const ExchangeRoute& r) {
        return r.neighbor == plan.owner;
      });
      if (it == other.end() || it->local.size() != route.local.size()) {
        throw ContractError("make_exchange_plans: asymmetric neighbour lists");
      }
      route.remote_offset = it->recv_offset;
    }
  }
  return plans;
}

Neighborhood::Neighborhood(std::vector<ExchangePlan> plans, Options options)
    : plans_(std::move(plans)),
      generation_(std::make_unique<Counter[]>(plans_.size())),
      audit_(std::make_unique<Audit[]>(plans_.size())),
      audit_enabled_(options.audit),
      gather_(plans_.size()) {
  windows_.reserve(plans_.size());
  for (const auto& plan : plans_) {
    auto w = std::make_unique<Window>(plan.owner, plan.window_size, options.audit);
    w->set_access_mode(options.mode, options.access_overhead);
    windows_.push_back(std::move(w));
    std::size_t widest = 0;
    for (const auto& route : plan.routes) widest = std::max(widest, route.local.size());
    gather_[plan.owner].resize(widest);
  }
}

void Neighborhood::open_epochs() {
  for (auto& w : windows_) w->lock_all();
}

void Neighborhood::close_epochs() {
  for (auto& w : windows_) w->unlock_all();
}

void Neighborhood::publish_route(std::size_t p, std::size_t route, std::span<const double> values) {
  const auto& r = plans_[p].routes[route];
  auto& target = *windows_[r.neighbor];
  if (audit_enabled_) {
    target.put_stamped(r.remote_offset, values,
                       generation_[p].value.load(std::memory_order_relaxed));
  } else {
    target.put(r.remote_offset, values);
  }
}

void Neighborhood::publish(std::size_t p, std::span<const double> t) {
  auto& buf = gather_[p];
  const auto& routes = plans_[p].routes;
  for (std::size_t k = 0; k < routes.size(); ++k) {
    const auto& local = routes[k].local;
    for (std::size_t i = 0; i < local.size(); ++i) buf[i] = t[local[i]];
    publish_route(p, k, std::span<const double>(buf.data(), local.size()));
  }
}

void Neighborhood::accumulate(std::size_t p, std::span<const double> own, std::span<double> r) {
  if (own.size() != r.size()) throw ContractError("accumulate: dimension mismatch");
  std::copy(own.begin(), own.end(), r.begin());
  const auto& window = *windows_[p];
  auto& audit = audit_[p];
  for (const auto& route : plans_[p].routes) {
    const auto& local = route.local;
    const std::uint64_t current =
        audit_enabled_ ? generation_[route.neighbor].value.load(std::memory_order_acquire) : 0;
    for (std::size_t i = 0; i < local.size(); ++i) {
      const std::size_t slot = route.recv_offset + i;
      if (audit_enabled_) {
        const std::uint64_t stamp = window.stamp(slot);
        const std::uint64_t now =
            std::max(current, generation_[route.neighbor].value.load(std::memory_order_acquire));
        audit.reads.fetch_add(1, std::memory_order_relaxed);
        if (stamp > now) {
          audit.violations.fetch_add(1, std::memory_order_relaxed);
        } else if (now - stamp > audit.max_lag.load(std::memory_order_relaxed)) {
          audit.max_lag.store(now - stamp, std::memory_order_relaxed);
        }
      }
      r[local[i]] += window.get(slot);
    }
  }
}

AuditCounters Neighborhood::audit() const {
  AuditCounters total;
  for (std::size_t p = 0; p < plans_.size(); ++p) {
    total.reads += audit_[p].reads.load();
    total.violations += audit_[p].violations.load();
    total.max_lag = std::max(total.max_lag, audit_[p].max_lag.load());
  }
  return total;
}

void sync_exchange(Neighborhood& hood, Barrier& barrier, std::size_t p,
                   std::span<const double> t, std::span<double> r) {
  hood.publish(p, t);
  barrier.arrive_and_wait();
  hood.accumulate(p, t, r);
  barrier.arrive_and_wait();
}

void async_accumulate(Neighborhood& hood, std::size_t p, std::span<const double> t,
                      std::span<double> r) {
  hood.publish(p, t);
  hood.accumulate(p, t, r);
}

}  // namespace asyncdd::comm
