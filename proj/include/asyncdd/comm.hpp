#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

#include "asyncdd/decomp.hpp"

namespace asyncdd::comm {

/// A collective did not complete within its timeout (usually a deadlock).
class CommTimeout : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// How remote accesses are bracketed. lock_all opens one access epoch for the
/// whole run; lock_per_access emulates a lock/unlock pair around every put,
/// with a configurable overhead.
enum class AccessMode { lock_all, lock_per_access };

/// Exposed memory region of one worker.
///
/// Elements are 64-bit atomics: no read ever observes a torn value, but a put
/// is not atomic as a whole, so a concurrent reader may see a mix of old and
/// new elements. Bulk data uses relaxed ordering; ordering guarantees come
/// from Flag. Contents start at zero.
class Window {
 public:
  Window(std::size_t owner, std::size_t size, bool stamped = false);

  std::size_t owner() const noexcept { return owner_; }
  std::size_t size() const noexcept { return size_; }
  bool stamped() const noexcept { return stamps_ != nullptr; }

  void lock_all() noexcept { epoch_open_.store(true, std::memory_order_release); }
  void unlock_all() noexcept { epoch_open_.store(false, std::memory_order_release); }
  bool epoch_open() const noexcept { return epoch_open_.load(std::memory_order_acquire); }
  void set_access_mode(AccessMode mode, std::chrono::nanoseconds overhead = {});

  void put(std::size_t offset, std::span<const double> data);
  /// Put that also tags every element with `stamp` (release), for audits.
  void put_stamped(std::size_t offset, std::span<const double> data, std::uint64_t stamp);

  double get(std::size_t i) const { return data_[i].load(std::memory_order_relaxed); }
  void get(std::size_t offset, std::span<double> out) const;
  std::uint64_t stamp(std::size_t i) const { return stamps_[i].load(std::memory_order_acquire); }

  /// Local (owner-side) overwrite of a region with a constant.
  void fill(std::size_t offset, std::size_t count, double value);

 private:
  void check_region(std::size_t offset, std::size_t count) const;
  void begin_access();
  void end_access();

  std::size_t owner_;
  std::size_t size_;
  std::unique_ptr<std::atomic<double>[]> data_;
  std::unique_ptr<std::atomic<std::uint64_t>[]> stamps_;
  std::atomic<bool> epoch_open_{false};
  AccessMode mode_ = AccessMode::lock_all;
  std::chrono::nanoseconds overhead_{0};
  std::mutex access_lock_;
};

/// Boolean published with release semantics and read with acquire semantics.
class Flag {
 public:
  explicit Flag(bool initial = false) : value_(initial) {}
  void set(bool v) noexcept { value_.store(v, std::memory_order_release); }
  bool get() const noexcept { return value_.load(std::memory_order_acquire); }

 private:
  std::atomic<bool> value_;
};

/// Reusable barrier whose wait fails with CommTimeout instead of hanging.
class Barrier {
 public:
  Barrier(std::size_t parties, std::chrono::milliseconds timeout);
  void arrive_and_wait();
  /// Releases all current and future waiters with CommTimeout.
  void abort();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::size_t parties_;
  std::size_t waiting_ = 0;
  std::uint64_t phase_ = 0;
  bool broken_ = false;
  std::chrono::milliseconds timeout_;
};

/// One neighbour of a subdomain: which local entries travel, where they land in
/// the neighbour's window, and where the neighbour's data lands in ours.
struct ExchangeRoute {
  std::size_t neighbor = 0;
  std::vector<std::size_t> local;
  std::size_t remote_offset = 0;
  std::size_t recv_offset = 0;
};

/// Realizes sum_q R_p R_q^T for subdomain p. Receive regions are disjoint and
/// laid out in ascending neighbour order.
struct ExchangePlan {
  std::size_t owner = 0;
  std::size_t window_size = 0;
  std::vector<ExchangeRoute> routes;
};

std::vector<ExchangePlan> make_exchange_plans(const std::vector<decomp::SubdomainMap>& maps);

struct AuditCounters {
  std::uint64_t reads = 0;
  std::uint64_t violations = 0;
  std::uint64_t max_lag = 0;
};

/// Neighbourhood exchange among P workers over one window per worker.
class Neighborhood {
 public:
  struct Options {
    AccessMode mode = AccessMode::lock_all;
    std::chrono::nanoseconds access_overhead{0};
    bool audit = false;
  };

  Neighborhood(std::vector<ExchangePlan> plans, Options options);

  std::size_t size() const noexcept { return plans_.size(); }
  const ExchangePlan& plan(std::size_t p) const { return plans_[p]; }
  Window& window(std::size_t p) { return *windows_[p]; }

  void open_epochs();
  void close_epochs();

  /// Writes t[route.local] into every neighbour's window.
  void publish(std::size_t p, std::span<const double> t);
  /// Writes already gathered values for a single route.
  void publish_route(std::size_t p, std::size_t route, std::span<const double> values);
  /// r = own + contributions currently present in p's window (ascending neighbour order).
  void accumulate(std::size_t p, std::span<const double> own, std::span<double> r);

  /// Generation counter of p used to stamp outgoing data in audit mode.
  void set_generation(std::size_t p, std::uint64_t g) {
    generation_[p].value.store(g, std::memory_order_release);
  }
  AuditCounters audit() const;

 private:
  struct alignas(64) Counter {
    std::atomic<std::uint64_t> value{0};
  };
  struct alignas(64) Audit {
    std::atomic<std::uint64_t> reads{0};
    std::atomic<std::uint64_t> violations{0};
    std::atomic<std::uint64_t> max_lag{0};
  };

  std::vector<ExchangePlan> plans_;
  std::vector<std::unique_ptr<Window>> windows_;
  std::unique_ptr<Counter[]> generation_;
  std::unique_ptr<Audit[]> audit_;
  bool audit_enabled_ = false;
  std::vector<std::vector<double>> gather_;
};

/// Lockstep exchange: publish, barrier, accumulate, barrier. Deterministic.
void sync_exchange(Neighborhood& hood, Barrier& barrier, std::size_t p,
                   std::span<const double> t, std::span<double> r);

/// Publish then accumulate whatever neighbour data is present; never blocks.
void async_accumulate(Neighborhood& hood, std::size_t p, std::span<const double> t,
                      std::span<double> r);

struct StressReport {
  std::uint64_t operations = 0;
  std::uint64_t torn_reads = 0;
  std::uint64_t stale_handoffs = 0;
  std::uint64_t handoffs = 0;
};

/// Writer puts generation-stamped constant vectors (all entries = g) while a
/// reader samples; counts values that are not a generation already written.
StressReport stress_generations(std::uint64_t operations, std::size_t width);

/// Writer puts a vector then sets a flag; the reader, once it observes the
/// flag, must read exactly that vector. Counts stale reads.
StressReport stress_flag_handoff(std::uint64_t handoffs, std::size_t width);

}  // namespace asyncdd::comm
