#include <cmath>
#include <thread>

#include "asyncdd/comm.hpp"

namespace asyncdd::comm {
namespace {

// g + g*2^-32 is exact for g < 2^20 and spreads g over both 32-bit halves of
// the word, so a torn read decodes to an inconsistent pair.
constexpr double kLowScale = 1.0 / 4294967296.0;
constexpr std::uint64_t kMaxGeneration = (1u << 20) - 1;

double encode(std::uint64_t g) {
  const auto d = static_cast<double>(g);
  return d + d * kLowScale;
}

bool decodes_within(double v, std::uint64_t newest) {
  if (!(v >= 0.0)) return false;
  const double g = std::floor(v);
  return encode(static_cast<std::uint64_t>(g)) == v && g <= static_cast<double>(newest);
}

}  // namespace

StressReport stress_generations(std::uint64_t operations, std::size_t width) {
  Window window(0, width);
  window.lock_all();
  std::atomic<std::uint64_t> started{0};
  const std::uint64_t writes = std::min(operations / 2, kMaxGeneration);
  const std::uint64_t reads = operations - writes;
  std::atomic<std::uint64_t> torn{0};

  std::thread writer([&] {
    std::vector<double> data(width);
    for (std::uint64_t g = 1; g <= writes; ++g) {
      started.store(g, std::memory_order_release);
      std::fill(data.begin(), data.end(), encode(g));
      window.put(0, data);
    }
  });
  std::thread reader([&] {
    std::vector<double> seen(width);
    std::uint64_t bad = 0;
    for (std::uint64_t k = 0; k < reads; ++k) {
      window.get(0, seen);
      const auto newest = started.load(std::memory_order_acquire);
      for (double v : seen) bad += decodes_within(v, newest) ? 0 : 1;
    }
    torn.store(bad);
  });
  writer.join();
  reader.join();
  window.unlock_all();
  return {writes + reads, torn.load(), 0, 0};
}

StressReport stress_flag_handoff(std::uint64_t handoffs, std::size_t width) {
  Window window(0, width);
  window.lock_all();
  Flag ready;
  std::atomic<std::uint64_t> stale{0};
  handoffs = std::min(handoffs, kMaxGeneration);

  std::thread writer([&] {
    std::vector<double> data(width);
    for (std::uint64_t g = 1; g <= handoffs; ++g) {
      while (ready.get()) std::this_thread::yield();
      std::fill(data.begin(), data.end(), encode(g));
      window.put(0, data);
      ready.set(true);
    }
  });
  std::thread reader([&] {
    std::vector<double> seen(width);
    std::uint64_t bad = 0;
    for (std::uint64_t g = 1; g <= handoffs; ++g) {
      while (!ready.get()) std::this_thread::yield();
      window.get(0, seen);
      for (double v : seen) bad += v == encode(g) ? 0 : 1;
      ready.set(false);
    }
    stale.store(bad);
  });
  writer.join();
  reader.join();
  window.unlock_all();
  return {2 * handoffs, 0, stale.load(), handoffs};
}

}  // namespace asyncdd::comm
