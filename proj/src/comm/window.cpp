#include <string>
#include <thread>

#include "asyncdd/comm.hpp"

namespace asyncdd::comm {

Window::Window(std::size_t owner, std::size_t size, bool stamped)
    : owner_(owner), size_(size), data_(std::make_unique<std::atomic<double>[]>(size)) {
  for (std::size_t i = 0; i < size_; ++i) data_[i].store(0.0, std::memory_order_relaxed);
  if (stamped) {
    stamps_ = std::make_unique<std::atomic<std::uint64_t>[]>(size);
    for (std::size_t i = 0; i < size_; ++i) stamps_[i].store(0, std::memory_order_relaxed);
  }
}

void Window::set_access_mode(AccessMode mode, std::chrono::nanoseconds overhead) {
  mode_ = mode;
  overhead_ = overhead;
}

void Window::check_region(std::size_t offset, std::size_t count) const {
  if (offset > size_ || count > size_ - offset) {
    throw ContractError("Window " + std::to_string(owner_) + ": region [" +
                        std::to_string(offset) + ", " + std::to_string(offset + count) +
                        ") out of bounds (size " + std::to_string(size_) + ")");
  }
  if (!epoch_open()) throw ContractError("Window: put outside an open access epoch");
}

void Window::begin_access() {
  if (mode_ != AccessMode::lock_per_access) return;
  access_lock_.lock();
  const auto until = std::chrono::steady_clock::now() + overhead_;
  while (std::chrono::steady_clock::now() < until) {
  }
}

void Window::end_access() {
  if (mode_ == AccessMode::lock_per_access) access_lock_.unlock();
}

void Window::put(std::size_t offset, std::span<const double> data) {
  check_region(offset, data.size());
  begin_access();
  for (std::size_t k = 0; k < data.size(); ++k) {
    data_[offset + k].store(data[k], std::memory_order_relaxed);
  }
  end_access();
}

void Window::put_stamped(std::size_t offset, std::span<const double> data, std::uint64_t stamp) {
  if (!stamps_) throw ContractError("Window: put_stamped on an unstamped window");
  check_region(offset, data.size());
  begin_access();
  for (std::size_t k = 0; k < data.size(); ++k) {
    data_[offset + k].store(data[k], std::memory_order_relaxed);
    stamps_[offset + k].store(stamp, std::memory_order_release);
  }
  end_access();
}

void Window::get(std::size_t offset, std::span<double> out) const {
  if (offset > size_ || out.size() > size_ - offset) {
    throw ContractError("Window: read region out of bounds");
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = data_[offset + k].load(std::memory_order_relaxed);
  }
}

void Window::fill(std::size_t offset, std::size_t count, double value) {
  if (offset > size_ || count > size_ - offset) throw ContractError("Window: fill out of bounds");
  for (std::size_t k = 0; k < count; ++k) {
    data_[offset + k].store(value, std::memory_order_relaxed);
  }
}

Barrier::Barrier(std::size_t parties, std::chrono::milliseconds timeout)
    : parties_(parties), timeout_(timeout) {
  if (parties == 0) throw ContractError("Barrier: need at least one party");
}

void Barrier::arrive_and_wait() {
  std::unique_lock lock(mutex_);
  if (broken_) throw CommTimeout("barrier aborted");
  const auto phase = phase_;
  if (++waiting_ == parties_) {
    waiting_ = 0;
    ++phase_;
    cv_.notify_all();
    return;
  }
  const bool done =
      cv_.wait_for(lock, timeout_, [&] { return phase_ != phase || broken_; });
  if (broken_) throw CommTimeout("barrier aborted");
  if (!done) {
    broken_ = true;
    cv_.notify_all();
    throw CommTimeout("barrier timed out after " + std::to_string(timeout_.count()) +
                      " ms with " + std::to_string(waiting_) + " of " +
                      std::to_string(parties_) + " parties");
  }
}

void Barrier::abort() {
  std::lock_guard lock(mutex_);
  broken_ = true;
  cv_.notify_all();
}

}  // namespace asyncdd::comm
