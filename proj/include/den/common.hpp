#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace den {

/// Raised when input data (files, vectors, labels) violates a contract.
/// The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

// Exact floating-point accumulator (Shewchuk's nonoverlapping partials,
// same algorithm as Python's math.fsum). value() is the correctly rounded
// sum of everything added so far, independent of insertion order. Used for
// neighborhood prefix sums: two neighborhoods with the same member set get
// bit-identical means even when rows traverse members in different orders.
class ExactSum {
 public:
  void reset() { partials_.clear(); }

  void add(double x) {
    std::size_t used = 0;
    for (std::size_t j = 0; j < partials_.size(); ++j) {
      double y = partials_[j];
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[used++] = lo;
      x = hi;
    }
    partials_.resize(used);
    partials_.push_back(x);
  }

  double value() const {
    if (partials_.empty()) return 0.0;
    std::size_t j = partials_.size() - 1;
    double hi = partials_[j];
    double lo = 0.0;
    while (j > 0) {
      const double x = hi;
      const double y = partials_[--j];
      hi = x + y;
      const double yr = hi - x;
      lo = y - yr;
      if (lo != 0.0) break;
    }
    // round-half-even correction when the residue is exactly half an ulp
    if (j > 0 && ((lo < 0.0 && partials_[j - 1] < 0.0) ||
                  (lo > 0.0 && partials_[j - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

 private:
  std::vector<double> partials_;
};

// Welford running mean. Exact for constant input: adding x == mean leaves
// the mean untouched, so a group of identical errors reports exactly that
// value as its mean.
class RunningMean {
 public:
  void add(double x) {
    ++count_;
    mean_ += (x - mean_) / static_cast<double>(count_);
  }
  double mean() const { return mean_; }
  std::size_t count() const { return count_; }

 private:
  double mean_ = 0.0;
  std::size_t count_ = 0;
};

// Runs fn(i) for i in [0, count). Work is split into contiguous chunks,
// one per worker; every fn(i) writes only state owned by index i, so the
// result is identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = 1;
  if (threads > count) threads = static_cast<unsigned>(count ? count : 1);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t chunk = (count + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  std::mutex err_mutex;
  std::exception_ptr first_error;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = static_cast<std::size_t>(t) * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::uint64_t fnv1a64(const void* data, std::size_t size,
                             std::uint64_t state = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state ^= p[i];
    state *= 0x100000001b3ULL;
  }
  return state;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Independent seed for a named substream of a user-facing seed.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t tag) {
  return splitmix64(seed ^ (0x9E3779B97F4A7C15ULL * (tag + 1)));
}

}  // namespace detail
}  // namespace den
