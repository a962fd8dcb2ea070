#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace coarse {

/**
 * All randomness flows from one config seed. Each operation draws from its own
 * named substream so adding samples to one report never shifts another.
 * Bounded draws avoid std::uniform_int_distribution (implementation-defined
 * sequences) so outputs are byte-identical across standard libraries.
 */
class Substream {
 public:
  Substream(std::uint64_t seed, const std::string& name)
      : eng_(seed ^ fnv1a(name)) {}

  std::uint64_t next() { return eng_(); }

  /** Uniform draw in [0, n), unbiased via rejection. */
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do { v = eng_(); } while (v >= limit);
    return v % n;
  }

  /** Uniform integer in [lo, hi] inclusive. */
  long long range(long long lo, long long hi) {
    return lo + static_cast<long long>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

  static std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace coarse
