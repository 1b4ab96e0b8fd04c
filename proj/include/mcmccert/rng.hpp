#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>

namespace mcmccert {

// Counter-based random stream. Each stream is identified by (seed, stream_id)
// and produces the output of a SplitMix64 walk over its own counter, so
// replica i always sees the same numbers no matter which thread runs it.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : counter_(0), key_(derive_key(seed, stream_id)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() { return mix(key_ + (++counter_) * kGamma); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; one spare cached per stream.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    double u1 = (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform01();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // Index into a discrete distribution given its cumulative weights
  // (cdf is nondecreasing with cdf[last] ~= 1).
  Eigen::Index categorical(const Eigen::VectorXd& cdf) {
    double u = uniform01();
    Eigen::Index lo = 0, hi = cdf.size() - 1;
    while (lo < hi) {
      Eigen::Index mid = (lo + hi) / 2;
      if (u < cdf[mid])
        hi = mid;
      else
        lo = mid + 1;
    }
    return lo;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream_id) {
    return mix(seed + kGamma) ^ mix(stream_id * kGamma + 0x1F83D9ABFB41BD6Bull);
  }

  std::uint64_t counter_;
  std::uint64_t key_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mcmccert
