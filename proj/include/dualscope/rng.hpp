// Counter-based random numbers (Philox4x32-10). Streams are addressed by
// (seed, stream id) so Monte Carlo paths can be generated in any order, on
// any number of workers, with bit-identical results.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace dualscope::rng {

namespace detail {

inline constexpr uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr uint32_t kPhiloxW1 = 0xBB67AE85u;

}  // namespace detail

// One 128-bit Philox block: key = seed, counter = (stream, block index).
inline std::array<uint32_t, 4> philox_block(uint64_t seed, uint64_t stream,
                                            uint64_t block) {
  uint32_t k0 = static_cast<uint32_t>(seed);
  uint32_t k1 = static_cast<uint32_t>(seed >> 32);
  uint32_t c0 = static_cast<uint32_t>(block);
  uint32_t c1 = static_cast<uint32_t>(block >> 32);
  uint32_t c2 = static_cast<uint32_t>(stream);
  uint32_t c3 = static_cast<uint32_t>(stream >> 32);
  for (int round = 0; round < 10; ++round) {
    const uint64_t p0 = static_cast<uint64_t>(detail::kPhiloxM0) * c0;
    const uint64_t p1 = static_cast<uint64_t>(detail::kPhiloxM1) * c2;
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
    const uint32_t lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
    const uint32_t lo1 = static_cast<uint32_t>(p1);
    const uint32_t n0 = hi1 ^ c1 ^ k0;
    const uint32_t n1 = lo1;
    const uint32_t n2 = hi0 ^ c3 ^ k1;
    const uint32_t n3 = lo0;
    c0 = n0;
    c1 = n1;
    c2 = n2;
    c3 = n3;
    k0 += detail::kPhiloxW0;
    k1 += detail::kPhiloxW1;
  }
  return {c0, c1, c2, c3};
}

inline double u64_to_unit_double(uint64_t x) {
  // 53 significant bits mapped into the open interval (0, 1).
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

// Stateless standard normal draw at a fixed index of a stream. Each index
// maps to one Philox block; Box-Muller on the two embedded uniforms.
inline double normal_at(uint64_t seed, uint64_t stream, uint64_t index) {
  const auto b = philox_block(seed, stream, index);
  const uint64_t x0 = (static_cast<uint64_t>(b[0]) << 32) | b[1];
  const uint64_t x1 = (static_cast<uint64_t>(b[2]) << 32) | b[3];
  const double u1 = u64_to_unit_double(x0);
  const double u2 = u64_to_unit_double(x1);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

// Sequential view of one stream.
class Stream {
 public:
  Stream(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

  uint64_t next_u64() {
    if (pos_ >= 2) {
      block_ = philox_block(seed_, stream_, counter_++);
      pos_ = 0;
    }
    const int i = 2 * pos_++;
    return (static_cast<uint64_t>(block_[i]) << 32) | block_[i + 1];
  }

  double uniform() { return u64_to_unit_double(next_u64()); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  // Index into a discrete distribution given by nonnegative weights that sum
  // to `total`; inverse-CDF with a single uniform, fixed scan order. Rounding
  // tails fall back to the last index carrying positive weight.
  template <class WeightFn>
  int categorical(int n, double total, WeightFn&& w) {
    const double u = uniform() * total;
    double acc = 0.0;
    int last_positive = 0;
    for (int i = 0; i < n; ++i) {
      const double wi = w(i);
      if (wi > 0.0) last_positive = i;
      acc += wi;
      if (u <= acc && wi > 0.0) return i;
    }
    return last_positive;
  }

 private:
  uint64_t seed_;
  uint64_t stream_;
  uint64_t counter_ = 0;
  std::array<uint32_t, 4> block_{};
  int pos_ = 2;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dualscope::rng
