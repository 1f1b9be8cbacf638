#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace gchain {

namespace detail {

// splitmix64 finalizer; bijective on 64-bit ints.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t splitmix_next(std::uint64_t& s) {
  s += 0x9E3779B97F4A7C15ull;
  return mix64(s);
}

// uniform in the open interval (0,1); never 0, so log() stays finite
inline double to_unit(std::uint64_t v) {
  return (static_cast<double>(v >> 11) + 0.5) * 0x1.0p-53;
}

inline std::uint64_t sample_key(std::uint64_t seed, std::uint32_t stream, std::uint64_t index) {
  std::uint64_t h = mix64(seed + 0x9E3779B97F4A7C15ull);
  h = mix64(h ^ (0xD1B54A32D192ED03ull + stream));
  h = mix64(h ^ (0x8BB84B93962EACC9ull + index));
  return h;
}

}  // namespace detail

// Counter-based standard normal source.  The k-th vector drawn from a given
// (seed, stream_id) is a pure function of (seed, stream_id, k): it does not
// depend on call order, on how many vectors were drawn before, or on which
// thread asks.  Distinct stream_ids are independent streams; code that needs
// several independent draw sequences takes substreams at fixed offsets.
//
// Never mix fill_normal and fill_uniform on the same stream_id: the two read
// the same underlying word sequence.  Use a separate substream per purpose.
struct GaussianStream {
  std::uint64_t seed = 0;
  std::uint32_t stream_id = 0;

  GaussianStream substream(std::uint32_t offset) const {
    return GaussianStream{seed, stream_id + offset};
  }

  // k-th standard normal vector; Box-Muller over splitmix64 uniforms.
  void fill_normal(std::uint64_t k, std::span<double> out) const {
    std::uint64_t x = detail::sample_key(seed, stream_id, k);
    std::size_t i = 0;
    while (i < out.size()) {
      const double u1 = detail::to_unit(detail::splitmix_next(x));
      const double u2 = detail::to_unit(detail::splitmix_next(x));
      const double r = std::sqrt(-2.0 * std::log(u1));
      const double a = 6.283185307179586476925287 * u2;
      out[i++] = r * std::cos(a);
      if (i < out.size()) out[i++] = r * std::sin(a);
    }
  }

  std::vector<double> normal_vector(std::uint64_t k, std::size_t dim) const {
    std::vector<double> out(dim);
    fill_normal(k, out);
    return out;
  }

  // k-th vector of uniforms in (0,1).
  void fill_uniform(std::uint64_t k, std::span<double> out) const {
    std::uint64_t x = detail::sample_key(seed, stream_id, k);
    for (double& v : out) v = detail::to_unit(detail::splitmix_next(x));
  }
};

// One Monte Carlo result together with everything needed to reproduce it.
struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(samples)
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  std::uint32_t stream_id = 0;
};

// Welford accumulator; deterministic for a fixed insertion order.
struct RunningMoments {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double std_error() const {
    return n > 1 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0;
  }
};

}  // namespace gchain
