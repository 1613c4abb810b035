#include "gwshm/random.hpp"

#include <cmath>
#include <numbers>

namespace gwshm {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a,
                            std::uint64_t b) noexcept {
  return mix64(mix64(mix64(seed) ^ a) ^ b);
}

double NormalSampler::uniform01() {
  // Map to (0, 1]: never returns 0, so log(u) below is always finite.
  const std::uint64_t r = engine_();
  return (static_cast<double>(r >> 11) + 1.0) * 0x1.0p-53;
}

double NormalSampler::operator()() {
  // Basic-form Box-Muller, cosine branch only.  Slightly wasteful of
  // uniforms but stateless between calls, which keeps sample streams
  // independent of call grouping.
  const double u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace gwshm
