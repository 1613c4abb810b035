#pragma once

#include <cstdint>
#include <random>

namespace gwshm {

/// splitmix64 finalizer: a cheap, well-mixed 64-bit hash used to derive
/// independent substream seeds from a master seed plus stream indices.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives a substream seed from a master seed and two stream coordinates
/// (e.g. state index and realization index).  Distinct coordinates give
/// statistically independent streams; the same coordinates always give the
/// same stream regardless of evaluation order.
std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a,
                            std::uint64_t b) noexcept;

/// Deterministic standard-normal sampler.
///
/// Wraps mt19937_64 with an explicit Box-Muller transform instead of
/// std::normal_distribution, whose algorithm is implementation-defined and
/// therefore not reproducible across standard libraries.  A given seed
/// yields the same sample sequence everywhere.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t stream_seed) : engine_(stream_seed) {}

  /// One N(0,1) variate.
  double operator()();

  /// Uniform variate on (0, 1].
  double uniform01();

 private:
  std::mt19937_64 engine_;
};

}  // namespace gwshm
