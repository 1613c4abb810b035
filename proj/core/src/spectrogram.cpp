#include "gwshm/spectrogram.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "gwshm/error.hpp"

namespace gwshm {

namespace {

double frame_taper(Taper window, std::size_t i, std::size_t n) {
  if (n < 2) return 1.0;
  const double phase =
      2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1);
  switch (window) {
    case Taper::rectangular:
      return 1.0;
    case Taper::hamming:
      return 0.54 - 0.46 * std::cos(phase);
    case Taper::hann:
      return 0.5 - 0.5 * std::cos(phase);
  }
  throw ConfigError("unknown taper");
}

}  // namespace

Spectrogram spectrogram(const SignalRecord& record, int window_len,
                        double overlap_fraction, int nfft, Taper window) {
  record.validate();
  const std::size_t n = record.samples.size();
  if (window_len < 2) throw ConfigError("spectrogram window must be >= 2 samples");
  if (static_cast<std::size_t>(window_len) > n)
    throw ConfigError("spectrogram window exceeds record length");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw ConfigError("spectrogram overlap fraction must be in [0, 1)");
  if (nfft < window_len)
    throw ConfigError("spectrogram nfft must be >= window length");

  const std::size_t hop = static_cast<std::size_t>(std::max<long long>(
      1, std::llround(window_len * (1.0 - overlap_fraction))));
  const std::size_t frames = (n - static_cast<std::size_t>(window_len)) / hop + 1;
  const std::size_t bins = static_cast<std::size_t>(nfft) / 2 + 1;
  const std::size_t len = static_cast<std::size_t>(window_len);

  std::vector<double> taper(len);
  for (std::size_t i = 0; i < len; ++i) taper[i] = frame_taper(window, i, len);

  // Per-bin twiddle increment exp(-2 pi i k / nfft); within a frame the bin
  // sum advances by complex rotation instead of fresh trig calls.
  std::vector<std::complex<double>> step(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double angle =
        -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(nfft);
    step[k] = std::polar(1.0, angle);
  }

  Spectrogram out;
  out.magnitude.resize(static_cast<Eigen::Index>(frames),
                       static_cast<Eigen::Index>(bins));
  out.frequencies.resize(bins);
  out.times.resize(frames);
  for (std::size_t k = 0; k < bins; ++k)
    out.frequencies[k] =
        static_cast<double>(k) * record.sample_rate / static_cast<double>(nfft);

  std::vector<double> frame(len);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * hop;
    for (std::size_t i = 0; i < len; ++i)
      frame[i] = taper[i] * record.samples[start + i];
    out.times[f] = (static_cast<double>(start) + 0.5 * (len - 1)) / record.sample_rate;

    for (std::size_t k = 0; k < bins; ++k) {
      std::complex<double> twiddle(1.0, 0.0);
      std::complex<double> acc(0.0, 0.0);
      for (std::size_t i = 0; i < len; ++i) {
        acc += frame[i] * twiddle;
        twiddle *= step[k];
      }
      out.magnitude(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) =
          std::abs(acc);
    }
  }
  return out;
}

}  // namespace gwshm
