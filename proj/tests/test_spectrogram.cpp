#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "gwshm/error.hpp"
#include "gwshm/signal.hpp"
#include "gwshm/spectrogram.hpp"

using namespace gwshm;

namespace {

SignalRecord make_record(std::vector<double> samples, double rate) {
  SignalRecord rec;
  rec.samples = std::move(samples);
  rec.sample_rate = rate;
  rec.path_id = "2-6";
  rec.state_label = "healthy";
  rec.realization_index = 0;
  return rec;
}

double hamming(std::size_t i, std::size_t n) {
  const double phase =
      2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1);
  return 0.54 - 0.46 * std::cos(phase);
}

}  // namespace

TEST_CASE("spectrogram frame and bin layout follow the hop rule") {
  SUBCASE("dense overlap gives hop 1") {
    SignalRecord rec = make_record(std::vector<double>(612, 0.0), 2e6);
    const Spectrogram sp = spectrogram(rec, 30, 0.98, 256);
    // hop = round(30 * 0.02) = 1; frames = (612 - 30) / 1 + 1.
    CHECK(sp.magnitude.rows() == 583);
    CHECK(sp.magnitude.cols() == 129);  // 256 / 2 + 1
    REQUIRE(sp.frequencies.size() == 129);
    REQUIRE(sp.times.size() == 583);
    for (std::size_t k = 0; k < sp.frequencies.size(); ++k)
      CHECK(sp.frequencies[k] ==
            doctest::Approx(static_cast<double>(k) * 2e6 / 256.0).epsilon(1e-15));
    // Frame f starts at sample f and is centered half a window later.
    for (std::size_t f = 0; f < sp.times.size(); f += 97)
      CHECK(sp.times[f] ==
            doctest::Approx((static_cast<double>(f) + 0.5 * 29.0) / 2e6)
                .epsilon(1e-15));
  }

  SUBCASE("half overlap hops by half a window") {
    SignalRecord rec = make_record(std::vector<double>(128, 1.0), 1000.0);
    const Spectrogram sp = spectrogram(rec, 32, 0.5, 32);
    CHECK(sp.magnitude.rows() == 7);  // (128 - 32) / 16 + 1
    CHECK(sp.magnitude.cols() == 17);
    CHECK(sp.times[1] - sp.times[0] == doctest::Approx(16.0 / 1000.0).epsilon(1e-12));
  }

  SUBCASE("zero overlap tiles the record") {
    SignalRecord rec = make_record(std::vector<double>(100, 0.0), 1000.0);
    const Spectrogram sp = spectrogram(rec, 20, 0.0, 20);
    CHECK(sp.magnitude.rows() == 5);
  }
}

TEST_CASE("a sinusoid on a bin center concentrates in that bin") {
  const double fs = 1000.0;
  const int nfft = 64;
  const int k0 = 5;
  const double f0 = k0 * fs / nfft;  // exactly on bin 5
  std::vector<double> samples(64);
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = std::sin(2.0 * std::numbers::pi * f0 * static_cast<double>(i) / fs);
  SignalRecord rec = make_record(std::move(samples), fs);

  const Spectrogram sp = spectrogram(rec, 64, 0.0, nfft, Taper::rectangular);
  REQUIRE(sp.magnitude.rows() == 1);
  REQUIRE(sp.magnitude.cols() == 33);

  Eigen::Index peak = 0;
  sp.magnitude.row(0).maxCoeff(&peak);
  CHECK(peak == k0);
  // A unit sine aligned to a bin carries N/2 into that bin and nothing else.
  CHECK(sp.magnitude(0, k0) == doctest::Approx(32.0).epsilon(1e-9));
  for (Eigen::Index k = 0; k < sp.magnitude.cols(); ++k) {
    if (k == k0) continue;
    CHECK(std::abs(sp.magnitude(0, k)) < 1e-9);
  }
}

TEST_CASE("a constant signal concentrates at DC with the taper's gain") {
  std::vector<double> samples(48, 2.0);
  SignalRecord rec = make_record(std::move(samples), 100.0);
  const Spectrogram sp = spectrogram(rec, 48, 0.0, 48, Taper::hamming);
  double taper_sum = 0.0;
  for (std::size_t i = 0; i < 48; ++i) taper_sum += hamming(i, 48);
  CHECK(sp.magnitude(0, 0) == doctest::Approx(2.0 * taper_sum).epsilon(1e-12));
  CHECK(sp.frequencies[0] == 0.0);
}

TEST_CASE("magnitudes match a direct DFT of the tapered, zero-padded frame") {
  // Deterministic broadband-ish signal.
  std::vector<double> samples(90);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double t = static_cast<double>(i);
    samples[i] = std::sin(0.31 * t) + 0.5 * std::cos(1.07 * t + 0.2) +
                 0.25 * std::sin(2.9 * t * t / 90.0);
  }
  SignalRecord rec = make_record(std::move(samples), 500.0);

  const int window_len = 25;
  const int nfft = 40;  // longer than the window: implicit zero padding
  const double overlap = 0.6;
  const Spectrogram sp = spectrogram(rec, window_len, overlap, nfft, Taper::hamming);

  const std::size_t hop = 10;  // round(25 * 0.4)
  const std::size_t frames = (90 - 25) / hop + 1;
  REQUIRE(sp.magnitude.rows() == static_cast<Eigen::Index>(frames));

  for (std::size_t f = 0; f < frames; ++f) {
    for (int k = 0; k <= nfft / 2; ++k) {
      std::complex<double> acc(0.0, 0.0);
      for (int i = 0; i < window_len; ++i) {
        const double x = hamming(static_cast<std::size_t>(i),
                                 static_cast<std::size_t>(window_len)) *
                         rec.samples[f * hop + static_cast<std::size_t>(i)];
        const double angle = -2.0 * std::numbers::pi * k * i / nfft;
        acc += x * std::polar(1.0, angle);
      }
      CHECK(sp.magnitude(static_cast<Eigen::Index>(f), k) ==
            doctest::Approx(std::abs(acc)).epsilon(1e-9).scale(1.0));
    }
  }
}

TEST_CASE("spectrogram validates its arguments") {
  SignalRecord rec = make_record(std::vector<double>(64, 1.0), 1000.0);
  CHECK_THROWS_AS((void)spectrogram(rec, 1, 0.5, 64), ConfigError);
  CHECK_THROWS_AS((void)spectrogram(rec, 65, 0.5, 128), ConfigError);
  CHECK_THROWS_AS((void)spectrogram(rec, 32, 1.0, 64), ConfigError);
  CHECK_THROWS_AS((void)spectrogram(rec, 32, -0.1, 64), ConfigError);
  CHECK_THROWS_AS((void)spectrogram(rec, 32, 0.5, 31), ConfigError);
  CHECK_NOTHROW((void)spectrogram(rec, 64, 0.0, 64));

  SignalRecord empty = rec;
  empty.samples.clear();
  CHECK_THROWS_AS((void)spectrogram(empty, 8, 0.0, 8), DataError);
}
