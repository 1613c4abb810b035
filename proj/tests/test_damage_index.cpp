#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <doctest.h>

#include "gwshm/damage_index.hpp"
#include "gwshm/error.hpp"
#include "gwshm/random.hpp"
#include "gwshm/signal.hpp"

using namespace gwshm;

namespace {

/// Literal-formula oracle: normalize the inspection signal, rescale the
/// baseline by its projection coefficient, and sum the squared difference.
double di_literal(const std::vector<double>& y_o, const std::vector<double>& y_u) {
  double energy_o = 0.0, energy_u = 0.0;
  for (const double v : y_o) energy_o += v * v;
  for (const double v : y_u) energy_u += v * v;
  std::vector<double> yu_hat(y_u.size());
  for (std::size_t i = 0; i < y_u.size(); ++i) yu_hat[i] = y_u[i] / std::sqrt(energy_u);
  double proj = 0.0;
  for (std::size_t i = 0; i < y_o.size(); ++i) proj += y_o[i] * yu_hat[i];
  const double scale = proj / energy_o;
  double di = 0.0;
  for (std::size_t i = 0; i < y_o.size(); ++i) {
    const double d = yu_hat[i] - scale * y_o[i];
    di += d * d;
  }
  return di;
}

std::vector<double> noisy_wave(std::uint64_t seed, double noise, double shift) {
  NormalSampler rng(seed);
  std::vector<double> y(200);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double t = static_cast<double>(i);
    y[i] = std::sin(0.13 * t + shift) + 0.4 * std::cos(0.31 * t) + noise * rng();
  }
  return y;
}

}  // namespace

TEST_CASE("damage_index is zero for identical and rescaled signals") {
  const std::vector<double> y = noisy_wave(1, 0.0, 0.0);
  CHECK(damage_index(y, y).di == 0.0);

  std::vector<double> scaled = y;
  for (double& v : scaled) v *= 3.7;
  CHECK(damage_index(y, scaled).di < 1e-14);
  CHECK(damage_index(scaled, y).di < 1e-14);

  // Negated signals are also perfectly correlated in this metric.
  std::vector<double> negated = y;
  for (double& v : negated) v = -v;
  CHECK(damage_index(y, negated).di == 0.0);
}

TEST_CASE("damage_index is one for orthogonal signals") {
  // sin and cos over full periods are orthogonal.
  std::vector<double> a(360), b(360);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / 36.0;
    a[i] = std::sin(t);
    b[i] = std::cos(t);
  }
  CHECK(damage_index(a, b).di == doctest::Approx(1.0).epsilon(1e-12));

  // Disjoint supports are trivially orthogonal.
  std::vector<double> left(10, 0.0), right(10, 0.0);
  left[2] = 1.0;
  right[7] = -2.0;
  CHECK(damage_index(left, right).di == 1.0);
}

TEST_CASE("damage_index stays within [0, 1] and matches the literal formula") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::vector<double> y_o = noisy_wave(seed, 0.3, 0.0);
    const std::vector<double> y_u = noisy_wave(seed + 100, 0.3, 0.2);
    const double di = damage_index(y_o, y_u).di;
    CHECK(di >= 0.0);
    CHECK(di <= 1.0 + 1e-12);
    CHECK(di == doctest::Approx(di_literal(y_o, y_u)).epsilon(1e-12));
  }
}

TEST_CASE("damage_index grows with the distortion level") {
  const std::vector<double> base = noisy_wave(7, 0.0, 0.0);
  double previous = -1.0;
  for (const double noise : {0.01, 0.1, 0.5, 2.0}) {
    NormalSampler rng(400);
    std::vector<double> distorted = base;
    for (double& v : distorted) v += noise * rng();
    const double di = damage_index(base, distorted).di;
    CHECK(di > previous);
    previous = di;
  }
}

TEST_CASE("damage_index rejects unusable inputs") {
  const std::vector<double> y = {1.0, 2.0, 3.0};
  const std::vector<double> longer = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> zeros = {0.0, 0.0, 0.0};
  const std::vector<double> empty;

  CHECK_THROWS_AS((void)damage_index(y, longer), DataError);
  CHECK_THROWS_AS((void)damage_index(empty, empty), DataError);
  CHECK_THROWS_WITH_AS((void)damage_index(zeros, y),
                       doctest::Contains("baseline signal has zero energy"),
                       DataError);
  CHECK_THROWS_WITH_AS((void)damage_index(y, zeros),
                       doctest::Contains("inspection signal has zero energy"),
                       DataError);
}

TEST_CASE("di_evolution compares every record against the mean baseline") {
  ToneBurstSpec burst;
  burst.cycles = 5;
  burst.center_frequency = 250e3;
  const double fs = 24e6;

  SyntheticStateSpec healthy;
  healthy.state_label = "healthy";
  healthy.arrival_delay_s = 20e-6;
  healthy.noise_std = 0.005;

  // Rising scatter gain distorts the waveform progressively.
  std::vector<SyntheticStateSpec> states = {healthy};
  for (int level = 1; level <= 3; ++level) {
    SyntheticStateSpec damaged = healthy;
    damaged.state_label = "damage-" + std::to_string(level);
    damaged.scatter_gain = 0.25 * level;
    damaged.scatter_delay_s = 2.2e-6;
    states.push_back(damaged);
  }
  const SignalEnsemble ens =
      synthesize_ensemble(burst, states, 4, 2000, fs, 17, "2-6");

  const std::vector<DiResult> results = di_evolution(ens, "healthy", "2-6");
  REQUIRE(results.size() == 12);  // three damage states, four realizations

  // Records arrive grouped by state in first-appearance order.
  for (int level = 1; level <= 3; ++level) {
    for (int r = 0; r < 4; ++r) {
      const DiResult& res = results[static_cast<std::size_t>((level - 1) * 4 + r)];
      CHECK(res.state_label == "damage-" + std::to_string(level));
      CHECK(res.realization_index == r);
      CHECK(res.path_id == "2-6");
    }
  }

  // Mean DI rises with the scatter gain.
  double prev_mean = -1.0;
  for (int level = 1; level <= 3; ++level) {
    double mean = 0.0;
    for (int r = 0; r < 4; ++r)
      mean += results[static_cast<std::size_t>((level - 1) * 4 + r)].di;
    mean /= 4.0;
    CHECK(mean > prev_mean);
    prev_mean = mean;
  }

  SUBCASE("a missing baseline state is a data error") {
    CHECK_THROWS_WITH_AS((void)di_evolution(ens, "pristine", "2-6"),
                         doctest::Contains("no baseline records"), DataError);
  }

  SUBCASE("an unknown path is a data error") {
    CHECK_THROWS_AS((void)di_evolution(ens, "healthy", "9-9"), DataError);
  }
}

TEST_CASE("di_csv renders one row per result") {
  std::vector<DiResult> results(2);
  results[0].di = 0.25;
  results[0].state_label = "damage-1";
  results[0].realization_index = 0;
  results[1].di = 0.5;
  results[1].state_label = "damage-1";
  results[1].realization_index = 1;

  CHECK(di_csv(results) ==
        "state_label,realization_index,di\n"
        "damage-1,0,0.25\n"
        "damage-1,1,0.5\n");
  CHECK(di_csv({}) == "state_label,realization_index,di\n");
}
