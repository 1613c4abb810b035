// Microbenchmarks for the hot paths: model estimation, order scans, the
// chi-squared quantile solver, the Q statistic, ROC sweeps, and synthetic
// ensemble generation.

#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>

#include "gwshm/ar.hpp"
#include "gwshm/chi_squared.hpp"
#include "gwshm/pipeline.hpp"
#include "gwshm/random.hpp"
#include "gwshm/signal.hpp"
#include "gwshm/stats.hpp"

namespace {

// A stable AR(4) process with unit-variance innovations.
std::vector<double> make_ar4_signal(std::size_t n, std::uint64_t seed) {
  gwshm::NormalSampler rng(seed);
  std::vector<double> y(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double value = rng();
    if (t >= 1) value += 1.79 * y[t - 1];
    if (t >= 2) value -= 1.85 * y[t - 2];
    if (t >= 3) value += 1.27 * y[t - 3];
    if (t >= 4) value -= 0.41 * y[t - 4];
    y[t] = value;
  }
  return y;
}

void BM_EstimateOls(benchmark::State& state) {
  const auto y = make_ar4_signal(static_cast<std::size_t>(state.range(0)), 7);
  const auto sys = gwshm::build_regression(y, 15);
  for (auto _ : state) {
    auto model = gwshm::estimate_ols(sys);
    benchmark::DoNotOptimize(model);
  }
}
BENCHMARK(BM_EstimateOls)->Arg(612)->Arg(10000);

void BM_OrderScan(benchmark::State& state) {
  const auto y = make_ar4_signal(612, 7);
  for (auto _ : state) {
    auto scan = gwshm::scan_orders(y, 2, 15, gwshm::OrderRule::min_bic);
    benchmark::DoNotOptimize(scan);
  }
}
BENCHMARK(BM_OrderScan);

void BM_Chi2Quantile(benchmark::State& state) {
  double p = 0.0;
  for (auto _ : state) {
    p += 1e-7;
    benchmark::DoNotOptimize(gwshm::chi2_quantile(0.999 - p, 15));
  }
}
BENCHMARK(BM_Chi2Quantile);

void BM_QStatistic(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  Eigen::MatrixXd a = Eigen::MatrixXd::Random(dim, dim);
  Eigen::MatrixXd p = a * a.transpose() + Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd ref = Eigen::VectorXd::Random(dim);
  Eigen::VectorXd u = ref + Eigen::VectorXd::Constant(dim, 0.01);
  for (auto _ : state)
    benchmark::DoNotOptimize(gwshm::q_statistic(u, ref, p));
}
BENCHMARK(BM_QStatistic)->Arg(4)->Arg(15);

void BM_RocSweep(benchmark::State& state) {
  std::vector<double> healthy, damaged;
  gwshm::NormalSampler rng(11);
  for (int i = 0; i < 200; ++i) {
    healthy.push_back(15.0 + rng());
    damaged.push_back(40.0 + 10.0 * rng());
  }
  for (auto _ : state) {
    auto curve = gwshm::roc(healthy, damaged, -100.0, 1e5, 1.0);
    benchmark::DoNotOptimize(curve);
  }
}
BENCHMARK(BM_RocSweep);

void BM_SynthesizeEnsemble(benchmark::State& state) {
  const gwshm::SyntheticSpec spec = gwshm::aluminum_like_spec();
  for (auto _ : state) {
    auto ensemble = gwshm::synthesize_ensemble(
        spec.burst, spec.states, spec.realizations, spec.length,
        spec.sample_rate, 1, spec.path_id);
    benchmark::DoNotOptimize(ensemble);
  }
}
BENCHMARK(BM_SynthesizeEnsemble);

}  // namespace

BENCHMARK_MAIN();
