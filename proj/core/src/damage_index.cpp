#include "gwshm/damage_index.hpp"

#include <algorithm>
#include <cmath>

#include "gwshm/error.hpp"
#include "gwshm/signal_io.hpp"

namespace gwshm {

DiResult damage_index(std::span<const double> y_o, std::span<const double> y_u) {
  if (y_o.size() != y_u.size())
    throw DataError("damage index needs equal-length signals");
  if (y_o.empty()) throw DataError("damage index needs non-empty signals");

  double energy_o = 0.0;
  double energy_u = 0.0;
  double cross = 0.0;
  for (std::size_t i = 0; i < y_o.size(); ++i) {
    energy_o += y_o[i] * y_o[i];
    energy_u += y_u[i] * y_u[i];
    cross += y_o[i] * y_u[i];
  }
  if (!(energy_o > 0.0)) throw DataError("baseline signal has zero energy");
  if (!(energy_u > 0.0)) throw DataError("inspection signal has zero energy");

  // With Y_u = y_u / sqrt(energy_u), the baseline is rescaled by its
  // projection coefficient onto Y_u; the squared difference then collapses
  // to 1 - cross^2 / (energy_o * energy_u), computed directly for accuracy.
  const double correlation_sq = (cross * cross) / (energy_o * energy_u);

  DiResult result;
  // Clamp away the -1e-16-scale round-off that proportional signals can
  // produce; the exact value is in [0, 1] by Cauchy-Schwarz.
  result.di = std::max(0.0, 1.0 - correlation_sq);
  return result;
}

std::vector<DiResult> di_evolution(const SignalEnsemble& ensemble,
                                   const std::string& baseline_state,
                                   const std::string& path) {
  const SignalEnsemble on_path = ensemble.where_path(path);

  // Mean baseline signal across its realizations.
  std::vector<double> baseline(on_path.record_length(), 0.0);
  int baseline_count = 0;
  for (const auto& rec : on_path.records) {
    if (rec.state_label != baseline_state) continue;
    for (std::size_t i = 0; i < baseline.size(); ++i) baseline[i] += rec.samples[i];
    ++baseline_count;
  }
  if (baseline_count == 0)
    throw DataError("no baseline records for state " + baseline_state +
                    " on path " + path);
  for (double& v : baseline) v /= static_cast<double>(baseline_count);

  std::vector<DiResult> results;
  for (const auto& rec : on_path.records) {
    if (rec.state_label == baseline_state) continue;
    DiResult r = damage_index(baseline, rec.samples);
    r.path_id = rec.path_id;
    r.state_label = rec.state_label;
    r.realization_index = rec.realization_index;
    results.push_back(std::move(r));
  }

  // Group by state (first-appearance order), realizations in record order.
  std::vector<std::string> order;
  for (const auto& r : results) {
    if (std::find(order.begin(), order.end(), r.state_label) == order.end())
      order.push_back(r.state_label);
  }
  std::stable_sort(results.begin(), results.end(),
                   [&order](const DiResult& a, const DiResult& b) {
                     const auto pos = [&order](const std::string& label) {
                       return std::find(order.begin(), order.end(), label) -
                              order.begin();
                     };
                     return pos(a.state_label) < pos(b.state_label);
                   });
  return results;
}

std::string di_csv(const std::vector<DiResult>& results) {
  std::string out = "state_label,realization_index,di\n";
  for (const auto& r : results) {
    out += r.state_label;
    out += ',';
    out += std::to_string(r.realization_index);
    out += ',';
    out += format_double(r.di);
    out += '\n';
  }
  return out;
}

}  // namespace gwshm
