#pragma once

#include <span>
#include <string>
#include <vector>

#include "gwshm/signal.hpp"

namespace gwshm {

/// Normalized-difference damage index of one inspection record.
struct DiResult {
  double di = 0.0;
  std::string path_id;
  std::string state_label;
  int realization_index = 0;
};

/// Shape distance between an inspection signal y_u and a baseline y_o:
/// with Y_u = y_u / sqrt(sum y_u^2) and Y_o = y_o * sum(y_o . Y_u) / sum y_o^2,
/// DI = sum (Y_u - Y_o)^2.  Zero for identical shapes (any positive
/// rescaling), one for orthogonal signals; always within [0, 1].
DiResult damage_index(std::span<const double> y_o, std::span<const double> y_u);

/// DI of every non-baseline record on `path` against the mean baseline
/// signal, in record order grouped per state.
std::vector<DiResult> di_evolution(const SignalEnsemble& ensemble,
                                   const std::string& baseline_state,
                                   const std::string& path);

/// Plot-ready CSV (state_label, realization_index, di).
std::string di_csv(const std::vector<DiResult>& results);

}  // namespace gwshm
