#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gwshm/ar.hpp"
#include "gwshm/signal.hpp"
#include "gwshm/stats.hpp"

namespace gwshm {

/// Synthetic data source: an ensemble generated at `sample_rate` and then
/// decimated by `downsample_factor` (1 = keep the generation rate).
struct SyntheticSpec {
  ToneBurstSpec burst;
  std::vector<SyntheticStateSpec> states;
  int realizations = 20;
  std::size_t length = 7344;
  double sample_rate = 24e6;
  int downsample_factor = 1;
  std::string path_id = "2-6";
};

/// Built-in surrogate resembling the aluminum-plate acquisition: a healthy
/// state plus four damage levels, 20 realizations each, generated at
/// 24 MHz and decimated to 612 samples at 2 MHz.
SyntheticSpec aluminum_like_spec();

/// Built-in surrogate resembling the composite-plate acquisition: a healthy
/// state plus six damage levels with the two highest levels closely spaced.
SyntheticSpec composite_like_spec();

/// Order selection: either a fixed user override (recorded as such in
/// reports) or a scan over [scan_min, scan_max] under `rule`.
struct OrderSelection {
  std::optional<int> fixed;
  int scan_min = 2;
  int scan_max = 15;
  OrderRule rule = OrderRule::min_bic;
};

enum class MethodKind { standard, svd, pca, manual };

/// Feature treatment applied between identification and testing.
struct MethodSpec {
  MethodKind kind = MethodKind::standard;
  int svd_m = 2;                          ///< retained parameters for svd
  std::optional<double> pca_energy_pct;   ///< retained-energy threshold
  std::optional<int> pca_m;               ///< fixed subspace dimension
  std::vector<Eigen::Index> manual_indices;  ///< 0-based parameter positions

  void validate() const;
};

/// Compact method tag used in output file names, e.g. "svd2", "pca99".
std::string method_tag(const MethodSpec& method);

/// Parses "standard", "svd[:m]", "pca[:NN%]", "pca:m=K", or
/// "manual:i,j,..." (0-based indices).
MethodSpec parse_method(const std::string& text);

struct RocSweep {
  double min = -100.0;
  double max = 1e5;
  double step = 1.0;
};

struct SpectrogramSpec {
  int window_len = 30;
  double overlap = 0.98;
  int nfft = 256;
};

/// Declarative description of one batch run; the JSON config file mirrors
/// this structure field for field and CLI flags override single fields.
struct RunConfig {
  // Data source: exactly one of the two.
  std::optional<std::filesystem::path> csv_path;
  std::optional<SyntheticSpec> synthetic;

  std::optional<std::string> path_id;  ///< required when the data has several paths
  std::string baseline_label = "healthy";
  OrderSelection order;
  EstimatorKind estimator = EstimatorKind::ols;
  CovarianceSource covariance = CovarianceSource::experimental;
  DeltaCovMode delta_mode = DeltaCovMode::doubled_baseline;
  MethodSpec method;
  RiskSpec risk;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;

  /// When set, only realization_index < library_realizations enters the
  /// library (baseline phase) and only the held-out remainder is inspected;
  /// when unset, all realizations serve both phases.
  std::optional<int> library_realizations;

  RocSweep roc_sweep;
  std::optional<SpectrogramSpec> spectrogram;
  int diagnostics_max_lag = 20;
  double diagnostics_alpha = 0.05;

  RunConfig() { risk.alpha = 0.01; }

  void validate() const;
};

RunConfig config_from_json(const nlohmann::json& j);
/// Serializes everything except out_dir (excluded so reports hash equal
/// across output locations).
nlohmann::json config_to_json(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& file);

/// Generates the configured synthetic ensemble and writes
/// out_dir/ensemble.csv.  Same config and seed give identical bytes.
void run_simulate(const RunConfig& config);

/// Fits per-realization models at the selected order and writes
/// out_dir/order_scan.csv, models/<state>_r<k>.json, diagnostics.csv,
/// identify_meta.json, and optionally spectrogram.csv.
void run_identify(const RunConfig& config);

/// Baseline phase + inspection phase: builds the state library, tests every
/// inspection record, and writes out_dir/report.json, library.json,
/// q_values.csv, confusion.csv.
void run_diagnose(const RunConfig& config);

/// Library + detection Q values swept into a ROC curve; writes
/// out_dir/roc_<path>_<method>_<covariance>.{csv,json}.
void run_roc(const RunConfig& config);

/// Damage-index evolution; writes out_dir/di.csv.
void run_di(const RunConfig& config);

}  // namespace gwshm
