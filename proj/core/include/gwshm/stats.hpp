#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "gwshm/reduce.hpp"

namespace gwshm {

enum class CovarianceSource { experimental, theoretical };

std::string to_string(CovarianceSource source);
CovarianceSource covariance_source_from_string(const std::string& name);

/// Which covariance enters the Q-statistic denominator:
///  - doubled_baseline: delta P = 2 P_ref (both vectors treated as draws
///    from the reference state — the usual healthy-hypothesis test);
///  - baseline_plus_inspection: delta P = P_ref + P_u with the inspection
///    model's own covariance.
enum class DeltaCovMode { doubled_baseline, baseline_plus_inspection };

/// Detection risk: exactly one of a type-I error level alpha (threshold
/// chi2_{1-alpha}(d)) or a manually chosen threshold.
struct RiskSpec {
  std::optional<double> alpha;
  std::optional<double> manual_threshold;

  static RiskSpec from_alpha(double a);
  static RiskSpec from_threshold(double tau);

  /// Throws ConfigError unless exactly one mode is set and in range.
  void validate() const;
  /// The decision threshold for d degrees of freedom.
  double threshold(int dof) const;
};

/// Mean parameter vector and covariance characterizing one structural state.
struct StateModel {
  Eigen::VectorXd theta_mean;
  Eigen::MatrixXd covariance;
};

/// Reduction fitted on the baseline, applied identically everywhere.
using Reduction = std::variant<std::monostate, SvdSelection, PcaBasis>;

/// Everything the inspection phase needs: the baseline state (with the
/// per-realization parameter vectors behind it), one StateModel per known
/// damage state, and the reduction those vectors already live in.
struct StateLibrary {
  std::string baseline_label;
  StateModel baseline;
  std::vector<Eigen::VectorXd> baseline_thetas;  ///< reduced, per realization
  std::vector<std::pair<std::string, StateModel>> damage_states;
  CovarianceSource covariance_source = CovarianceSource::experimental;
  Reduction reduction;

  int dimension() const;  ///< parameter dimension after reduction
  void validate() const;
};

/// One hypothesis-test evaluation.
struct QTest {
  double q_value = 0.0;
  int dof = 0;
  std::optional<double> alpha;  ///< empty in manual-threshold mode
  double threshold = 0.0;
  bool damaged = false;  ///< true when q_value > threshold
};

/// Result of the quadratic form delta' inv(delta_cov) delta with the
/// eigenvalue-floored pseudo-inverse fallback for singular covariances.
struct QuadFormResult {
  double value = 0.0;
  int effective_rank = 0;   ///< eigenvalues above the pseudo-inverse floor
  bool floored = false;     ///< true when any eigenvalue was raised to the floor
};

/// Unbiased sample covariance of a set of equal-length parameter vectors
/// about their sample mean.  Requires >= 2 vectors.
Eigen::MatrixXd experimental_covariance(const std::vector<Eigen::VectorXd>& thetas);

/// delta' inv(delta_cov) delta via symmetric eigendecomposition.  Nearly
/// singular delta_cov (eigenvalues below 1e-12 times the largest) is
/// handled by flooring those eigenvalues, reported through `floored` and
/// `effective_rank`; an all-zero matrix throws NumericError.
QuadFormResult inverse_quadratic_form(const Eigen::VectorXd& delta,
                                      const Eigen::MatrixXd& delta_cov);

/// The Q statistic Q = (theta_u - theta_ref)' (2 P_ref)^-1 (theta_u - theta_ref),
/// chi-squared with dim degrees of freedom when theta_u and theta_ref are
/// independent draws from N(theta, P_ref).
double q_statistic(const Eigen::VectorXd& theta_u, const Eigen::VectorXd& theta_ref,
                   const Eigen::MatrixXd& p_ref);

/// Baseline hypothesis test of an inspection parameter vector (already in
/// the library's reduced coordinates): healthy iff Q <= threshold.
/// `p_u` supplies the inspection covariance for the
/// baseline_plus_inspection mode and is otherwise ignored.
QTest detect(const StateLibrary& lib, const Eigen::VectorXd& theta_u,
             const RiskSpec& risk,
             DeltaCovMode mode = DeltaCovMode::doubled_baseline,
             const Eigen::MatrixXd* p_u = nullptr);

/// Multi-hypothesis identification across the library's damage states.
struct Identification {
  std::string label;  ///< best matching state, or "unidentified"
  std::vector<std::pair<std::string, double>> q_per_state;
};

inline constexpr const char* kUnidentifiedLabel = "unidentified";

/// Tests theta_u against every damage state (each with its own covariance,
/// doubled) and assigns the minimum-Q state among those passing their
/// threshold; "unidentified" when none pass.
Identification identify(const StateLibrary& lib, const Eigen::VectorXd& theta_u,
                        const RiskSpec& risk);

/// Detection/identification outcome of one inspection record, the unit the
/// confusion summary consumes.
struct DetectionOutcome {
  std::string true_state;
  int realization_index = 0;
  QTest test;
  std::string assigned_label;  ///< identify() result for this record
};

struct RocCurve {
  std::vector<double> thresholds;
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.0;

  std::size_t size() const { return thresholds.size(); }
};

/// Threshold sweep tau = sweep_min, sweep_min + step, ... <= sweep_max:
/// fpr(tau) = fraction(q_healthy > tau), tpr(tau) = fraction(q_damaged > tau);
/// auc by trapezoid over (fpr, tpr) sorted by fpr.
RocCurve roc(const std::vector<double>& q_healthy,
             const std::vector<double>& q_damaged, double sweep_min,
             double sweep_max, double sweep_step);

struct Fraction {
  int count = 0;
  int total = 0;
};

/// The summary table: false alarms on the healthy state, misses per damage
/// state, and the identification matrix (per true damage state, counts of
/// records assigned to each hypothesis including "unidentified").
struct ConfusionTable {
  Fraction false_alarms;
  std::vector<std::pair<std::string, Fraction>> missed_per_state;
  std::vector<std::string> hypothesis_labels;  ///< damage states + "unidentified"
  std::vector<std::pair<std::string, std::vector<int>>> identification_counts;
};

/// Aggregates per-record outcomes.  `damage_labels` fixes row and column
/// order; outcomes of states not listed are rejected.
ConfusionTable summarize(const std::vector<DetectionOutcome>& outcomes,
                         const std::string& baseline_label,
                         const std::vector<std::string>& damage_labels);

void to_json(nlohmann::json& j, const StateLibrary& lib);
void from_json(const nlohmann::json& j, StateLibrary& lib);
void to_json(nlohmann::json& j, const ConfusionTable& table);

/// Long-format CSV of a confusion table
/// (metric, true_state, hypothesis, count, total).
std::string confusion_csv(const ConfusionTable& table,
                          const std::string& baseline_label);

}  // namespace gwshm
