#include "gwshm/stats.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "gwshm/chi_squared.hpp"
#include "gwshm/error.hpp"
#include "gwshm/json_convert.hpp"

namespace gwshm {

std::string to_string(CovarianceSource source) {
  return source == CovarianceSource::experimental ? "experimental" : "theoretical";
}

CovarianceSource covariance_source_from_string(const std::string& name) {
  if (name == "experimental") return CovarianceSource::experimental;
  if (name == "theoretical") return CovarianceSource::theoretical;
  throw ConfigError("unknown covariance source '" + name +
                    "' (expected experimental or theoretical)");
}

RiskSpec RiskSpec::from_alpha(double a) {
  RiskSpec spec;
  spec.alpha = a;
  spec.validate();
  return spec;
}

RiskSpec RiskSpec::from_threshold(double tau) {
  RiskSpec spec;
  spec.manual_threshold = tau;
  spec.validate();
  return spec;
}

void RiskSpec::validate() const {
  if (alpha.has_value() == manual_threshold.has_value())
    throw ConfigError("risk needs exactly one of alpha or manual threshold");
  if (alpha && !(*alpha > 0.0 && *alpha < 1.0))
    throw ConfigError("alpha must be in (0, 1)");
  if (manual_threshold && !std::isfinite(*manual_threshold))
    throw ConfigError("manual threshold must be finite");
}

double RiskSpec::threshold(int dof) const {
  validate();
  if (manual_threshold) return *manual_threshold;
  return chi2_quantile(1.0 - *alpha, dof);
}

int StateLibrary::dimension() const {
  return static_cast<int>(baseline.theta_mean.size());
}

void StateLibrary::validate() const {
  const Eigen::Index d = baseline.theta_mean.size();
  if (d < 1) throw DataError("library baseline has empty parameter vector");
  if (baseline_label.empty()) throw DataError("library needs a baseline label");
  const auto check_state = [d](const std::string& label, const StateModel& s) {
    if (s.theta_mean.size() != d)
      throw DataError("state " + label + ": parameter dimension mismatch");
    if (s.covariance.rows() != d || s.covariance.cols() != d)
      throw DataError("state " + label + ": covariance dimension mismatch");
  };
  check_state(baseline_label, baseline);
  for (const auto& [label, state] : damage_states) {
    if (label == baseline_label)
      throw DataError("damage state reuses the baseline label");
    check_state(label, state);
  }
  for (const auto& theta : baseline_thetas) {
    if (theta.size() != d)
      throw DataError("per-realization baseline vector dimension mismatch");
  }
}

Eigen::MatrixXd experimental_covariance(const std::vector<Eigen::VectorXd>& thetas) {
  if (thetas.size() < 2)
    throw DataError("sample covariance needs >= 2 parameter vectors");
  const Eigen::Index d = thetas.front().size();
  for (const auto& t : thetas) {
    if (t.size() != d)
      throw DataError("sample covariance needs equal-dimension vectors");
  }

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& t : thetas) mean += t;
  mean /= static_cast<double>(thetas.size());

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& t : thetas) {
    const Eigen::VectorXd c = t - mean;
    cov += c * c.transpose();
  }
  cov /= static_cast<double>(thetas.size() - 1);
  return 0.5 * (cov + cov.transpose()).eval();
}

QuadFormResult inverse_quadratic_form(const Eigen::VectorXd& delta,
                                      const Eigen::MatrixXd& delta_cov) {
  const Eigen::Index d = delta.size();
  if (d < 1) throw DataError("quadratic form needs a non-empty vector");
  if (delta_cov.rows() != d || delta_cov.cols() != d)
    throw DataError("quadratic form dimension mismatch");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      0.5 * (delta_cov + delta_cov.transpose()));
  if (eig.info() != Eigen::Success)
    throw NumericError("covariance eigendecomposition failed");

  const double largest = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (!(largest > 0.0))
    throw NumericError("covariance is zero; the quadratic form is undefined");

  // Eigenvalue-floored pseudo-inverse: directions with negligible (or
  // negative round-off) variance are clamped to the floor instead of
  // inverted outright, keeping the form finite and non-negative.
  const double floor = 1e-12 * largest;
  QuadFormResult out;
  const Eigen::VectorXd z = eig.eigenvectors().transpose() * delta;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double lambda = eig.eigenvalues()[i];
    if (lambda > floor) {
      ++out.effective_rank;
      out.value += z[i] * z[i] / lambda;
    } else {
      out.floored = true;
      out.value += z[i] * z[i] / floor;
    }
  }
  return out;
}

double q_statistic(const Eigen::VectorXd& theta_u, const Eigen::VectorXd& theta_ref,
                   const Eigen::MatrixXd& p_ref) {
  if (theta_u.size() != theta_ref.size())
    throw DataError("parameter vectors differ in dimension");
  return inverse_quadratic_form(theta_u - theta_ref, 2.0 * p_ref).value;
}

namespace {

QTest run_test(const Eigen::VectorXd& theta_u, const StateModel& ref,
               const RiskSpec& risk, DeltaCovMode mode,
               const Eigen::MatrixXd* p_u) {
  Eigen::MatrixXd delta_cov;
  if (mode == DeltaCovMode::doubled_baseline) {
    delta_cov = 2.0 * ref.covariance;
  } else {
    if (p_u == nullptr)
      throw ConfigError("baseline_plus_inspection mode needs the inspection covariance");
    if (p_u->rows() != ref.covariance.rows() || p_u->cols() != ref.covariance.cols())
      throw DataError("inspection covariance dimension mismatch");
    delta_cov = ref.covariance + *p_u;
  }

  QTest test;
  test.dof = static_cast<int>(ref.theta_mean.size());
  test.q_value = inverse_quadratic_form(theta_u - ref.theta_mean, delta_cov).value;
  test.alpha = risk.alpha;
  test.threshold = risk.threshold(test.dof);
  test.damaged = test.q_value > test.threshold;
  return test;
}

}  // namespace

QTest detect(const StateLibrary& lib, const Eigen::VectorXd& theta_u,
             const RiskSpec& risk, DeltaCovMode mode, const Eigen::MatrixXd* p_u) {
  lib.validate();
  if (theta_u.size() != lib.baseline.theta_mean.size())
    throw DataError("inspection vector dimension does not match library");
  return run_test(theta_u, lib.baseline, risk, mode, p_u);
}

Identification identify(const StateLibrary& lib, const Eigen::VectorXd& theta_u,
                        const RiskSpec& risk) {
  lib.validate();
  if (lib.damage_states.empty())
    throw DataError("identification needs at least one damage state in the library");
  if (theta_u.size() != lib.baseline.theta_mean.size())
    throw DataError("inspection vector dimension does not match library");

  Identification out;
  out.label = kUnidentifiedLabel;
  double best_q = 0.0;
  for (const auto& [label, state] : lib.damage_states) {
    const QTest test =
        run_test(theta_u, state, risk, DeltaCovMode::doubled_baseline, nullptr);
    out.q_per_state.emplace_back(label, test.q_value);
    const bool passes = !test.damaged;
    if (passes && (out.label == kUnidentifiedLabel || test.q_value < best_q)) {
      out.label = label;
      best_q = test.q_value;
    }
  }
  return out;
}

RocCurve roc(const std::vector<double>& q_healthy,
             const std::vector<double>& q_damaged, double sweep_min,
             double sweep_max, double sweep_step) {
  if (q_healthy.empty() || q_damaged.empty())
    throw DataError("ROC needs non-empty healthy and damaged Q sets");
  if (!(sweep_step > 0.0) || !(sweep_max >= sweep_min))
    throw ConfigError("ROC sweep needs max >= min and step > 0");

  // Number of sweep points, robust to representation error in the division.
  const long long steps =
      static_cast<long long>(std::floor((sweep_max - sweep_min) / sweep_step + 1e-9));

  RocCurve curve;
  curve.thresholds.reserve(static_cast<std::size_t>(steps) + 1);
  curve.fpr.reserve(static_cast<std::size_t>(steps) + 1);
  curve.tpr.reserve(static_cast<std::size_t>(steps) + 1);

  // Sorted copies turn each fraction(q > tau) into a binary search.
  std::vector<double> healthy = q_healthy;
  std::vector<double> damaged = q_damaged;
  std::sort(healthy.begin(), healthy.end());
  std::sort(damaged.begin(), damaged.end());
  const auto exceed_fraction = [](const std::vector<double>& sorted, double tau) {
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), tau);
    return static_cast<double>(sorted.end() - it) /
           static_cast<double>(sorted.size());
  };

  for (long long i = 0; i <= steps; ++i) {
    const double tau = sweep_min + static_cast<double>(i) * sweep_step;
    curve.thresholds.push_back(tau);
    curve.fpr.push_back(exceed_fraction(healthy, tau));
    curve.tpr.push_back(exceed_fraction(damaged, tau));
  }

  // Trapezoid AUC over operating points sorted by (fpr, tpr).
  std::vector<std::pair<double, double>> points;
  points.reserve(curve.size());
  for (std::size_t i = 0; i < curve.size(); ++i)
    points.emplace_back(curve.fpr[i], curve.tpr[i]);
  std::sort(points.begin(), points.end());
  double auc = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    auc += (points[i].first - points[i - 1].first) *
           0.5 * (points[i].second + points[i - 1].second);
  }
  curve.auc = auc;
  return curve;
}

ConfusionTable summarize(const std::vector<DetectionOutcome>& outcomes,
                         const std::string& baseline_label,
                         const std::vector<std::string>& damage_labels) {
  ConfusionTable table;
  table.hypothesis_labels = damage_labels;
  table.hypothesis_labels.push_back(kUnidentifiedLabel);
  for (const auto& label : damage_labels) {
    table.missed_per_state.emplace_back(label, Fraction{});
    table.identification_counts.emplace_back(
        label, std::vector<int>(table.hypothesis_labels.size(), 0));
  }

  const auto state_row = [&](const std::string& label) -> std::size_t {
    for (std::size_t i = 0; i < damage_labels.size(); ++i)
      if (damage_labels[i] == label) return i;
    throw DataError("outcome has unknown state label " + label);
  };
  const auto hypothesis_column = [&](const std::string& label) -> std::size_t {
    for (std::size_t i = 0; i < table.hypothesis_labels.size(); ++i)
      if (table.hypothesis_labels[i] == label) return i;
    throw DataError("outcome assigned to unknown hypothesis " + label);
  };

  for (const auto& outcome : outcomes) {
    if (outcome.true_state == baseline_label) {
      ++table.false_alarms.total;
      if (outcome.test.damaged) ++table.false_alarms.count;
      continue;
    }
    const std::size_t row = state_row(outcome.true_state);
    auto& missed = table.missed_per_state[row].second;
    ++missed.total;
    if (!outcome.test.damaged) ++missed.count;
    ++table.identification_counts[row].second[hypothesis_column(outcome.assigned_label)];
  }
  return table;
}

namespace {

nlohmann::json state_to_json(const StateModel& state) {
  return nlohmann::json{{"theta_mean", to_json_array(state.theta_mean)},
                        {"covariance", to_json_rows(state.covariance)}};
}

StateModel state_from_json(const nlohmann::json& j) {
  StateModel s;
  s.theta_mean = vector_from_json(j.at("theta_mean"));
  s.covariance = matrix_from_json(j.at("covariance"));
  return s;
}

nlohmann::json reduction_to_json(const Reduction& reduction) {
  if (std::holds_alternative<std::monostate>(reduction))
    return nlohmann::json{{"kind", "none"}};
  if (const auto* sel = std::get_if<SvdSelection>(&reduction)) {
    nlohmann::json j = *sel;
    j["kind"] = "svd-selection";
    return j;
  }
  nlohmann::json j = std::get<PcaBasis>(reduction);
  j["kind"] = "pca-projection";
  return j;
}

Reduction reduction_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "none") return std::monostate{};
  if (kind == "svd-selection") return j.get<SvdSelection>();
  if (kind == "pca-projection") return j.get<PcaBasis>();
  throw DataError("unknown reduction kind '" + kind + "'");
}

}  // namespace

void to_json(nlohmann::json& j, const StateLibrary& lib) {
  nlohmann::json thetas = nlohmann::json::array();
  for (const auto& t : lib.baseline_thetas) thetas.push_back(to_json_array(t));
  nlohmann::json damage = nlohmann::json::array();
  for (const auto& [label, state] : lib.damage_states) {
    nlohmann::json entry = state_to_json(state);
    entry["label"] = label;
    damage.push_back(std::move(entry));
  }
  j = nlohmann::json{{"baseline_label", lib.baseline_label},
                     {"baseline", state_to_json(lib.baseline)},
                     {"baseline_thetas", std::move(thetas)},
                     {"damage_states", std::move(damage)},
                     {"covariance_source", to_string(lib.covariance_source)},
                     {"reduction", reduction_to_json(lib.reduction)}};
}

void from_json(const nlohmann::json& j, StateLibrary& lib) {
  try {
    lib.baseline_label = j.at("baseline_label").get<std::string>();
    lib.baseline = state_from_json(j.at("baseline"));
    lib.baseline_thetas.clear();
    for (const auto& t : j.at("baseline_thetas"))
      lib.baseline_thetas.push_back(vector_from_json(t));
    lib.damage_states.clear();
    for (const auto& entry : j.at("damage_states")) {
      lib.damage_states.emplace_back(entry.at("label").get<std::string>(),
                                     state_from_json(entry));
    }
    lib.covariance_source =
        covariance_source_from_string(j.at("covariance_source").get<std::string>());
    lib.reduction = reduction_from_json(j.at("reduction"));
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed library JSON: ") + ex.what());
  }
  lib.validate();
}

void to_json(nlohmann::json& j, const ConfusionTable& table) {
  nlohmann::json missed = nlohmann::json::array();
  for (const auto& [label, fraction] : table.missed_per_state) {
    missed.push_back(nlohmann::json{
        {"state", label}, {"count", fraction.count}, {"total", fraction.total}});
  }
  nlohmann::json identification = nlohmann::json::array();
  for (const auto& [label, counts] : table.identification_counts) {
    nlohmann::json per_hypothesis = nlohmann::json::object();
    for (std::size_t i = 0; i < table.hypothesis_labels.size(); ++i)
      per_hypothesis[table.hypothesis_labels[i]] = counts[i];
    identification.push_back(nlohmann::json{{"true_state", label},
                                            {"assigned", std::move(per_hypothesis)}});
  }
  j = nlohmann::json{{"false_alarms",
                      {{"count", table.false_alarms.count},
                       {"total", table.false_alarms.total}}},
                     {"missed_per_state", std::move(missed)},
                     {"identification", std::move(identification)}};
}

std::string confusion_csv(const ConfusionTable& table,
                          const std::string& baseline_label) {
  std::string out = "metric,true_state,hypothesis,count,total\n";
  out += "false_alarms," + baseline_label + ",," +
         std::to_string(table.false_alarms.count) + "," +
         std::to_string(table.false_alarms.total) + "\n";
  for (const auto& [label, fraction] : table.missed_per_state) {
    out += "missed," + label + ",," + std::to_string(fraction.count) + "," +
           std::to_string(fraction.total) + "\n";
  }
  for (const auto& [label, counts] : table.identification_counts) {
    const auto& missed = table.missed_per_state;
    int total = 0;
    for (const auto& [mlabel, fraction] : missed)
      if (mlabel == label) total = fraction.total;
    for (std::size_t i = 0; i < table.hypothesis_labels.size(); ++i) {
      out += "identified," + label + "," + table.hypothesis_labels[i] + "," +
             std::to_string(counts[i]) + "," + std::to_string(total) + "\n";
    }
  }
  return out;
}

}  // namespace gwshm
