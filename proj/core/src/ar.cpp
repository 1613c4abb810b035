#include "gwshm/ar.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "gwshm/chi_squared.hpp"
#include "gwshm/error.hpp"
#include "gwshm/json_convert.hpp"
#include "gwshm/signal_io.hpp"

namespace gwshm {

namespace {

constexpr double kMaxConditionNumber = 1e12;

/// Shared least-squares core: column-pivoted QR of the (possibly row-scaled)
/// regressors with a conditioning guard, returning theta and (Phi' Phi)^-1
/// of the scaled system.
struct LeastSquaresSolution {
  Eigen::VectorXd theta;
  Eigen::MatrixXd normal_inverse;  ///< (Phi' Phi)^-1, from the QR factors
};

LeastSquaresSolution solve_least_squares(const Eigen::MatrixXd& phi,
                                         const Eigen::VectorXd& y) {
  const Eigen::Index na = phi.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);

  // With column pivoting the magnitudes of R's diagonal are non-increasing,
  // so their extreme ratio estimates the condition number of Phi.
  const Eigen::VectorXd rdiag =
      qr.matrixR().topLeftCorner(na, na).diagonal().cwiseAbs();
  const double largest = rdiag.maxCoeff();
  const double smallest = rdiag.minCoeff();
  if (!(smallest > 0.0) || largest / smallest > kMaxConditionNumber) {
    const double condition =
        smallest > 0.0 ? largest / smallest : std::numeric_limits<double>::infinity();
    throw NumericError(
        "regressor matrix is rank deficient or ill conditioned "
        "(condition estimate " +
        std::to_string(condition) + ")");
  }

  LeastSquaresSolution out;
  out.theta = qr.solve(y);

  // Phi * Pi = Q R  =>  (Phi' Phi)^-1 = Pi R^-1 R^-T Pi'.
  const Eigen::MatrixXd rinv = qr.matrixR()
                                   .topLeftCorner(na, na)
                                   .triangularView<Eigen::Upper>()
                                   .solve(Eigen::MatrixXd::Identity(na, na));
  const Eigen::MatrixXd g = rinv * rinv.transpose();
  const auto perm = qr.colsPermutation();
  out.normal_inverse = perm * g * perm.transpose();
  // Symmetrize away factorization round-off.
  out.normal_inverse = 0.5 * (out.normal_inverse + out.normal_inverse.transpose()).eval();
  return out;
}

}  // namespace

std::string to_string(EstimatorKind kind) {
  return kind == EstimatorKind::ols ? "ols" : "wls";
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
  if (name == "ols") return EstimatorKind::ols;
  if (name == "wls") return EstimatorKind::wls;
  throw ConfigError("unknown estimator kind '" + name + "' (expected ols or wls)");
}

std::string to_string(OrderRule rule) {
  switch (rule) {
    case OrderRule::plateau:
      return "plateau";
    case OrderRule::min_bic:
      return "min-bic";
    case OrderRule::min_aic:
      return "min-aic";
  }
  throw ConfigError("unknown order rule");
}

OrderRule order_rule_from_string(const std::string& name) {
  if (name == "plateau") return OrderRule::plateau;
  if (name == "min-bic") return OrderRule::min_bic;
  if (name == "min-aic") return OrderRule::min_aic;
  throw ConfigError("unknown order rule '" + name +
                    "' (expected plateau, min-bic, or min-aic)");
}

void ArModel::validate() const {
  if (order < 1) throw DataError("model order must be >= 1");
  if (theta.size() != order)
    throw DataError("theta length does not match model order");
  if (!(sigma2_e >= 0.0) || !std::isfinite(sigma2_e))
    throw DataError("sigma2_e must be finite and >= 0");
  if (covariance.rows() != order || covariance.cols() != order)
    throw DataError("covariance dimensions do not match model order");
  if (n_samples_used <= 0) throw DataError("n_samples_used must be positive");

  const double scale = covariance.cwiseAbs().maxCoeff();
  const double asymmetry = (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
  if (scale > 0.0 && asymmetry > 1e-8 * scale)
    throw DataError("parameter covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      0.5 * (covariance + covariance.transpose()));
  const double floor = -1e-10 * std::abs(covariance.trace());
  if (eig.eigenvalues().minCoeff() < floor)
    throw DataError("parameter covariance is not positive semidefinite");
}

RegressionSystem build_regression(std::span<const double> y, int na) {
  const Eigen::Index n = static_cast<Eigen::Index>(y.size());
  if (na < 1) throw ConfigError("model order must be >= 1");
  if (n <= 2 * static_cast<Eigen::Index>(na))
    throw DataError("signal of length " + std::to_string(n) +
                    " is too short for order " + std::to_string(na) +
                    " (need N > 2 na)");

  RegressionSystem sys;
  sys.regressors.resize(n - na, na);
  sys.target.resize(n - na);
  for (Eigen::Index t = na; t < n; ++t) {
    for (int i = 1; i <= na; ++i)
      sys.regressors(t - na, i - 1) = -y[static_cast<std::size_t>(t - i)];
    sys.target(t - na) = y[static_cast<std::size_t>(t)];
  }
  return sys;
}

ArModel estimate_ols(const RegressionSystem& sys) {
  const Eigen::Index rows = sys.regressors.rows();
  const Eigen::Index na = sys.regressors.cols();
  if (rows != sys.target.size())
    throw DataError("regression target length does not match row count");
  if (rows <= na) throw DataError("regression system is underdetermined");

  const LeastSquaresSolution sol = solve_least_squares(sys.regressors, sys.target);
  const Eigen::VectorXd e = sys.target - sys.regressors * sol.theta;

  ArModel model;
  model.order = static_cast<int>(na);
  model.theta = sol.theta;
  model.n_samples_used = static_cast<int>(rows);
  model.sigma2_e = e.squaredNorm() / static_cast<double>(rows);
  model.covariance = model.sigma2_e * sol.normal_inverse;
  model.estimator = EstimatorKind::ols;
  return model;
}

ArModel estimate_wls(const RegressionSystem& sys, const Eigen::VectorXd& weights) {
  const Eigen::Index rows = sys.regressors.rows();
  const Eigen::Index na = sys.regressors.cols();
  if (rows != sys.target.size())
    throw DataError("regression target length does not match row count");
  if (weights.size() != rows)
    throw DataError("weight sequence length " + std::to_string(weights.size()) +
                    " does not match regression row count " + std::to_string(rows));
  for (Eigen::Index t = 0; t < rows; ++t) {
    if (!(weights[t] > 0.0) || !std::isfinite(weights[t]))
      throw DataError("weights must be positive and finite (index " +
                      std::to_string(t) + ")");
  }

  // Normalize the weights to mean one before scaling rows; this keeps the
  // scaled system well inside double range for extreme weight magnitudes.
  // Gamma = c * Gamma_n implies (Phi' Gamma^-1 Phi)^-1 = c (Phi' Gamma_n^-1 Phi)^-1,
  // so the covariance is rescaled afterwards.
  const double c = weights.mean();
  const Eigen::VectorXd row_scale = (weights / c).cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd phi_w = row_scale.asDiagonal() * sys.regressors;
  const Eigen::VectorXd y_w = row_scale.asDiagonal() * sys.target;

  const LeastSquaresSolution sol = solve_least_squares(phi_w, y_w);
  const Eigen::VectorXd e = sys.target - sys.regressors * sol.theta;

  ArModel model;
  model.order = static_cast<int>(na);
  model.theta = sol.theta;
  model.n_samples_used = static_cast<int>(rows);
  model.sigma2_e = e.squaredNorm() / static_cast<double>(rows);
  model.covariance = c * sol.normal_inverse;
  model.estimator = EstimatorKind::wls;
  return model;
}

Eigen::VectorXd ensemble_residual_weights(const SignalEnsemble& ensemble, int na) {
  if (ensemble.records.size() < 2)
    throw DataError("residual weights need >= 2 realizations");
  const std::string& path = ensemble.records.front().path_id;
  const std::string& state = ensemble.records.front().state_label;
  for (const auto& rec : ensemble.records) {
    if (rec.path_id != path || rec.state_label != state)
      throw DataError("residual weights need realizations of one (path, state) group");
  }

  const Eigen::Index rows =
      static_cast<Eigen::Index>(ensemble.record_length()) - na;
  const Eigen::Index count = static_cast<Eigen::Index>(ensemble.records.size());
  Eigen::MatrixXd residual_matrix(rows, count);
  for (Eigen::Index r = 0; r < count; ++r) {
    const auto& samples = ensemble.records[static_cast<std::size_t>(r)].samples;
    const RegressionSystem sys = build_regression(samples, na);
    const ArModel model = estimate_ols(sys);
    residual_matrix.col(r) = sys.target - sys.regressors * model.theta;
  }

  // Unbiased per-time variance across realizations.
  const Eigen::VectorXd mean = residual_matrix.rowwise().mean();
  Eigen::VectorXd variance(rows);
  for (Eigen::Index t = 0; t < rows; ++t) {
    const double ss = (residual_matrix.row(t).array() - mean[t]).square().sum();
    variance[t] = ss / static_cast<double>(count - 1);
  }

  // Floor so every weight stays strictly positive.  When all realizations
  // are identical the relative floor degenerates to zero; fall back to the
  // smallest normal double, which the WLS normalization handles safely.
  double floor = 1e-12 * variance.mean();
  if (!(floor > 0.0)) floor = std::numeric_limits<double>::min();
  return variance.cwiseMax(floor);
}

Eigen::VectorXd residuals(const ArModel& model, std::span<const double> y) {
  const int na = model.order;
  if (model.theta.size() != na) throw DataError("model theta/order mismatch");
  const Eigen::Index n = static_cast<Eigen::Index>(y.size());
  if (n <= na)
    throw DataError("signal too short for residuals of an order-" +
                    std::to_string(na) + " model");

  Eigen::VectorXd e(n - na);
  for (Eigen::Index t = na; t < n; ++t) {
    double acc = y[static_cast<std::size_t>(t)];
    for (int i = 1; i <= na; ++i)
      acc += model.theta[i - 1] * y[static_cast<std::size_t>(t - i)];
    e[t - na] = acc;
  }
  return e;
}

InformationCriteria information_criteria(double sigma2_e, int n_effective, int na) {
  if (n_effective < 1) throw DataError("information criteria need n_effective >= 1");
  // Clamp so a numerically perfect fit does not produce -inf likelihood.
  const double s2 = std::max(sigma2_e, 1e-300);
  const double np = static_cast<double>(n_effective);
  const double d = static_cast<double>(na) + 1.0;

  InformationCriteria ic;
  ic.log_likelihood =
      -0.5 * np * (std::log(2.0 * std::numbers::pi) + std::log(s2) + 1.0);
  ic.aic = -2.0 * ic.log_likelihood + 2.0 * d;
  ic.bic = -ic.log_likelihood + 0.5 * std::log(np) * d;
  return ic;
}

OrderScan scan_orders(std::span<const double> y, int min_order, int max_order,
                      OrderRule rule) {
  if (min_order < 1 || min_order > max_order)
    throw ConfigError("empty or invalid order range [" + std::to_string(min_order) +
                      ", " + std::to_string(max_order) + "]");
  const Eigen::Index n = static_cast<Eigen::Index>(y.size());
  if (n <= 2 * static_cast<Eigen::Index>(max_order))
    throw DataError("signal of length " + std::to_string(n) +
                    " is too short for a scan up to order " +
                    std::to_string(max_order) + " (need N > 2 max)");

  double sss = 0.0;
  for (const double v : y) sss += v * v;
  if (!(sss > 0.0)) throw DataError("all-zero signal has no identifiable model");

  OrderScan scan;
  scan.rule = rule;
  for (int na = min_order; na <= max_order; ++na) {
    const RegressionSystem sys = build_regression(y, na);
    const ArModel model = estimate_ols(sys);
    const double rss = model.sigma2_e * static_cast<double>(model.n_samples_used);
    const InformationCriteria ic =
        information_criteria(model.sigma2_e, model.n_samples_used, na);
    scan.candidate_orders.push_back(na);
    scan.aic.push_back(ic.aic);
    scan.bic.push_back(ic.bic);
    scan.rss_sss.push_back(rss / sss);
  }

  const std::size_t count = scan.candidate_orders.size();
  std::size_t pick = 0;
  switch (rule) {
    case OrderRule::min_bic:
    case OrderRule::min_aic: {
      const std::vector<double>& crit =
          rule == OrderRule::min_bic ? scan.bic : scan.aic;
      for (std::size_t i = 1; i < count; ++i)
        if (crit[i] < crit[pick]) pick = i;
      break;
    }
    case OrderRule::plateau: {
      // First order whose relative RSS/SSS improvement over the next
      // candidate drops below 1%; if the curve never flattens, the last
      // candidate is the best available.
      pick = count - 1;
      for (std::size_t i = 0; i + 1 < count; ++i) {
        if (scan.rss_sss[i] <= 0.0 ||
            (scan.rss_sss[i] - scan.rss_sss[i + 1]) / scan.rss_sss[i] < 0.01) {
          pick = i;
          break;
        }
      }
      break;
    }
  }
  scan.selected_order = scan.candidate_orders[pick];
  return scan;
}

ResidualDiagnostics residual_diagnostics(const Eigen::VectorXd& e, int max_lag,
                                         double alpha_w) {
  const Eigen::Index n = e.size();
  if (max_lag < 1) throw ConfigError("diagnostics need max_lag >= 1");
  if (n <= max_lag)
    throw DataError("residual sequence shorter than max_lag");
  if (!(alpha_w > 0.0 && alpha_w < 1.0))
    throw ConfigError("diagnostics level alpha_w must be in (0, 1)");

  const Eigen::ArrayXd centered = e.array() - e.mean();
  const double denom = centered.square().sum();
  if (!(denom > 0.0)) throw DataError("constant residual sequence");

  ResidualDiagnostics diag;
  diag.autocorrelations.resize(max_lag);
  double rho_sq_sum = 0.0;
  for (int k = 1; k <= max_lag; ++k) {
    double acc = 0.0;
    for (Eigen::Index t = k; t < n; ++t) acc += centered[t] * centered[t - k];
    const double rho = acc / denom;
    diag.autocorrelations[k - 1] = rho;
    rho_sq_sum += rho * rho;
  }

  // Portmanteau whiteness: N' sum(rho_k^2) ~ chi2(max_lag) under whiteness.
  diag.whiteness_statistic = static_cast<double>(n) * rho_sq_sum;
  diag.whiteness_pass =
      diag.whiteness_statistic <= chi2_quantile(1.0 - alpha_w, max_lag);

  // Skewness-kurtosis composite: n/6 (S^2 + (K-3)^2/4) ~ chi2(2) under
  // Gaussianity.
  const double m2 = denom / static_cast<double>(n);
  const double m3 = centered.cube().sum() / static_cast<double>(n);
  const double m4 = centered.square().square().sum() / static_cast<double>(n);
  const double skewness = m3 / std::pow(m2, 1.5);
  const double kurtosis = m4 / (m2 * m2);
  diag.normality_statistic = static_cast<double>(n) / 6.0 *
                             (skewness * skewness +
                              0.25 * (kurtosis - 3.0) * (kurtosis - 3.0));
  diag.normality_pass =
      diag.normality_statistic <= chi2_quantile(1.0 - alpha_w, 2);
  return diag;
}

void to_json(nlohmann::json& j, const ArModel& model) {
  j = nlohmann::json{{"order", model.order},
                     {"theta", to_json_array(model.theta)},
                     {"sigma2_e", model.sigma2_e},
                     {"covariance", to_json_rows(model.covariance)},
                     {"estimator_kind", to_string(model.estimator)},
                     {"n_samples_used", model.n_samples_used},
                     {"provenance",
                      {{"path_id", model.path_id},
                       {"state_label", model.state_label}}}};
}

void from_json(const nlohmann::json& j, ArModel& model) {
  try {
    model.order = j.at("order").get<int>();
    model.theta = vector_from_json(j.at("theta"));
    model.sigma2_e = j.at("sigma2_e").get<double>();
    model.covariance = matrix_from_json(j.at("covariance"));
    model.estimator = estimator_kind_from_string(j.at("estimator_kind").get<std::string>());
    model.n_samples_used = j.at("n_samples_used").get<int>();
    const auto& prov = j.at("provenance");
    model.path_id = prov.at("path_id").get<std::string>();
    model.state_label = prov.at("state_label").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed model JSON: ") + ex.what());
  }
  model.validate();
}

void save_model(const ArModel& model, const std::filesystem::path& file) {
  nlohmann::json j = model;
  write_text_atomic(file, j.dump(2) + "\n");
}

ArModel load_model(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open model file " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("cannot parse model file " + file.string() + ": " + ex.what());
  }
  return j.get<ArModel>();
}

}  // namespace gwshm
