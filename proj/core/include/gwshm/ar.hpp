#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "gwshm/signal.hpp"

namespace gwshm {

enum class EstimatorKind { ols, wls };

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);

/// A scalar autoregressive model
///   y[t] + a_1 y[t-1] + ... + a_na y[t-na] = e[t],   e ~ iid N(0, sigma2_e)
/// together with the parameter covariance of its estimator.  Note the sign
/// convention: the coefficients sit on the left-hand side, so a pure decay
/// y[t] = 0.5 y[t-1] has theta = [-0.5].
struct ArModel {
  int order = 0;                  ///< na
  Eigen::VectorXd theta;          ///< [a_1 ... a_na]
  double sigma2_e = 0.0;          ///< residual variance
  Eigen::MatrixXd covariance;     ///< na x na parameter covariance P_theta
  EstimatorKind estimator = EstimatorKind::ols;
  int n_samples_used = 0;         ///< regression rows N' = N - na
  std::string path_id;            ///< provenance, may be empty
  std::string state_label;        ///< provenance, may be empty

  /// Throws on inconsistent dimensions, negative variance, or a covariance
  /// that is asymmetric or indefinite beyond tolerance.
  void validate() const;
};

/// Linear-regression form of the AR equation: row t - na of `regressors` is
/// [-y[t-1] ... -y[t-na]] and target[t - na] = y[t], for t = na ... N-1.
struct RegressionSystem {
  Eigen::MatrixXd regressors;  ///< (N - na) x na
  Eigen::VectorXd target;      ///< y[na ... N-1]
};

enum class OrderRule { plateau, min_bic, min_aic };

std::string to_string(OrderRule rule);
OrderRule order_rule_from_string(const std::string& name);

/// Fit-quality trace over a range of candidate orders.
struct OrderScan {
  std::vector<int> candidate_orders;
  std::vector<double> aic;
  std::vector<double> bic;
  std::vector<double> rss_sss;  ///< residual sum of squares over signal sum of squares
  int selected_order = 0;
  OrderRule rule = OrderRule::min_bic;
};

/// Residual whiteness and normality checks for a fitted model.
struct ResidualDiagnostics {
  Eigen::VectorXd autocorrelations;  ///< rho_1 ... rho_K
  double whiteness_statistic = 0.0;  ///< portmanteau value, vs chi2(K)
  bool whiteness_pass = false;
  double normality_statistic = 0.0;  ///< skewness-kurtosis composite, vs chi2(2)
  bool normality_pass = false;
};

/// Log-likelihood and the order-selection criteria derived from it.
struct InformationCriteria {
  double log_likelihood = 0.0;
  double aic = 0.0;
  double bic = 0.0;
};

/// Builds the regression form for order `na`.  Requires N > 2 na so the
/// system stays overdetermined with at least two rows per unknown.
RegressionSystem build_regression(std::span<const double> y, int na);

/// Ordinary least squares: theta minimizes ||target - regressors * theta||.
/// Solved by column-pivoted QR (never an explicit inverse);
/// sigma2_e = sum(e^2) / N' and covariance = sigma2_e (Phi' Phi)^-1.
/// Throws NumericError with a condition estimate when the regressors are
/// rank deficient or conditioned worse than 1e12.
ArModel estimate_ols(const RegressionSystem& sys);

/// Weighted least squares with diagonal residual covariance
/// Gamma = diag(weights): theta = (Phi' G^-1 Phi)^-1 Phi' G^-1 y and
/// covariance = (Phi' G^-1 Phi)^-1.  Residuals and sigma2_e are recomputed
/// from the unweighted data.  All weights must be positive.
ArModel estimate_wls(const RegressionSystem& sys, const Eigen::VectorXd& weights);

/// Per-time-index sample variance of OLS residuals across the realizations
/// of one (path, state) group — the diagonal weight sequence for
/// estimate_wls.  Variances are floored at 1e-12 times their mean so no
/// weight is zero.  Requires >= 2 realizations; the ensemble must be a
/// single (path, state) group.
Eigen::VectorXd ensemble_residual_weights(const SignalEnsemble& ensemble, int na);

/// One-step-ahead prediction errors e[t] = y[t] + sum_i a_i y[t-i] for
/// t = na ... N-1 (length N - na).
Eigen::VectorXd residuals(const ArModel& model, std::span<const double> y);

/// Gaussian conditional log-likelihood over the N' regression rows with
/// plug-in variance, and the criteria
///   AIC = -2 L + 2 d,   BIC = -L + (ln N' / 2) d,   d = na + 1.
InformationCriteria information_criteria(double sigma2_e, int n_effective, int na);

/// Fits every order in [min_order, max_order] by OLS and selects one:
///  - plateau: smallest order whose relative RSS/SSS improvement over the
///    next candidate is below 1% (falls back to the last candidate);
///  - min_bic / min_aic: criterion minimizer, ties to the lower order.
OrderScan scan_orders(std::span<const double> y, int min_order, int max_order,
                      OrderRule rule = OrderRule::min_bic);

/// Sample autocorrelations rho_1..rho_max_lag, the portmanteau whiteness
/// statistic N' sum(rho_k^2) against chi2_{1-alpha_w}(max_lag), and a
/// skewness-kurtosis normality statistic against chi2_{1-alpha_w}(2).
ResidualDiagnostics residual_diagnostics(const Eigen::VectorXd& e, int max_lag,
                                         double alpha_w);

void to_json(nlohmann::json& j, const ArModel& model);
void from_json(const nlohmann::json& j, ArModel& model);

void save_model(const ArModel& model, const std::filesystem::path& file);
ArModel load_model(const std::filesystem::path& file);

}  // namespace gwshm
