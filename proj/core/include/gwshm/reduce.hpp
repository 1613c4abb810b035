#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

namespace gwshm {

/// Magnitude ranking of AR parameters via the eigenvalues of diag(theta):
/// the decomposition returns the parameters themselves as eigenvalues, so
/// ranking eigenvalues by |value| ranks the parameters.  Index i refers to
/// coefficient a_{i+1} (0-based positions in theta).
struct SvdSelection {
  Eigen::VectorXd eigenvalues_sorted;        ///< all n, by |value| descending
  std::vector<Eigen::Index> selected_indices;  ///< original positions of the top m
  int m = 0;

  void validate() const;
};

/// Orthonormal leading-subspace basis of a baseline parameter covariance.
struct PcaBasis {
  Eigen::MatrixXd basis;            ///< n x m, orthonormal columns U_m
  Eigen::VectorXd singular_values;  ///< all n, non-increasing, >= 0
  int m = 0;
  double energy_retained = 0.0;     ///< Psi_m, percent in (0, 100]

  void validate() const;
};

/// Ranks parameters by eigenvalue magnitude of diag(theta) — computed with
/// a general symmetric eigensolver, not by shortcutting to the entries —
/// and selects the original indices of the m largest.  Ties break toward
/// the lower original index.  Requires 1 <= m <= n.
SvdSelection svd_select(const Eigen::VectorXd& theta_baseline, int m);

/// Restriction to the selected coordinates: theta at selected_indices and
/// the matching principal submatrix of P.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> apply_selection(
    const SvdSelection& sel, const Eigen::VectorXd& theta,
    const Eigen::MatrixXd& p);

/// Decomposes a symmetric PSD covariance P = U S U' and keeps the smallest
/// m whose retained energy Psi_m = 100 * sum_{j<=m} s_j / sum_j s_j meets
/// `energy_threshold_pct`.  Each column of U has its largest-magnitude
/// entry forced positive so bases are reproducible across runs.
PcaBasis pca_fit_energy(const Eigen::MatrixXd& p_baseline,
                        double energy_threshold_pct = 99.0);

/// Same decomposition with the subspace dimension fixed directly.
PcaBasis pca_fit_fixed(const Eigen::MatrixXd& p_baseline, int m_fixed);

/// Projection onto the retained subspace: (U_m' theta, U_m' P U_m).
/// Projecting the fitting covariance itself gives diag(s_1 ... s_m).
std::pair<Eigen::VectorXd, Eigen::MatrixXd> pca_project(
    const PcaBasis& basis, const Eigen::VectorXd& theta,
    const Eigen::MatrixXd& p);

void to_json(nlohmann::json& j, const SvdSelection& sel);
void from_json(const nlohmann::json& j, SvdSelection& sel);
void to_json(nlohmann::json& j, const PcaBasis& basis);
void from_json(const nlohmann::json& j, PcaBasis& basis);

}  // namespace gwshm
