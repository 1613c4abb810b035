#include "gwshm/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "gwshm/error.hpp"
#include "gwshm/json_convert.hpp"

namespace gwshm {

void SvdSelection::validate() const {
  const Eigen::Index n = eigenvalues_sorted.size();
  if (n < 1) throw DataError("selection needs at least one eigenvalue");
  if (m < 1 || m > n) throw DataError("selection size m out of range");
  if (static_cast<Eigen::Index>(selected_indices.size()) != m)
    throw DataError("selected index count does not match m");
  for (Eigen::Index i = 1; i < n; ++i) {
    if (std::abs(eigenvalues_sorted[i]) > std::abs(eigenvalues_sorted[i - 1]))
      throw DataError("eigenvalue magnitudes must be non-increasing");
  }
  std::vector<Eigen::Index> sorted = selected_indices;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw DataError("selected indices must be distinct");
  if (sorted.front() < 0 || sorted.back() >= n)
    throw DataError("selected index out of range");
}

void PcaBasis::validate() const {
  const Eigen::Index n = basis.rows();
  if (n < 1 || m < 1 || m > n) throw DataError("basis dimensions out of range");
  if (basis.cols() != m) throw DataError("basis column count does not match m");
  if (singular_values.size() != n)
    throw DataError("singular value count does not match dimension");
  for (Eigen::Index j = 0; j < n; ++j) {
    if (singular_values[j] < 0.0)
      throw DataError("singular values must be non-negative");
    if (j > 0 && singular_values[j] > singular_values[j - 1])
      throw DataError("singular values must be non-increasing");
  }
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  if ((gram - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() > 1e-10)
    throw DataError("basis columns are not orthonormal");
  if (!(energy_retained > 0.0 && energy_retained <= 100.0 + 1e-9))
    throw DataError("retained energy out of (0, 100]");
}

SvdSelection svd_select(const Eigen::VectorXd& theta_baseline, int m) {
  const Eigen::Index n = theta_baseline.size();
  if (n < 1) throw DataError("selection needs a non-empty parameter vector");
  if (m < 1 || m > n)
    throw ConfigError("selection size m must be in [1, " + std::to_string(n) + "]");

  // Eigendecomposition of D = diag(theta).  The eigenvalues are exactly the
  // parameters; each eigenvector is a standard basis vector whose largest
  // entry recovers the original parameter position.
  const Eigen::MatrixXd d = theta_baseline.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d);
  if (eig.info() != Eigen::Success)
    throw NumericError("eigendecomposition of the parameter matrix failed");

  struct Entry {
    double value;
    Eigen::Index original_index;
  };
  std::vector<Entry> entries(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index original = 0;
    eig.eigenvectors().col(k).cwiseAbs().maxCoeff(&original);
    entries[static_cast<std::size_t>(k)] = {eig.eigenvalues()[k], original};
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (std::abs(a.value) != std::abs(b.value))
      return std::abs(a.value) > std::abs(b.value);
    return a.original_index < b.original_index;
  });

  SvdSelection sel;
  sel.m = m;
  sel.eigenvalues_sorted.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    sel.eigenvalues_sorted[i] = entries[static_cast<std::size_t>(i)].value;
  for (int i = 0; i < m; ++i)
    sel.selected_indices.push_back(entries[static_cast<std::size_t>(i)].original_index);
  sel.validate();
  return sel;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> apply_selection(
    const SvdSelection& sel, const Eigen::VectorXd& theta,
    const Eigen::MatrixXd& p) {
  sel.validate();
  const Eigen::Index n = sel.eigenvalues_sorted.size();
  if (theta.size() != n || p.rows() != n || p.cols() != n)
    throw DataError("selection dimension does not match theta/covariance");

  const Eigen::Index m = sel.m;
  Eigen::VectorXd theta_r(m);
  Eigen::MatrixXd p_r(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    theta_r[i] = theta[sel.selected_indices[static_cast<std::size_t>(i)]];
    for (Eigen::Index jj = 0; jj < m; ++jj)
      p_r(i, jj) = p(sel.selected_indices[static_cast<std::size_t>(i)],
                     sel.selected_indices[static_cast<std::size_t>(jj)]);
  }
  return {std::move(theta_r), std::move(p_r)};
}

namespace {

/// Shared decomposition behind both pca_fit flavors: eigenvalues of the
/// symmetrized input in descending order (negatives clamped to zero) with
/// the per-column sign convention applied.
struct PcaDecomposition {
  Eigen::MatrixXd vectors;  ///< n x n, columns ordered by descending value
  Eigen::VectorXd values;   ///< descending, >= 0
};

PcaDecomposition pca_decompose(const Eigen::MatrixXd& p) {
  const Eigen::Index n = p.rows();
  if (n < 1 || p.cols() != n) throw DataError("covariance must be square");
  const double scale = p.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) throw DataError("all-zero covariance cannot be decomposed");
  if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw DataError("covariance is not symmetric");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (p + p.transpose()));
  if (eig.info() != Eigen::Success)
    throw NumericError("covariance eigendecomposition failed");

  PcaDecomposition out;
  out.vectors.resize(n, n);
  out.values.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index src = n - 1 - j;  // ascending -> descending
    out.values[j] = std::max(eig.eigenvalues()[src], 0.0);
    Eigen::VectorXd column = eig.eigenvectors().col(src);
    Eigen::Index peak = 0;
    column.cwiseAbs().maxCoeff(&peak);
    if (column[peak] < 0.0) column = -column;
    out.vectors.col(j) = column;
  }
  return out;
}

PcaBasis pca_from_decomposition(PcaDecomposition dec, int m) {
  PcaBasis basis;
  basis.m = m;
  basis.basis = dec.vectors.leftCols(m);
  basis.singular_values = std::move(dec.values);

  // Cumulative energy computed from one running sum so Psi_n is exactly 100.
  double cumulative = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) cumulative += basis.singular_values[j];
  double total = cumulative;
  for (Eigen::Index j = m; j < basis.singular_values.size(); ++j)
    total += basis.singular_values[j];
  basis.energy_retained = 100.0 * cumulative / total;
  basis.validate();
  return basis;
}

}  // namespace

PcaBasis pca_fit_energy(const Eigen::MatrixXd& p_baseline,
                        double energy_threshold_pct) {
  if (!(energy_threshold_pct > 0.0 && energy_threshold_pct <= 100.0))
    throw ConfigError("energy threshold must be in (0, 100]");
  PcaDecomposition dec = pca_decompose(p_baseline);

  // Same left-to-right accumulation as the final energy computation, so the
  // threshold decision and the reported Psi_m agree bit for bit.
  const Eigen::Index n = dec.values.size();
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) total += dec.values[j];
  double cumulative = 0.0;
  int m = static_cast<int>(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    cumulative += dec.values[j];
    if (100.0 * cumulative / total >= energy_threshold_pct) {
      m = static_cast<int>(j) + 1;
      break;
    }
  }
  return pca_from_decomposition(std::move(dec), m);
}

PcaBasis pca_fit_fixed(const Eigen::MatrixXd& p_baseline, int m_fixed) {
  PcaDecomposition dec = pca_decompose(p_baseline);
  if (m_fixed < 1 || m_fixed > dec.values.size())
    throw ConfigError("fixed subspace dimension out of [1, n]");
  return pca_from_decomposition(std::move(dec), m_fixed);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> pca_project(
    const PcaBasis& basis, const Eigen::VectorXd& theta,
    const Eigen::MatrixXd& p) {
  basis.validate();
  const Eigen::Index n = basis.basis.rows();
  if (theta.size() != n || p.rows() != n || p.cols() != n)
    throw DataError("basis dimension does not match theta/covariance");
  Eigen::VectorXd theta_r = basis.basis.transpose() * theta;
  Eigen::MatrixXd p_r = basis.basis.transpose() * p * basis.basis;
  p_r = 0.5 * (p_r + p_r.transpose()).eval();
  return {std::move(theta_r), std::move(p_r)};
}

void to_json(nlohmann::json& j, const SvdSelection& sel) {
  nlohmann::json indices = nlohmann::json::array();
  for (const Eigen::Index i : sel.selected_indices)
    indices.push_back(static_cast<long>(i));
  j = nlohmann::json{{"eigenvalues_sorted", to_json_array(sel.eigenvalues_sorted)},
                     {"selected_indices", std::move(indices)},
                     {"m", sel.m}};
}

void from_json(const nlohmann::json& j, SvdSelection& sel) {
  try {
    sel.eigenvalues_sorted = vector_from_json(j.at("eigenvalues_sorted"));
    sel.selected_indices.clear();
    for (const auto& x : j.at("selected_indices"))
      sel.selected_indices.push_back(static_cast<Eigen::Index>(x.get<long>()));
    sel.m = j.at("m").get<int>();
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed selection JSON: ") + ex.what());
  }
  sel.validate();
}

void to_json(nlohmann::json& j, const PcaBasis& basis) {
  j = nlohmann::json{{"basis_row_major", to_json_rows(basis.basis)},
                     {"singular_values", to_json_array(basis.singular_values)},
                     {"m", basis.m},
                     {"energy_retained", basis.energy_retained}};
}

void from_json(const nlohmann::json& j, PcaBasis& basis) {
  try {
    basis.basis = matrix_from_json(j.at("basis_row_major"));
    basis.singular_values = vector_from_json(j.at("singular_values"));
    basis.m = j.at("m").get<int>();
    basis.energy_retained = j.at("energy_retained").get<double>();
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed basis JSON: ") + ex.what());
  }
  basis.validate();
}

}  // namespace gwshm
