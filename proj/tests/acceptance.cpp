// Acceptance gate: end-to-end checks of the statistical guarantees the
// library advertises.  Each criterion prints one PASS/FAIL line; the exit
// code is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <unistd.h>

#include "gwshm/ar.hpp"
#include "gwshm/chi_squared.hpp"
#include "gwshm/damage_index.hpp"
#include "gwshm/pipeline.hpp"
#include "gwshm/random.hpp"
#include "gwshm/reduce.hpp"
#include "gwshm/stats.hpp"

namespace fs = std::filesystem;
using namespace gwshm;

namespace {

// --- timing ---------------------------------------------------------------

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// --- scratch space ----------------------------------------------------------

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() /
                       ("gwshm_accept_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string::size_type start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    auto end = line.find(',', start);
    if (end == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, end - start));
    start = end + 1;
  }
}

// --- synthetic AR data ------------------------------------------------------

/// Runs the AR recursion y[t] = -sum_i theta_i y[t-i] + e[t] with
/// e ~ N(0, sigma^2) from a zero history, drops `warmup` samples so the
/// start-up transient decays, and optionally records the kept innovations.
std::vector<double> simulate_ar(const Eigen::VectorXd& theta, std::size_t n,
                                double sigma, std::uint64_t stream,
                                std::size_t warmup,
                                std::vector<double>* innovations = nullptr) {
  NormalSampler normal(stream);
  const int na = static_cast<int>(theta.size());
  std::vector<double> y;
  y.reserve(warmup + n);
  for (std::size_t t = 0; t < warmup + n; ++t) {
    double value = sigma * normal();
    if (innovations && t >= warmup) innovations->push_back(value);
    for (int i = 0; i < na; ++i) {
      const std::ptrdiff_t lag = static_cast<std::ptrdiff_t>(t) - i - 1;
      if (lag >= 0) value -= theta[i] * y[static_cast<std::size_t>(lag)];
    }
    y.push_back(value);
  }
  y.erase(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(warmup));
  return y;
}

Eigen::VectorXd reference_theta() {
  Eigen::VectorXd theta(4);
  theta << -1.5, 0.7, -0.1, 0.05;
  return theta;
}

// --- numerical-integration oracle for the chi-squared CDF -------------------

double chi2_pdf(double x, int dof) {
  if (x <= 0.0) return 0.0;
  const double half = dof / 2.0;
  return std::exp((half - 1.0) * std::log(x) - x / 2.0 -
                  half * std::numbers::ln2 - std::lgamma(half));
}

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double fa, double fm, double fb, double whole,
                        double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1);
}

double integrate_chi2_pdf(double x, int dof, double tol = 1e-12) {
  const auto f = [dof](double t) { return chi2_pdf(t, dof); };
  const double fa = f(0.0);
  const double fb = f(x);
  const double fm = f(0.5 * x);
  const double whole = x / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, 0.0, x, fa, fm, fb, whole, tol, 60);
}

// --- assorted ---------------------------------------------------------------

Eigen::MatrixXd random_psd(int n, std::uint64_t stream) {
  NormalSampler normal(stream);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = normal();
  Eigen::MatrixXd p = a.transpose() * a + 0.1 * Eigen::MatrixXd::Identity(n, n);
  return ((p + p.transpose()) / 2.0).eval();
}

std::string fmt(const char* format, ...) {
  char buffer[256];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buffer, sizeof buffer, format, args);
  va_end(args);
  return buffer;
}

/// Parses confusion.csv and checks the zero-error pattern: no false alarms
/// out of `expected_total` healthy records and no missed detections for any
/// damage state.
bool confusion_is_clean(const fs::path& file, int expected_total,
                        int expected_states, std::string& detail) {
  const std::vector<std::string> lines = split_lines(slurp(file));
  if (lines.empty() || lines[0] != "metric,true_state,hypothesis,count,total") {
    detail = "unexpected confusion.csv header";
    return false;
  }
  int missed_rows = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> f = split_csv(lines[i]);
    if (f.size() != 5) continue;
    if (f[0] == "false_alarms") {
      if (f[3] != "0" || f[4] != std::to_string(expected_total)) {
        detail = "false alarms " + f[3] + "/" + f[4];
        return false;
      }
    } else if (f[0] == "missed") {
      ++missed_rows;
      if (f[3] != "0" || f[4] != std::to_string(expected_total)) {
        detail = "missed " + f[3] + "/" + f[4] + " for " + f[1];
        return false;
      }
    }
  }
  if (missed_rows != expected_states) {
    detail = fmt("expected %d damage states, saw %d", expected_states,
                 missed_rows);
    return false;
  }
  return true;
}

RunConfig aluminum_run(const std::string& method, double alpha,
                       const fs::path& out_dir) {
  RunConfig config;
  config.synthetic = aluminum_like_spec();
  config.seed = 42;
  config.order.fixed = 4;
  config.estimator = EstimatorKind::wls;
  config.covariance = CovarianceSource::experimental;
  config.method = parse_method(method);
  config.risk = RiskSpec::from_alpha(alpha);
  config.out_dir = out_dir;
  return config;
}

}  // namespace

int main() {
  int failures = 0;
  const auto criterion = [&failures](int index, const char* name,
                                     const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    try {
      ok = body(detail);
    } catch (const std::exception& ex) {
      ok = false;
      detail = std::string("exception: ") + ex.what();
    }
    std::printf("%s  %2d. %s%s%s\n", ok ? "PASS" : "FAIL", index, name,
                detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  };

  criterion(1, "OLS recovers known AR(4) coefficients from 10k samples",
            [](std::string& detail) {
              const Eigen::VectorXd theta = reference_theta();
              const auto start = Clock::now();
              double sum_err = 0.0;
              for (int k = 0; k < 100; ++k) {
                const std::vector<double> y = simulate_ar(
                    theta, 10000, 0.1,
                    derive_stream(4012, 0, static_cast<std::uint64_t>(k)), 200);
                const ArModel fit = estimate_ols(build_regression(y, 4));
                sum_err += (fit.theta - theta).cwiseAbs().maxCoeff();
              }
              const double avg = sum_err / 100.0;
              const double elapsed = seconds_since(start);
              detail = fmt("avg max coefficient error %.4f (limit 0.02), %.2f s",
                           avg, elapsed);
              return avg <= 0.02 && elapsed < 10.0;
            });

  criterion(2, "residuals under the true model reproduce the injected noise",
            [](std::string& detail) {
              const Eigen::VectorXd theta = reference_theta();
              std::vector<double> injected;
              const std::vector<double> y =
                  simulate_ar(theta, 5000, 0.1, derive_stream(4002, 0, 1), 200,
                              &injected);
              ArModel model;
              model.order = 4;
              model.theta = theta;
              model.sigma2_e = 0.01;
              model.covariance = Eigen::MatrixXd::Identity(4, 4);
              model.n_samples_used = static_cast<int>(y.size()) - 4;
              const Eigen::VectorXd e = residuals(model, y);
              double sum_sq = 0.0;
              for (const double v : injected) sum_sq += v * v;
              const double rms =
                  std::sqrt(sum_sq / static_cast<double>(injected.size()));
              double worst = 0.0;
              for (Eigen::Index t = 0; t < e.size(); ++t) {
                const double truth = injected[static_cast<std::size_t>(t) + 4];
                const double scale = std::max(std::abs(truth), rms);
                worst = std::max(worst, std::abs(e[t] - truth) / scale);
              }
              detail = fmt("worst relative deviation %.2e (limit 1e-12)", worst);
              return worst <= 1e-12;
            });

  criterion(3, "minimum-BIC scan recovers the true order 4 in >= 95/100 trials",
            [](std::string& detail) {
              const Eigen::VectorXd theta = reference_theta();
              int correct = 0;
              for (int k = 0; k < 100; ++k) {
                const std::vector<double> y = simulate_ar(
                    theta, 20000, 0.1,
                    derive_stream(4003, 0, static_cast<std::uint64_t>(k)), 200);
                const OrderScan scan = scan_orders(y, 2, 10, OrderRule::min_bic);
                if (scan.selected_order == 4) ++correct;
              }
              detail = fmt("%d/100 trials selected order 4", correct);
              return correct >= 95;
            });

  criterion(4, "chi-squared quantiles match a numerical-integration oracle",
            [](std::string& detail) {
              const double q95 = chi2_quantile(0.95, 4);
              const double against_table = std::abs(q95 - 9.4877);
              const double oracle_gap = std::abs(integrate_chi2_pdf(q95, 4) - 0.95);
              bool ok = against_table <= 1e-3 && oracle_gap <= 1e-6;

              double worst_round_trip = 0.0;
              for (const int dof : {1, 2, 4, 10}) {
                for (const double p : {0.01, 0.5, 0.95, 0.999}) {
                  const double x = chi2_quantile(p, dof);
                  worst_round_trip =
                      std::max(worst_round_trip, std::abs(chi2_cdf(x, dof) - p));
                }
                for (const double x : {0.5, 3.0, 12.0}) {
                  const double p = chi2_cdf(x, dof);
                  const double back = chi2_quantile(p, dof);
                  worst_round_trip = std::max(
                      worst_round_trip, std::abs(back - x) / std::max(1.0, x));
                }
              }
              ok = ok && worst_round_trip <= 1e-8;
              detail = fmt("quantile(0.95,4) = %.6f, oracle gap %.1e, "
                           "worst round trip %.1e",
                           q95, oracle_gap, worst_round_trip);
              return ok;
            });

  criterion(5, "Q statistic is calibrated chi-squared under the null",
            [](std::string& detail) {
              const int dof = 4;
              const int n = 10000;
              const Eigen::MatrixXd p_ref = random_psd(dof, derive_stream(4005, 0, 0));
              Eigen::VectorXd theta0(dof);
              theta0 << 0.4, -1.1, 0.2, 0.05;
              const Eigen::MatrixXd l =
                  Eigen::LLT<Eigen::MatrixXd>(2.0 * p_ref).matrixL();
              NormalSampler normal(derive_stream(4005, 1, 0));

              const double thr05 = chi2_quantile(0.95, dof);
              const double thr01 = chi2_quantile(0.99, dof);
              double sum_q = 0.0;
              int exceed05 = 0;
              int exceed01 = 0;
              for (int i = 0; i < n; ++i) {
                Eigen::VectorXd z(dof);
                for (int j = 0; j < dof; ++j) z[j] = normal();
                const Eigen::VectorXd theta_u = theta0 + l * z;
                const double q = q_statistic(theta_u, theta0, p_ref);
                sum_q += q;
                if (q > thr05) ++exceed05;
                if (q > thr01) ++exceed01;
              }
              const double mean = sum_q / n;
              const auto band = [n](double alpha) {
                return 1.96 * std::sqrt(alpha * (1.0 - alpha) / n);
              };
              const double frac05 = static_cast<double>(exceed05) / n;
              const double frac01 = static_cast<double>(exceed01) / n;
              const bool mean_ok = std::abs(mean / dof - 1.0) <= 0.05;
              const bool frac_ok = std::abs(frac05 - 0.05) <= band(0.05) &&
                                   std::abs(frac01 - 0.01) <= band(0.01);
              detail = fmt("mean Q %.3f (dof 4), exceedance %.4f @0.05, "
                           "%.4f @0.01",
                           mean, frac05, frac01);
              return mean_ok && frac_ok;
            });

  criterion(6, "reduction identities: retained energy, projected covariance, "
               "parameter ranking",
            [](std::string& detail) {
              Eigen::MatrixXd p = random_psd(6, derive_stream(4006, 0, 0));
              p /= p.norm();

              const PcaBasis full = pca_fit_energy(p, 100.0);
              const bool energy_ok = full.m == 6 && full.energy_retained == 100.0;

              const PcaBasis b3 = pca_fit_fixed(p, 3);
              Eigen::VectorXd some_theta(6);
              some_theta << 1.0, -0.5, 0.25, 2.0, 0.0, -1.5;
              const auto [theta_r, p_r] = pca_project(b3, some_theta, p);
              double proj_err = 0.0;
              for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                  const double want = i == j ? b3.singular_values[i] : 0.0;
                  proj_err = std::max(proj_err, std::abs(p_r(i, j) - want));
                }

              Eigen::VectorXd theta(4);
              theta << 0.5, -0.1, 0.05, -2.0;
              const SvdSelection sel = svd_select(theta, 4);
              std::vector<double> magnitudes{2.0, 0.5, 0.1, 0.05};
              bool ranking_ok = sel.eigenvalues_sorted.size() == 4;
              for (int i = 0; ranking_ok && i < 4; ++i)
                ranking_ok = std::abs(sel.eigenvalues_sorted[i]) == magnitudes[i];
              const std::vector<Eigen::Index> want_indices{3, 0, 1, 2};
              ranking_ok = ranking_ok && sel.selected_indices == want_indices;

              detail = fmt("energy %.1f%%, projected covariance error %.1e, "
                           "ranking %s",
                           full.energy_retained, proj_err,
                           ranking_ok ? "exact" : "wrong");
              return energy_ok && proj_err <= 1e-9 && ranking_ok;
            });

  criterion(7, "damage index: zero on matching shapes, one on orthogonal ones, "
               "never above one",
            [](std::string& detail) {
              std::vector<double> y(400);
              for (std::size_t i = 0; i < y.size(); ++i)
                y[i] = std::sin(0.07 * static_cast<double>(i)) +
                       0.3 * std::cos(0.31 * static_cast<double>(i));

              const double self = damage_index(y, y).di;

              bool scaled_ok = true;
              for (const double c : {2.0, 0.5}) {
                std::vector<double> scaled(y);
                for (double& v : scaled) v *= c;
                scaled_ok = scaled_ok && damage_index(y, scaled).di == 0.0;
              }
              std::vector<double> odd(y);
              for (double& v : odd) v *= 3.7;
              const double near_zero = damage_index(y, odd).di;

              std::vector<double> s(360);
              std::vector<double> c(360);
              for (int i = 0; i < 360; ++i) {
                const double phase = 2.0 * std::numbers::pi * 5.0 * i / 360.0;
                s[static_cast<std::size_t>(i)] = std::sin(phase);
                c[static_cast<std::size_t>(i)] = std::cos(phase);
              }
              const double orthogonal = damage_index(s, c).di;

              double max_di = 0.0;
              double min_di = 1.0;
              for (int k = 0; k < 50; ++k) {
                NormalSampler normal(derive_stream(4007, 0, static_cast<std::uint64_t>(k)));
                std::vector<double> a(128);
                std::vector<double> b(128);
                for (std::size_t i = 0; i < a.size(); ++i) {
                  a[i] = normal();
                  b[i] = normal();
                }
                const double di = damage_index(a, b).di;
                max_di = std::max(max_di, di);
                min_di = std::min(min_di, di);
              }

              detail = fmt("self %.1e, scaled %.1e, orthogonal %.12f, "
                           "random range [%.3f, %.3f]",
                           self, near_zero, orthogonal, min_di, max_di);
              return self == 0.0 && scaled_ok && near_zero <= 1e-12 &&
                     std::abs(orthogonal - 1.0) <= 1e-12 && max_di <= 1.0 + 1e-12 &&
                     min_di >= 0.0;
            });

  criterion(8, "every method separates all five surrogate states perfectly",
            [](std::string& detail) {
              const auto start = Clock::now();
              for (const std::string method : {"standard", "svd:2", "pca:99.9%"}) {
                const RunConfig config = aluminum_run(
                    method, 1e-3, fresh_dir("pattern_" + method_tag(parse_method(method))));
                run_diagnose(config);
                std::string why;
                if (!confusion_is_clean(config.out_dir / "confusion.csv", 20, 4,
                                        why)) {
                  detail = method + ": " + why;
                  return false;
                }
              }
              const double elapsed = seconds_since(start);
              detail = fmt("0/20 false alarms and 0/20 missed for all three "
                           "methods, %.1f s",
                           elapsed);
              return elapsed < 60.0;
            });

  criterion(9, "ROC reaches AUC 1.0 on separated data and 0.5 on identical data",
            [](std::string& detail) {
              RunConfig config = aluminum_run("standard", 1e-3, fresh_dir("roc"));
              run_roc(config);
              const nlohmann::json meta = nlohmann::json::parse(
                  slurp(config.out_dir / "roc_2-6_standard_experimental.json"));
              const double auc = meta.at("auc").get<double>();

              NormalSampler normal(derive_stream(4009, 0, 0));
              std::vector<double> a(2000);
              std::vector<double> b(2000);
              for (std::size_t i = 0; i < a.size(); ++i) a[i] = normal();
              for (std::size_t i = 0; i < b.size(); ++i) b[i] = normal();
              const RocCurve control = roc(a, b, -5.0, 5.0, 0.01);

              std::vector<double> low;
              std::vector<double> high;
              for (int i = 0; i < 20; ++i) low.push_back(0.5 + i);
              for (int i = 0; i < 80; ++i) high.push_back(1e3 + 1e3 * i);
              const auto start = Clock::now();
              const RocCurve wide = roc(low, high, -100.0, 1e5, 1.0);
              const double sweep_seconds = seconds_since(start);

              detail = fmt("surrogate AUC %.12f, control AUC %.3f, "
                           "%zu-point sweep in %.2f s",
                           auc, control.auc, wide.size(), sweep_seconds);
              return std::abs(auc - 1.0) <= 1e-12 &&
                     std::abs(control.auc - 0.5) <= 0.05 &&
                     std::abs(wide.auc - 1.0) <= 1e-12 &&
                     wide.size() == 100101 && sweep_seconds < 5.0;
            });

  criterion(10, "identical configs and seeds give byte-identical outputs",
            [](std::string& detail) {
              const RunConfig first =
                  aluminum_run("standard", 1e-3, fresh_dir("repeat_a"));
              run_diagnose(first);
              const RunConfig second =
                  aluminum_run("standard", 1e-3, fresh_dir("repeat_b"));
              run_diagnose(second);
              for (const std::string name :
                   {"report.json", "library.json", "q_values.csv",
                    "confusion.csv"}) {
                if (slurp(first.out_dir / name) != slurp(second.out_dir / name)) {
                  detail = name + " differs between runs";
                  return false;
                }
              }
              detail = "report.json, library.json, q_values.csv, confusion.csv "
                       "all identical";
              return true;
            });

  std::printf("%d/10 criteria passed\n", 10 - failures);
  return failures == 0 ? 0 : 1;
}
