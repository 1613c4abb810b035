#include "gwshm/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "gwshm/chi_squared.hpp"
#include "gwshm/damage_index.hpp"
#include "gwshm/error.hpp"
#include "gwshm/json_convert.hpp"
#include "gwshm/signal_io.hpp"
#include "gwshm/spectrogram.hpp"

namespace gwshm {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Built-in synthetic recipes
// ---------------------------------------------------------------------------

namespace {

SyntheticStateSpec make_state(std::string label, double scatter_gain,
                              double noise_std) {
  SyntheticStateSpec state;
  state.state_label = std::move(label);
  state.arrival_delay_s = 20e-6;
  state.attenuation = 1.0;
  state.scatter_gain = scatter_gain;
  // The scattered copy must overlap the direct burst so the two interfere:
  // the copy multiplies the burst spectrum by |1 + g e^{-i 2 pi f delay}|,
  // and a delay of 2.2 us places the destructive notch just below the
  // carrier.  Growing g then reshapes the spectrum asymmetrically, which
  // is the signature the AR coefficients pick up.  (A copy delayed past
  // the burst duration is nearly a scaled replica and leaves the
  // least-squares fit almost unchanged.)
  state.scatter_delay_s = 2.2e-6;
  state.noise_std = noise_std;
  return state;
}

}  // namespace

SyntheticSpec aluminum_like_spec() {
  SyntheticSpec spec;
  spec.burst.cycles = 5;
  spec.burst.center_frequency = 250e3;
  spec.burst.amplitude = 1.0;
  spec.burst.window = Taper::hamming;
  spec.realizations = 20;
  spec.length = 7344;
  spec.sample_rate = 24e6;
  spec.downsample_factor = 12;  // 612 samples at 2 MHz
  spec.path_id = "2-6";
  const double noise = 0.001;
  spec.states = {make_state("healthy", 0.0, noise),
                 make_state("damage-1", 0.20, noise),
                 make_state("damage-2", 0.40, noise),
                 make_state("damage-3", 0.60, noise),
                 make_state("damage-4", 0.80, noise)};
  return spec;
}

SyntheticSpec composite_like_spec() {
  SyntheticSpec spec = aluminum_like_spec();
  spec.path_id = "1-4";
  // Noisier medium and six damage levels, the two highest close enough
  // that their hypothesis tests overlap — the hard identification case.
  const double noise = 0.002;
  spec.states = {make_state("healthy", 0.0, noise),
                 make_state("damage-1", 0.15, noise),
                 make_state("damage-2", 0.30, noise),
                 make_state("damage-3", 0.45, noise),
                 make_state("damage-4", 0.60, noise),
                 make_state("damage-5", 0.795, noise),
                 make_state("damage-6", 0.80, noise)};
  return spec;
}

// ---------------------------------------------------------------------------
// Method parsing and validation
// ---------------------------------------------------------------------------

void MethodSpec::validate() const {
  switch (kind) {
    case MethodKind::standard:
      return;
    case MethodKind::svd:
      if (svd_m < 1) throw ConfigError("svd method needs m >= 1");
      return;
    case MethodKind::pca:
      if (pca_energy_pct && pca_m)
        throw ConfigError("pca method takes an energy threshold or a fixed m, not both");
      if (pca_energy_pct && !(*pca_energy_pct > 0.0 && *pca_energy_pct <= 100.0))
        throw ConfigError("pca energy threshold must be in (0, 100]");
      if (pca_m && *pca_m < 1) throw ConfigError("pca method needs m >= 1");
      return;
    case MethodKind::manual: {
      if (manual_indices.empty())
        throw ConfigError("manual method needs at least one parameter index");
      std::vector<Eigen::Index> sorted = manual_indices;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ConfigError("manual method indices must be distinct");
      if (sorted.front() < 0)
        throw ConfigError("manual method indices must be >= 0");
      return;
    }
  }
  throw ConfigError("unknown method kind");
}

std::string method_tag(const MethodSpec& method) {
  switch (method.kind) {
    case MethodKind::standard:
      return "standard";
    case MethodKind::svd:
      return "svd" + std::to_string(method.svd_m);
    case MethodKind::pca:
      if (method.pca_m) return "pcam" + std::to_string(*method.pca_m);
      return "pca" + format_double(method.pca_energy_pct.value_or(99.0));
    case MethodKind::manual: {
      std::string tag = "manual";
      for (const Eigen::Index i : method.manual_indices)
        tag += "-" + std::to_string(i);
      return tag;
    }
  }
  throw ConfigError("unknown method kind");
}

MethodSpec parse_method(const std::string& text) {
  MethodSpec method;
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string tail = colon == std::string::npos ? "" : text.substr(colon + 1);

  const auto parse_int = [&text](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("cannot parse integer '" + s + "' in method '" + text + "'");
    }
  };

  if (head == "standard") {
    if (!tail.empty()) throw ConfigError("method 'standard' takes no argument");
    method.kind = MethodKind::standard;
  } else if (head == "svd") {
    method.kind = MethodKind::svd;
    if (!tail.empty()) method.svd_m = parse_int(tail);
  } else if (head == "pca") {
    method.kind = MethodKind::pca;
    if (!tail.empty()) {
      if (tail.rfind("m=", 0) == 0) {
        method.pca_m = parse_int(tail.substr(2));
      } else {
        std::string number = tail;
        if (!number.empty() && number.back() == '%') number.pop_back();
        try {
          std::size_t used = 0;
          method.pca_energy_pct = std::stod(number, &used);
          if (used != number.size()) throw std::invalid_argument(number);
        } catch (const std::exception&) {
          throw ConfigError("cannot parse energy threshold in method '" + text + "'");
        }
      }
    }
  } else if (head == "manual") {
    method.kind = MethodKind::manual;
    std::size_t start = 0;
    while (start <= tail.size() && !tail.empty()) {
      std::size_t end = tail.find(',', start);
      if (end == std::string::npos) end = tail.size();
      method.manual_indices.push_back(parse_int(tail.substr(start, end - start)));
      if (end == tail.size()) break;
      start = end + 1;
    }
  } else {
    throw ConfigError("unknown method '" + text +
                      "' (expected standard, svd[:m], pca[:energy%|m=K], "
                      "or manual:i,j,...)");
  }
  method.validate();
  return method;
}

// ---------------------------------------------------------------------------
// RunConfig JSON
// ---------------------------------------------------------------------------

void RunConfig::validate() const {
  if (csv_path.has_value() == synthetic.has_value())
    throw ConfigError("config needs exactly one data source (csv or synthetic)");
  if (baseline_label.empty()) throw ConfigError("baseline label must not be empty");
  if (!order.fixed) {
    if (order.scan_min < 1 || order.scan_min > order.scan_max)
      throw ConfigError("order scan range is empty or invalid");
  } else if (*order.fixed < 1) {
    throw ConfigError("fixed order must be >= 1");
  }
  method.validate();
  risk.validate();
  if (library_realizations && *library_realizations < 1)
    throw ConfigError("library_realizations must be >= 1");
  if (!(roc_sweep.step > 0.0) || !(roc_sweep.max >= roc_sweep.min))
    throw ConfigError("roc sweep needs max >= min and step > 0");
  if (spectrogram) {
    if (spectrogram->window_len < 2)
      throw ConfigError("spectrogram window must be >= 2 samples");
    if (!(spectrogram->overlap >= 0.0 && spectrogram->overlap < 1.0))
      throw ConfigError("spectrogram overlap must be in [0, 1)");
    if (spectrogram->nfft < spectrogram->window_len)
      throw ConfigError("spectrogram nfft must be >= window length");
  }
  if (diagnostics_max_lag < 1)
    throw ConfigError("diagnostics max_lag must be >= 1");
  if (!(diagnostics_alpha > 0.0 && diagnostics_alpha < 1.0))
    throw ConfigError("diagnostics alpha must be in (0, 1)");
}

namespace {

Taper taper_from_string(const std::string& name) {
  if (name == "hamming") return Taper::hamming;
  if (name == "hann") return Taper::hann;
  if (name == "rectangular") return Taper::rectangular;
  throw ConfigError("unknown window '" + name +
                    "' (expected hamming, hann, or rectangular)");
}

std::string to_string(Taper taper) {
  switch (taper) {
    case Taper::hamming:
      return "hamming";
    case Taper::hann:
      return "hann";
    case Taper::rectangular:
      return "rectangular";
  }
  throw ConfigError("unknown taper");
}

void reject_unknown_keys(const nlohmann::json& j,
                         const std::vector<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

SyntheticSpec synthetic_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name == "aluminum-like") return aluminum_like_spec();
    if (name == "composite-like") return composite_like_spec();
    throw ConfigError("unknown synthetic preset '" + name +
                      "' (expected aluminum-like or composite-like)");
  }
  if (!j.is_object())
    throw ConfigError("synthetic spec must be a preset name or an object");
  reject_unknown_keys(j,
                      {"burst", "states", "realizations", "length", "sample_rate",
                       "downsample_factor", "path_id"},
                      "synthetic spec");

  SyntheticSpec spec;
  if (j.contains("burst")) {
    const auto& b = j.at("burst");
    reject_unknown_keys(b, {"cycles", "center_frequency", "amplitude", "window"},
                        "burst spec");
    spec.burst.cycles = b.value("cycles", spec.burst.cycles);
    spec.burst.center_frequency =
        b.value("center_frequency", spec.burst.center_frequency);
    spec.burst.amplitude = b.value("amplitude", spec.burst.amplitude);
    if (b.contains("window"))
      spec.burst.window = taper_from_string(b.at("window").get<std::string>());
  } else {
    spec.burst = aluminum_like_spec().burst;
  }
  if (!j.contains("states") || !j.at("states").is_array() || j.at("states").empty())
    throw ConfigError("synthetic spec needs a non-empty states array");
  for (const auto& s : j.at("states")) {
    reject_unknown_keys(s,
                        {"label", "arrival_delay_s", "attenuation", "scatter_gain",
                         "scatter_delay_s", "noise_std"},
                        "synthetic state");
    SyntheticStateSpec state;
    state.state_label = s.at("label").get<std::string>();
    state.arrival_delay_s = s.value("arrival_delay_s", 0.0);
    state.attenuation = s.value("attenuation", 1.0);
    state.scatter_gain = s.value("scatter_gain", 0.0);
    state.scatter_delay_s = s.value("scatter_delay_s", 0.0);
    state.noise_std = s.value("noise_std", 0.0);
    spec.states.push_back(std::move(state));
  }
  spec.realizations = j.value("realizations", 20);
  spec.length = j.value("length", static_cast<std::size_t>(7344));
  spec.sample_rate = j.value("sample_rate", 24e6);
  spec.downsample_factor = j.value("downsample_factor", 1);
  spec.path_id = j.value("path_id", std::string("2-6"));
  return spec;
}

nlohmann::json synthetic_to_json(const SyntheticSpec& spec) {
  nlohmann::json states = nlohmann::json::array();
  for (const auto& s : spec.states) {
    states.push_back(nlohmann::json{{"label", s.state_label},
                                    {"arrival_delay_s", s.arrival_delay_s},
                                    {"attenuation", s.attenuation},
                                    {"scatter_gain", s.scatter_gain},
                                    {"scatter_delay_s", s.scatter_delay_s},
                                    {"noise_std", s.noise_std}});
  }
  return nlohmann::json{
      {"burst",
       {{"cycles", spec.burst.cycles},
        {"center_frequency", spec.burst.center_frequency},
        {"amplitude", spec.burst.amplitude},
        {"window", to_string(spec.burst.window)}}},
      {"states", std::move(states)},
      {"realizations", spec.realizations},
      {"length", spec.length},
      {"sample_rate", spec.sample_rate},
      {"downsample_factor", spec.downsample_factor},
      {"path_id", spec.path_id}};
}

nlohmann::json method_to_json(const MethodSpec& method) {
  switch (method.kind) {
    case MethodKind::standard:
      return "standard";
    case MethodKind::svd:
      return "svd:" + std::to_string(method.svd_m);
    case MethodKind::pca:
      if (method.pca_m) return "pca:m=" + std::to_string(*method.pca_m);
      return "pca:" + format_double(method.pca_energy_pct.value_or(99.0));
    case MethodKind::manual: {
      std::string text = "manual:";
      for (std::size_t i = 0; i < method.manual_indices.size(); ++i) {
        if (i) text += ',';
        text += std::to_string(method.manual_indices[i]);
      }
      return text;
    }
  }
  throw ConfigError("unknown method kind");
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown_keys(
      j,
      {"data", "path_id", "baseline_label", "order", "estimator", "covariance",
       "delta_covariance", "method", "risk", "out_dir", "seed",
       "library_realizations", "roc_sweep", "spectrogram", "diagnostics"},
      "config");

  RunConfig config;
  if (!j.contains("data") || !j.at("data").is_object())
    throw ConfigError("config needs a data object ({\"csv\": ...} or {\"synthetic\": ...})");
  const auto& data = j.at("data");
  reject_unknown_keys(data, {"csv", "synthetic"}, "data");
  if (data.contains("csv"))
    config.csv_path = fs::path(data.at("csv").get<std::string>());
  if (data.contains("synthetic"))
    config.synthetic = synthetic_from_json(data.at("synthetic"));

  if (j.contains("path_id")) config.path_id = j.at("path_id").get<std::string>();
  config.baseline_label = j.value("baseline_label", std::string("healthy"));

  if (j.contains("order")) {
    const auto& order = j.at("order");
    reject_unknown_keys(order, {"fixed", "scan"}, "order");
    if (order.contains("fixed") && order.contains("scan"))
      throw ConfigError("order takes a fixed value or a scan, not both");
    if (order.contains("fixed")) {
      config.order.fixed = order.at("fixed").get<int>();
    } else if (order.contains("scan")) {
      const auto& scan = order.at("scan");
      reject_unknown_keys(scan, {"min", "max", "rule"}, "order scan");
      config.order.scan_min = scan.value("min", config.order.scan_min);
      config.order.scan_max = scan.value("max", config.order.scan_max);
      if (scan.contains("rule"))
        config.order.rule = order_rule_from_string(scan.at("rule").get<std::string>());
    }
  }

  if (j.contains("estimator"))
    config.estimator = estimator_kind_from_string(j.at("estimator").get<std::string>());
  if (j.contains("covariance"))
    config.covariance =
        covariance_source_from_string(j.at("covariance").get<std::string>());
  if (j.contains("delta_covariance")) {
    const std::string mode = j.at("delta_covariance").get<std::string>();
    if (mode == "doubled-baseline")
      config.delta_mode = DeltaCovMode::doubled_baseline;
    else if (mode == "baseline-plus-inspection")
      config.delta_mode = DeltaCovMode::baseline_plus_inspection;
    else
      throw ConfigError("unknown delta_covariance '" + mode + "'");
  }
  if (j.contains("method")) {
    if (!j.at("method").is_string())
      throw ConfigError("method must be a string such as \"svd:2\"");
    config.method = parse_method(j.at("method").get<std::string>());
  }

  if (j.contains("risk")) {
    const auto& risk = j.at("risk");
    reject_unknown_keys(risk, {"alpha", "manual_threshold"}, "risk");
    config.risk = RiskSpec{};
    if (risk.contains("alpha")) config.risk.alpha = risk.at("alpha").get<double>();
    if (risk.contains("manual_threshold"))
      config.risk.manual_threshold = risk.at("manual_threshold").get<double>();
  }

  if (j.contains("out_dir"))
    config.out_dir = fs::path(j.at("out_dir").get<std::string>());
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("library_realizations"))
    config.library_realizations = j.at("library_realizations").get<int>();

  if (j.contains("roc_sweep")) {
    const auto& sweep = j.at("roc_sweep");
    reject_unknown_keys(sweep, {"min", "max", "step"}, "roc_sweep");
    config.roc_sweep.min = sweep.value("min", config.roc_sweep.min);
    config.roc_sweep.max = sweep.value("max", config.roc_sweep.max);
    config.roc_sweep.step = sweep.value("step", config.roc_sweep.step);
  }
  if (j.contains("spectrogram")) {
    const auto& spec = j.at("spectrogram");
    reject_unknown_keys(spec, {"window_len", "overlap", "nfft"}, "spectrogram");
    SpectrogramSpec s;
    s.window_len = spec.value("window_len", s.window_len);
    s.overlap = spec.value("overlap", s.overlap);
    s.nfft = spec.value("nfft", s.nfft);
    config.spectrogram = s;
  }
  if (j.contains("diagnostics")) {
    const auto& diag = j.at("diagnostics");
    reject_unknown_keys(diag, {"max_lag", "alpha"}, "diagnostics");
    config.diagnostics_max_lag = diag.value("max_lag", config.diagnostics_max_lag);
    config.diagnostics_alpha = diag.value("alpha", config.diagnostics_alpha);
  }

  config.validate();
  return config;
}

nlohmann::json config_to_json(const RunConfig& config) {
  nlohmann::json data = nlohmann::json::object();
  if (config.csv_path) data["csv"] = config.csv_path->string();
  if (config.synthetic) data["synthetic"] = synthetic_to_json(*config.synthetic);

  nlohmann::json order;
  if (config.order.fixed) {
    order = nlohmann::json{{"fixed", *config.order.fixed}};
  } else {
    order = nlohmann::json{{"scan",
                            {{"min", config.order.scan_min},
                             {"max", config.order.scan_max},
                             {"rule", to_string(config.order.rule)}}}};
  }

  nlohmann::json risk = nlohmann::json::object();
  if (config.risk.alpha) risk["alpha"] = *config.risk.alpha;
  if (config.risk.manual_threshold)
    risk["manual_threshold"] = *config.risk.manual_threshold;

  nlohmann::json j{
      {"data", std::move(data)},
      {"baseline_label", config.baseline_label},
      {"order", std::move(order)},
      {"estimator", to_string(config.estimator)},
      {"covariance", to_string(config.covariance)},
      {"delta_covariance", config.delta_mode == DeltaCovMode::doubled_baseline
                               ? "doubled-baseline"
                               : "baseline-plus-inspection"},
      {"method", method_to_json(config.method)},
      {"risk", std::move(risk)},
      {"seed", config.seed},
      {"roc_sweep",
       {{"min", config.roc_sweep.min},
        {"max", config.roc_sweep.max},
        {"step", config.roc_sweep.step}}},
      {"diagnostics",
       {{"max_lag", config.diagnostics_max_lag},
        {"alpha", config.diagnostics_alpha}}}};
  if (config.path_id) j["path_id"] = *config.path_id;
  if (config.library_realizations)
    j["library_realizations"] = *config.library_realizations;
  if (config.spectrogram) {
    j["spectrogram"] = nlohmann::json{{"window_len", config.spectrogram->window_len},
                                      {"overlap", config.spectrogram->overlap},
                                      {"nfft", config.spectrogram->nfft}};
  }
  return j;
}

RunConfig load_config(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config file " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("cannot parse config file " + file.string() + ": " + ex.what());
  }
  try {
    return config_from_json(j);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("malformed config " + file.string() + ": " + ex.what());
  }
}

// ---------------------------------------------------------------------------
// Shared pipeline stages
// ---------------------------------------------------------------------------

namespace {

SignalEnsemble load_source(const RunConfig& config) {
  if (config.csv_path) return ingest_csv(*config.csv_path);
  const SyntheticSpec& spec = *config.synthetic;
  SignalEnsemble raw =
      synthesize_ensemble(spec.burst, spec.states, spec.realizations, spec.length,
                          spec.sample_rate, config.seed, spec.path_id);
  if (spec.downsample_factor == 1) return raw;
  std::vector<SignalRecord> decimated;
  decimated.reserve(raw.records.size());
  for (const auto& rec : raw.records)
    decimated.push_back(downsample(rec, spec.downsample_factor));
  return SignalEnsemble::from_records(std::move(decimated));
}

/// Resolves the working path: the configured one, or the data's sole path.
std::string resolve_path(const RunConfig& config, const SignalEnsemble& ensemble) {
  const std::vector<std::string> paths = ensemble.path_ids();
  if (config.path_id) {
    if (std::find(paths.begin(), paths.end(), *config.path_id) == paths.end())
      throw DataError("no records for path " + *config.path_id);
    return *config.path_id;
  }
  if (paths.size() > 1)
    throw ConfigError("data contains several paths; set path_id to choose one");
  return paths.front();
}

/// Records of one state sorted by realization index.
std::vector<const SignalRecord*> state_records(const SignalEnsemble& ensemble,
                                               const std::string& state) {
  std::vector<const SignalRecord*> records;
  for (const auto& rec : ensemble.records)
    if (rec.state_label == state) records.push_back(&rec);
  std::sort(records.begin(), records.end(),
            [](const SignalRecord* a, const SignalRecord* b) {
              return a->realization_index < b->realization_index;
            });
  return records;
}

struct FittedState {
  std::string label;
  std::vector<const SignalRecord*> library_records;
  std::vector<ArModel> library_models;          ///< full-dimension fits
  Eigen::VectorXd weights;                      ///< WLS weights (empty for OLS)
};

struct LibraryBuild {
  StateLibrary library;
  int selected_order = 0;
  bool order_overridden = false;
  std::optional<OrderScan> scan;
  std::vector<std::string> damage_labels;
  std::vector<FittedState> states;  ///< baseline first, then damage order
  Eigen::VectorXd baseline_weights; ///< for inspection-phase WLS fits
};

ArModel fit_record(const SignalRecord& record, int order, EstimatorKind estimator,
                   const Eigen::VectorXd& weights) {
  const RegressionSystem sys = build_regression(record.samples, order);
  ArModel model = estimator == EstimatorKind::ols ? estimate_ols(sys)
                                                  : estimate_wls(sys, weights);
  model.path_id = record.path_id;
  model.state_label = record.state_label;
  return model;
}

/// Reduce one (theta, covariance) pair under the library's reduction.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> reduce_pair(
    const Reduction& reduction, const Eigen::VectorXd& theta,
    const Eigen::MatrixXd& p) {
  if (std::holds_alternative<std::monostate>(reduction)) return {theta, p};
  if (const auto* sel = std::get_if<SvdSelection>(&reduction))
    return apply_selection(*sel, theta, p);
  return pca_project(std::get<PcaBasis>(reduction), theta, p);
}

/// The baseline phase: order choice, per-realization fits, reduction fit,
/// and per-state means/covariances.
LibraryBuild build_library(const RunConfig& config, const SignalEnsemble& ensemble) {
  const std::vector<std::string> labels = ensemble.state_labels();
  if (std::find(labels.begin(), labels.end(), config.baseline_label) == labels.end())
    throw DataError("baseline state '" + config.baseline_label +
                    "' not present in the data");

  LibraryBuild build;
  build.library.baseline_label = config.baseline_label;
  build.library.covariance_source = config.covariance;
  for (const auto& label : labels)
    if (label != config.baseline_label) build.damage_labels.push_back(label);

  // Library split per state.
  std::vector<std::string> ordered_labels{config.baseline_label};
  ordered_labels.insert(ordered_labels.end(), build.damage_labels.begin(),
                        build.damage_labels.end());
  for (const auto& label : ordered_labels) {
    FittedState state;
    state.label = label;
    for (const SignalRecord* rec : state_records(ensemble, label)) {
      if (config.library_realizations &&
          rec->realization_index >= *config.library_realizations)
        continue;
      state.library_records.push_back(rec);
    }
    if (state.library_records.empty())
      throw DataError("state " + label + " has no library realizations");
    build.states.push_back(std::move(state));
  }

  // Model order: explicit override or a scan on the first baseline record.
  if (config.order.fixed) {
    build.selected_order = *config.order.fixed;
    build.order_overridden = true;
  } else {
    const SignalRecord* first = build.states.front().library_records.front();
    build.scan = scan_orders(first->samples, config.order.scan_min,
                             config.order.scan_max, config.order.rule);
    build.selected_order = build.scan->selected_order;
  }
  const int order = build.selected_order;

  // WLS weights characterize the sensor-noise heteroskedasticity, so they
  // are estimated once from the baseline library group and reused for every
  // fit — library states and inspection records alike.  That keeps a
  // record's library model and its inspection-time refit identical.
  if (config.estimator == EstimatorKind::wls) {
    std::vector<SignalRecord> group;
    group.reserve(build.states.front().library_records.size());
    for (const SignalRecord* rec : build.states.front().library_records)
      group.push_back(*rec);
    build.baseline_weights = ensemble_residual_weights(
        SignalEnsemble::from_records(std::move(group)), order);
  }
  for (auto& state : build.states) {
    state.weights = build.baseline_weights;
    for (const SignalRecord* rec : state.library_records)
      state.library_models.push_back(
          fit_record(*rec, order, config.estimator, state.weights));
  }

  // Reduction fitted on the baseline state only.
  const FittedState& baseline = build.states.front();
  const Eigen::Index n = baseline.library_models.front().theta.size();
  Eigen::VectorXd baseline_mean_theta = Eigen::VectorXd::Zero(n);
  for (const auto& model : baseline.library_models)
    baseline_mean_theta += model.theta;
  baseline_mean_theta /= static_cast<double>(baseline.library_models.size());

  const auto baseline_source_covariance = [&]() -> Eigen::MatrixXd {
    if (config.covariance == CovarianceSource::experimental) {
      std::vector<Eigen::VectorXd> thetas;
      for (const auto& model : baseline.library_models) thetas.push_back(model.theta);
      return experimental_covariance(thetas);
    }
    Eigen::MatrixXd mean_cov = Eigen::MatrixXd::Zero(n, n);
    for (const auto& model : baseline.library_models) mean_cov += model.covariance;
    return mean_cov / static_cast<double>(baseline.library_models.size());
  };

  switch (config.method.kind) {
    case MethodKind::standard:
      build.library.reduction = std::monostate{};
      break;
    case MethodKind::svd:
      build.library.reduction =
          svd_select(baseline_mean_theta, config.method.svd_m);
      break;
    case MethodKind::pca:
      build.library.reduction =
          config.method.pca_m
              ? pca_fit_fixed(baseline_source_covariance(), *config.method.pca_m)
              : pca_fit_energy(baseline_source_covariance(),
                               config.method.pca_energy_pct.value_or(99.0));
      break;
    case MethodKind::manual: {
      // Arbitrary user-chosen coordinates expressed as a selection; the
      // magnitude ranking is still recorded for the report.
      for (const Eigen::Index idx : config.method.manual_indices)
        if (idx >= static_cast<Eigen::Index>(n))
          throw ConfigError("manual parameter index " + std::to_string(idx) +
                            " out of range for model order " +
                            std::to_string(n));
      SvdSelection sel = svd_select(baseline_mean_theta,
                                    static_cast<int>(n));
      sel.m = static_cast<int>(config.method.manual_indices.size());
      sel.selected_indices = config.method.manual_indices;
      sel.validate();
      build.library.reduction = std::move(sel);
      break;
    }
  }

  // Reduced per-state models.
  for (std::size_t s = 0; s < build.states.size(); ++s) {
    const FittedState& state = build.states[s];
    std::vector<Eigen::VectorXd> reduced_thetas;
    Eigen::MatrixXd mean_cov;
    Eigen::VectorXd mean_theta;
    for (const auto& model : state.library_models) {
      auto [theta_r, p_r] =
          reduce_pair(build.library.reduction, model.theta, model.covariance);
      if (reduced_thetas.empty()) {
        mean_theta = Eigen::VectorXd::Zero(theta_r.size());
        mean_cov = Eigen::MatrixXd::Zero(p_r.rows(), p_r.cols());
      }
      mean_theta += theta_r;
      mean_cov += p_r;
      reduced_thetas.push_back(std::move(theta_r));
    }
    const double count = static_cast<double>(reduced_thetas.size());
    mean_theta /= count;
    mean_cov /= count;

    StateModel model;
    model.theta_mean = mean_theta;
    if (config.covariance == CovarianceSource::experimental) {
      if (reduced_thetas.size() < 2)
        throw DataError("state " + state.label +
                        " needs >= 2 library realizations for the experimental covariance");
      model.covariance = experimental_covariance(reduced_thetas);
    } else {
      model.covariance = mean_cov;
    }

    if (s == 0) {
      build.library.baseline = std::move(model);
      build.library.baseline_thetas = std::move(reduced_thetas);
    } else {
      build.library.damage_states.emplace_back(state.label, std::move(model));
    }
  }
  build.library.validate();
  return build;
}

/// The inspection phase over one record: fit, reduce, test, identify.
struct InspectionRow {
  const SignalRecord* record;
  double q_baseline;
  QTest test;
  Identification identification;
};

std::vector<InspectionRow> run_inspection(const RunConfig& config,
                                          const SignalEnsemble& ensemble,
                                          const LibraryBuild& build) {
  std::vector<InspectionRow> rows;
  std::vector<std::string> ordered_labels{config.baseline_label};
  ordered_labels.insert(ordered_labels.end(), build.damage_labels.begin(),
                        build.damage_labels.end());
  for (const auto& label : ordered_labels) {
    for (const SignalRecord* rec : state_records(ensemble, label)) {
      if (config.library_realizations &&
          rec->realization_index < *config.library_realizations)
        continue;
      // The current state is unknown at inspection time, so WLS weights come
      // from the baseline library group rather than the record's own state.
      const ArModel model = fit_record(*rec, build.selected_order, config.estimator,
                                       build.baseline_weights);
      auto [theta_r, p_r] =
          reduce_pair(build.library.reduction, model.theta, model.covariance);

      InspectionRow row;
      row.record = rec;
      row.test = detect(build.library, theta_r, config.risk, config.delta_mode,
                        &p_r);
      row.q_baseline = row.test.q_value;
      if (!build.library.damage_states.empty())
        row.identification = identify(build.library, theta_r, config.risk);
      else
        row.identification.label = kUnidentifiedLabel;
      rows.push_back(std::move(row));
    }
  }
  if (rows.empty())
    throw DataError("no inspection records left after the library split");
  return rows;
}

std::vector<DetectionOutcome> to_outcomes(const std::vector<InspectionRow>& rows) {
  std::vector<DetectionOutcome> outcomes;
  outcomes.reserve(rows.size());
  for (const auto& row : rows) {
    DetectionOutcome outcome;
    outcome.true_state = row.record->state_label;
    outcome.realization_index = row.record->realization_index;
    outcome.test = row.test;
    outcome.assigned_label = row.identification.label;
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

nlohmann::json order_to_json(const LibraryBuild& build, const RunConfig& config) {
  nlohmann::json j{{"selected", build.selected_order},
                   {"overridden", build.order_overridden}};
  if (!build.order_overridden) j["rule"] = to_string(config.order.rule);
  return j;
}

std::string q_values_csv(const std::vector<InspectionRow>& rows,
                         const std::vector<std::string>& damage_labels) {
  std::string out = "state_label,realization_index,q_baseline,threshold,decision,assigned";
  for (const auto& label : damage_labels) out += ",q_" + label;
  out += '\n';
  for (const auto& row : rows) {
    out += row.record->state_label;
    out += ',';
    out += std::to_string(row.record->realization_index);
    out += ',';
    out += format_double(row.q_baseline);
    out += ',';
    out += format_double(row.test.threshold);
    out += ',';
    out += row.test.damaged ? "damaged" : "healthy";
    out += ',';
    out += row.identification.label;
    for (std::size_t i = 0; i < damage_labels.size(); ++i) {
      out += ',';
      if (i < row.identification.q_per_state.size())
        out += format_double(row.identification.q_per_state[i].second);
    }
    out += '\n';
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

void run_simulate(const RunConfig& config) {
  config.validate();
  if (!config.synthetic)
    throw ConfigError("simulate needs a synthetic data source");
  const SignalEnsemble ensemble = load_source(config);
  write_ensemble_csv(ensemble, config.out_dir / "ensemble.csv");
}

void run_identify(const RunConfig& config) {
  config.validate();
  SignalEnsemble all = load_source(config);
  const SignalEnsemble ensemble = all.where_path(resolve_path(config, all));

  // Order: override or scan on the first baseline record.
  std::optional<OrderScan> scan;
  int order = 0;
  bool overridden = false;
  const std::vector<const SignalRecord*> baseline_records =
      state_records(ensemble, config.baseline_label);
  if (baseline_records.empty())
    throw DataError("baseline state '" + config.baseline_label +
                    "' not present in the data");
  if (config.order.fixed) {
    order = *config.order.fixed;
    overridden = true;
  } else {
    scan = scan_orders(baseline_records.front()->samples, config.order.scan_min,
                       config.order.scan_max, config.order.rule);
    order = scan->selected_order;
  }

  // Per-state WLS weights when requested.
  std::map<std::string, Eigen::VectorXd> weights;
  if (config.estimator == EstimatorKind::wls) {
    for (const auto& label : ensemble.state_labels()) {
      std::vector<SignalRecord> group;
      for (const SignalRecord* rec : state_records(ensemble, label))
        group.push_back(*rec);
      weights[label] = ensemble_residual_weights(
          SignalEnsemble::from_records(std::move(group)), order);
    }
  }

  std::string diag_csv =
      "state_label,realization_index,sigma2_e,whiteness_statistic,whiteness_pass,"
      "normality_statistic,normality_pass\n";
  nlohmann::json model_files = nlohmann::json::array();
  for (const auto& label : ensemble.state_labels()) {
    for (const SignalRecord* rec : state_records(ensemble, label)) {
      const ArModel model = fit_record(
          *rec, order, config.estimator,
          config.estimator == EstimatorKind::wls ? weights.at(label)
                                                 : Eigen::VectorXd());
      const std::string name =
          "models/" + label + "_r" + std::to_string(rec->realization_index) + ".json";
      save_model(model, config.out_dir / name);
      model_files.push_back(name);

      const Eigen::VectorXd e = residuals(model, rec->samples);
      const int max_lag =
          std::min<int>(config.diagnostics_max_lag, static_cast<int>(e.size()) - 1);
      const ResidualDiagnostics diag =
          residual_diagnostics(e, max_lag, config.diagnostics_alpha);
      diag_csv += label + "," + std::to_string(rec->realization_index) + "," +
                  format_double(model.sigma2_e) + "," +
                  format_double(diag.whiteness_statistic) + "," +
                  (diag.whiteness_pass ? "true" : "false") + "," +
                  format_double(diag.normality_statistic) + "," +
                  (diag.normality_pass ? "true" : "false") + "\n";
    }
  }

  if (scan) {
    std::string scan_csv = "order,aic,bic,rss_sss\n";
    for (std::size_t i = 0; i < scan->candidate_orders.size(); ++i) {
      scan_csv += std::to_string(scan->candidate_orders[i]) + "," +
                  format_double(scan->aic[i]) + "," + format_double(scan->bic[i]) +
                  "," + format_double(scan->rss_sss[i]) + "\n";
    }
    write_text_atomic(config.out_dir / "order_scan.csv", scan_csv);
  }
  write_text_atomic(config.out_dir / "diagnostics.csv", diag_csv);

  nlohmann::json meta{{"selected_order", order},
                      {"order_overridden", overridden},
                      {"estimator", to_string(config.estimator)},
                      {"models", std::move(model_files)},
                      {"config", config_to_json(config)}};
  if (!overridden) meta["order_rule"] = to_string(config.order.rule);
  write_text_atomic(config.out_dir / "identify_meta.json", meta.dump(2) + "\n");

  if (config.spectrogram) {
    const Spectrogram spec =
        spectrogram(*baseline_records.front(), config.spectrogram->window_len,
                    config.spectrogram->overlap, config.spectrogram->nfft);
    write_spectrogram_csv(spec, config.out_dir / "spectrogram.csv");
  }
}

void run_diagnose(const RunConfig& config) {
  config.validate();
  SignalEnsemble all = load_source(config);
  const SignalEnsemble ensemble = all.where_path(resolve_path(config, all));

  const LibraryBuild build = build_library(config, ensemble);
  const std::vector<InspectionRow> rows = run_inspection(config, ensemble, build);
  const ConfusionTable confusion =
      summarize(to_outcomes(rows), config.baseline_label, build.damage_labels);

  // library.json captures the baseline phase alone: everything the
  // inspection of a future record would need.
  nlohmann::json library_json = build.library;
  library_json["selected_order"] = build.selected_order;
  library_json["order_overridden"] = build.order_overridden;
  write_text_atomic(config.out_dir / "library.json", library_json.dump(2) + "\n");

  nlohmann::json records = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json q_map = nlohmann::json::object();
    for (const auto& [label, q] : row.identification.q_per_state) q_map[label] = q;
    records.push_back(nlohmann::json{
        {"state_label", row.record->state_label},
        {"realization_index", row.record->realization_index},
        {"q_baseline", row.q_baseline},
        {"decision", row.test.damaged ? "damaged" : "healthy"},
        {"assigned", row.identification.label},
        {"q_per_state", std::move(q_map)}});
  }

  const int dof = build.library.dimension();
  nlohmann::json risk{{"threshold", config.risk.threshold(dof)}, {"dof", dof}};
  if (config.risk.alpha) risk["alpha"] = *config.risk.alpha;

  nlohmann::json report{{"config", config_to_json(config)},
                        {"order", order_to_json(build, config)},
                        {"library", build.library},
                        {"risk", std::move(risk)},
                        {"records", std::move(records)},
                        {"confusion", confusion}};
  write_text_atomic(config.out_dir / "report.json", report.dump(2) + "\n");
  write_text_atomic(config.out_dir / "q_values.csv",
                    q_values_csv(rows, build.damage_labels));
  write_text_atomic(config.out_dir / "confusion.csv",
                    confusion_csv(confusion, config.baseline_label));
}

void run_roc(const RunConfig& config) {
  config.validate();
  SignalEnsemble all = load_source(config);
  const std::string path = resolve_path(config, all);
  const SignalEnsemble ensemble = all.where_path(path);

  const LibraryBuild build = build_library(config, ensemble);
  const std::vector<InspectionRow> rows = run_inspection(config, ensemble, build);

  std::vector<double> q_healthy;
  std::vector<double> q_damaged;
  for (const auto& row : rows) {
    if (row.record->state_label == config.baseline_label)
      q_healthy.push_back(row.q_baseline);
    else
      q_damaged.push_back(row.q_baseline);
  }
  const RocCurve curve = roc(q_healthy, q_damaged, config.roc_sweep.min,
                             config.roc_sweep.max, config.roc_sweep.step);

  const std::string stem = "roc_" + path + "_" + method_tag(config.method) + "_" +
                           to_string(config.covariance);
  std::string csv = "threshold,fpr,tpr\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    csv += format_double(curve.thresholds[i]) + "," + format_double(curve.fpr[i]) +
           "," + format_double(curve.tpr[i]) + "\n";
  }
  write_text_atomic(config.out_dir / (stem + ".csv"), csv);

  nlohmann::json meta{{"auc", curve.auc},
                      {"points", curve.size()},
                      {"healthy_count", q_healthy.size()},
                      {"damaged_count", q_damaged.size()},
                      {"order", order_to_json(build, config)},
                      {"config", config_to_json(config)}};
  write_text_atomic(config.out_dir / (stem + ".json"), meta.dump(2) + "\n");
}

void run_di(const RunConfig& config) {
  config.validate();
  SignalEnsemble all = load_source(config);
  const std::string path = resolve_path(config, all);
  const std::vector<DiResult> results =
      di_evolution(all, config.baseline_label, path);
  write_text_atomic(config.out_dir / "di.csv", di_csv(results));
}

}  // namespace gwshm
