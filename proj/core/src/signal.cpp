#include "gwshm/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <tuple>
#include <utility>

#include "gwshm/error.hpp"
#include "gwshm/random.hpp"

namespace gwshm {

namespace {

std::string record_name(const SignalRecord& r) {
  return "record path=" + r.path_id + " state=" + r.state_label +
         " realization=" + std::to_string(r.realization_index);
}

double taper_value(Taper window, std::size_t i, std::size_t n) {
  if (n < 2) return 1.0;
  const double phase =
      2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1);
  switch (window) {
    case Taper::rectangular:
      return 1.0;
    case Taper::hamming:
      return 0.54 - 0.46 * std::cos(phase);
    case Taper::hann:
      return 0.5 - 0.5 * std::cos(phase);
  }
  throw ConfigError("unknown taper");
}

}  // namespace

void SignalRecord::validate() const {
  if (samples.empty())
    throw DataError(record_name(*this) + ": no samples");
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw DataError(record_name(*this) + ": sample rate must be positive");
  if (realization_index < 0)
    throw DataError(record_name(*this) + ": negative realization index");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i]))
      throw DataError(record_name(*this) + ": non-finite sample at index " +
                      std::to_string(i));
  }
}

SignalEnsemble SignalEnsemble::from_records(std::vector<SignalRecord> records) {
  if (records.empty()) throw DataError("ensemble has no records");
  for (const auto& r : records) r.validate();
  const std::size_t length = records.front().samples.size();
  const double rate = records.front().sample_rate;
  std::set<std::tuple<std::string, std::string, int>> seen;
  for (const auto& r : records) {
    if (r.samples.size() != length)
      throw DataError(record_name(r) + ": length " +
                      std::to_string(r.samples.size()) +
                      " differs from ensemble length " + std::to_string(length));
    if (r.sample_rate != rate)
      throw DataError(record_name(r) + ": inconsistent sample_rate");
    if (!seen.emplace(r.path_id, r.state_label, r.realization_index).second)
      throw DataError(record_name(r) + ": duplicate (path, state, realization)");
  }
  SignalEnsemble out;
  out.records = std::move(records);
  return out;
}

std::size_t SignalEnsemble::record_length() const {
  if (records.empty()) throw DataError("ensemble has no records");
  return records.front().samples.size();
}

double SignalEnsemble::sample_rate() const {
  if (records.empty()) throw DataError("ensemble has no records");
  return records.front().sample_rate;
}

std::vector<std::string> SignalEnsemble::state_labels() const {
  std::vector<std::string> labels;
  for (const auto& r : records) {
    if (std::find(labels.begin(), labels.end(), r.state_label) == labels.end())
      labels.push_back(r.state_label);
  }
  return labels;
}

std::vector<std::string> SignalEnsemble::path_ids() const {
  std::vector<std::string> ids;
  for (const auto& r : records) {
    if (std::find(ids.begin(), ids.end(), r.path_id) == ids.end())
      ids.push_back(r.path_id);
  }
  return ids;
}

SignalEnsemble SignalEnsemble::where_path(const std::string& path_id) const {
  std::vector<SignalRecord> kept;
  for (const auto& r : records)
    if (r.path_id == path_id) kept.push_back(r);
  if (kept.empty()) throw DataError("no records for path " + path_id);
  return from_records(std::move(kept));
}

SignalEnsemble SignalEnsemble::where_state(const std::string& state_label) const {
  std::vector<SignalRecord> kept;
  for (const auto& r : records)
    if (r.state_label == state_label) kept.push_back(r);
  if (kept.empty()) throw DataError("no records for state " + state_label);
  return from_records(std::move(kept));
}

std::vector<double> tone_burst(const ToneBurstSpec& spec, double sample_rate) {
  if (spec.cycles < 1) throw ConfigError("tone burst needs at least one cycle");
  if (!(spec.center_frequency > 0.0))
    throw ConfigError("tone burst center frequency must be positive");
  if (!(sample_rate >= 10.0 * spec.center_frequency))
    throw ConfigError("tone burst requires sample_rate >= 10 * center_frequency");
  const std::size_t n = static_cast<std::size_t>(
      std::llround(spec.cycles * sample_rate / spec.center_frequency));
  std::vector<double> burst(n);
  const double omega = 2.0 * std::numbers::pi * spec.center_frequency / sample_rate;
  for (std::size_t i = 0; i < n; ++i) {
    burst[i] = spec.amplitude * taper_value(spec.window, i, n) *
               std::sin(omega * static_cast<double>(i));
  }
  return burst;
}

SignalRecord downsample(const SignalRecord& record, int factor) {
  record.validate();
  if (factor < 1) throw ConfigError("downsample factor must be >= 1");
  if (factor == 1) return record;
  const std::size_t n = record.samples.size();
  if (static_cast<std::size_t>(factor) > n)
    throw ConfigError("downsample factor exceeds record length");

  // Moving average of length `factor`, run forward then backward; the two
  // passes cancel each other's group delay exactly.
  const auto moving_average = [factor](const std::vector<double>& x) {
    std::vector<double> y(x.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      acc += x[i];
      if (i >= static_cast<std::size_t>(factor)) acc -= x[i - factor];
      const std::size_t width = std::min(i + 1, static_cast<std::size_t>(factor));
      y[i] = acc / static_cast<double>(width);
    }
    return y;
  };

  std::vector<double> forward = moving_average(record.samples);
  std::reverse(forward.begin(), forward.end());
  std::vector<double> smooth = moving_average(forward);
  std::reverse(smooth.begin(), smooth.end());

  const std::size_t out_len = n / static_cast<std::size_t>(factor);
  SignalRecord out = record;
  out.samples.clear();
  out.samples.reserve(out_len);
  for (std::size_t k = 0; k < out_len; ++k)
    out.samples.push_back(smooth[k * static_cast<std::size_t>(factor)]);
  out.sample_rate = record.sample_rate / factor;
  return out;
}

SignalEnsemble synthesize_ensemble(const ToneBurstSpec& burst,
                                   const std::vector<SyntheticStateSpec>& states,
                                   int realizations, std::size_t length,
                                   double sample_rate, std::uint64_t seed,
                                   const std::string& path_id) {
  if (states.empty()) throw ConfigError("synthesis needs at least one state");
  if (realizations < 1) throw ConfigError("synthesis needs at least one realization");
  if (length == 0) throw ConfigError("synthesis record length must be positive");

  const std::vector<double> pulse = tone_burst(burst, sample_rate);

  std::vector<SignalRecord> records;
  records.reserve(states.size() * static_cast<std::size_t>(realizations));
  for (std::size_t s = 0; s < states.size(); ++s) {
    const SyntheticStateSpec& st = states[s];
    if (st.state_label.empty())
      throw ConfigError("synthetic state needs a label");
    if (!(st.attenuation > 0.0 && st.attenuation <= 1.0))
      throw ConfigError("state " + st.state_label + ": attenuation must be in (0, 1]");
    if (st.scatter_gain < 0.0)
      throw ConfigError("state " + st.state_label + ": scatter gain must be >= 0");
    if (st.arrival_delay_s < 0.0 || st.scatter_delay_s < 0.0)
      throw ConfigError("state " + st.state_label + ": delays must be >= 0");
    if (st.noise_std < 0.0)
      throw ConfigError("state " + st.state_label + ": noise std must be >= 0");

    const std::size_t direct_start = static_cast<std::size_t>(
        std::llround(st.arrival_delay_s * sample_rate));
    const std::size_t scatter_start =
        direct_start +
        static_cast<std::size_t>(std::llround(st.scatter_delay_s * sample_rate));
    if (direct_start + pulse.size() > length)
      throw ConfigError("state " + st.state_label +
                        ": direct arrival does not fit in record length");
    if (st.scatter_gain > 0.0 && scatter_start + pulse.size() > length)
      throw ConfigError("state " + st.state_label +
                        ": scattered arrival does not fit in record length");

    // Deterministic part is shared by all realizations of the state.
    std::vector<double> clean(length, 0.0);
    for (std::size_t i = 0; i < pulse.size(); ++i)
      clean[direct_start + i] += st.attenuation * pulse[i];
    if (st.scatter_gain > 0.0) {
      for (std::size_t i = 0; i < pulse.size(); ++i)
        clean[scatter_start + i] += st.scatter_gain * pulse[i];
    }

    for (int r = 0; r < realizations; ++r) {
      SignalRecord rec;
      rec.path_id = path_id;
      rec.state_label = st.state_label;
      rec.realization_index = r;
      rec.sample_rate = sample_rate;
      rec.samples = clean;
      if (st.noise_std > 0.0) {
        NormalSampler noise(derive_stream(seed, s, static_cast<std::uint64_t>(r)));
        for (double& v : rec.samples) v += st.noise_std * noise();
      }
      records.push_back(std::move(rec));
    }
  }
  return SignalEnsemble::from_records(std::move(records));
}

}  // namespace gwshm
