#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gwshm {

/// One recorded waveform: the samples of a single excitation/measurement
/// run on one actuator-sensor path under one structural state.
struct SignalRecord {
  std::vector<double> samples;
  double sample_rate = 0.0;  ///< Hz, > 0
  std::string path_id;       ///< actuator-sensor path, e.g. "2-6"
  std::string state_label;   ///< structural state, e.g. "healthy"
  int realization_index = 0; ///< 0-based repetition counter within the state

  /// Throws DataError when the record violates a structural precondition:
  /// empty samples, non-finite sample, or non-positive sample rate.
  void validate() const;
};

/// A collection of records sharing one sample rate and one record length
/// (both enforced at construction).  Typically: several structural states
/// times several repeated measurements on one or more paths.
struct SignalEnsemble {
  std::vector<SignalRecord> records;

  /// Validates every record plus the cross-record invariants (uniform
  /// length, uniform sample rate, non-empty).  Throws DataError.
  static SignalEnsemble from_records(std::vector<SignalRecord> records);

  std::size_t record_length() const;
  double sample_rate() const;

  /// Distinct state labels, in first-appearance order.
  std::vector<std::string> state_labels() const;
  /// Distinct path ids, in first-appearance order.
  std::vector<std::string> path_ids() const;

  /// Sub-ensembles.  Selection preserves record order.
  SignalEnsemble where_path(const std::string& path_id) const;
  SignalEnsemble where_state(const std::string& state_label) const;
};

/// Taper applied to a tone burst (and to spectrogram frames).
enum class Taper { rectangular, hamming, hann };

/// A sinusoidal pulse of a fixed number of carrier cycles under an
/// amplitude taper — the standard narrowband excitation for guided waves.
struct ToneBurstSpec {
  int cycles = 5;
  double center_frequency = 0.0;  ///< Hz, > 0
  double amplitude = 1.0;
  Taper window = Taper::hamming;
};

/// Synthesized waveform of round(cycles * sample_rate / center_frequency)
/// samples.  Requires sample_rate >= 10 * center_frequency so the carrier
/// is well resolved; throws ConfigError otherwise.
std::vector<double> tone_burst(const ToneBurstSpec& spec, double sample_rate);

/// Reduces the sample rate by an integer factor: a moving-average low-pass
/// filter of length `factor`, applied forward and backward so the result
/// has no phase shift, followed by keeping every factor-th sample starting
/// at index 0.  Output length is floor(N / factor); factor == 1 returns the
/// input unchanged.
SignalRecord downsample(const SignalRecord& record, int factor);

/// Recipe for one synthetic structural state: the excitation arrives
/// attenuated after a propagation delay, an optional scattered copy
/// arrives later with its own gain, and Gaussian sensor noise is added.
struct SyntheticStateSpec {
  std::string state_label;
  double arrival_delay_s = 0.0;   ///< direct-path delay, seconds, >= 0
  double attenuation = 1.0;       ///< direct-path gain, (0, 1]
  double scatter_gain = 0.0;      ///< scattered-copy gain, >= 0; 0 disables
  double scatter_delay_s = 0.0;   ///< extra delay of the scattered copy, >= 0
  double noise_std = 0.0;         ///< additive noise standard deviation, >= 0
};

/// Generates `realizations` records per state, each `length` samples at
/// `sample_rate`.  Noise streams are derived from (seed, state index,
/// realization index), so any subset of the ensemble is reproducible
/// independent of generation order.  Throws ConfigError when a burst or
/// delayed copy does not fit in `length` samples or a spec is out of range.
SignalEnsemble synthesize_ensemble(const ToneBurstSpec& burst,
                                   const std::vector<SyntheticStateSpec>& states,
                                   int realizations, std::size_t length,
                                   double sample_rate, std::uint64_t seed,
                                   const std::string& path_id = "2-6");

}  // namespace gwshm
