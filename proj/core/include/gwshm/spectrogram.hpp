#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gwshm/signal.hpp"

namespace gwshm {

/// Short-time spectral magnitude of a waveform.  Row f is analysis frame f
/// (time order), column k is one-sided frequency bin k.
struct Spectrogram {
  Eigen::MatrixXd magnitude;        ///< frames x bins, |DFT| per frame
  std::vector<double> frequencies;  ///< bin center frequencies, Hz
  std::vector<double> times;        ///< frame center times, seconds
};

/// Sliding-window DFT magnitude.
///
/// The record is cut into windows of `window_len` samples advanced by
/// hop = max(1, round(window_len * (1 - overlap_fraction))); each window is
/// tapered and transformed with an `nfft`-point DFT (zero-padded when
/// nfft > window_len), keeping the nfft/2 + 1 one-sided bins.
///
/// The transform is a direct DFT evaluated with per-bin recurrence of the
/// twiddle factor, so `nfft` need not be a power of two.
Spectrogram spectrogram(const SignalRecord& record, int window_len,
                        double overlap_fraction, int nfft,
                        Taper window = Taper::hamming);

}  // namespace gwshm
