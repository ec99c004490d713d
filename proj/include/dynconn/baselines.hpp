#pragma once

#include <cstddef>

#include "dynconn/connectivity.hpp"
#include "dynconn/signal.hpp"

namespace dynconn::baselines {

enum class Taper { Hann };

/// Welch cross-spectral estimation settings.
struct SpectralConfig {
  std::size_t segment_samples = 500;
  double overlap_fraction = 0.5;
  Taper taper = Taper::Hann;

  /// One second of samples, clamped to half the window so that at least two
  /// segments fit.
  static SpectralConfig defaults_for(double sampling_rate_hz, std::size_t window_samples);
};

/// |Pearson r| between channel pairs.
ConnectivityMatrix pearson_connectivity(const Recording& window);

/// Mean over in-band frequency bins of |Im coherency|.
ConnectivityMatrix imcoh_connectivity(const Recording& window, const BandSpec& band, const SpectralConfig& cfg);

/// |Pearson r| of band-limited amplitude envelopes, 10% edges discarded.
ConnectivityMatrix aec_connectivity(const Recording& window, const BandSpec& band);

/// AEC of a window that is already band-limited (no further filtering).
ConnectivityMatrix aec_connectivity_prefiltered(const Recording& window);

/// Pearson correlation of two equal-length sequences. Throws ConstantChannel
/// if either has zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

}  // namespace dynconn::baselines
