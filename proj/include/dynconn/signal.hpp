#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dynconn {

/// Channels are rows, time samples are columns. Row-major so that one channel
/// is contiguous.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class CognitiveTask { Manipulation, Retention };

/// Working-memory load condition: memory load 5..7 crossed with the task.
struct WmLoad {
  int memory_load = 5;
  CognitiveTask task = CognitiveTask::Manipulation;

  /// Class index in [0, 6): 5M, 6M, 7M, 5R, 6R, 7R.
  int class_index() const;
  static WmLoad from_class_index(int index);
  std::string label() const;

  friend bool operator==(const WmLoad&, const WmLoad&) = default;
};

struct Recording {
  std::vector<std::string> channel_names;
  double sampling_rate_hz = 0.0;
  SampleMatrix samples;
  std::optional<WmLoad> trial_label;

  std::size_t n_channels() const { return static_cast<std::size_t>(samples.rows()); }
  std::size_t n_samples() const { return static_cast<std::size_t>(samples.cols()); }
  double duration_s() const { return static_cast<double>(n_samples()) / sampling_rate_hz; }

  /// Throws InvalidRecording / DuplicateChannelName / NonFiniteSample.
  void validate() const;
};

enum class BandName { Theta, Alpha, Beta, Custom };

struct BandSpec {
  BandName name = BandName::Alpha;
  double low_hz = 8.0;
  double high_hz = 13.0;

  static BandSpec theta() { return {BandName::Theta, 4.0, 8.0}; }
  static BandSpec alpha() { return {BandName::Alpha, 8.0, 13.0}; }
  static BandSpec beta() { return {BandName::Beta, 15.0, 20.0}; }
  static BandSpec custom(double low_hz, double high_hz) { return {BandName::Custom, low_hz, high_hz}; }

  /// Accepts "theta", "alpha", "beta" (case-insensitive).
  static BandSpec preset(const std::string& name);

  std::string label() const;

  /// Throws BandOutOfRange unless 0 < low < high < fs/2.
  void check(double sampling_rate_hz) const;
};

struct WindowPlan {
  double length_s = 1.0;
  double stride_s = 0.5;
};

struct CouplingEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  double gain = 1.0;
  std::size_t lag_samples = 1;
};

Recording load_csv(const std::filesystem::path& path, double sampling_rate_hz);

/// Parses CSV text already in memory; same contract as load_csv.
Recording parse_csv(const std::string& text, double sampling_rate_hz);

Recording average_reference(const Recording& r);

// ---------------------------------------------------------------------------
// Butterworth band-pass

constexpr int kButterworthOrder = 4;

/// One second-order section, a0 normalized to 1.
struct Biquad {
  double b0, b1, b2;
  double a1, a2;
};

/// Digital band-pass designed from an analog Butterworth low-pass prototype of
/// the given order via the band-pass transform and the bilinear transform.
/// Produces `order` sections (2*order poles); unit gain at the band centre.
std::vector<Biquad> design_bandpass(const BandSpec& band, double sampling_rate_hz,
                                    int order = kButterworthOrder);

/// |H(e^{j 2 pi f / fs})| of a section cascade.
double cascade_magnitude(std::span<const Biquad> sections, double freq_hz, double sampling_rate_hz);

/// Zero-phase forward-backward filtering of one sequence with odd reflection
/// padding of 3*order samples at each end and steady-state initial conditions.
std::vector<double> filtfilt(std::span<const Biquad> sections, std::span<const double> x,
                             int order = kButterworthOrder);

Recording bandpass(const Recording& r, const BandSpec& band);

/// Magnitude of the analytic signal (frequency-domain Hilbert transform).
std::vector<double> analytic_envelope(std::span<const double> x);

std::vector<Recording> slice_windows(const Recording& r, const WindowPlan& plan);

/// Start offsets (in samples) of the windows slice_windows would produce.
std::vector<std::size_t> window_offsets(std::size_t n_samples, double sampling_rate_hz,
                                        const WindowPlan& plan);

/// Lagged linear coupling over band-limited Gaussian sources.
Recording synth_coupled(std::size_t n_channels, double duration_s, double fs,
                        const std::vector<CouplingEdge>& edges, double noise_sd, std::uint64_t seed);

/// Standard 10-20 names for up to 19 channels, "ch<i>" beyond that.
std::vector<std::string> default_channel_names(std::size_t n);

}  // namespace dynconn
