#include "dynconn/signal.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "dynconn/error.hpp"
#include "fft.hpp"

namespace dynconn {

namespace {

using cplx = std::complex<double>;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

int WmLoad::class_index() const {
  if (memory_load < 5 || memory_load > 7) {
    throw Error(ErrorCode::InvalidArgument, "memory load must be 5, 6 or 7");
  }
  return (memory_load - 5) + (task == CognitiveTask::Retention ? 3 : 0);
}

WmLoad WmLoad::from_class_index(int index) {
  if (index < 0 || index >= 6) {
    throw Error(ErrorCode::InvalidArgument, "class index must be in [0, 6)");
  }
  return {5 + index % 3, index < 3 ? CognitiveTask::Manipulation : CognitiveTask::Retention};
}

std::string WmLoad::label() const {
  return std::to_string(memory_load) + (task == CognitiveTask::Manipulation ? "M" : "R");
}

void Recording::validate() const {
  if (samples.rows() < 2 || samples.cols() < 2) {
    throw Error(ErrorCode::InvalidRecording, "need at least 2 channels and 2 samples");
  }
  if (!(sampling_rate_hz > 0.0) || !std::isfinite(sampling_rate_hz)) {
    throw Error(ErrorCode::InvalidRecording, "sampling rate must be positive");
  }
  if (channel_names.size() != n_channels()) {
    throw Error(ErrorCode::InvalidRecording, "channel name count does not match channel count");
  }
  std::set<std::string> seen;
  for (const auto& name : channel_names) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::DuplicateChannelName, "duplicate channel '" + name + "'");
    }
  }
  if (!samples.allFinite()) {
    throw Error(ErrorCode::NonFiniteSample, "recording contains NaN or Inf");
  }
}

BandSpec BandSpec::preset(const std::string& name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "theta") return theta();
  if (lower == "alpha") return alpha();
  if (lower == "beta") return beta();
  throw Error(ErrorCode::InvalidArgument, "unknown band '" + name + "'");
}

std::string BandSpec::label() const {
  switch (name) {
    case BandName::Theta: return "theta";
    case BandName::Alpha: return "alpha";
    case BandName::Beta: return "beta";
    case BandName::Custom: break;
  }
  std::ostringstream os;
  os << "custom_" << low_hz << "_" << high_hz;
  return os.str();
}

void BandSpec::check(double sampling_rate_hz) const {
  const double nyquist = sampling_rate_hz / 2.0;
  if (!(low_hz > 0.0) || !(low_hz < high_hz) || !(high_hz < nyquist)) {
    std::ostringstream os;
    os << "band [" << low_hz << ", " << high_hz << "] Hz invalid for Nyquist " << nyquist << " Hz";
    throw Error(ErrorCode::BandOutOfRange, os.str());
  }
}

// ---------------------------------------------------------------------------

Recording parse_csv(const std::string& text, double sampling_rate_hz) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  Recording r;
  r.sampling_rate_hz = sampling_rate_hz;

  bool have_header = false;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) continue;
    auto cells = split_commas(view);
    if (!have_header) {
      for (auto c : cells) {
        if (c.empty()) throw Error(ErrorCode::MalformedCsv, "empty channel name in header");
        r.channel_names.emplace_back(c);
      }
      have_header = true;
      continue;
    }
    if (cells.size() != r.channel_names.size()) {
      throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(line_no) + " has " +
                                               std::to_string(cells.size()) + " cells, expected " +
                                               std::to_string(r.channel_names.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      auto cell = cells[i];
      if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), row[i]);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty()) {
        throw Error(ErrorCode::MalformedCsv, "line " + std::to_string(line_no) +
                                                 ": non-numeric cell '" + std::string(cells[i]) + "'");
      }
      if (!std::isfinite(row[i])) {
        throw Error(ErrorCode::NonFiniteSample, "line " + std::to_string(line_no) +
                                                    ": non-finite value '" + std::string(cells[i]) + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw Error(ErrorCode::MalformedCsv, "missing header row");

  r.samples.resize(static_cast<Eigen::Index>(r.channel_names.size()),
                   static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t c = 0; c < rows[t].size(); ++c) {
      r.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = rows[t][c];
    }
  }
  r.validate();
  return r;
}

Recording load_csv(const std::filesystem::path& path, double sampling_rate_hz) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_csv(buf.str(), sampling_rate_hz);
}

Recording average_reference(const Recording& r) {
  r.validate();
  Recording out = r;
  Eigen::RowVectorXd mean = r.samples.colwise().mean();
  out.samples.rowwise() -= mean;
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Biquad> design_bandpass(const BandSpec& band, double fs, int order) {
  band.check(fs);
  if (order < 1) throw Error(ErrorCode::InvalidArgument, "filter order must be >= 1");

  const double pi = std::numbers::pi;
  const double k = 2.0 * fs;
  const double w1 = k * std::tan(pi * band.low_hz / fs);
  const double w2 = k * std::tan(pi * band.high_hz / fs);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;

  std::vector<cplx> upper;  // digital poles with Im > 0
  std::vector<double> real_poles;
  for (int i = 0; i < order; ++i) {
    const cplx p = std::polar(1.0, pi * (2.0 * i + 1.0 + order) / (2.0 * order));
    const cplx half = p * bw / 2.0;
    const cplx root = std::sqrt(half * half - w0sq);
    for (const cplx s : {half + root, half - root}) {
      const cplx z = (k + s) / (k - s);
      if (z.imag() > 1e-12) {
        upper.push_back(z);
      } else if (std::abs(z.imag()) <= 1e-12) {
        real_poles.push_back(z.real());
      }
    }
  }
  std::sort(real_poles.begin(), real_poles.end());

  std::vector<Biquad> sections;
  for (const cplx& z : upper) {
    sections.push_back({1.0, 0.0, -1.0, -2.0 * z.real(), std::norm(z)});
  }
  for (std::size_t i = 0; i + 1 < real_poles.size(); i += 2) {
    const double p = real_poles[i], q = real_poles[i + 1];
    sections.push_back({1.0, 0.0, -1.0, -(p + q), p * q});
  }
  if (sections.size() != static_cast<std::size_t>(order)) {
    throw Error(ErrorCode::InvalidArgument, "band too wide for section pairing");
  }

  const double f0 = fs / pi * std::atan(std::sqrt(w0sq) / k);
  const double gain = cascade_magnitude(sections, f0, fs);
  const double per_section = std::pow(gain, 1.0 / order);
  for (auto& s : sections) {
    s.b0 /= per_section;
    s.b1 /= per_section;
    s.b2 /= per_section;
  }
  return sections;
}

double cascade_magnitude(std::span<const Biquad> sections, double freq_hz, double fs) {
  const cplx zinv = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / fs);
  const cplx zinv2 = zinv * zinv;
  cplx h = 1.0;
  for (const auto& s : sections) {
    h *= (s.b0 + s.b1 * zinv + s.b2 * zinv2) / (1.0 + s.a1 * zinv + s.a2 * zinv2);
  }
  return std::abs(h);
}

namespace {

// Transposed direct form II, in place, starting from steady state for a
// constant input equal to x.front().
void sosfilt_steady(std::span<const Biquad> sections, std::vector<double>& x) {
  double level = x.front();
  for (const auto& s : sections) {
    const double dc = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    double z1 = (dc - s.b0) * level;
    double z2 = (s.b2 - s.a2 * dc) * level;
    for (double& v : x) {
      const double y = s.b0 * v + z1;
      z1 = s.b1 * v - s.a1 * y + z2;
      z2 = s.b2 * v - s.a2 * y;
      v = y;
    }
    level *= dc;
  }
}

}  // namespace

std::vector<double> filtfilt(std::span<const Biquad> sections, std::span<const double> x, int order) {
  const std::size_t pad = 3 * static_cast<std::size_t>(order);
  const std::size_t n = x.size();
  if (n < 12 * static_cast<std::size_t>(order)) {
    throw Error(ErrorCode::SignalTooShort, "need at least " + std::to_string(12 * order) +
                                               " samples, got " + std::to_string(n));
  }
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  sosfilt_steady(sections, ext);
  std::reverse(ext.begin(), ext.end());
  sosfilt_steady(sections, ext);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
          ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

Recording bandpass(const Recording& r, const BandSpec& band) {
  r.validate();
  const auto sections = design_bandpass(band, r.sampling_rate_hz);
  Recording out = r;
  for (Eigen::Index c = 0; c < r.samples.rows(); ++c) {
    std::span<const double> row(r.samples.row(c).data(), r.n_samples());
    const auto y = filtfilt(sections, row);
    std::copy(y.begin(), y.end(), out.samples.row(c).data());
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> analytic_envelope(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) throw Error(ErrorCode::SignalTooShort, "envelope needs at least 4 samples");

  std::vector<cplx> buf(x.begin(), x.end());
  detail::dft_inplace(buf, false);
  const std::size_t half = n / 2;
  for (std::size_t i = 1; i < n; ++i) {
    if (i < (n + 1) / 2) {
      buf[i] *= 2.0;
    } else if (n % 2 == 0 && i == half) {
      // Nyquist bin keeps unit weight
    } else {
      buf[i] = 0.0;
    }
  }
  detail::dft_inplace(buf, true);
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) env[i] = std::abs(buf[i]) / static_cast<double>(n);
  return env;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> window_offsets(std::size_t n_samples, double fs, const WindowPlan& plan) {
  if (!(plan.length_s > 0.0) || !(plan.stride_s > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "window length and stride must be positive");
  }
  const auto win = static_cast<std::size_t>(std::llround(plan.length_s * fs));
  if (win < 4) throw Error(ErrorCode::InvalidArgument, "window shorter than 4 samples");
  if (win > n_samples) {
    throw Error(ErrorCode::WindowLongerThanSignal,
                "window of " + std::to_string(win) + " samples exceeds signal of " +
                    std::to_string(n_samples));
  }
  std::vector<std::size_t> offsets;
  for (std::size_t k = 0;; ++k) {
    const auto start = static_cast<std::size_t>(std::llround(static_cast<double>(k) * plan.stride_s * fs));
    if (start + win > n_samples) break;
    offsets.push_back(start);
  }
  return offsets;
}

std::vector<Recording> slice_windows(const Recording& r, const WindowPlan& plan) {
  r.validate();
  const auto offsets = window_offsets(r.n_samples(), r.sampling_rate_hz, plan);
  const auto win = static_cast<Eigen::Index>(std::llround(plan.length_s * r.sampling_rate_hz));
  std::vector<Recording> out;
  out.reserve(offsets.size());
  for (auto start : offsets) {
    Recording w;
    w.channel_names = r.channel_names;
    w.sampling_rate_hz = r.sampling_rate_hz;
    w.trial_label = r.trial_label;
    w.samples = r.samples.middleCols(static_cast<Eigen::Index>(start), win);
    out.push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// AR(1) smoothing coefficient of the source noise; keeps unit variance.
constexpr double kSourcePole = 0.5;

}  // namespace

Recording synth_coupled(std::size_t n_channels, double duration_s, double fs,
                        const std::vector<CouplingEdge>& edges, double noise_sd, std::uint64_t seed) {
  if (n_channels < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 channels");
  if (!(fs > 0.0) || !(duration_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "fs and duration must be positive");
  if (noise_sd < 0.0) throw Error(ErrorCode::InvalidArgument, "noise_sd must be non-negative");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "duration too short");

  std::vector<std::vector<const CouplingEdge*>> incoming(n_channels);
  for (const auto& e : edges) {
    if (e.src >= n_channels || e.dst >= n_channels) {
      throw Error(ErrorCode::InvalidArgument, "coupling edge references unknown channel");
    }
    if (e.lag_samples < 1) throw Error(ErrorCode::InvalidArgument, "lag must be >= 1 sample");
    if (e.src == e.dst) throw Error(ErrorCode::CyclicCouplingSpec, "self-coupling");
    incoming[e.dst].push_back(&e);
  }

  // Kahn's algorithm
  std::vector<std::size_t> indeg(n_channels, 0);
  for (const auto& e : edges) ++indeg[e.dst];
  std::vector<std::size_t> order;
  std::vector<std::size_t> ready;
  for (std::size_t c = n_channels; c-- > 0;) {
    if (indeg[c] == 0) ready.push_back(c);
  }
  while (!ready.empty()) {
    const auto c = ready.back();
    ready.pop_back();
    order.push_back(c);
    for (const auto& e : edges) {
      if (e.src == c && --indeg[e.dst] == 0) ready.push_back(e.dst);
    }
  }
  if (order.size() != n_channels) throw Error(ErrorCode::CyclicCouplingSpec, "coupling edges contain a cycle");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Recording r;
  r.channel_names = default_channel_names(n_channels);
  r.sampling_rate_hz = fs;
  r.samples = SampleMatrix::Zero(static_cast<Eigen::Index>(n_channels), static_cast<Eigen::Index>(n));

  const double innovation = std::sqrt(1.0 - kSourcePole * kSourcePole);
  for (auto c : order) {
    auto row = r.samples.row(static_cast<Eigen::Index>(c));
    if (incoming[c].empty()) {
      double state = gauss(rng);
      for (std::size_t t = 0; t < n; ++t) {
        state = kSourcePole * state + innovation * gauss(rng);
        row(static_cast<Eigen::Index>(t)) = state;
      }
      continue;
    }
    for (std::size_t t = 0; t < n; ++t) {
      double v = noise_sd * gauss(rng);
      for (const auto* e : incoming[c]) {
        if (t >= e->lag_samples) {
          v += e->gain * r.samples(static_cast<Eigen::Index>(e->src), static_cast<Eigen::Index>(t - e->lag_samples));
        }
      }
      row(static_cast<Eigen::Index>(t)) = v;
    }
  }
  return r;
}

std::vector<std::string> default_channel_names(std::size_t n) {
  static const char* const k1020[] = {"Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz",
                                      "C4",  "T4",  "T5", "P3", "Pz", "P4", "T6", "O1", "O2"};
  std::vector<std::string> names;
  names.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    names.emplace_back(n <= std::size(k1020) ? k1020[i] : "ch" + std::to_string(i));
  }
  return names;
}

}  // namespace dynconn
