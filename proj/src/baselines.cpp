#include "dynconn/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "dynconn/error.hpp"
#include "fft.hpp"

namespace dynconn::baselines {

namespace {

using cplx = std::complex<double>;

ConnectivityMatrix empty_matrix(const Recording& window) {
  ConnectivityMatrix cm;
  cm.channel_names = window.channel_names;
  const auto n = static_cast<Eigen::Index>(window.n_channels());
  cm.weights = Eigen::MatrixXd::Zero(n, n);
  return cm;
}

std::span<const double> channel(const Recording& r, std::size_t c) {
  return {r.samples.row(static_cast<Eigen::Index>(c)).data(), r.n_samples()};
}

}  // namespace

SpectralConfig SpectralConfig::defaults_for(double sampling_rate_hz, std::size_t window_samples) {
  SpectralConfig cfg;
  const auto one_second = static_cast<std::size_t>(std::llround(sampling_rate_hz));
  cfg.segment_samples = std::max<std::size_t>(8, std::min(one_second, window_samples / 2));
  return cfg;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "pearson: length mismatch");
  if (x.size() < 2) throw Error(ErrorCode::InvalidArgument, "pearson: need at least 2 samples");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::ConstantChannel, "pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ConnectivityMatrix pearson_connectivity(const Recording& window) {
  window.validate();
  auto cm = empty_matrix(window);
  const std::size_t n = window.n_channels();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = std::abs(pearson(channel(window, i), channel(window, j)));
      cm.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
      cm.weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
    }
  }
  return cm;
}

ConnectivityMatrix imcoh_connectivity(const Recording& window, const BandSpec& band, const SpectralConfig& cfg) {
  window.validate();
  band.check(window.sampling_rate_hz);
  const std::size_t len = cfg.segment_samples;
  const std::size_t m = window.n_samples();
  if (len < 8 || len > m) throw Error(ErrorCode::InvalidArgument, "segment length must be in [8, window length]");
  if (!(cfg.overlap_fraction >= 0.0 && cfg.overlap_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "overlap fraction must be in [0, 1)");
  }
  const auto step = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(len) * (1.0 - cfg.overlap_fraction))));
  const std::size_t n_segments = (m - len) / step + 1;
  if (n_segments < 2) {
    throw Error(ErrorCode::TooFewSegments, "window admits " + std::to_string(n_segments) + " Welch segment(s)");
  }

  const double fs = window.sampling_rate_hz;
  std::vector<std::size_t> bins;
  for (std::size_t k = 0; k <= len / 2; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(len);
    if (f >= band.low_hz && f <= band.high_hz) bins.push_back(k);
  }
  if (bins.empty()) throw Error(ErrorCode::InvalidArgument, "no frequency bins inside the band; use longer segments");

  // Periodic Hann taper.
  std::vector<double> taper(len);
  for (std::size_t i = 0; i < len; ++i) {
    taper[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
  }

  const std::size_t nc = window.n_channels();
  const std::size_t nb = bins.size();
  // spectra[c][b] for the current segment
  std::vector<std::vector<cplx>> spectra(nc, std::vector<cplx>(nb));
  std::vector<cplx> cross(nc * nc * nb, 0.0);  // upper triangle incl. diagonal used
  std::vector<cplx> buf(len);
  for (std::size_t s = 0; s < n_segments; ++s) {
    const std::size_t off = s * step;
    for (std::size_t c = 0; c < nc; ++c) {
      const auto x = channel(window, c).subspan(off, len);
      double mean = 0.0;
      for (double v : x) mean += v;
      mean /= static_cast<double>(len);
      for (std::size_t i = 0; i < len; ++i) buf[i] = (x[i] - mean) * taper[i];
      detail::dft_inplace(buf, false);
      for (std::size_t b = 0; b < nb; ++b) spectra[c][b] = buf[bins[b]];
    }
    for (std::size_t i = 0; i < nc; ++i) {
      for (std::size_t j = i; j < nc; ++j) {
        for (std::size_t b = 0; b < nb; ++b) cross[(i * nc + j) * nb + b] += spectra[i][b] * std::conj(spectra[j][b]);
      }
    }
  }

  auto cm = empty_matrix(window);
  for (std::size_t i = 0; i < nc; ++i) {
    for (std::size_t j = i + 1; j < nc; ++j) {
      double acc = 0.0;
      for (std::size_t b = 0; b < nb; ++b) {
        const double sxx = cross[(i * nc + i) * nb + b].real();
        const double syy = cross[(j * nc + j) * nb + b].real();
        const double denom = std::sqrt(sxx * syy);
        if (denom > 0.0) acc += std::abs(cross[(i * nc + j) * nb + b].imag()) / denom;
      }
      const double w = std::min(1.0, acc / static_cast<double>(nb));
      cm.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
      cm.weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
    }
  }
  return cm;
}

ConnectivityMatrix aec_connectivity(const Recording& window, const BandSpec& band) {
  window.validate();
  return aec_connectivity_prefiltered(bandpass(window, band));
}

ConnectivityMatrix aec_connectivity_prefiltered(const Recording& window) {
  window.validate();
  if (window.n_samples() < 4) throw Error(ErrorCode::SignalTooShort, "AEC needs at least 4 samples");
  const std::size_t n = window.n_channels();
  const std::size_t m = window.n_samples();
  const std::size_t edge = m / 10;
  std::vector<std::vector<double>> env(n);
  for (std::size_t c = 0; c < n; ++c) {
    const auto full = analytic_envelope(channel(window, c));
    env[c].assign(full.begin() + static_cast<std::ptrdiff_t>(edge), full.end() - static_cast<std::ptrdiff_t>(edge));
  }
  auto cm = empty_matrix(window);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = std::abs(pearson(env[i], env[j]));
      cm.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = w;
      cm.weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = w;
    }
  }
  return cm;
}

}  // namespace dynconn::baselines
