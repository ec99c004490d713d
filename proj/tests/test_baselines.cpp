#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dynconn/baselines.hpp"
#include "dynconn/error.hpp"

using namespace dynconn;
using namespace dynconn::baselines;

namespace {

constexpr double kPi = std::numbers::pi;

Recording from_rows(const std::vector<std::vector<double>>& rows, double fs) {
  Recording r;
  r.sampling_rate_hz = fs;
  r.samples.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    r.channel_names.push_back("c" + std::to_string(c));
    for (std::size_t t = 0; t < rows[c].size(); ++t) {
      r.samples(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(t)) = rows[c][t];
    }
  }
  return r;
}

std::vector<double> noise(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> out(n);
  for (auto& v : out) v = g(rng);
  return out;
}

}  // namespace

TEST_CASE("pearson connectivity") {
  CHECK(pearson_connectivity(from_rows({{1, 2, 3}, {6, 4, 2}}, 1.0)).weights(0, 1) == doctest::Approx(1.0));
  CHECK(pearson_connectivity(from_rows({{1, 2, 3}, {1, 3, 2}}, 1.0)).weights(0, 1) == doctest::Approx(0.5));
  const auto x = noise(200, 1);
  const auto cm = pearson_connectivity(from_rows({x, x, noise(200, 2)}, 100.0));
  CHECK(cm.weights(0, 1) == doctest::Approx(1.0));
  CHECK(cm.weights(1, 0) == cm.weights(0, 1));
  CHECK(cm.weights.diagonal().isZero());
  CHECK_NOTHROW(cm.validate());
}

TEST_CASE("imaginary coherence") {
  const double fs = 500.0;
  const std::size_t n = 5000;
  std::vector<double> s(n), c(n);
  const auto eps1 = noise(n, 3, 0.01), eps2 = noise(n, 4, 0.01);
  for (std::size_t t = 0; t < n; ++t) {
    const double ph = 2 * kPi * 10.0 * static_cast<double>(t) / fs;
    s[t] = std::sin(ph) + eps1[t];
    c[t] = std::cos(ph) + eps2[t];
  }
  // A 10 Hz tone is bin-centred in 1 s segments and the Hann taper then leaves
  // the other band bins with noise only. 512-sample segments spread the tone
  // across every band bin, where the analytic coherency is i.
  SpectralConfig cfg;
  cfg.segment_samples = 512;
  const auto quad = imcoh_connectivity(from_rows({s, c, s}, fs), BandSpec::alpha(), cfg);
  CHECK(quad.weights(0, 1) >= 0.9);
  CHECK(quad.weights(0, 2) <= 1e-10);

  const std::size_t long_n = 15000;
  const auto white = imcoh_connectivity(from_rows({noise(long_n, 5), noise(long_n, 6)}, fs), BandSpec::alpha(),
                                        SpectralConfig::defaults_for(fs, long_n));
  CHECK(white.weights(0, 1) <= 0.2);

  SpectralConfig one_segment;
  one_segment.segment_samples = 500;
  CHECK_THROWS_AS(imcoh_connectivity(from_rows({noise(600, 1), noise(600, 2)}, fs), BandSpec::alpha(), one_segment),
                  Error);
  CHECK(SpectralConfig::defaults_for(500.0, 500).segment_samples == 250);
}

TEST_CASE("amplitude envelope correlation") {
  const double fs = 500.0;
  const auto x = noise(2000, 7);
  CHECK(aec_connectivity(from_rows({x, x}, fs), BandSpec::alpha()).weights(0, 1) == doctest::Approx(1.0));

  const std::size_t long_n = 15000;
  CHECK(aec_connectivity(from_rows({noise(long_n, 8), noise(long_n, 9)}, fs), BandSpec::alpha()).weights(0, 1) <=
        0.2);

  const std::size_t n = 5000;
  std::vector<double> a(n), b(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double tt = static_cast<double>(t) / fs;
    const double mod = 1.0 + 0.8 * std::sin(2 * kPi * 1.0 * tt);
    a[t] = mod * std::cos(2 * kPi * 10.0 * tt + 0.3);
    b[t] = mod * std::cos(2 * kPi * 11.0 * tt + 1.7);
  }
  CHECK(aec_connectivity(from_rows({a, b}, fs), BandSpec::alpha()).weights(0, 1) >= 0.8);
}
