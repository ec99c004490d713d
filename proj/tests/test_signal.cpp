#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "dynconn/baselines.hpp"
#include "dynconn/error.hpp"
#include "dynconn/signal.hpp"
#include "oracles.hpp"

using namespace dynconn;

namespace {

constexpr double kPi = std::numbers::pi;

Recording tone_recording(double freq, double fs, double seconds, double amplitude = 1.0) {
  const auto n = static_cast<Eigen::Index>(std::llround(fs * seconds));
  Recording r;
  r.channel_names = {"a", "b"};
  r.sampling_rate_hz = fs;
  r.samples.resize(2, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double v = amplitude * std::sin(2.0 * kPi * freq * static_cast<double>(t) / fs);
    r.samples(0, t) = v;
    r.samples(1, t) = 0.5 * v;
  }
  return r;
}

double peak_abs(const Recording& r, Eigen::Index row, Eigen::Index skip) {
  return r.samples.row(row).segment(skip, r.samples.cols() - 2 * skip).cwiseAbs().maxCoeff();
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("csv parsing") {
  const auto r = parse_csv("a,b\n1,2\n3,4\n", 100.0);
  CHECK(r.n_channels() == 2);
  CHECK(r.n_samples() == 2);
  CHECK(r.samples(0, 0) == 1.0);
  CHECK(r.samples(0, 1) == 3.0);
  CHECK(r.samples(1, 0) == 2.0);
  CHECK(r.samples(1, 1) == 4.0);
  CHECK(r.channel_names == std::vector<std::string>{"a", "b"});

  CHECK(code_of([] { parse_csv("a,a\n1,2\n3,4\n", 100.0); }) == ErrorCode::DuplicateChannelName);
  CHECK(code_of([] { parse_csv("a,b\n1,x\n3,4\n", 100.0); }) == ErrorCode::MalformedCsv);
  CHECK(code_of([] { parse_csv("a,b\n1,2,3\n3,4\n", 100.0); }) == ErrorCode::MalformedCsv);
  CHECK(code_of([] { parse_csv("a,b\n1,nan\n3,4\n", 100.0); }) == ErrorCode::NonFiniteSample);
}

TEST_CASE("average reference") {
  Recording r;
  r.channel_names = {"a", "b"};
  r.sampling_rate_hz = 1.0;
  r.samples.resize(2, 2);
  r.samples << 1, 5, 3, 5;
  auto out = average_reference(r);
  CHECK(out.samples(0, 0) == -1.0);
  CHECK(out.samples(1, 0) == 1.0);
  CHECK(out.samples(0, 1) == 0.0);
  CHECK(average_reference(out).samples == out.samples);

  Recording three;
  three.channel_names = {"x", "y", "z"};
  three.sampling_rate_hz = 1.0;
  three.samples.resize(3, 2);
  three.samples << 1, 0, 2, 0, 3, 0;
  const auto ref = average_reference(three);
  CHECK(ref.samples(0, 0) == doctest::Approx(-1.0));
  CHECK(ref.samples(1, 0) == doctest::Approx(0.0));
  CHECK(ref.samples(2, 0) == doctest::Approx(1.0));
}

TEST_CASE("band validation") {
  CHECK_NOTHROW(BandSpec::alpha().check(500.0));
  CHECK(code_of([] { BandSpec::custom(4.0, 300.0).check(500.0); }) == ErrorCode::BandOutOfRange);
  CHECK(code_of([] { BandSpec::custom(8.0, 4.0).check(500.0); }) == ErrorCode::BandOutOfRange);
  CHECK(BandSpec::preset("Beta").low_hz == 15.0);
}

TEST_CASE("designed cascade matches the analytic Butterworth response") {
  for (const auto& band : {BandSpec::theta(), BandSpec::alpha(), BandSpec::beta()}) {
    const auto sections = design_bandpass(band, 500.0);
    CHECK(sections.size() == static_cast<std::size_t>(kButterworthOrder));
    for (double f = 0.5; f < 250.0; f += 0.37) {
      const double expected = std::sqrt(oracle::butterworth_bandpass_gain2(f, band.low_hz, band.high_hz, 500.0, 4));
      CHECK(cascade_magnitude(sections, f, 500.0) == doctest::Approx(expected).epsilon(1e-8).scale(1.0));
    }
  }
}

TEST_CASE("filtfilt passes an in-band tone and rejects out-of-band input") {
  const double fs = 500.0;
  const auto skip = static_cast<Eigen::Index>(fs / 2);
  const auto expected = oracle::butterworth_bandpass_gain2(10.0, 8.0, 13.0, fs, 4);

  const auto in_band = bandpass(tone_recording(10.0, fs, 4.0), BandSpec::alpha());
  const double amp = peak_abs(in_band, 0, skip);
  CHECK(amp >= 0.95);
  CHECK(amp <= 1.05);
  CHECK(amp == doctest::Approx(expected).epsilon(0.01));

  const auto mains = bandpass(tone_recording(50.0, fs, 4.0), BandSpec::alpha());
  CHECK(peak_abs(mains, 0, skip) <= 0.01);

  Recording dc = tone_recording(10.0, fs, 4.0);
  dc.samples.setConstant(3.0);
  dc.samples.row(1).setConstant(-2.0);
  const auto blocked = bandpass(dc, BandSpec::theta());
  CHECK(peak_abs(blocked, 0, skip) <= 3.0e-6);
}

TEST_CASE("filtfilt length guard") {
  const auto sections = design_bandpass(BandSpec::alpha(), 500.0);
  std::vector<double> short_x(47, 1.0);
  CHECK(code_of([&] { filtfilt(sections, short_x); }) == ErrorCode::SignalTooShort);
  std::vector<double> ok_x(48, 1.0);
  CHECK_NOTHROW(filtfilt(sections, ok_x));
}

TEST_CASE("analytic envelope") {
  const double fs = 500.0;
  const std::size_t n = 1000;
  std::vector<double> tone(n), scaled(n), am(n), modulator(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double s = static_cast<double>(t) / fs;
    tone[t] = std::cos(2 * kPi * 8 * s);
    scaled[t] = 2.5 * tone[t];
    modulator[t] = 1.0 + 0.5 * std::cos(2 * kPi * 1 * s);
    am[t] = modulator[t] * std::cos(2 * kPi * 10 * s);
  }
  const std::size_t edge = n / 10;
  const auto e1 = analytic_envelope(tone);
  const auto e2 = analytic_envelope(scaled);
  const auto e3 = analytic_envelope(am);
  double worst = 0.0, worst_scaled = 0.0, sq = 0.0;
  for (std::size_t t = edge; t < n - edge; ++t) {
    worst = std::max(worst, std::abs(e1[t] - 1.0));
    worst_scaled = std::max(worst_scaled, std::abs(e2[t] - 2.5));
    sq += (e3[t] - modulator[t]) * (e3[t] - modulator[t]);
  }
  CHECK(worst <= 0.02);
  CHECK(worst_scaled <= 0.05);
  CHECK(std::sqrt(sq / static_cast<double>(n - 2 * edge)) <= 0.03);
}

TEST_CASE("window slicing") {
  auto r = tone_recording(10.0, 500.0, 10.0);
  const auto windows = slice_windows(r, {1.0, 0.5});
  CHECK(windows.size() == 19);
  for (const auto& w : windows) CHECK(w.n_samples() == 500);
  CHECK(windows[3].samples(0, 0) == r.samples(0, 750));

  CHECK(slice_windows(tone_recording(10.0, 500.0, 1.0), {1.0, 0.5}).size() == 1);
  CHECK(code_of([] { slice_windows(tone_recording(10.0, 500.0, 0.9), {1.0, 0.5}); }) ==
        ErrorCode::WindowLongerThanSignal);
}

TEST_CASE("coupled synthetic recordings") {
  const auto indep = synth_coupled(4, 10.0, 500.0, {}, 1.0, 11);
  double worst = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      const std::span<const double> a(indep.samples.row(static_cast<Eigen::Index>(i)).data(), indep.n_samples());
      const std::span<const double> b(indep.samples.row(static_cast<Eigen::Index>(j)).data(), indep.n_samples());
      worst = std::max(worst, std::abs(baselines::pearson(a, b)));
    }
  }
  CHECK(worst <= 0.15);

  const auto coupled = synth_coupled(2, 10.0, 500.0, {{0, 1, 1.0, 1}}, 0.01, 3);
  const auto m = coupled.n_samples();
  const std::span<const double> src(coupled.samples.row(0).data(), m - 1);
  const std::span<const double> dst(coupled.samples.row(1).data() + 1, m - 1);
  CHECK(baselines::pearson(src, dst) >= 0.99);

  const auto again = synth_coupled(2, 10.0, 500.0, {{0, 1, 1.0, 1}}, 0.01, 3);
  CHECK(again.samples == coupled.samples);

  CHECK(code_of([] { synth_coupled(3, 1.0, 100.0, {{0, 1, 1.0, 1}, {1, 2, 1.0, 1}, {2, 0, 1.0, 1}}, 0.1, 1); }) ==
        ErrorCode::CyclicCouplingSpec);
}

TEST_CASE("working-memory load labels") {
  for (int c = 0; c < 6; ++c) CHECK(WmLoad::from_class_index(c).class_index() == c);
  CHECK(WmLoad::from_class_index(0).label() == "5M");
  CHECK(WmLoad::from_class_index(5).label() == "7R");
}
