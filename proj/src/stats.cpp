#include "dynconn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dynconn/error.hpp"

namespace dynconn::stats {

namespace {

constexpr double kCfTolerance = 1e-14;
constexpr int kCfMaxIterations = 10000;
constexpr double kTiny = 1e-300;

// Modified Lentz evaluation of the incomplete-beta continued fraction.
double beta_continued_fraction(double x, double a, double b) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kCfMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kCfTolerance) return h;
  }
  return h;
}

}  // namespace

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.k() != k()) throw Error(ErrorCode::DimensionMismatch, "confusion matrices differ in class count");
  counts += other.counts;
  return *this;
}

double incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorCode::InvalidArgument, "incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::InvalidArgument, "incomplete beta needs x in [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(x, a, b) / a;
  return 1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b;
}

double f_survival(double f, double d1, double d2) {
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "F distribution needs positive dfs");
  if (std::isinf(f)) return 0.0;
  if (!(f > 0.0)) return 1.0;
  return incomplete_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "spearman: sequences differ in length");
  if (x.size() < 3) throw Error(ErrorCode::InvalidArgument, "spearman: need at least 3 values");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mean = (static_cast<double>(x.size()) + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean, dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::DegenerateRanks, "spearman: all values equal");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> flatten_upper(const ConnectivityMatrix& cm) {
  const auto n = cm.weights.rows();
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "flatten_upper needs n >= 2");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) out.push_back(cm.weights(i, j));
  }
  return out;
}

double mean_pairwise_spearman(std::span<const ConnectivityMatrix> matrices) {
  if (matrices.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 matrices");
  std::vector<std::vector<double>> flat;
  for (const auto& m : matrices) flat.push_back(flatten_upper(m));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    for (std::size_t j = i + 1; j < flat.size(); ++j) {
      sum += spearman(flat[i], flat[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw Error(ErrorCode::InvalidArgument, "ANOVA needs at least 2 groups");
  std::size_t total = 0;
  double grand = 0.0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw Error(ErrorCode::InvalidArgument, "each ANOVA group needs at least 2 values");
    total += g.size();
    grand += std::accumulate(g.begin(), g.end(), 0.0);
  }
  grand /= static_cast<double>(total);

  double ssb = 0.0, ssw = 0.0;
  for (const auto& g : groups) {
    const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double v : g) ssw += (v - mean) * (v - mean);
  }

  AnovaResult res;
  res.df_between = static_cast<int>(groups.size()) - 1;
  res.df_within = static_cast<int>(total - groups.size());
  // Rounding noise below this relative level counts as zero.
  const double scale = std::max(ssb + ssw, std::numeric_limits<double>::min());
  if (ssw <= 1e-14 * scale) {
    if (ssb <= 1e-14 * scale) {
      throw Error(ErrorCode::ZeroWithinVariance, "all observations are identical; F is undefined");
    }
    res.f_stat = std::numeric_limits<double>::infinity();
    res.p_value = 0.0;
    res.zero_within_variance = true;
    return res;
  }
  res.f_stat = (ssb / res.df_between) / (ssw / res.df_within);
  res.p_value = f_survival(res.f_stat, res.df_between, res.df_within);
  return res;
}

ClassMetrics confusion_metrics(const ConfusionMatrix& cm) {
  const auto total = static_cast<double>(cm.total());
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "confusion matrix is empty");
  const auto k = static_cast<Eigen::Index>(cm.k());
  ClassMetrics m;
  m.accuracy = static_cast<double>(cm.counts.trace()) / total;
  for (Eigen::Index c = 0; c < k; ++c) {
    const auto tp = static_cast<double>(cm.counts(c, c));
    const auto support = static_cast<double>(cm.counts.row(c).sum());
    const auto predicted = static_cast<double>(cm.counts.col(c).sum());
    const double fn = support - tp;
    const double fp = predicted - tp;
    const double tn = total - tp - fn - fp;
    const double sens = support > 0.0 ? tp / support : 0.0;
    const double spec = tn + fp > 0.0 ? tn / (tn + fp) : 0.0;
    m.sensitivity.push_back(sens);
    m.specificity.push_back(spec);
  }
  m.macro_sensitivity = std::accumulate(m.sensitivity.begin(), m.sensitivity.end(), 0.0) / static_cast<double>(k);
  m.macro_specificity = std::accumulate(m.specificity.begin(), m.specificity.end(), 0.0) / static_cast<double>(k);
  return m;
}

double cohen_kappa(const ConfusionMatrix& cm) {
  const auto total = static_cast<double>(cm.total());
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "confusion matrix is empty");
  const double po = static_cast<double>(cm.counts.trace()) / total;
  double pe = 0.0;
  for (Eigen::Index c = 0; c < cm.counts.rows(); ++c) {
    pe += static_cast<double>(cm.counts.row(c).sum()) * static_cast<double>(cm.counts.col(c).sum());
  }
  pe /= total * total;
  if (pe >= 1.0) throw Error(ErrorCode::DegenerateMarginals, "chance agreement is 1; kappa undefined");
  return (po - pe) / (1.0 - pe);
}

}  // namespace dynconn::stats
