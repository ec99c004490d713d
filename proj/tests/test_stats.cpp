#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "dynconn/error.hpp"
#include "dynconn/stats.hpp"

using namespace dynconn;
using namespace dynconn::stats;

namespace {

ConnectivityMatrix sym(const Eigen::MatrixXd& w) {
  ConnectivityMatrix cm;
  cm.weights = w;
  for (Eigen::Index i = 0; i < w.rows(); ++i) cm.channel_names.push_back("n" + std::to_string(i));
  return cm;
}

// Balanced confusion with `per_class` samples, `wrong` errors per off-diagonal cell.
ConfusionMatrix uniform_errors(std::size_t k, std::int64_t per_class, std::int64_t wrong) {
  ConfusionMatrix cm(k);
  cm.counts.setConstant(wrong);
  for (std::size_t i = 0; i < k; ++i) {
    cm.counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) =
        per_class - wrong * static_cast<std::int64_t>(k - 1);
  }
  return cm;
}

}  // namespace

TEST_CASE("incomplete beta and F survival") {
  // I_x(1, 1) = x; I_x(a, 1) = x^a; I_x(1, b) = 1 - (1-x)^b.
  for (double x : {0.0, 0.1, 0.37, 0.5, 0.93, 1.0}) {
    CHECK(incomplete_beta(x, 1, 1) == doctest::Approx(x).epsilon(1e-13));
    CHECK(incomplete_beta(x, 3.5, 1) == doctest::Approx(std::pow(x, 3.5)).epsilon(1e-12));
    CHECK(incomplete_beta(x, 1, 2.5) == doctest::Approx(1 - std::pow(1 - x, 2.5)).epsilon(1e-12));
  }
  // d1 = 2: P(F > f) = (1 + 2f/d2)^(-d2/2).
  for (double d2 : {1.0, 3.0, 6.0, 17.0, 120.0}) {
    for (double f : {0.01, 0.5, 1.0, 3.0, 12.0}) {
      CHECK(f_survival(f, 2, d2) == doctest::Approx(std::pow(1 + 2 * f / d2, -d2 / 2)).epsilon(1e-11));
    }
  }
  CHECK(f_survival(0.0, 3, 7) == 1.0);
  CHECK(f_survival(std::numeric_limits<double>::infinity(), 3, 7) == 0.0);
}

TEST_CASE("spearman") {
  const std::vector<double> x{-2, -1, 0, 1, 2}, cube{-8, -1, 0, 1, 8}, rev{2, 1, 0, -1, -2};
  CHECK(spearman(x, cube) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman(x, rev) == doctest::Approx(-1.0).epsilon(1e-12));
  const std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4};
  CHECK(std::abs(spearman(a, b) - 0.8) <= 1e-12);

  const std::vector<double> ties{3, 1, 3, 2};
  CHECK(average_ranks(ties) == std::vector<double>{3.5, 1, 3.5, 2});
  const std::vector<double> flat{1, 1, 1};
  CHECK_THROWS_AS(spearman(flat, std::vector<double>{1, 2, 3}), Error);
  CHECK_THROWS_AS(spearman(a, x), Error);
}

TEST_CASE("upper triangle flattening") {
  Eigen::MatrixXd w(3, 3);
  w << 0, 1, 2, 1, 0, 3, 2, 3, 0;
  CHECK(flatten_upper(sym(w)) == std::vector<double>{1, 2, 3});
  w(1, 0) = 99;  // lower triangle is not read
  CHECK(flatten_upper(sym(w)) == std::vector<double>{1, 2, 3});
  CHECK(flatten_upper(sym(Eigen::MatrixXd::Zero(19, 19))).size() == 171);

  Eigen::MatrixXd u = Eigen::MatrixXd::Random(5, 5).cwiseAbs();
  u = (u + u.transpose()).eval();
  u.diagonal().setZero();
  std::vector<ConnectivityMatrix> same{sym(u), sym(u), sym(u)};
  CHECK(mean_pairwise_spearman(same) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("one-way ANOVA") {
  const auto zero = one_way_anova({{1, 2, 3}, {1, 2, 3}});
  CHECK(zero.f_stat == 0.0);
  CHECK(zero.p_value == doctest::Approx(1.0).epsilon(1e-14));

  const auto r = one_way_anova({{1, 2, 3}, {2, 3, 4}, {3, 4, 5}});
  CHECK(std::abs(r.f_stat - 3.0) <= 1e-9);
  CHECK(r.df_between == 2);
  CHECK(r.df_within == 6);
  CHECK(std::abs(r.p_value - 0.125) <= 1e-9);

  const auto spread = one_way_anova({{1, 1}, {2, 2}});
  CHECK(spread.zero_within_variance);
  CHECK(spread.p_value == 0.0);
  CHECK(std::isinf(spread.f_stat));

  CHECK_THROWS_AS(one_way_anova({{1, 1}, {1, 1}}), Error);
  CHECK_THROWS_AS(one_way_anova({{1, 2, 3}}), Error);
}

TEST_CASE("classification metrics") {
  ConfusionMatrix perfect(6);
  for (std::size_t c = 0; c < 6; ++c) perfect.counts(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) = 10;
  const auto pm = confusion_metrics(perfect);
  CHECK(pm.accuracy == 1.0);
  CHECK(pm.macro_sensitivity == 1.0);
  CHECK(pm.macro_specificity == 1.0);
  CHECK(cohen_kappa(perfect) == doctest::Approx(1.0));

  ConfusionMatrix lumped(2);
  lumped.counts << 5, 0, 5, 0;
  const auto lm = confusion_metrics(lumped);
  CHECK(lm.accuracy == 0.5);
  CHECK(lm.macro_sensitivity == 0.5);
  CHECK(lm.macro_specificity == 0.5);

  // p_o equals p_e.
  ConfusionMatrix chance(3);
  chance.counts.setConstant(4);
  CHECK(cohen_kappa(chance) == doctest::Approx(0.0).scale(1.0));

  // Accuracy 0.967 with uniform errors over six balanced classes.
  const auto cm = uniform_errors(6, 5000, 33);
  const auto m = confusion_metrics(cm);
  CHECK(m.accuracy == doctest::Approx(0.967).epsilon(1e-12));
  CHECK(std::abs(m.macro_specificity - 0.993) <= 1e-3);
  CHECK(std::abs(cohen_kappa(cm) - 0.960) <= 1e-3);

  ConfusionMatrix degenerate(2);
  degenerate.counts << 4, 0, 0, 0;
  CHECK_THROWS_AS(cohen_kappa(degenerate), Error);
}
