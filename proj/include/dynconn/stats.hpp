#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dynconn/connectivity.hpp"

namespace dynconn::stats {

/// Rows are true classes, columns are predicted classes.
struct ConfusionMatrix {
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;

  explicit ConfusionMatrix(std::size_t k = 6)
      : counts(Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(
            static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))) {}

  std::size_t k() const { return static_cast<std::size_t>(counts.rows()); }
  std::int64_t total() const { return counts.sum(); }
  void add(std::size_t truth, std::size_t predicted) {
    ++counts(static_cast<Eigen::Index>(truth), static_cast<Eigen::Index>(predicted));
  }
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

struct ClassMetrics {
  double accuracy = 0.0;
  double macro_sensitivity = 0.0;
  double macro_specificity = 0.0;
  std::vector<double> sensitivity;  // per class
  std::vector<double> specificity;  // per class
};

struct AnovaResult {
  double f_stat = 0.0;
  int df_between = 0;
  int df_within = 0;
  double p_value = 1.0;
  /// Set when the within-group variance is zero but the groups differ;
  /// f_stat is then +inf and p_value 0.
  bool zero_within_variance = false;
};

/// Regularized incomplete beta I_x(a, b) by continued fraction.
double incomplete_beta(double x, double a, double b);

/// P(F > f) for an F(d1, d2) variate.
double f_survival(double f, double d1, double d2);

/// Ranks with ties sharing their average rank (1-based).
std::vector<double> average_ranks(std::span<const double> x);

double spearman(std::span<const double> x, std::span<const double> y);

std::vector<double> flatten_upper(const ConnectivityMatrix& cm);

/// Mean Spearman correlation over all unordered pairs of matrices.
double mean_pairwise_spearman(std::span<const ConnectivityMatrix> matrices);

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups);

ClassMetrics confusion_metrics(const ConfusionMatrix& cm);

double cohen_kappa(const ConfusionMatrix& cm);

}  // namespace dynconn::stats
