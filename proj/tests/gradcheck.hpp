// Central finite-difference check of GCN gradients.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "dynconn/gcn.hpp"

namespace gradcheck {

struct Report {
  double worst_relative = 0.0;
  std::string worst_tensor;
  std::size_t checked = 0;
  double max_abs = 0.0;
};

/// Random connected graphs with adjacency-row features.
inline std::vector<dynconn::gcn::PreparedGraph> random_graphs(std::size_t count, std::size_t nodes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w(0.1, 1.0);
  std::uniform_int_distribution<int> label(0, dynconn::gcn::kNumClasses - 1);
  std::vector<dynconn::gcn::PreparedGraph> out;
  for (std::size_t g = 0; g < count; ++g) {
    dynconn::gcn::GraphSample s;
    s.adjacency.weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(nodes));
    for (std::size_t i = 0; i < nodes; ++i) {
      s.adjacency.channel_names.push_back("n" + std::to_string(i));
      for (std::size_t j = i + 1; j < nodes; ++j) {
        const double v = w(rng);
        s.adjacency.weights(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        s.adjacency.weights(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
      }
    }
    s.features = dynconn::gcn::make_features(s.adjacency, dynconn::gcn::FeatureKind::AdjacencyRow);
    s.label = label(rng);
    out.push_back(dynconn::gcn::prepare(s));
  }
  return out;
}

/// Compares backward() against central differences of batch_loss for every
/// trainable entry. |a - n| / max(|a|, |n|), with differences below `floor`
/// in absolute terms counted as exact.
inline Report check(const std::vector<dynconn::gcn::PreparedGraph>& graphs, dynconn::gcn::GcnParams params,
                    dynconn::gcn::Mode mode, double h = 1e-5, double floor = 1e-9) {
  using namespace dynconn::gcn;
  std::vector<const PreparedGraph*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);
  const auto analytic = backward(forward_batch(ptrs, params, mode, 0), params);

  std::vector<std::pair<std::string, Matrix>> grads;
  analytic.for_each_trainable([&](const std::string& name, const Matrix& m) { grads.emplace_back(name, m); });

  Report rep;
  std::size_t t = 0;
  params.for_each_trainable([&](const std::string& name, Matrix& m) {
    const Matrix& g = grads[t++].second;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double keep = m.data()[i];
      m.data()[i] = keep + h;
      const double up = batch_loss(forward_batch(ptrs, params, mode, 0));
      m.data()[i] = keep - h;
      const double down = batch_loss(forward_batch(ptrs, params, mode, 0));
      m.data()[i] = keep;
      const double numeric = (up - down) / (2 * h);
      const double a = g.data()[i];
      const double diff = std::abs(a - numeric);
      rep.max_abs = std::max(rep.max_abs, diff);
      const double rel = diff < floor ? 0.0 : diff / std::max(std::abs(a), std::abs(numeric));
      if (rel > rep.worst_relative) {
        rep.worst_relative = rel;
        rep.worst_tensor = name;
      }
      ++rep.checked;
    }
  });
  return rep;
}

}  // namespace gradcheck
