#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynconn/signal.hpp"

namespace dynconn {

/// Symmetric, zero-diagonal, non-negative edge-strength matrix over channels.
struct ConnectivityMatrix {
  std::vector<std::string> channel_names;
  Eigen::MatrixXd weights;
  std::optional<double> score;  // structure score, BSL only

  std::size_t n() const { return static_cast<std::size_t>(weights.rows()); }

  /// Throws InvalidArgument on asymmetry, non-zero diagonal, negative or
  /// non-finite weights, or a channel-name count mismatch.
  void validate() const;
};

struct DynamicConnectivity {
  std::string method = "bsl";
  BandSpec band;
  WindowPlan window_plan;
  std::vector<ConnectivityMatrix> slices;
};

}  // namespace dynconn
