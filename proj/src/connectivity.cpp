#include "dynconn/connectivity.hpp"

#include <cmath>

#include "dynconn/error.hpp"

namespace dynconn {

void ConnectivityMatrix::validate() const {
  if (weights.rows() != weights.cols()) throw Error(ErrorCode::InvalidArgument, "weights must be square");
  if (!channel_names.empty() && channel_names.size() != n()) {
    throw Error(ErrorCode::InvalidArgument, "channel name count does not match matrix size");
  }
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    if (weights(i, i) != 0.0) throw Error(ErrorCode::InvalidArgument, "diagonal must be zero");
    for (Eigen::Index j = 0; j < weights.cols(); ++j) {
      const double w = weights(i, j);
      if (!std::isfinite(w) || w < 0.0) throw Error(ErrorCode::InvalidArgument, "weights must be finite and >= 0");
      if (w != weights(j, i)) throw Error(ErrorCode::InvalidArgument, "weights must be symmetric");
    }
  }
}

}  // namespace dynconn
