#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dynconn/gcn.hpp"
#include "dynconn/signal.hpp"

namespace dynconn::synth {

using EdgeList = std::vector<std::pair<std::size_t, std::size_t>>;

struct MotifDatasetConfig {
  std::size_t n_nodes = 19;
  std::size_t per_class = 40;
  std::size_t motif_edges = 4;
  double motif_low = 1.5;
  double motif_high = 2.5;
  double background_density = 0.15;
  double background_high = 1.0;
  std::uint64_t seed = 0;
};

/// One edge set (a < b) per class; the sets are pairwise distinct.
std::vector<EdgeList> class_motifs(std::size_t n_nodes, std::size_t motif_edges, std::uint64_t seed);

/// Six classes of weighted graphs: sparse random background plus the class
/// motif at elevated strength. Samples are ordered class-major.
std::vector<gcn::GraphSample> motif_dataset(const MotifDatasetConfig& cfg);

/// Recording whose lagged couplings follow a class motif.
Recording motif_recording(const EdgeList& motif, std::size_t n_channels, double duration_s, double fs,
                          double noise_sd, std::uint64_t seed);

}  // namespace dynconn::synth
