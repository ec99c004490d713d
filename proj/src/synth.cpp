#include "dynconn/synth.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "dynconn/error.hpp"
#include "dynconn/seed.hpp"

namespace dynconn::synth {

std::vector<EdgeList> class_motifs(std::size_t n_nodes, std::size_t motif_edges, std::uint64_t seed) {
  const std::size_t pairs = n_nodes * (n_nodes - 1) / 2;
  if (n_nodes < 3 || motif_edges < 1 || motif_edges * 2 > pairs) {
    throw Error(ErrorCode::InvalidArgument, "motif size incompatible with node count");
  }
  std::mt19937_64 rng(derive_seed(seed, "motifs"));
  std::uniform_int_distribution<std::size_t> node(0, n_nodes - 1);
  std::set<EdgeList> seen;
  std::vector<EdgeList> motifs;
  while (motifs.size() < static_cast<std::size_t>(gcn::kNumClasses)) {
    std::set<std::pair<std::size_t, std::size_t>> edges;
    while (edges.size() < motif_edges) {
      auto a = node(rng), b = node(rng);
      if (a == b) continue;
      edges.emplace(std::min(a, b), std::max(a, b));
    }
    EdgeList motif(edges.begin(), edges.end());
    if (seen.insert(motif).second) motifs.push_back(std::move(motif));
  }
  return motifs;
}

std::vector<gcn::GraphSample> motif_dataset(const MotifDatasetConfig& cfg) {
  const auto motifs = class_motifs(cfg.n_nodes, cfg.motif_edges, cfg.seed);
  const auto n = static_cast<Eigen::Index>(cfg.n_nodes);
  std::vector<gcn::GraphSample> out;
  for (int c = 0; c < gcn::kNumClasses; ++c) {
    for (std::size_t i = 0; i < cfg.per_class; ++i) {
      std::mt19937_64 rng(derive_seed(cfg.seed, "graph", static_cast<std::uint64_t>(c) * 1000003 + i));
      std::bernoulli_distribution present(cfg.background_density);
      std::uniform_real_distribution<double> weak(0.0, cfg.background_high);
      std::uniform_real_distribution<double> strong(cfg.motif_low, cfg.motif_high);
      gcn::GraphSample s;
      s.adjacency.channel_names = default_channel_names(cfg.n_nodes);
      s.adjacency.weights = Eigen::MatrixXd::Zero(n, n);
      for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = a + 1; b < n; ++b) {
          const bool on = present(rng);
          const double w = weak(rng);
          if (on) s.adjacency.weights(a, b) = s.adjacency.weights(b, a) = w;
        }
      }
      for (const auto& [a, b] : motifs[static_cast<std::size_t>(c)]) {
        const double w = strong(rng);
        const auto ia = static_cast<Eigen::Index>(a), ib = static_cast<Eigen::Index>(b);
        s.adjacency.weights(ia, ib) = s.adjacency.weights(ib, ia) = w;
      }
      s.features = gcn::make_features(s.adjacency, gcn::FeatureKind::AdjacencyRow);
      s.label = c;
      out.push_back(std::move(s));
    }
  }
  return out;
}

Recording motif_recording(const EdgeList& motif, std::size_t n_channels, double duration_s, double fs,
                          double noise_sd, std::uint64_t seed) {
  std::vector<CouplingEdge> edges;
  for (const auto& [a, b] : motif) edges.push_back({a, b, 1.0, 1});
  return synth_coupled(n_channels, duration_s, fs, edges, noise_sd, seed);
}

}  // namespace dynconn::synth
