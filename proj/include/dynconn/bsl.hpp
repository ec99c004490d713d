#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "dynconn/connectivity.hpp"
#include "dynconn/signal.hpp"

namespace dynconn::bsl {

/// Discretized window: one row of bin indices per channel.
struct QuantizedWindow {
  std::size_t n_channels = 0;
  std::size_t n_samples = 0;
  int n_bins = 3;
  std::vector<std::uint8_t> data;  // row-major [channel][sample]

  std::uint8_t at(std::size_t channel, std::size_t sample) const { return data[channel * n_samples + sample]; }
  std::span<const std::uint8_t> row(std::size_t channel) const {
    return {data.data() + channel * n_samples, n_samples};
  }
};

/// Directed acyclic graph stored as sorted parent sets.
class Dag {
 public:
  Dag() = default;
  explicit Dag(std::size_t n_nodes) : parents_(n_nodes) {}

  std::size_t n_nodes() const { return parents_.size(); }
  const std::vector<std::size_t>& parents(std::size_t node) const { return parents_[node]; }
  bool has_edge(std::size_t from, std::size_t to) const;
  std::size_t edge_count() const;

  void add_edge(std::size_t from, std::size_t to);
  void remove_edge(std::size_t from, std::size_t to);

  /// True if a directed path from `from` to `to` exists (length >= 1).
  bool has_path(std::size_t from, std::size_t to) const;
  bool is_acyclic() const;
  std::size_t max_in_degree() const;

  friend bool operator==(const Dag&, const Dag&) = default;

 private:
  std::vector<std::vector<std::size_t>> parents_;
};

enum class ScoreKind { Bdeu, Bic };

struct ScoreParams {
  ScoreKind kind = ScoreKind::Bdeu;
  double ess = 1.0;
  int n_bins = 3;
  int max_parents = 3;

  void check() const;
};

/// Family sufficient statistics: counts[j * r + k] = #samples with parent
/// configuration j (first parent most significant) and node value k.
struct CountTable {
  std::size_t node = 0;
  std::size_t parent_config_count = 1;  // q
  int n_bins = 2;                       // r
  std::vector<std::uint32_t> counts;

  std::uint32_t at(std::size_t config, int value) const {
    return counts[config * static_cast<std::size_t>(n_bins) + static_cast<std::size_t>(value)];
  }
  std::uint64_t total() const;
};

struct SearchConfig {
  int max_sweeps = 200;
  int patience_sweeps = 2;
  int restarts = 10;
  double init_edge_prob = 0.2;
  std::uint64_t seed = 0;
  bool allow_reversal = true;

  void check() const;
};

struct SearchResult {
  Dag dag;
  double score = 0.0;
  /// Accepted score after each sweep of the winning restart.
  std::vector<double> trace;
};

/// Per-channel empirical-quantile binning into n_bins levels.
QuantizedWindow quantize(const Recording& window, int n_bins);

CountTable family_counts(const QuantizedWindow& qw, std::size_t node, std::span<const std::size_t> parents);

/// Log BDeu marginal likelihood or BIC of one family. `m` is the sample count.
double family_score(const CountTable& ct, const ScoreParams& params, std::uint64_t m);

double graph_score(const QuantizedWindow& qw, const Dag& g, const ScoreParams& params);

/// Memoizes family scores keyed by (node, parent set) for one window.
class FamilyScoreCache {
 public:
  FamilyScoreCache(const QuantizedWindow& qw, const ScoreParams& params);

  double score(std::size_t node, std::span<const std::size_t> parents);
  double graph_score(const Dag& g);

  std::size_t size() const { return cache_.size(); }
  std::size_t misses() const { return misses_; }

 private:
  struct Key {
    std::uint64_t parent_mask;
    std::size_t node;
    friend bool operator==(const Key&, const Key&) = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };

  const QuantizedWindow& qw_;
  ScoreParams params_;
  std::unordered_map<Key, double, KeyHash> cache_;
  std::size_t misses_ = 0;
};

Dag random_dag(std::size_t n, double init_edge_prob, std::uint64_t seed, int max_parents);

/// Greedy steepest-ascent over add/delete/reverse moves from one start.
SearchResult climb(FamilyScoreCache& cache, Dag start, const ScoreParams& params, const SearchConfig& cfg);

/// cfg.restarts random initializations, best result kept.
SearchResult hill_climb(const QuantizedWindow& qw, const ScoreParams& params, const SearchConfig& cfg);

bool is_weakly_connected(const Dag& g);

/// Adds the best-scoring cross-component edge until the skeleton is connected.
void connect_components(FamilyScoreCache& cache, Dag& g, const ScoreParams& params);

/// Deletion-delta strength per DAG edge, symmetrized. Edges present in `g` get
/// at least a tiny positive weight; absent pairs get 0.
ConnectivityMatrix edge_strengths(const QuantizedWindow& qw, const Dag& g, const ScoreParams& params,
                                  std::vector<std::string> channel_names = {});

ConnectivityMatrix estimate_window(const Recording& window, const ScoreParams& params, const SearchConfig& cfg);

/// Band-pass, slice, estimate each window. `threads` only affects speed.
DynamicConnectivity estimate_dynamic(const Recording& r, const BandSpec& band, const WindowPlan& plan,
                                     const ScoreParams& params, const SearchConfig& cfg, unsigned threads = 1);

/// As estimate_dynamic for a recording that is already band-limited.
DynamicConnectivity estimate_dynamic_prefiltered(const Recording& filtered, const BandSpec& band,
                                                 const WindowPlan& plan, const ScoreParams& params,
                                                 const SearchConfig& cfg, unsigned threads = 1);

/// Every DAG over n <= 5 nodes whose in-degrees respect max_parents.
std::vector<Dag> enumerate_dags(std::size_t n, int max_parents);

/// Exhaustive maximum of graph_score (n <= 5).
SearchResult exhaustive_search(const QuantizedWindow& qw, const ScoreParams& params);

}  // namespace dynconn::bsl
