#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynconn/connectivity.hpp"
#include "dynconn/stats.hpp"

namespace dynconn::gcn {

constexpr int kNumClasses = 6;

using Matrix = Eigen::MatrixXd;

enum class FeatureKind { AdjacencyRow, Identity };

struct GraphSample {
  ConnectivityMatrix adjacency;
  Matrix features;  // N x D
  int label = 0;
};

/// Node feature matrix derived from the adjacency.
Matrix make_features(const ConnectivityMatrix& adjacency, FeatureKind kind);

/// A_hat = D^-1/2 (A + I) D^-1/2 with D the row sums of A + I.
struct NormalizedAdjacency {
  Matrix a_hat;
};

NormalizedAdjacency normalize_adjacency(const ConnectivityMatrix& a);

struct BatchNorm {
  Matrix gamma;  // 1 x H
  Matrix beta;   // 1 x H
  Matrix running_mean;
  Matrix running_var;
};

/// Two graph-convolution sublayers with batch norm and a shortcut. An empty
/// projection means the shortcut is the identity.
struct ResidualBlock {
  Matrix wa;
  Matrix wb;
  BatchNorm bn_a;
  BatchNorm bn_b;
  Matrix projection;
};

struct GcnParams {
  Matrix w0;  // D x H
  Matrix w1;  // H x H
  std::vector<ResidualBlock> blocks;
  Matrix fc;       // H x 6
  Matrix fc_bias;  // 1 x 6
  double dropout_rate = 0.5;
  bool use_batchnorm = true;

  std::size_t input_dim() const { return static_cast<std::size_t>(w0.rows()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(w0.cols()); }

  /// Visits every trainable tensor with a stable name.
  void for_each_trainable(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each_trainable(const std::function<void(const std::string&, const Matrix&)>& fn) const;
  /// Visits trainable tensors and batch-norm running statistics.
  void for_each_tensor(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each_tensor(const std::function<void(const std::string&, const Matrix&)>& fn) const;

  /// Zero-valued tensors of matching shape.
  GcnParams zeros_like() const;
};

struct ModelShape {
  std::size_t input_dim = 19;
  std::size_t hidden_dim = 32;
  int n_blocks = 1;
  bool use_projection = false;
  double dropout_rate = 0.5;
  bool use_batchnorm = true;
};

/// Glorot-uniform weights, unit BN scale, zero shifts and biases.
GcnParams init_params(const ModelShape& shape, std::uint64_t seed);

enum class Mode { Train, Eval };

/// Graph prepared for the network: normalized adjacency plus features.
struct PreparedGraph {
  Matrix a_hat;
  Matrix x;
  int label = 0;
};

PreparedGraph prepare(const GraphSample& sample);

struct BnCache {
  Matrix x_hat;    // (B*N) x H
  Matrix inv_std;  // 1 x H
  Matrix batch_mean;
  Matrix batch_var;  // biased
};

struct BlockCache {
  Matrix input;  // (B*N) x H
  Matrix agg_in, pre_a, norm_a, y;
  Matrix agg_y, pre_b, norm_b, sum, out;
  Matrix dropout_mask;  // empty when no dropout
  BnCache bn_a, bn_b;
};

struct ForwardCache {
  std::vector<const PreparedGraph*> graphs;
  std::size_t n_nodes = 0;
  Mode mode = Mode::Eval;
  Matrix agg_x, pre1, h1, agg_h1, pre2, h2;
  Matrix dropout_mask2;
  std::vector<BlockCache> blocks;
  Matrix readout;  // B x H
  Matrix logits;   // B x 6
  Matrix probs;    // B x 6
};

/// Batched forward pass; batch-norm statistics span all nodes of all graphs
/// in Train mode. Does not modify params.
ForwardCache forward_batch(std::span<const PreparedGraph* const> batch, const GcnParams& params, Mode mode,
                           std::uint64_t seed);

/// Single-graph convenience wrapper; returns class probabilities.
Eigen::VectorXd forward(const GraphSample& sample, const GcnParams& params, Mode mode, std::uint64_t seed);

/// -ln(probs[label]), probability clamped at 1e-15.
double loss(std::span<const double> probs, int label);

/// Mean cross-entropy of a forward cache against the graphs' labels.
double batch_loss(const ForwardCache& cache);

/// Exact gradients of batch_loss with respect to every trainable tensor.
GcnParams backward(const ForwardCache& cache, const GcnParams& params);

/// Single-graph convenience wrapper.
GcnParams backward(const GraphSample& sample, const GcnParams& params, Mode mode, std::uint64_t seed);

/// Folds batch statistics of a Train-mode pass into the running statistics.
void update_running_stats(GcnParams& params, const ForwardCache& cache, double momentum);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch_size = 16;
  int folds = 10;
  std::uint64_t seed = 0;
  std::size_t hidden_dim = 32;
  int n_blocks = 1;
  double dropout_rate = 0.5;
  bool use_batchnorm = true;
  bool use_projection = false;
  double validation_fraction = 0.1;
  double bn_momentum = 0.1;

  void check() const;
};

struct TrainResult {
  GcnParams params;
  std::vector<double> train_loss;       // per epoch
  std::vector<double> validation_loss;  // per epoch; empty without a validation split
  int best_epoch = 0;
};

TrainResult train(std::span<const GraphSample> dataset, const TrainConfig& cfg);

/// Predicted class per graph in Eval mode.
std::vector<int> predict(std::span<const GraphSample> dataset, const GcnParams& params);

struct KFoldResult {
  std::vector<std::vector<std::size_t>> test_folds;
  std::vector<stats::ConfusionMatrix> fold_confusion;
  stats::ConfusionMatrix aggregate;
  stats::ClassMetrics metrics;
  std::optional<double> kappa;
  bool stratified = true;
};

/// Stratified fold assignment (falls back to unstratified when some class has
/// fewer members than folds; `stratified` reports which was used).
std::vector<std::vector<std::size_t>> make_folds(std::span<const int> labels, int folds, std::uint64_t seed,
                                                 bool* stratified = nullptr);

KFoldResult kfold_evaluate(std::span<const GraphSample> dataset, const TrainConfig& cfg);

}  // namespace dynconn::gcn
