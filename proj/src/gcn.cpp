#include "dynconn/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "dynconn/error.hpp"
#include "dynconn/seed.hpp"

namespace dynconn::gcn {

namespace {

constexpr double kBnEps = 1e-5;
constexpr double kProbFloor = 1e-15;
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

using NamedTensor = std::pair<std::string, Matrix*>;

std::vector<NamedTensor> collect(GcnParams& p, bool include_state) {
  std::vector<NamedTensor> out;
  out.emplace_back("w0", &p.w0);
  out.emplace_back("w1", &p.w1);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string prefix = "blocks." + std::to_string(i) + ".";
    out.emplace_back(prefix + "wa", &b.wa);
    out.emplace_back(prefix + "wb", &b.wb);
    out.emplace_back(prefix + "bn_a.gamma", &b.bn_a.gamma);
    out.emplace_back(prefix + "bn_a.beta", &b.bn_a.beta);
    out.emplace_back(prefix + "bn_b.gamma", &b.bn_b.gamma);
    out.emplace_back(prefix + "bn_b.beta", &b.bn_b.beta);
    if (b.projection.size() > 0) out.emplace_back(prefix + "projection", &b.projection);
    if (include_state) {
      out.emplace_back(prefix + "bn_a.running_mean", &b.bn_a.running_mean);
      out.emplace_back(prefix + "bn_a.running_var", &b.bn_a.running_var);
      out.emplace_back(prefix + "bn_b.running_mean", &b.bn_b.running_mean);
      out.emplace_back(prefix + "bn_b.running_var", &b.bn_b.running_var);
    }
  }
  out.emplace_back("fc", &p.fc);
  out.emplace_back("fc_bias", &p.fc_bias);
  return out;
}

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

// Applies each graph's normalized adjacency (or its transpose) to its block of
// stacked node rows.
Matrix propagate(const ForwardCache& c, const Matrix& m, bool transpose = false) {
  const auto n = static_cast<Eigen::Index>(c.n_nodes);
  Matrix out(m.rows(), m.cols());
  for (std::size_t b = 0; b < c.graphs.size(); ++b) {
    const auto row = static_cast<Eigen::Index>(b) * n;
    if (transpose) {
      out.middleRows(row, n).noalias() = c.graphs[b]->a_hat.transpose() * m.middleRows(row, n);
    } else {
      out.middleRows(row, n).noalias() = c.graphs[b]->a_hat * m.middleRows(row, n);
    }
  }
  return out;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Matrix mask(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) mask(i, j) = keep(rng) ? scale : 0.0;
  }
  return mask;
}

Matrix bn_forward(const Matrix& u, const BatchNorm& bn, bool enabled, Mode mode, BnCache& cache) {
  if (!enabled) return u;
  const auto rows = static_cast<double>(u.rows());
  if (mode == Mode::Train) {
    cache.batch_mean = u.colwise().mean();
    const Matrix centered = u.rowwise() - cache.batch_mean.row(0);
    cache.batch_var = centered.array().square().colwise().sum() / rows;
    cache.inv_std = (cache.batch_var.array() + kBnEps).rsqrt().matrix();
    cache.x_hat = centered.array().rowwise() * cache.inv_std.row(0).array();
  } else {
    cache.inv_std = (bn.running_var.array() + kBnEps).rsqrt().matrix();
    cache.x_hat = (u.rowwise() - bn.running_mean.row(0)).array().rowwise() * cache.inv_std.row(0).array();
  }
  return (cache.x_hat.array().rowwise() * bn.gamma.row(0).array()).rowwise() + bn.beta.row(0).array();
}

Matrix bn_backward(const Matrix& d_out, const BatchNorm& bn, bool enabled, Mode mode, const BnCache& cache,
                   BatchNorm& grad) {
  if (!enabled) return d_out;
  grad.gamma += (d_out.array() * cache.x_hat.array()).colwise().sum().matrix();
  grad.beta += d_out.colwise().sum();
  const Matrix d_xhat = d_out.array().rowwise() * bn.gamma.row(0).array();
  if (mode == Mode::Eval) return d_xhat.array().rowwise() * cache.inv_std.row(0).array();
  const auto rows = static_cast<double>(d_out.rows());
  const Matrix sum_d = d_xhat.colwise().sum();
  const Matrix sum_dx = (d_xhat.array() * cache.x_hat.array()).colwise().sum();
  Matrix du = (d_xhat * rows).rowwise() - sum_d.row(0);
  du.array() -= cache.x_hat.array().rowwise() * sum_dx.row(0).array();
  return (du.array().rowwise() * (cache.inv_std.row(0).array() / rows)).matrix();
}

Matrix glorot(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

BatchNorm make_bn(Eigen::Index h) {
  return {Matrix::Ones(1, h), Matrix::Zero(1, h), Matrix::Zero(1, h), Matrix::Ones(1, h)};
}

}  // namespace

// ---------------------------------------------------------------------------

Matrix make_features(const ConnectivityMatrix& adjacency, FeatureKind kind) {
  if (kind == FeatureKind::Identity) {
    return Matrix::Identity(adjacency.weights.rows(), adjacency.weights.cols());
  }
  return adjacency.weights;
}

NormalizedAdjacency normalize_adjacency(const ConnectivityMatrix& a) {
  const auto n = a.weights.rows();
  if (a.weights.cols() != n) throw Error(ErrorCode::DimensionMismatch, "adjacency must be square");
  if ((a.weights.array() < 0.0).any() || !a.weights.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "adjacency weights must be finite and >= 0");
  }
  Matrix tilde = a.weights + Matrix::Identity(n, n);
  const Eigen::VectorXd degree = tilde.rowwise().sum();
  if ((degree.array() <= 0.0).any()) throw Error(ErrorCode::ZeroDegree, "node with zero degree");
  const Eigen::VectorXd inv_sqrt = degree.array().rsqrt();
  return {inv_sqrt.asDiagonal() * tilde * inv_sqrt.asDiagonal()};
}

void GcnParams::for_each_trainable(const std::function<void(const std::string&, Matrix&)>& fn) {
  for (auto& [name, m] : collect(*this, false)) fn(name, *m);
}

void GcnParams::for_each_trainable(const std::function<void(const std::string&, const Matrix&)>& fn) const {
  for (auto& [name, m] : collect(const_cast<GcnParams&>(*this), false)) fn(name, *m);
}

void GcnParams::for_each_tensor(const std::function<void(const std::string&, Matrix&)>& fn) {
  for (auto& [name, m] : collect(*this, true)) fn(name, *m);
}

void GcnParams::for_each_tensor(const std::function<void(const std::string&, const Matrix&)>& fn) const {
  for (auto& [name, m] : collect(const_cast<GcnParams&>(*this), true)) fn(name, *m);
}

GcnParams GcnParams::zeros_like() const {
  GcnParams z = *this;
  z.for_each_tensor([](const std::string&, Matrix& m) { m.setZero(); });
  return z;
}

GcnParams init_params(const ModelShape& shape, std::uint64_t seed) {
  if (shape.input_dim < 1 || shape.hidden_dim < 1 || shape.n_blocks < 0) {
    throw Error(ErrorCode::InvalidArgument, "invalid model shape");
  }
  if (!(shape.dropout_rate >= 0.0 && shape.dropout_rate < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "dropout rate must be in [0, 1)");
  }
  std::mt19937_64 rng(seed);
  const auto d = static_cast<Eigen::Index>(shape.input_dim);
  const auto h = static_cast<Eigen::Index>(shape.hidden_dim);
  GcnParams p;
  p.w0 = glorot(d, h, rng);
  p.w1 = glorot(h, h, rng);
  for (int i = 0; i < shape.n_blocks; ++i) {
    ResidualBlock b;
    b.wa = glorot(h, h, rng);
    b.wb = glorot(h, h, rng);
    b.bn_a = make_bn(h);
    b.bn_b = make_bn(h);
    if (shape.use_projection) b.projection = glorot(h, h, rng);
    p.blocks.push_back(std::move(b));
  }
  p.fc = glorot(h, kNumClasses, rng);
  p.fc_bias = Matrix::Zero(1, kNumClasses);
  p.dropout_rate = shape.dropout_rate;
  p.use_batchnorm = shape.use_batchnorm;
  return p;
}

PreparedGraph prepare(const GraphSample& sample) {
  if (sample.features.rows() != sample.adjacency.weights.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "feature rows must equal node count");
  }
  if (!sample.features.allFinite()) throw Error(ErrorCode::InvalidArgument, "features must be finite");
  if (sample.label < 0 || sample.label >= kNumClasses) throw Error(ErrorCode::InvalidArgument, "label out of range");
  return {normalize_adjacency(sample.adjacency).a_hat, sample.features, sample.label};
}

// ---------------------------------------------------------------------------

ForwardCache forward_batch(std::span<const PreparedGraph* const> batch, const GcnParams& params, Mode mode,
                           std::uint64_t seed) {
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  ForwardCache c;
  c.graphs.assign(batch.begin(), batch.end());
  c.mode = mode;
  c.n_nodes = static_cast<std::size_t>(batch.front()->a_hat.rows());
  const auto n = static_cast<Eigen::Index>(c.n_nodes);
  const auto d = params.w0.rows();
  const auto h = params.w0.cols();
  if (params.w1.rows() != h || params.w1.cols() != h || params.fc.rows() != h || params.fc.cols() != kNumClasses ||
      params.fc_bias.cols() != kNumClasses) {
    throw Error(ErrorCode::DimensionMismatch, "parameter shapes do not chain");
  }

  Matrix x(static_cast<Eigen::Index>(batch.size()) * n, d);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& g = *batch[b];
    if (g.a_hat.rows() != n || g.x.rows() != n) {
      throw Error(ErrorCode::DimensionMismatch, "graphs in a batch must share the node count");
    }
    if (g.x.cols() != d) {
      throw Error(ErrorCode::DimensionMismatch, "feature dimension " + std::to_string(g.x.cols()) +
                                                    " does not match model input " + std::to_string(d));
    }
    x.middleRows(static_cast<Eigen::Index>(b) * n, n) = g.x;
  }

  const bool drop = mode == Mode::Train && params.dropout_rate > 0.0;
  c.agg_x = propagate(c, x);
  c.pre1 = c.agg_x * params.w0;
  c.h1 = relu(c.pre1);
  c.agg_h1 = propagate(c, c.h1);
  c.pre2 = c.agg_h1 * params.w1;
  c.h2 = relu(c.pre2);
  Matrix hidden = c.h2;
  if (drop) {
    c.dropout_mask2 = dropout_mask(hidden.rows(), hidden.cols(), params.dropout_rate, derive_seed(seed, "dropout", 0));
    hidden.array() *= c.dropout_mask2.array();
  }

  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    const auto& blk = params.blocks[i];
    if (blk.wa.rows() != h || blk.wa.cols() != h || blk.wb.rows() != h || blk.wb.cols() != h) {
      throw Error(ErrorCode::DimensionMismatch, "residual block weights must be H x H");
    }
    BlockCache bc;
    bc.input = hidden;
    bc.agg_in = propagate(c, bc.input);
    bc.pre_a = bc.agg_in * blk.wa;
    bc.norm_a = bn_forward(bc.pre_a, blk.bn_a, params.use_batchnorm, mode, bc.bn_a);
    bc.y = relu(bc.norm_a);
    bc.agg_y = propagate(c, bc.y);
    bc.pre_b = bc.agg_y * blk.wb;
    bc.norm_b = bn_forward(bc.pre_b, blk.bn_b, params.use_batchnorm, mode, bc.bn_b);
    bc.sum = bc.norm_b + (blk.projection.size() > 0 ? Matrix(bc.input * blk.projection) : bc.input);
    bc.out = relu(bc.sum);
    hidden = bc.out;
    if (drop) {
      bc.dropout_mask =
          dropout_mask(hidden.rows(), hidden.cols(), params.dropout_rate, derive_seed(seed, "dropout", i + 1));
      hidden.array() *= bc.dropout_mask.array();
    }
    c.blocks.push_back(std::move(bc));
  }

  const auto batch_size = static_cast<Eigen::Index>(batch.size());
  c.readout.resize(batch_size, h);
  for (Eigen::Index b = 0; b < batch_size; ++b) c.readout.row(b) = hidden.middleRows(b * n, n).colwise().mean();
  c.logits = (c.readout * params.fc).rowwise() + params.fc_bias.row(0);
  c.probs.resize(batch_size, kNumClasses);
  for (Eigen::Index b = 0; b < batch_size; ++b) {
    const Eigen::RowVectorXd shifted = c.logits.row(b).array() - c.logits.row(b).maxCoeff();
    const Eigen::RowVectorXd e = shifted.array().exp();
    c.probs.row(b) = e / e.sum();
  }
  if (!c.probs.allFinite()) throw Error(ErrorCode::NonFiniteActivation, "non-finite class probabilities");
  return c;
}

Eigen::VectorXd forward(const GraphSample& sample, const GcnParams& params, Mode mode, std::uint64_t seed) {
  const auto g = prepare(sample);
  const PreparedGraph* ptr = &g;
  return forward_batch(std::span(&ptr, 1), params, mode, seed).probs.row(0).transpose();
}

double loss(std::span<const double> probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size()) {
    throw Error(ErrorCode::InvalidArgument, "label out of range");
  }
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], kProbFloor));
}

double batch_loss(const ForwardCache& cache) {
  double total = 0.0;
  for (std::size_t b = 0; b < cache.graphs.size(); ++b) {
    const Eigen::RowVectorXd row = cache.probs.row(static_cast<Eigen::Index>(b));
    total += loss(std::span(row.data(), static_cast<std::size_t>(row.size())), cache.graphs[b]->label);
  }
  return total / static_cast<double>(cache.graphs.size());
}

GcnParams backward(const ForwardCache& c, const GcnParams& params) {
  GcnParams grad = params.zeros_like();
  const auto batch_size = static_cast<Eigen::Index>(c.graphs.size());
  const auto n = static_cast<Eigen::Index>(c.n_nodes);

  Matrix d_logits = c.probs;
  for (Eigen::Index b = 0; b < batch_size; ++b) d_logits(b, c.graphs[static_cast<std::size_t>(b)]->label) -= 1.0;
  d_logits /= static_cast<double>(batch_size);

  grad.fc = c.readout.transpose() * d_logits;
  grad.fc_bias = d_logits.colwise().sum();
  const Matrix d_readout = d_logits * params.fc.transpose();

  Matrix d_hidden(batch_size * n, params.w0.cols());
  for (Eigen::Index b = 0; b < batch_size; ++b) {
    d_hidden.middleRows(b * n, n) = d_readout.row(b).replicate(n, 1) / static_cast<double>(n);
  }

  for (std::size_t i = params.blocks.size(); i-- > 0;) {
    const auto& blk = params.blocks[i];
    const auto& bc = c.blocks[i];
    auto& g = grad.blocks[i];
    if (bc.dropout_mask.size() > 0) d_hidden.array() *= bc.dropout_mask.array();
    const Matrix d_sum = d_hidden.cwiseProduct(relu_mask(bc.sum));
    Matrix d_input;
    if (blk.projection.size() > 0) {
      g.projection = bc.input.transpose() * d_sum;
      d_input = d_sum * blk.projection.transpose();
    } else {
      d_input = d_sum;
    }
    const Matrix d_pre_b = bn_backward(d_sum, blk.bn_b, params.use_batchnorm, c.mode, bc.bn_b, g.bn_b);
    g.wb = bc.agg_y.transpose() * d_pre_b;
    const Matrix d_y = propagate(c, d_pre_b * blk.wb.transpose(), true);
    const Matrix d_norm_a = d_y.cwiseProduct(relu_mask(bc.norm_a));
    const Matrix d_pre_a = bn_backward(d_norm_a, blk.bn_a, params.use_batchnorm, c.mode, bc.bn_a, g.bn_a);
    g.wa = bc.agg_in.transpose() * d_pre_a;
    d_input += propagate(c, d_pre_a * blk.wa.transpose(), true);
    d_hidden = std::move(d_input);
  }

  if (c.dropout_mask2.size() > 0) d_hidden.array() *= c.dropout_mask2.array();
  const Matrix d_pre2 = d_hidden.cwiseProduct(relu_mask(c.pre2));
  grad.w1 = c.agg_h1.transpose() * d_pre2;
  const Matrix d_h1 = propagate(c, d_pre2 * params.w1.transpose(), true);
  const Matrix d_pre1 = d_h1.cwiseProduct(relu_mask(c.pre1));
  grad.w0 = c.agg_x.transpose() * d_pre1;
  return grad;
}

GcnParams backward(const GraphSample& sample, const GcnParams& params, Mode mode, std::uint64_t seed) {
  const auto g = prepare(sample);
  const PreparedGraph* ptr = &g;
  const auto cache = forward_batch(std::span(&ptr, 1), params, mode, seed);
  return backward(cache, params);
}

void update_running_stats(GcnParams& params, const ForwardCache& cache, double momentum) {
  if (cache.mode != Mode::Train || !params.use_batchnorm) return;
  const double rows = static_cast<double>(cache.graphs.size() * cache.n_nodes);
  const double unbias = rows > 1.0 ? rows / (rows - 1.0) : 1.0;
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    auto& blk = params.blocks[i];
    const auto& bc = cache.blocks[i];
    for (auto [bn, stats] : {std::pair{&blk.bn_a, &bc.bn_a}, std::pair{&blk.bn_b, &bc.bn_b}}) {
      bn->running_mean = (1.0 - momentum) * bn->running_mean + momentum * stats->batch_mean;
      bn->running_var = (1.0 - momentum) * bn->running_var + momentum * unbias * stats->batch_var;
    }
  }
}

// ---------------------------------------------------------------------------

void TrainConfig::check() const {
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
  if (epochs < 1) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "folds must be >= 2");
  if (hidden_dim < 1) throw Error(ErrorCode::InvalidArgument, "hidden dim must be >= 1");
  if (n_blocks < 0) throw Error(ErrorCode::InvalidArgument, "n_blocks must be >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error(ErrorCode::InvalidArgument, "dropout rate must be in [0, 1)");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "validation fraction must be in [0, 1)");
  }
}

namespace {

struct Adam {
  GcnParams m, v;
  int step = 0;

  explicit Adam(const GcnParams& p) : m(p.zeros_like()), v(p.zeros_like()) {}

  void apply(GcnParams& params, GcnParams& grad, double lr) {
    ++step;
    const double c1 = 1.0 - std::pow(kAdamBeta1, step);
    const double c2 = 1.0 - std::pow(kAdamBeta2, step);
    auto p = collect(params, false);
    auto g = collect(grad, false);
    auto mm = collect(m, false);
    auto vv = collect(v, false);
    for (std::size_t i = 0; i < p.size(); ++i) {
      Matrix& gi = *g[i].second;
      *mm[i].second = kAdamBeta1 * *mm[i].second + (1.0 - kAdamBeta1) * gi;
      *vv[i].second = kAdamBeta2 * *vv[i].second + (1.0 - kAdamBeta2) * gi.cwiseProduct(gi);
      p[i].second->array() -=
          lr * (mm[i].second->array() / c1) / ((vv[i].second->array() / c2).sqrt() + kAdamEps);
    }
  }
};

double eval_loss(std::span<const PreparedGraph> graphs, std::span<const std::size_t> idx, const GcnParams& params) {
  std::vector<const PreparedGraph*> ptrs;
  for (auto i : idx) ptrs.push_back(&graphs[i]);
  return batch_loss(forward_batch(ptrs, params, Mode::Eval, 0));
}

std::size_t common_node_count(std::span<const GraphSample> dataset) {
  const auto n = dataset.front().adjacency.n();
  for (const auto& s : dataset) {
    if (s.adjacency.n() != n) throw Error(ErrorCode::DimensionMismatch, "graphs differ in node count");
  }
  return n;
}

}  // namespace

TrainResult train(std::span<const GraphSample> dataset, const TrainConfig& cfg) {
  cfg.check();
  if (dataset.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 training graphs");
  common_node_count(dataset);
  {
    std::vector<int> labels;
    for (const auto& s : dataset) labels.push_back(s.label);
    std::sort(labels.begin(), labels.end());
    if (labels.front() == labels.back()) throw Error(ErrorCode::InvalidArgument, "need at least 2 classes");
  }

  std::vector<PreparedGraph> graphs;
  graphs.reserve(dataset.size());
  for (const auto& s : dataset) graphs.push_back(prepare(s));

  std::vector<std::size_t> idx(dataset.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 split_rng(derive_seed(cfg.seed, "split"));
  std::shuffle(idx.begin(), idx.end(), split_rng);
  auto n_val = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(idx.size())));
  n_val = std::min(n_val, idx.size() - 1);
  const std::vector<std::size_t> val_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());

  ModelShape shape;
  shape.input_dim = static_cast<std::size_t>(graphs.front().x.cols());
  shape.hidden_dim = cfg.hidden_dim;
  shape.n_blocks = cfg.n_blocks;
  shape.use_projection = cfg.use_projection;
  shape.dropout_rate = cfg.dropout_rate;
  shape.use_batchnorm = cfg.use_batchnorm;
  GcnParams params = init_params(shape, derive_seed(cfg.seed, "init"));
  Adam adam(params);

  TrainResult result;
  result.params = params;
  double best = std::numeric_limits<double>::infinity();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch)));
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0, b = 0; start < train_idx.size(); start += batch, ++b) {
      std::vector<const PreparedGraph*> ptrs;
      for (std::size_t i = start; i < std::min(start + batch, train_idx.size()); ++i) ptrs.push_back(&graphs[train_idx[i]]);
      const auto cache = forward_batch(ptrs, params, Mode::Train,
                                       derive_seed(cfg.seed, "dropout", (static_cast<std::uint64_t>(epoch) << 32) | b));
      epoch_loss += batch_loss(cache) * static_cast<double>(ptrs.size());
      auto grad = backward(cache, params);
      adam.apply(params, grad, cfg.learning_rate);
      update_running_stats(params, cache, cfg.bn_momentum);
    }
    epoch_loss /= static_cast<double>(train_idx.size());
    result.train_loss.push_back(epoch_loss);

    double selection = epoch_loss;
    if (!val_idx.empty()) {
      selection = eval_loss(graphs, val_idx, params);
      result.validation_loss.push_back(selection);
    }
    if (selection < best) {
      best = selection;
      result.params = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

std::vector<int> predict(std::span<const GraphSample> dataset, const GcnParams& params) {
  if (dataset.empty()) return {};
  common_node_count(dataset);
  std::vector<PreparedGraph> graphs;
  for (const auto& s : dataset) graphs.push_back(prepare(s));
  std::vector<const PreparedGraph*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);
  const auto cache = forward_batch(ptrs, params, Mode::Eval, 0);
  std::vector<int> out;
  for (Eigen::Index b = 0; b < cache.probs.rows(); ++b) {
    Eigen::Index arg = 0;
    cache.probs.row(b).maxCoeff(&arg);
    out.push_back(static_cast<int>(arg));
  }
  return out;
}

std::vector<std::vector<std::size_t>> make_folds(std::span<const int> labels, int folds, std::uint64_t seed,
                                                 bool* stratified) {
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "folds must be >= 2");
  const auto k = static_cast<std::size_t>(folds);
  if (labels.size() < k) throw Error(ErrorCode::InvalidArgument, "dataset smaller than the number of folds");

  std::vector<std::vector<std::size_t>> by_class(kNumClasses);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= kNumClasses) throw Error(ErrorCode::InvalidArgument, "label out of range");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  bool can_stratify = true;
  for (const auto& members : by_class) {
    if (!members.empty() && members.size() < k) can_stratify = false;
  }
  if (stratified) *stratified = can_stratify;

  std::vector<std::vector<std::size_t>> out(k);
  std::size_t slot = 0;
  if (can_stratify) {
    for (std::size_t c = 0; c < by_class.size(); ++c) {
      auto members = by_class[c];
      std::mt19937_64 rng(derive_seed(seed, "fold-class", c));
      std::shuffle(members.begin(), members.end(), rng);
      for (auto i : members) out[slot++ % k].push_back(i);
    }
  } else {
    std::vector<std::size_t> all(labels.size());
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, "fold-all"));
    std::shuffle(all.begin(), all.end(), rng);
    for (auto i : all) out[slot++ % k].push_back(i);
  }
  for (auto& f : out) std::sort(f.begin(), f.end());
  return out;
}

KFoldResult kfold_evaluate(std::span<const GraphSample> dataset, const TrainConfig& cfg) {
  cfg.check();
  std::vector<int> labels;
  for (const auto& s : dataset) labels.push_back(s.label);
  KFoldResult res;
  res.test_folds = make_folds(labels, cfg.folds, derive_seed(cfg.seed, "folds"), &res.stratified);
  res.aggregate = stats::ConfusionMatrix(kNumClasses);
  for (std::size_t f = 0; f < res.test_folds.size(); ++f) {
    const auto& test = res.test_folds[f];
    std::vector<GraphSample> train_set, test_set;
    for (std::size_t i = 0, t = 0; i < dataset.size(); ++i) {
      if (t < test.size() && test[t] == i) {
        test_set.push_back(dataset[i]);
        ++t;
      } else {
        train_set.push_back(dataset[i]);
      }
    }
    TrainConfig fold_cfg = cfg;
    fold_cfg.seed = derive_seed(cfg.seed, "fold", f);
    const auto trained = train(train_set, fold_cfg);
    const auto predicted = predict(test_set, trained.params);
    stats::ConfusionMatrix cm(kNumClasses);
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      cm.add(static_cast<std::size_t>(test_set[i].label), static_cast<std::size_t>(predicted[i]));
    }
    res.aggregate += cm;
    res.fold_confusion.push_back(std::move(cm));
  }
  res.metrics = stats::confusion_metrics(res.aggregate);
  try {
    res.kappa = stats::cohen_kappa(res.aggregate);
  } catch (const Error&) {
    res.kappa.reset();
  }
  return res;
}

}  // namespace dynconn::gcn
