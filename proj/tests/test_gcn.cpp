#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "dynconn/error.hpp"
#include "dynconn/gcn.hpp"
#include "dynconn/synth.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace dynconn;
using namespace dynconn::gcn;

namespace {

ConnectivityMatrix adjacency(const Eigen::MatrixXd& w) {
  ConnectivityMatrix cm;
  cm.weights = w;
  for (Eigen::Index i = 0; i < w.rows(); ++i) cm.channel_names.push_back("n" + std::to_string(i));
  return cm;
}

GraphSample sample_of(const Eigen::MatrixXd& w, int label) {
  GraphSample s;
  s.adjacency = adjacency(w);
  s.features = make_features(s.adjacency, FeatureKind::AdjacencyRow);
  s.label = label;
  return s;
}

ModelShape shape(std::size_t d, std::size_t h, int blocks, bool projection = false, bool bn = false) {
  ModelShape s;
  s.input_dim = d;
  s.hidden_dim = h;
  s.n_blocks = blocks;
  s.use_projection = projection;
  s.use_batchnorm = bn;
  s.dropout_rate = 0.0;
  return s;
}

}  // namespace

TEST_CASE("normalized adjacency") {
  CHECK(normalize_adjacency(adjacency(Eigen::MatrixXd::Zero(1, 1))).a_hat(0, 0) == 1.0);

  Eigen::MatrixXd two(2, 2);
  two << 0, 1, 1, 0;
  const auto a2 = normalize_adjacency(adjacency(two)).a_hat;
  CHECK(a2.isApprox(Eigen::MatrixXd::Constant(2, 2, 0.5), 1e-15));

  Eigen::MatrixXd full = Eigen::MatrixXd::Ones(4, 4);
  full.diagonal().setZero();
  CHECK(normalize_adjacency(adjacency(full)).a_hat.isApprox(Eigen::MatrixXd::Constant(4, 4, 0.25), 1e-15));
}

TEST_CASE("hand-evaluated tiny forward pass") {
  // N=2, D=1, H=2, every parameter 0.5, X = [[1],[1]].
  // A_hat X = [1,1]; H1 = 0.5; H2 = 0.5; block: 0.5 -> 0.5, skip 0.5 -> 1;
  // readout [1,1]; logits 1*0.5 + 1*0.5 + 0.5 = 1.5 for every class.
  auto p = init_params(shape(1, 2, 1), 0);
  p.for_each_trainable([](const std::string&, Matrix& m) { m.setConstant(0.5); });
  GraphSample s;
  Eigen::MatrixXd two(2, 2);
  two << 0, 1, 1, 0;
  s.adjacency = adjacency(two);
  s.features = Matrix::Ones(2, 1);
  const auto probs = forward(s, p, Mode::Eval, 0);
  for (int k = 0; k < kNumClasses; ++k) CHECK(probs(k) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));

  // Break the symmetry in the classifier: logit k = 1.5 + 0.1 k.
  for (int k = 0; k < kNumClasses; ++k) p.fc_bias(0, k) = 0.5 + 0.1 * k;
  const auto skewed = forward(s, p, Mode::Eval, 0);
  double z = 0.0;
  for (int k = 0; k < kNumClasses; ++k) z += std::exp(0.1 * k);
  for (int k = 0; k < kNumClasses; ++k) CHECK(skewed(k) == doctest::Approx(std::exp(0.1 * k) / z).epsilon(1e-14));
}

TEST_CASE("forward matches a loop-based reference") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 3 + trial % 4;
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) w(i, j) = w(j, i) = u(rng) < 0.5 ? u(rng) : 0.0;
    }
    const auto s = sample_of(w, 0);
    auto p = init_params(shape(static_cast<std::size_t>(n), 5, trial % 3, trial % 2 == 1), static_cast<std::uint64_t>(trial));
    p.fc_bias = Matrix::Random(1, kNumClasses);
    const auto got = forward(s, p, Mode::Eval, 0);
    const auto ref = oracle::naive_forward(w, s.features, p);
    for (int k = 0; k < kNumClasses; ++k) CHECK(got(k) == doctest::Approx(ref[static_cast<std::size_t>(k)]).epsilon(1e-12));
  }
}

TEST_CASE("output distribution") {
  auto p = init_params(shape(4, 8, 1, false, true), 9);
  Eigen::MatrixXd w = Eigen::MatrixXd::Random(4, 4).cwiseAbs();
  w = (w + w.transpose()).eval();
  w.diagonal().setZero();
  const auto s = sample_of(w, 2);
  const auto probs = forward(s, p, Mode::Eval, 0);
  CHECK(probs.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(probs.minCoeff() > 0.0);

  p.fc.setZero();
  p.fc_bias.setZero();
  const auto flat = forward(s, p, Mode::Eval, 0);
  for (int k = 0; k < kNumClasses; ++k) CHECK(flat(k) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("cross-entropy") {
  const std::vector<double> uniform(6, 1.0 / 6.0);
  CHECK(loss(uniform, 3) == doctest::Approx(std::log(6.0)).epsilon(1e-14));
  const std::vector<double> sure{0, 0, 1, 0, 0, 0};
  CHECK(loss(sure, 2) == 0.0);
  const std::vector<double> half{0.5, 0.1, 0.1, 0.1, 0.1, 0.1};
  CHECK(loss(half, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(std::isfinite(loss(sure, 0)));
}

TEST_CASE("gradients match central differences") {
  SUBCASE("batch norm bypassed") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto graphs = gradcheck::random_graphs(2, 4, seed);
      const auto p = init_params(shape(4, 3, 2, seed % 2 == 1), seed);
      const auto rep = gradcheck::check(graphs, p, Mode::Eval);
      CHECK_MESSAGE(rep.worst_relative <= 1e-4, rep.worst_tensor);
    }
  }
  SUBCASE("batch statistics in training mode") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto graphs = gradcheck::random_graphs(3, 4, 100 + seed);
      auto p = init_params(shape(4, 3, 1, seed == 1, true), seed);
      // Non-zero shifts keep ReLU inputs off the kink when a column has no
      // batch variance.
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(0.2, 1.0);
      for (auto& b : p.blocks) {
        for (auto* bn : {&b.bn_a, &b.bn_b}) {
          for (Eigen::Index j = 0; j < 3; ++j) {
            bn->gamma(0, j) = 0.5 + u(rng);
            bn->beta(0, j) = (j % 2 ? -1.0 : 1.0) * u(rng);
          }
        }
      }
      const auto rep = gradcheck::check(graphs, p, Mode::Train);
      CHECK_MESSAGE(rep.worst_relative <= 1e-4, rep.worst_tensor);
    }
  }
}

TEST_CASE("classifier-layer gradient identities") {
  const auto graphs = gradcheck::random_graphs(1, 5, 7);
  const PreparedGraph* ptr = &graphs[0];
  auto p = init_params(shape(5, 4, 1), 7);
  const auto cache = forward_batch(std::span(&ptr, 1), p, Mode::Eval, 0);
  const auto g = backward(cache, p);
  Eigen::RowVectorXd expected = cache.probs.row(0);
  expected(graphs[0].label) -= 1.0;
  CHECK((g.fc_bias.row(0) - expected).cwiseAbs().maxCoeff() <= 1e-14);

  // A readout entry stuck at zero gives a zero row in the fc gradient.
  p.blocks.clear();
  p.w1.col(0).setConstant(-10.0);
  const auto c2 = forward_batch(std::span(&ptr, 1), p, Mode::Eval, 0);
  REQUIRE(c2.readout(0, 0) == 0.0);
  CHECK(backward(c2, p).fc.row(0).isZero());
}

TEST_CASE("training") {
  std::vector<GraphSample> data;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 12; ++i) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(5, 5);
    for (int a = 0; a < 5; ++a) {
      for (int b = a + 1; b < 5; ++b) w(a, b) = w(b, a) = u(rng);
    }
    data.push_back(sample_of(w, i % kNumClasses));
  }
  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.learning_rate = 1e-2;
  cfg.dropout_rate = 0.0;
  cfg.validation_fraction = 0.0;
  cfg.batch_size = 12;
  cfg.use_batchnorm = false;
  cfg.seed = 4;
  const auto a = train(data, cfg);
  CHECK(a.train_loss.size() == 500);
  CHECK(a.validation_loss.empty());
  CHECK(*std::min_element(a.train_loss.begin(), a.train_loss.end()) < 0.05);

  TrainConfig noisy;
  noisy.epochs = 15;
  noisy.seed = 8;
  const auto before = data;
  const auto r1 = train(data, noisy);
  const auto r2 = train(data, noisy);
  CHECK(r1.train_loss == r2.train_loss);
  CHECK(r1.validation_loss == r2.validation_loss);
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(data[i].adjacency.weights == before[i].adjacency.weights);
  const auto predicted = predict(data, r1.params);
  CHECK(predicted.size() == data.size());
}

TEST_CASE("fold assignment and cross-validation") {
  std::vector<int> labels;
  for (int i = 0; i < 60; ++i) labels.push_back(i % kNumClasses);
  bool stratified = false;
  const auto folds = make_folds(labels, 10, 3, &stratified);
  CHECK(stratified);
  std::vector<int> seen(labels.size(), 0);
  for (const auto& f : folds) {
    CHECK(f.size() == 6);
    std::set<int> classes;
    for (auto i : f) {
      ++seen[i];
      classes.insert(labels[i]);
    }
    CHECK(classes.size() == 6);
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));

  const std::vector<int> few{0, 0, 1, 1, 2, 2, 3, 3};
  const auto loose = make_folds(few, 4, 1, &stratified);
  CHECK_FALSE(stratified);
  std::size_t total = 0;
  for (const auto& f : loose) total += f.size();
  CHECK(total == few.size());

  synth::MotifDatasetConfig dc;
  dc.n_nodes = 6;
  dc.per_class = 2;
  dc.motif_edges = 2;
  dc.seed = 5;
  const auto data = synth::motif_dataset(dc);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.folds = static_cast<int>(data.size());
  cfg.seed = 2;
  const auto loo = kfold_evaluate(data, cfg);
  CHECK(loo.aggregate.total() == static_cast<std::int64_t>(data.size()));
  CHECK(loo.test_folds.size() == data.size());
  CHECK_FALSE(loo.stratified);
}

TEST_CASE("shape errors") {
  const auto p = init_params(shape(4, 3, 1), 0);
  Eigen::MatrixXd w = Eigen::MatrixXd::Ones(5, 5);
  w.diagonal().setZero();
  CHECK_THROWS_AS(forward(sample_of(w, 0), p, Mode::Eval, 0), Error);
  GraphSample bad = sample_of(w, 0);
  bad.label = 6;
  CHECK_THROWS_AS(prepare(bad), Error);
}
