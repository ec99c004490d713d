#include <doctest.h>

#include <set>

#include "dynconn/error.hpp"
#include "dynconn/io.hpp"
#include "dynconn/synth.hpp"

using namespace dynconn;

TEST_CASE("dump keeps full precision") {
  io::json j;
  j["x"] = 0.1;
  j["v"] = std::vector<double>{1.0 / 3.0, 2.0};
  const auto text = io::dump(j);
  CHECK(text.find("0.10000000000000001") != std::string::npos);
  const auto back = io::json::parse(text);
  CHECK(back["v"][0].get<double>() == 1.0 / 3.0);
}

TEST_CASE("recording round trip") {
  const auto r = synth_coupled(3, 0.2, 100.0, {{0, 1, 0.7, 2}}, 0.5, 4);
  std::optional<BandSpec> band;
  const auto back = io::recording_from_json(io::json::parse(io::dump(io::recording_to_json(r, BandSpec::beta()))), &band);
  CHECK(back.samples == r.samples);
  CHECK(back.channel_names == r.channel_names);
  REQUIRE(band.has_value());
  CHECK(band->high_hz == 20.0);
}

TEST_CASE("dynamic connectivity round trip") {
  DynamicConnectivity dc;
  dc.method = "pearson";
  ConnectivityMatrix cm;
  cm.channel_names = {"a", "b"};
  cm.weights = Eigen::MatrixXd::Zero(2, 2);
  cm.weights(0, 1) = cm.weights(1, 0) = 0.625;
  dc.slices = {cm, cm};
  const auto back = io::dynamic_from_json(io::json::parse(io::dump(io::dynamic_to_json(dc, 3))));
  CHECK(back.slices.size() == 2);
  CHECK(back.slices[1].weights == cm.weights);
  CHECK(io::matrices_from_json(io::dynamic_to_json(dc, 3)).size() == 2);
}

TEST_CASE("checkpoint round trip") {
  gcn::ModelShape shape;
  shape.input_dim = 5;
  shape.hidden_dim = 4;
  shape.n_blocks = 2;
  shape.use_projection = true;
  const auto p = gcn::init_params(shape, 8);
  const auto back = io::params_from_json(io::json::parse(io::dump(io::params_to_json(p))));
  std::vector<Eigen::MatrixXd> a, b;
  p.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& m) { a.push_back(m); });
  back.for_each_tensor([&](const std::string&, const Eigen::MatrixXd& m) { b.push_back(m); });
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("dataset and motifs") {
  synth::MotifDatasetConfig cfg;
  cfg.seed = 6;
  const auto data = synth::motif_dataset(cfg);
  CHECK(data.size() == 240);
  for (int c = 0; c < 6; ++c) CHECK(data[static_cast<std::size_t>(c) * 40].label == c);
  const auto motifs = synth::class_motifs(19, 4, 6);
  CHECK(std::set<synth::EdgeList>(motifs.begin(), motifs.end()).size() == 6);

  const auto back = io::dataset_from_json(io::json::parse(io::dump(io::dataset_to_json(data))));
  REQUIRE(back.size() == data.size());
  CHECK(back[17].adjacency.weights == data[17].adjacency.weights);
  CHECK(back[17].label == data[17].label);
  CHECK(io::dump(io::dataset_to_json(synth::motif_dataset(cfg))) == io::dump(io::dataset_to_json(data)));
}

TEST_CASE("malformed documents") {
  CHECK_THROWS_AS(io::recording_from_json(io::json::parse(R"({"v":1,"channels":["a"]})")), Error);
  CHECK_THROWS_AS(io::read_json("/nonexistent/file.json"), Error);
}
