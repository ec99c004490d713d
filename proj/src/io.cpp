#include "dynconn/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dynconn/error.hpp"

namespace dynconn::io {

namespace {

void dump_number(std::string& out, double v) {
  if (!std::isfinite(v)) {
    out += "null";
    return;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  // Keep the value recognisably floating point.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  out += s;
}

void dump_value(std::string& out, const json& j, int indent, int depth) {
  const bool pretty = indent >= 0;
  auto newline = [&](int d) {
    if (!pretty) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += json(it.key()).dump();
        out += pretty ? ": " : ":";
        dump_value(out, it.value(), indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_primitive(); });
      out += '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += flat && pretty ? ", " : ",";
        first = false;
        if (!flat) newline(depth + 1);
        dump_value(out, e, indent, depth + 1);
      }
      if (!flat) newline(depth);
      out += ']';
      return;
    }
    case json::value_t::number_float:
      dump_number(out, j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

template <typename T>
T required(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::MalformedJson, std::string("missing field '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedJson, std::string("field '") + key + "': " + e.what());
  }
}

double number_or_nan(const json& v) {
  if (v.is_null()) return std::nan("");
  if (!v.is_number()) throw Error(ErrorCode::MalformedJson, "expected a number");
  return v.get<double>();
}

}  // namespace

std::string dump(const json& j, int indent) {
  std::string out;
  dump_value(out, j, indent, 0);
  if (indent >= 0) out += '\n';
  return out;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::MalformedJson, path.string() + ": " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, dump(j)); }

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw Error(ErrorCode::MalformedJson, "matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.front().size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::MalformedJson, "matrix rows must have equal length");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = number_or_nan(row[static_cast<std::size_t>(k)]);
  }
  return m;
}

json band_to_json(const BandSpec& band) {
  return json{{"name", band.label()}, {"low_hz", band.low_hz}, {"high_hz", band.high_hz}};
}

BandSpec band_from_json(const json& j) {
  if (j.is_string()) return BandSpec::preset(j.get<std::string>());
  const auto name = required<std::string>(j, "name");
  if (name == "theta" || name == "alpha" || name == "beta") return BandSpec::preset(name);
  return BandSpec::custom(required<double>(j, "low_hz"), required<double>(j, "high_hz"));
}

json recording_to_json(const Recording& r, const std::optional<BandSpec>& band) {
  json j;
  j["v"] = kSchemaVersion;
  j["channels"] = r.channel_names;
  j["fs_hz"] = r.sampling_rate_hz;
  j["samples"] = matrix_to_json(r.samples);
  if (band) j["band"] = band_to_json(*band);
  if (r.trial_label) j["label"] = r.trial_label->class_index();
  return j;
}

Recording recording_from_json(const json& j, std::optional<BandSpec>* band) {
  Recording r;
  r.channel_names = required<std::vector<std::string>>(j, "channels");
  r.sampling_rate_hz = required<double>(j, "fs_hz");
  if (!j.contains("samples")) throw Error(ErrorCode::MalformedJson, "missing field 'samples'");
  r.samples = matrix_from_json(j["samples"]);
  if (j.contains("label") && !j["label"].is_null()) r.trial_label = WmLoad::from_class_index(j["label"].get<int>());
  if (band) {
    band->reset();
    if (j.contains("band") && !j["band"].is_null()) *band = band_from_json(j["band"]);
  }
  r.validate();
  return r;
}

json connectivity_to_json(const ConnectivityMatrix& cm, const std::string& method, const BandSpec& band,
                          std::size_t window_index) {
  json j;
  j["channels"] = cm.channel_names;
  j["weights"] = matrix_to_json(cm.weights);
  j["band"] = band.label();
  j["window_index"] = window_index;
  j["score"] = cm.score ? json(*cm.score) : json(nullptr);
  j["method"] = method;
  return j;
}

ConnectivityMatrix connectivity_from_json(const json& j) {
  ConnectivityMatrix cm;
  if (!j.contains("weights")) throw Error(ErrorCode::MalformedJson, "missing field 'weights'");
  cm.weights = matrix_from_json(j["weights"]);
  if (j.contains("channels")) cm.channel_names = j["channels"].get<std::vector<std::string>>();
  if (cm.channel_names.empty()) cm.channel_names = default_channel_names(cm.n());
  if (j.contains("score") && j["score"].is_number()) cm.score = j["score"].get<double>();
  cm.validate();
  return cm;
}

json dynamic_to_json(const DynamicConnectivity& dc, std::uint64_t seed) {
  json j;
  j["v"] = kSchemaVersion;
  j["method"] = dc.method;
  j["band"] = band_to_json(dc.band);
  j["window_plan"] = {{"length_s", dc.window_plan.length_s}, {"stride_s", dc.window_plan.stride_s}};
  j["seed"] = seed;
  j["n_windows"] = dc.slices.size();
  json slices = json::array();
  for (std::size_t k = 0; k < dc.slices.size(); ++k) {
    slices.push_back(connectivity_to_json(dc.slices[k], dc.method, dc.band, k));
  }
  j["slices"] = std::move(slices);
  return j;
}

DynamicConnectivity dynamic_from_json(const json& j) {
  DynamicConnectivity dc;
  dc.method = required<std::string>(j, "method");
  dc.band = band_from_json(j.at("band"));
  const auto& plan = j.at("window_plan");
  dc.window_plan = {required<double>(plan, "length_s"), required<double>(plan, "stride_s")};
  for (const auto& s : j.at("slices")) dc.slices.push_back(connectivity_from_json(s));
  return dc;
}

std::vector<ConnectivityMatrix> matrices_from_json(const json& j) {
  std::vector<ConnectivityMatrix> out;
  if (j.is_array()) {
    for (const auto& e : j) out.push_back(connectivity_from_json(e));
  } else if (j.is_object() && j.contains("slices")) {
    for (const auto& e : j["slices"]) out.push_back(connectivity_from_json(e));
  } else {
    out.push_back(connectivity_from_json(j));
  }
  return out;
}

json dataset_to_json(const std::vector<gcn::GraphSample>& data) {
  json arr = json::array();
  for (const auto& s : data) {
    json e;
    e["channels"] = s.adjacency.channel_names;
    e["weights"] = matrix_to_json(s.adjacency.weights);
    e["features"] = matrix_to_json(s.features);
    e["label"] = s.label;
    arr.push_back(std::move(e));
  }
  json j;
  j["v"] = kSchemaVersion;
  j["n_samples"] = data.size();
  j["samples"] = std::move(arr);
  return j;
}

std::vector<gcn::GraphSample> dataset_from_json(const json& j) {
  const json& list = j.is_object() && j.contains("samples") ? j["samples"] : j;
  if (!list.is_array()) throw Error(ErrorCode::MalformedJson, "dataset must be a list of graph samples");
  std::vector<gcn::GraphSample> out;
  for (const auto& e : list) {
    gcn::GraphSample s;
    s.adjacency = connectivity_from_json(e);
    s.features = e.contains("features") ? matrix_from_json(e["features"])
                                        : gcn::make_features(s.adjacency, gcn::FeatureKind::AdjacencyRow);
    s.label = required<int>(e, "label");
    if (s.label < 0 || s.label >= gcn::kNumClasses) throw Error(ErrorCode::MalformedJson, "label must be in [0, 6)");
    out.push_back(std::move(s));
  }
  return out;
}

json params_to_json(const gcn::GcnParams& params) {
  json j;
  j["hidden_dim"] = params.hidden_dim();
  j["input_dim"] = params.input_dim();
  j["n_blocks"] = params.blocks.size();
  j["use_projection"] = !params.blocks.empty() && params.blocks.front().projection.size() > 0;
  j["dropout_rate"] = params.dropout_rate;
  j["use_batchnorm"] = params.use_batchnorm;
  json tensors = json::object();
  params.for_each_tensor([&](const std::string& name, const Eigen::MatrixXd& m) { tensors[name] = matrix_to_json(m); });
  j["tensors"] = std::move(tensors);
  return j;
}

gcn::GcnParams params_from_json(const json& j) {
  gcn::ModelShape shape;
  shape.input_dim = required<std::size_t>(j, "input_dim");
  shape.hidden_dim = required<std::size_t>(j, "hidden_dim");
  shape.n_blocks = required<int>(j, "n_blocks");
  shape.use_projection = required<bool>(j, "use_projection");
  shape.dropout_rate = required<double>(j, "dropout_rate");
  shape.use_batchnorm = required<bool>(j, "use_batchnorm");
  auto params = gcn::init_params(shape, 0);
  const auto& tensors = j.at("tensors");
  params.for_each_tensor([&](const std::string& name, Eigen::MatrixXd& m) {
    if (!tensors.contains(name)) throw Error(ErrorCode::MalformedJson, "checkpoint lacks tensor '" + name + "'");
    auto loaded = matrix_from_json(tensors[name]);
    if (loaded.rows() != m.rows() || loaded.cols() != m.cols()) {
      throw Error(ErrorCode::DimensionMismatch, "tensor '" + name + "' has the wrong shape");
    }
    m = std::move(loaded);
  });
  return params;
}

json train_config_to_json(const gcn::TrainConfig& cfg) {
  return json{{"learning_rate", cfg.learning_rate},
              {"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"folds", cfg.folds},
              {"seed", cfg.seed},
              {"hidden_dim", cfg.hidden_dim},
              {"n_blocks", cfg.n_blocks},
              {"dropout_rate", cfg.dropout_rate},
              {"use_batchnorm", cfg.use_batchnorm},
              {"use_projection", cfg.use_projection},
              {"validation_fraction", cfg.validation_fraction},
              {"bn_momentum", cfg.bn_momentum}};
}

gcn::TrainConfig train_config_from_json(const json& j, gcn::TrainConfig cfg) {
  try {
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.folds = j.value("folds", cfg.folds);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
    cfg.n_blocks = j.value("n_blocks", cfg.n_blocks);
    cfg.dropout_rate = j.value("dropout_rate", cfg.dropout_rate);
    cfg.use_batchnorm = j.value("use_batchnorm", cfg.use_batchnorm);
    cfg.use_projection = j.value("use_projection", cfg.use_projection);
    cfg.validation_fraction = j.value("validation_fraction", cfg.validation_fraction);
    cfg.bn_momentum = j.value("bn_momentum", cfg.bn_momentum);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedJson, std::string("train config: ") + e.what());
  }
  return cfg;
}

json confusion_to_json(const stats::ConfusionMatrix& cm) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < cm.counts.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < cm.counts.cols(); ++k) row.push_back(cm.counts(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

stats::ConfusionMatrix confusion_from_json(const json& j) {
  const json& rows = j.is_object() ? j.at("counts") : j;
  if (!rows.is_array() || rows.empty()) throw Error(ErrorCode::MalformedJson, "confusion matrix must be non-empty");
  stats::ConfusionMatrix cm(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != rows.size()) {
      throw Error(ErrorCode::MalformedJson, "confusion matrix must be square");
    }
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto v = rows[i][k].get<std::int64_t>();
      if (v < 0) throw Error(ErrorCode::MalformedJson, "confusion counts must be non-negative");
      cm.counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return cm;
}

json metrics_to_json(const stats::ClassMetrics& m, const std::optional<double>& kappa) {
  json j;
  j["accuracy"] = m.accuracy;
  j["sensitivity"] = m.macro_sensitivity;
  j["specificity"] = m.macro_specificity;
  j["kappa"] = kappa ? json(*kappa) : json(nullptr);
  j["per_class"] = {{"sensitivity", m.sensitivity}, {"specificity", m.specificity}};
  return j;
}

}  // namespace dynconn::io
