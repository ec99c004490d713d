// dynconn: dynamic functional connectivity pipeline.
//
//   dynconn preprocess --fs 500 --band alpha rec.csv -o out/
//   dynconn connect --method bsl --window 1 --stride 0.5 --seed 7 out/rec.alpha.json -o out/
//   dynconn stats out/a.bsl.json out/b.bsl.json --group g1=x.json --group g2=y.json
//   dynconn synth -o data/
//   dynconn gcn-train data/dataset.json -o model/
//   dynconn gcn-eval data/dataset.json --folds 10 -o report/
//
// Exit codes: 0 success, 2 usage or input error, 1 internal error.

#include <array>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynconn/baselines.hpp"
#include "dynconn/bsl.hpp"
#include "dynconn/error.hpp"
#include "dynconn/gcn.hpp"
#include "dynconn/io.hpp"
#include "dynconn/seed.hpp"
#include "dynconn/signal.hpp"
#include "dynconn/stats.hpp"
#include "dynconn/synth.hpp"

namespace fs = std::filesystem;
using dynconn::Error;
using dynconn::ErrorCode;
using dynconn::io::json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  std::string output;  // empty: current directory, or stdout for stats
  bool quiet = false;

  std::filesystem::path dir() const { return output.empty() ? std::filesystem::path(".") : std::filesystem::path(output); }
};

void info(const Globals& g, const std::string& line) {
  if (!g.quiet) std::cout << line << '\n';
}

struct BandArgs {
  std::vector<std::string> names;
  double low = 0.0;
  double high = 0.0;

  void add_to(CLI::App* app, std::vector<std::string> defaults) {
    names = std::move(defaults);
    app->add_option("--band", names, "theta | alpha | beta | custom (repeatable)")
        ->allow_extra_args(false)
        ->take_all()
        ->capture_default_str();
    app->add_option("--low", low, "custom band lower edge in Hz");
    app->add_option("--high", high, "custom band upper edge in Hz");
  }

  dynconn::BandSpec resolve(const std::string& name) const {
    if (name == "custom") return dynconn::BandSpec::custom(low, high);
    return dynconn::BandSpec::preset(name);
  }
};

std::string stem_of(const fs::path& p) { return p.stem().string(); }

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessArgs {
  std::vector<std::string> inputs;
  double fs_hz = 0.0;
  BandArgs band;
};

void run_preprocess(const Globals& g, const PreprocessArgs& a) {
  std::vector<dynconn::BandSpec> bands;
  for (const auto& name : a.band.names) {
    auto b = a.band.resolve(name);
    b.check(a.fs_hz);
    bands.push_back(b);
  }
  for (const auto& input : a.inputs) {
    const auto raw = dynconn::load_csv(input, a.fs_hz);
    const auto referenced = dynconn::average_reference(raw);
    for (const auto& band : bands) {
      const auto filtered = dynconn::bandpass(referenced, band);
      const fs::path out = g.dir() / (stem_of(input) + "." + band.label() + ".json");
      dynconn::io::write_json(out, dynconn::io::recording_to_json(filtered, band));
      char line[512];
      std::snprintf(line, sizeof line, "%s -> %s (%zu channels, %zu samples, %s %g-%g Hz)", input.c_str(),
                    out.string().c_str(), filtered.n_channels(), filtered.n_samples(), band.label().c_str(),
                    band.low_hz, band.high_hz);
      info(g, line);
    }
  }
}

// ---------------------------------------------------------------------------
// connect

struct ConnectArgs {
  std::vector<std::string> inputs;
  std::string method = "bsl";
  double window = 1.0;
  double stride = 0.5;
  BandArgs band;
  double fs_hz = 0.0;
  std::string score = "bdeu";
  int bins = 3;
  double ess = 1.0;
  int max_parents = 3;
  int restarts = 10;
  int max_sweeps = 200;
  int patience = 2;
  double init_edge_prob = 0.2;
  bool no_reversal = false;
  unsigned threads = 1;
  std::optional<double> edge_threshold;
  std::size_t segment = 0;
};

dynconn::Recording load_recording(const std::string& path, double fs_hz, std::optional<dynconn::BandSpec>* band) {
  if (fs::path(path).extension() == ".csv") {
    if (!(fs_hz > 0.0)) throw Error(ErrorCode::InvalidArgument, "--fs is required for CSV input");
    band->reset();
    return dynconn::load_csv(path, fs_hz);
  }
  return dynconn::io::recording_from_json(dynconn::io::read_json(path), band);
}

std::string edge_list_csv(const dynconn::DynamicConnectivity& dc, double threshold) {
  std::string out = "window_index,source,target,strength\n";
  char buf[64];
  for (std::size_t k = 0; k < dc.slices.size(); ++k) {
    const auto& cm = dc.slices[k];
    for (Eigen::Index i = 0; i < cm.weights.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < cm.weights.cols(); ++j) {
        const double w = cm.weights(i, j);
        if (!(w > threshold)) continue;
        std::snprintf(buf, sizeof buf, "%.17g", w);
        out += std::to_string(k) + "," + cm.channel_names[static_cast<std::size_t>(i)] + "," +
               cm.channel_names[static_cast<std::size_t>(j)] + "," + buf + "\n";
      }
    }
  }
  return out;
}

void run_connect(const Globals& g, const ConnectArgs& a) {
  if (a.method != "bsl" && a.method != "pearson" && a.method != "imcoh" && a.method != "aec") {
    throw Error(ErrorCode::InvalidArgument, "unknown method '" + a.method + "'");
  }
  if (a.band.names.size() != 1) throw Error(ErrorCode::InvalidArgument, "connect takes exactly one --band");
  const auto stage_seed = dynconn::derive_seed(g.seed, "connect");

  dynconn::bsl::ScoreParams params;
  params.kind = a.score == "bic" ? dynconn::bsl::ScoreKind::Bic : dynconn::bsl::ScoreKind::Bdeu;
  if (a.score != "bic" && a.score != "bdeu") throw Error(ErrorCode::InvalidArgument, "--score must be bdeu or bic");
  params.ess = a.ess;
  params.n_bins = a.bins;
  params.max_parents = a.max_parents;
  params.check();
  dynconn::bsl::SearchConfig search;
  search.max_sweeps = a.max_sweeps;
  search.patience_sweeps = a.patience;
  search.restarts = a.restarts;
  search.init_edge_prob = a.init_edge_prob;
  search.allow_reversal = !a.no_reversal;
  search.seed = stage_seed;
  search.check();
  const dynconn::WindowPlan plan{a.window, a.stride};

  for (const auto& input : a.inputs) {
    std::optional<dynconn::BandSpec> recorded_band;
    auto rec = load_recording(input, a.fs_hz, &recorded_band);
    const bool prefiltered = recorded_band.has_value();
    const auto band = prefiltered ? *recorded_band : a.band.resolve(a.band.names.front());
    band.check(rec.sampling_rate_hz);
    if (!prefiltered && a.method != "aec") rec = dynconn::bandpass(rec, band);

    dynconn::DynamicConnectivity dc;
    if (a.method == "bsl") {
      dc = dynconn::bsl::estimate_dynamic_prefiltered(rec, band, plan, params, search, a.threads);
    } else {
      dc.method = a.method;
      dc.band = band;
      dc.window_plan = plan;
      for (const auto& w : dynconn::slice_windows(rec, plan)) {
        if (a.method == "pearson") {
          dc.slices.push_back(dynconn::baselines::pearson_connectivity(w));
        } else if (a.method == "imcoh") {
          auto cfg = dynconn::baselines::SpectralConfig::defaults_for(w.sampling_rate_hz, w.n_samples());
          if (a.segment > 0) cfg.segment_samples = a.segment;
          dc.slices.push_back(dynconn::baselines::imcoh_connectivity(w, band, cfg));
        } else {
          dc.slices.push_back(prefiltered ? dynconn::baselines::aec_connectivity_prefiltered(w)
                                          : dynconn::baselines::aec_connectivity(w, band));
        }
      }
    }

    auto doc = dynconn::io::dynamic_to_json(dc, g.seed);
    doc["stage_seed"] = stage_seed;
    doc["input"] = fs::path(input).filename().string();
    const auto base = stem_of(input) + "." + a.method;
    const fs::path out = g.dir() / (base + ".json");
    dynconn::io::write_json(out, doc);
    info(g, input + " -> " + out.string() + " (" + std::to_string(dc.slices.size()) + " windows)");
    if (a.edge_threshold) {
      const fs::path edges = g.dir() / (base + ".edges.csv");
      dynconn::io::write_text(edges, edge_list_csv(dc, *a.edge_threshold));
      info(g, "edges -> " + edges.string());
    }
  }
}

// ---------------------------------------------------------------------------
// stats

struct StatsArgs {
  std::vector<std::string> inputs;
  std::vector<std::string> groups;
  std::string reduction = "mean";
  std::string confusion;
};

double reduce(const dynconn::ConnectivityMatrix& cm, const std::string& how) {
  const auto flat = dynconn::stats::flatten_upper(cm);
  if (how == "max") return *std::max_element(flat.begin(), flat.end());
  double sum = 0.0;
  for (double v : flat) sum += v;
  return sum / static_cast<double>(flat.size());
}

void run_stats(const Globals& g, const StatsArgs& a) {
  if (a.reduction != "mean" && a.reduction != "max") {
    throw Error(ErrorCode::InvalidArgument, "--reduction must be mean or max");
  }
  json report;
  report["v"] = dynconn::io::kSchemaVersion;
  std::string method = "unknown", band = "unknown";
  auto note_labels = [&](const json& doc) {
    if (!doc.is_object()) return;
    if (doc.contains("method") && method == "unknown") method = doc["method"].get<std::string>();
    if (doc.contains("band") && band == "unknown") {
      band = doc["band"].is_string() ? doc["band"].get<std::string>() : doc["band"].value("name", "unknown");
    }
  };

  std::vector<std::vector<dynconn::ConnectivityMatrix>> files;
  for (const auto& path : a.inputs) {
    const auto doc = dynconn::io::read_json(path);
    note_labels(doc);
    files.push_back(dynconn::io::matrices_from_json(doc));
  }

  json anova = nullptr;
  if (!a.groups.empty()) {
    std::vector<std::vector<double>> values;
    json group_doc = json::object();
    for (const auto& spec : a.groups) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw Error(ErrorCode::InvalidArgument, "--group expects NAME=file[,file...]");
      }
      const auto name = spec.substr(0, eq);
      std::vector<double> vals;
      std::string files = spec.substr(eq + 1);
      std::size_t start = 0;
      while (start <= files.size()) {
        const auto comma = files.find(',', start);
        const auto file = files.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!file.empty()) {
          const auto doc = dynconn::io::read_json(file);
          note_labels(doc);
          for (const auto& m : dynconn::io::matrices_from_json(doc)) vals.push_back(reduce(m, a.reduction));
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
      group_doc[name] = vals;
      values.push_back(std::move(vals));
    }
    const auto res = dynconn::stats::one_way_anova(values);
    anova = {{"reduction", a.reduction == "mean" ? "mean_edge_strength" : "max_edge_strength"},
             {"groups", group_doc},
             {"f_stat", res.zero_within_variance ? json(nullptr) : json(res.f_stat)},
             {"df_between", res.df_between},
             {"df_within", res.df_within},
             {"p_value", res.p_value},
             {"zero_within_variance", res.zero_within_variance}};
  }

  report["method"] = method;
  report["band"] = band;
  // Several files: every pair of files, slices matched by window index.
  // One file: every pair of its slices.
  if (files.size() >= 2) {
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
      for (std::size_t j = i + 1; j < files.size(); ++j) {
        if (files[i].size() != files[j].size()) {
          throw Error(ErrorCode::LengthMismatch, "'" + a.inputs[i] + "' and '" + a.inputs[j] + "' differ in window count");
        }
        double matched = 0.0;
        for (std::size_t k = 0; k < files[i].size(); ++k) {
          const std::array<dynconn::ConnectivityMatrix, 2> pair{files[i][k], files[j][k]};
          matched += dynconn::stats::mean_pairwise_spearman(pair);
        }
        sum += matched / static_cast<double>(files[i].size());
        ++pairs;
      }
    }
    report["spearman_mean"] = sum / static_cast<double>(pairs);
    report["pairing"] = "file pairs, window-matched";
    report["n_files"] = files.size();
  } else if (files.size() == 1 && files.front().size() >= 2) {
    report["spearman_mean"] = dynconn::stats::mean_pairwise_spearman(files.front());
    report["pairing"] = "slice pairs within one file";
    report["n_files"] = 1;
  } else {
    report["spearman_mean"] = nullptr;
    report["pairing"] = nullptr;
  }
  report["anova"] = anova;
  if (!a.confusion.empty()) {
    const auto cm = dynconn::io::confusion_from_json(dynconn::io::read_json(a.confusion));
    std::optional<double> kappa;
    try {
      kappa = dynconn::stats::cohen_kappa(cm);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateMarginals) throw;
    }
    report["per_class"] = dynconn::io::metrics_to_json(dynconn::stats::confusion_metrics(cm), kappa);
  } else {
    report["per_class"] = nullptr;
  }

  const auto text = dynconn::io::dump(report);
  if (g.output.empty() || g.output == "-") {
    std::cout << text;
    return;
  }
  fs::path out(g.output);
  if (fs::is_directory(out) || g.output.back() == '/') out /= "stats.json";
  dynconn::io::write_text(out, text);
  info(g, "report -> " + out.string());
}

// ---------------------------------------------------------------------------
// gcn

struct GcnArgs {
  std::string dataset;
  std::string checkpoint;
  dynconn::gcn::TrainConfig cfg;
  std::string features = "auto";
};

std::vector<dynconn::gcn::GraphSample> load_dataset(const GcnArgs& a) {
  auto data = dynconn::io::dataset_from_json(dynconn::io::read_json(a.dataset));
  if (data.empty()) throw Error(ErrorCode::InvalidArgument, "dataset is empty");
  if (a.features == "identity" || a.features == "adjacency") {
    const auto kind = a.features == "identity" ? dynconn::gcn::FeatureKind::Identity : dynconn::gcn::FeatureKind::AdjacencyRow;
    for (auto& s : data) s.features = dynconn::gcn::make_features(s.adjacency, kind);
  } else if (a.features != "auto") {
    throw Error(ErrorCode::InvalidArgument, "--features must be auto, adjacency or identity");
  }
  return data;
}

void run_gcn_train(const Globals& g, GcnArgs a) {
  a.cfg.seed = dynconn::derive_seed(g.seed, "gcn-train");
  const auto data = load_dataset(a);
  const auto result = dynconn::gcn::train(data, a.cfg);

  json ckpt;
  ckpt["v"] = dynconn::io::kSchemaVersion;
  ckpt["seed"] = g.seed;
  ckpt["stage_seed"] = a.cfg.seed;
  ckpt["n_nodes"] = data.front().adjacency.n();
  ckpt["channels"] = data.front().adjacency.channel_names;
  ckpt["config"] = dynconn::io::train_config_to_json(a.cfg);
  ckpt["best_epoch"] = result.best_epoch;
  ckpt["params"] = dynconn::io::params_to_json(result.params);
  const fs::path dir = g.dir();
  dynconn::io::write_json(dir / "checkpoint.json", ckpt);

  json trace;
  trace["v"] = dynconn::io::kSchemaVersion;
  trace["train_loss"] = result.train_loss;
  trace["validation_loss"] = result.validation_loss;
  trace["best_epoch"] = result.best_epoch;
  dynconn::io::write_json(dir / "loss_trace.json", trace);
  info(g, "checkpoint -> " + (dir / "checkpoint.json").string() + " (best epoch " +
              std::to_string(result.best_epoch) + ")");
}

void run_gcn_eval(const Globals& g, GcnArgs a) {
  const auto data = load_dataset(a);
  json report;
  report["v"] = dynconn::io::kSchemaVersion;
  report["seed"] = g.seed;
  report["n_samples"] = data.size();
  if (!a.checkpoint.empty()) {
    const auto ckpt = dynconn::io::read_json(a.checkpoint);
    const auto n_nodes = ckpt.at("n_nodes").get<std::size_t>();
    for (const auto& s : data) {
      if (s.adjacency.n() != n_nodes) {
        throw Error(ErrorCode::DimensionMismatch, "dataset has " + std::to_string(s.adjacency.n()) +
                                                      " channels, checkpoint expects " + std::to_string(n_nodes));
      }
    }
    const auto params = dynconn::io::params_from_json(ckpt.at("params"));
    if (static_cast<std::size_t>(data.front().features.cols()) != params.input_dim()) {
      throw Error(ErrorCode::DimensionMismatch, "feature dimension does not match checkpoint");
    }
    const auto predicted = dynconn::gcn::predict(data, params);
    dynconn::stats::ConfusionMatrix cm(dynconn::gcn::kNumClasses);
    for (std::size_t i = 0; i < data.size(); ++i) {
      cm.add(static_cast<std::size_t>(data[i].label), static_cast<std::size_t>(predicted[i]));
    }
    std::optional<double> kappa;
    try {
      kappa = dynconn::stats::cohen_kappa(cm);
    } catch (const Error&) {
    }
    report["mode"] = "checkpoint";
    report["metrics"] = dynconn::io::metrics_to_json(dynconn::stats::confusion_metrics(cm), kappa);
    report["confusion"] = dynconn::io::confusion_to_json(cm);
  } else {
    a.cfg.seed = dynconn::derive_seed(g.seed, "gcn-eval");
    const auto res = dynconn::gcn::kfold_evaluate(data, a.cfg);
    report["mode"] = "kfold";
    report["folds"] = a.cfg.folds;
    report["stratified"] = res.stratified;
    report["config"] = dynconn::io::train_config_to_json(a.cfg);
    report["metrics"] = dynconn::io::metrics_to_json(res.metrics, res.kappa);
    report["confusion"] = dynconn::io::confusion_to_json(res.aggregate);
    json folds = json::array();
    for (const auto& cm : res.fold_confusion) {
      const auto m = dynconn::stats::confusion_metrics(cm);
      folds.push_back({{"accuracy", m.accuracy}, {"n_test", cm.total()}});
    }
    report["per_fold"] = std::move(folds);
    if (!res.stratified) std::cerr << "warning: too few samples per class; folds are not stratified\n";
  }
  const fs::path out = g.dir() / "metrics.json";
  dynconn::io::write_json(out, report);
  info(g, "metrics -> " + out.string() + " (accuracy " + std::to_string(report["metrics"]["accuracy"].get<double>()) + ")");
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  dynconn::synth::MotifDatasetConfig data;
  std::size_t recordings_per_class = 1;
  double duration_s = 4.0;
  double fs_hz = 500.0;
  double noise_sd = 0.5;
};

void run_synth(const Globals& g, SynthArgs a) {
  a.data.seed = dynconn::derive_seed(g.seed, "synth");
  const fs::path dir = g.dir();
  const auto dataset = dynconn::synth::motif_dataset(a.data);
  auto doc = dynconn::io::dataset_to_json(dataset);
  doc["seed"] = g.seed;
  dynconn::io::write_json(dir / "dataset.json", doc);

  const auto motifs = dynconn::synth::class_motifs(a.data.n_nodes, a.data.motif_edges, a.data.seed);
  json motif_doc;
  motif_doc["v"] = dynconn::io::kSchemaVersion;
  motif_doc["seed"] = g.seed;
  json classes = json::array();
  for (std::size_t c = 0; c < motifs.size(); ++c) {
    json edges = json::array();
    for (const auto& [s, t] : motifs[c]) edges.push_back({s, t});
    classes.push_back({{"label", c},
                       {"condition", dynconn::WmLoad::from_class_index(static_cast<int>(c)).label()},
                       {"edges", edges}});
  }
  motif_doc["classes"] = classes;
  dynconn::io::write_json(dir / "motifs.json", motif_doc);

  for (std::size_t c = 0; c < motifs.size(); ++c) {
    for (std::size_t i = 0; i < a.recordings_per_class; ++i) {
      auto rec = dynconn::synth::motif_recording(motifs[c], a.data.n_nodes, a.duration_s, a.fs_hz, a.noise_sd,
                                                 dynconn::derive_seed(a.data.seed, "recording", c * 1000003 + i));
      rec.trial_label = dynconn::WmLoad::from_class_index(static_cast<int>(c));
      const auto name = "recording_" + rec.trial_label->label() + "_" + std::to_string(i) + ".json";
      dynconn::io::write_json(dir / "recordings" / name, dynconn::io::recording_to_json(rec));
    }
  }
  info(g, "dataset -> " + (dir / "dataset.json").string() + " (" + std::to_string(dataset.size()) + " graphs)");
}

// Applies "--config" values as option defaults so that explicit flags win.
void apply_config(CLI::App& app, const std::string& path) {
  const auto cfg = dynconn::io::read_json(path);
  if (!cfg.is_object()) throw Error(ErrorCode::MalformedJson, "config must be a JSON object");
  auto as_text = [](const json& v) -> std::vector<std::string> {
    std::vector<std::string> out;
    auto one = [](const json& e) {
      if (e.is_string()) return e.get<std::string>();
      if (e.is_boolean()) return std::string(e.get<bool>() ? "true" : "false");
      return e.dump();
    };
    if (v.is_array()) {
      for (const auto& e : v) out.push_back(one(e));
    } else {
      out.push_back(one(v));
    }
    return out;
  };
  auto apply = [&](CLI::App* target, const json& section) {
    for (auto it = section.begin(); it != section.end(); ++it) {
      if (it.value().is_object()) continue;
      auto* opt = target->get_option_no_throw("--" + it.key());
      if (opt == nullptr) continue;
      const auto values = as_text(it.value());
      std::string joined;
      for (std::size_t i = 0; i < values.size(); ++i) joined += (i ? " " : "") + values[i];
      if (values.size() > 1) {
        opt->default_str(joined);
        for (const auto& v : values) opt->add_result(v);
        opt->run_callback();
        opt->clear();
      } else {
        opt->default_val(values.front());
      }
    }
  };
  apply(&app, cfg);
  for (auto* sub : app.get_subcommands([](CLI::App*) { return true; })) {
    apply(sub, cfg);
    if (cfg.contains(sub->get_name()) && cfg[sub->get_name()].is_object()) apply(sub, cfg[sub->get_name()]);
  }
}

std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic functional connectivity via Bayesian structure learning"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "master seed for every stochastic stage");
  app.add_option("--config", g.config, "JSON file of option defaults");
  app.add_option("-o,--output", g.output, "output directory (report file for stats)");
  app.add_flag("--quiet", g.quiet, "suppress progress lines");

  PreprocessArgs pre;
  auto* pre_cmd = app.add_subcommand("preprocess", "average-reference and band-pass CSV recordings");
  pre_cmd->add_option("inputs", pre.inputs, "CSV files (header of channel names, one row per sample)")->required();
  pre_cmd->add_option("--fs", pre.fs_hz, "sampling rate in Hz")->required();
  pre.band.add_to(pre_cmd, {"theta", "alpha", "beta"});

  ConnectArgs con;
  auto* con_cmd = app.add_subcommand("connect", "estimate dynamic connectivity");
  con_cmd->add_option("inputs", con.inputs, "Recording JSON (from preprocess) or CSV files")->required();
  con_cmd->add_option("--method", con.method, "bsl | pearson | imcoh | aec")->capture_default_str();
  con_cmd->add_option("--window", con.window, "window length in seconds")->capture_default_str();
  con_cmd->add_option("--stride", con.stride, "window stride in seconds")->capture_default_str();
  con.band.add_to(con_cmd, {"alpha"});
  con_cmd->add_option("--fs", con.fs_hz, "sampling rate for CSV input");
  con_cmd->add_option("--score", con.score, "bdeu | bic")->capture_default_str();
  con_cmd->add_option("--bins", con.bins, "quantization levels")->capture_default_str();
  con_cmd->add_option("--ess", con.ess, "BDeu equivalent sample size")->capture_default_str();
  con_cmd->add_option("--max-parents", con.max_parents, "parent limit per node")->capture_default_str();
  con_cmd->add_option("--restarts", con.restarts, "random restarts of the hill climb")->capture_default_str();
  con_cmd->add_option("--max-sweeps", con.max_sweeps, "sweep limit per restart")->capture_default_str();
  con_cmd->add_option("--patience", con.patience, "restarts without improvement before stopping")->capture_default_str();
  con_cmd->add_option("--init-edge-prob", con.init_edge_prob, "edge probability of random starting graphs")->capture_default_str();
  con_cmd->add_flag("--no-reversal", con.no_reversal, "disable edge reversal moves");
  con_cmd->add_option("--threads", con.threads, "worker threads for windows")->capture_default_str();
  con_cmd->add_option("--edge-threshold", con.edge_threshold, "also write edges with strength above this value");
  con_cmd->add_option("--segment", con.segment, "Welch segment length in samples (imcoh)");

  StatsArgs st;
  auto* st_cmd = app.add_subcommand("stats", "reproducibility, ANOVA and classification metrics");
  st_cmd->add_option("inputs", st.inputs, "connectivity files compared pairwise by Spearman correlation");
  st_cmd->add_option("--group", st.groups, "NAME=file[,file...] (repeatable) for one-way ANOVA")
      ->allow_extra_args(false)
      ->take_all();
  st_cmd->add_option("--reduction", st.reduction, "per-matrix scalar for ANOVA: mean | max")->capture_default_str();
  st_cmd->add_option("--confusion", st.confusion, "confusion matrix JSON for accuracy/kappa");

  GcnArgs gtrain, geval;
  auto add_gcn_options = [](CLI::App* cmd, GcnArgs& a) {
    cmd->add_option("dataset", a.dataset, "dataset JSON")->required();
    cmd->add_option("--epochs", a.cfg.epochs, "training epochs")->capture_default_str();
    cmd->add_option("--lr", a.cfg.learning_rate, "Adam learning rate")->capture_default_str();
    cmd->add_option("--batch", a.cfg.batch_size, "mini-batch size")->capture_default_str();
    cmd->add_option("--hidden", a.cfg.hidden_dim, "hidden width")->capture_default_str();
    cmd->add_option("--blocks", a.cfg.n_blocks, "residual blocks")->capture_default_str();
    cmd->add_option("--dropout", a.cfg.dropout_rate, "dropout rate on hidden activations")->capture_default_str();
    cmd->add_option("--val-fraction", a.cfg.validation_fraction, "held-out fraction for early stopping")->capture_default_str();
    cmd->add_option("--folds", a.cfg.folds, "cross-validation folds")->capture_default_str();
    cmd->add_option("--features", a.features, "auto | adjacency | identity")->capture_default_str();
    cmd->add_flag("!--no-batchnorm", a.cfg.use_batchnorm, "disable batch normalization");
    cmd->add_flag("--projection", a.cfg.use_projection, "learned shortcut projection in residual blocks");
  };
  auto* train_cmd = app.add_subcommand("gcn-train", "train the graph classifier");
  add_gcn_options(train_cmd, gtrain);
  auto* eval_cmd = app.add_subcommand("gcn-eval", "k-fold evaluation, or scoring with --checkpoint");
  add_gcn_options(eval_cmd, geval);
  eval_cmd->add_option("--checkpoint", geval.checkpoint, "checkpoint from gcn-train");

  SynthArgs sy;
  auto* sy_cmd = app.add_subcommand("synth", "write synthetic labelled graphs and recordings");
  sy_cmd->add_option("--per-class", sy.data.per_class, "graphs per class")->capture_default_str();
  sy_cmd->add_option("--nodes", sy.data.n_nodes, "nodes per graph")->capture_default_str();
  sy_cmd->add_option("--motif-edges", sy.data.motif_edges, "edges in each class motif")->capture_default_str();
  sy_cmd->add_option("--recordings-per-class", sy.recordings_per_class, "synthetic recordings per class")->capture_default_str();
  sy_cmd->add_option("--duration", sy.duration_s, "recording length in seconds")->capture_default_str();
  sy_cmd->add_option("--fs", sy.fs_hz, "recording sampling rate in Hz")->capture_default_str();
  sy_cmd->add_option("--noise", sy.noise_sd, "coupled-channel noise SD")->capture_default_str();

  try {
    if (const auto cfg = find_config_arg(argc, argv); !cfg.empty()) apply_config(app, cfg);
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dynconn::is_internal(e.code()) ? 1 : 2;
  }

  try {
    if (pre_cmd->parsed()) run_preprocess(g, pre);
    if (con_cmd->parsed()) run_connect(g, con);
    if (st_cmd->parsed()) run_stats(g, st);
    if (train_cmd->parsed()) run_gcn_train(g, gtrain);
    if (eval_cmd->parsed()) run_gcn_eval(g, geval);
    if (sy_cmd->parsed()) run_synth(g, sy);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return dynconn::is_internal(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
