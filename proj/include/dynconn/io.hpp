#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dynconn/connectivity.hpp"
#include "dynconn/gcn.hpp"
#include "dynconn/signal.hpp"
#include "dynconn/stats.hpp"

namespace dynconn::io {

using json = nlohmann::ordered_json;

constexpr int kSchemaVersion = 1;

/// Serializes with every floating-point number printed to 17 significant
/// digits. indent < 0 gives compact output.
std::string dump(const json& j, int indent = 1);

json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const json& j);

json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);

// {"v", "channels", "fs_hz", "samples", ["band"], ["label"]}
json recording_to_json(const Recording& r, const std::optional<BandSpec>& band = std::nullopt);
Recording recording_from_json(const json& j, std::optional<BandSpec>* band = nullptr);

json band_to_json(const BandSpec& band);
BandSpec band_from_json(const json& j);

// {"channels", "weights", "band", "window_index", "score", "method"}
json connectivity_to_json(const ConnectivityMatrix& cm, const std::string& method, const BandSpec& band,
                          std::size_t window_index);
ConnectivityMatrix connectivity_from_json(const json& j);

json dynamic_to_json(const DynamicConnectivity& dc, std::uint64_t seed);
DynamicConnectivity dynamic_from_json(const json& j);

/// Accepts a DynamicConnectivity file (all slices), a single matrix, or a
/// list of matrices.
std::vector<ConnectivityMatrix> matrices_from_json(const json& j);

json dataset_to_json(const std::vector<gcn::GraphSample>& data);
/// {"v", "n_samples", "samples"}. A bare list of samples is also accepted;
/// missing "features" default to the adjacency rows.
std::vector<gcn::GraphSample> dataset_from_json(const json& j);

json params_to_json(const gcn::GcnParams& params);
gcn::GcnParams params_from_json(const json& j);

json train_config_to_json(const gcn::TrainConfig& cfg);
gcn::TrainConfig train_config_from_json(const json& j, gcn::TrainConfig base = {});

json confusion_to_json(const stats::ConfusionMatrix& cm);
stats::ConfusionMatrix confusion_from_json(const json& j);

/// accuracy / sensitivity / specificity / kappa in the layout of a
/// per-subject results table.
json metrics_to_json(const stats::ClassMetrics& m, const std::optional<double>& kappa);

}  // namespace dynconn::io
