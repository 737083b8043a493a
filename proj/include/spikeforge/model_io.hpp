#pragma once

#include <filesystem>
#include <json.hpp>

#include "spikeforge/models.hpp"

namespace spikeforge {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const ModelParams& params);
ModelParams params_from_json(ModelKind kind, const nlohmann::json& doc);

nlohmann::json to_json(const PcaBasis& basis);
PcaBasis basis_from_json(const nlohmann::json& doc);

// {format_version, kind, bin_rate_hz, window_ms, preprocessing, pca_basis,
//  members, train_config}; matrices are row-major nested arrays.
nlohmann::json to_json(const ModelEnsemble& ensemble);
ModelEnsemble ensemble_from_json(const nlohmann::json& doc);

void save_model(const ModelEnsemble& ensemble, const std::filesystem::path& path);
ModelEnsemble load_model(const std::filesystem::path& path);

}  // namespace spikeforge
