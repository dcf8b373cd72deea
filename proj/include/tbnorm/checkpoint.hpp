#pragma once

#include <filesystem>

#include "json.hpp"

#include "tbnorm/model.hpp"

namespace tbnorm {

// Layout: the 8 bytes "TBNORM1\n", a little-endian u64 manifest length, the
// JSON manifest (architecture, flags, array names and lengths), then every
// parameter and running-statistic array as little-endian f64 in manifest
// order.

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

void save_checkpoint(TinyModel& model, const std::filesystem::path& path);
TinyModel load_checkpoint(const std::filesystem::path& path);

}  // namespace tbnorm
