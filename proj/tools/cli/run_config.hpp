#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "postfilter/trainer/config.hpp"
#include "postfilter/trainer/trainer.hpp"

namespace postfilter::cli {

/// Everything a training run reads, echoed to <output.dir>/config.json.
struct RunConfig {
  std::string preset = "desk";
  trainer::TrainConfig train;
  std::filesystem::path x_dir;
  std::filesystem::path y_dir;
  std::filesystem::path output_dir = "run";
  trainer::StorageType storage = trainer::StorageType::f64;
};

/// "desk" or "full".
trainer::TrainConfig preset_config(const std::string& name);

nlohmann::json to_json(const RunConfig& config);
/// Strict: every key must be known, reported by dotted path.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Sets `dotted.key=value` on an existing key. The value is parsed as JSON
/// when possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, std::string_view assignment);

/// Preset, then the file (merge patch, may be empty), then overrides.
RunConfig resolve_run_config(const std::string& preset, const std::filesystem::path& file,
                             const std::vector<std::string>& overrides);

}  // namespace postfilter::cli
