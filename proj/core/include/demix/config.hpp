#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "demix/ensemble.hpp"
#include "demix/separator.hpp"

namespace demix {

/// Environment variable naming a directory searched for config files.
inline constexpr const char* kConfigDirEnv = "DEMIX_CONFIG_DIR";

SeparatorSpec spec_from_json(const nlohmann::json& doc);
nlohmann::json spec_to_json(const SeparatorSpec& spec);

/// Parses and validates a pipeline document. Throws ConfigError with the
/// offending key on any schema violation.
PipelineConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const PipelineConfig& cfg);

PipelineConfig load_config_file(const std::filesystem::path& path);

/// Names of the presets compiled into the library.
std::vector<std::string> preset_names();
/// JSON text of a built-in preset; throws ConfigError if unknown.
const std::string& preset_text(const std::string& name);

/// Resolves `ref` as: an existing file path, then a file in $DEMIX_CONFIG_DIR
/// (with or without ".json"), then a built-in preset name.
PipelineConfig resolve_config(const std::string& ref);

/// Mixes `seed` into every oracle backend's seed so one number controls all noise.
void reseed_oracles(PipelineConfig& cfg, std::uint64_t seed);

}  // namespace demix
