#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "confens/experiment.hpp"

namespace confens {

/// Resolved run configuration. Every key has a default; see config_keys().
struct RunConfig {
    ExperimentConfig experiment;
    std::string paths = ".";  // base directory for relative input paths
    std::size_t months = 840;  // synthetic series length
    bool drifting = true;      // synthetic generator variant
};

/// Recognized keys in canonical order.
const std::vector<std::string>& config_keys();

/// key=value lines; blank lines and '#' comments ignored.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);

/// Applies one key=value assignment on top of an existing configuration.
void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Canonical key=value text; parsing it reproduces the configuration.
std::string config_to_text(const RunConfig& cfg);
nlohmann::json config_to_json(const RunConfig& cfg);

std::filesystem::path resolve_input(const RunConfig& cfg, const std::filesystem::path& p);

}  // namespace confens
