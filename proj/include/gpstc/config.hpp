#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gpstc/stc.hpp"

namespace gpstc {

/// Fully resolved experiment: the flat key/value form (preset expanded, overrides applied)
/// together with the typed objects built from it.
struct ExperimentConfig {
  std::map<std::string, std::string> values;
  TrainConfig train;
  std::filesystem::path out_dir;
  int horizon = 100;
  double init_radius = 0.3;
  int random_inits = 0;
};

/// Every key the config format accepts, in documentation order.
const std::vector<std::string>& config_keys();

/// Key/value pairs a preset expands to. Throws ValidationError for an unknown preset.
std::map<std::string, std::string> preset_values(const std::string& name);

/// Parses `key = value` lines ('#' starts a comment). Unknown or repeated keys are errors.
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Expands `preset`, applies `overrides` last, fills defaults, and validates. Every
/// violated field is reported in one ValidationError.
ExperimentConfig resolve_config(std::map<std::string, std::string> raw,
                                const std::map<std::string, std::string>& overrides = {});

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::map<std::string, std::string>& overrides = {});

/// Flat text that resolves back to the same configuration.
std::string render_config(const ExperimentConfig& cfg);

}  // namespace gpstc
