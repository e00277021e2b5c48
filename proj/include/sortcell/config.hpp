#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "sortcell/runner.hpp"

namespace sortcell::cli {

// Fully resolved configuration for a cell run: config file values first,
// command-line flags override on top.
struct CliConfig {
  orchestrator::RunConfig run;
  uint64_t seed = 0;
  std::string out_dir = "out";
};

cellsim::SceneSpec scene_from_json(const nlohmann::json& j);
cellsim::SceneSpec load_scene_file(const std::filesystem::path& path);
nlohmann::json scene_to_json(const cellsim::SceneSpec& spec);

// Applies the fields present in the JSON document on top of `config`.
// Unknown keys are rejected so typos fail loudly.
void apply_config_json(CliConfig& config, const nlohmann::json& j,
                       const std::filesystem::path& base_dir);

CliConfig load_config_file(const std::filesystem::path& path);

}  // namespace sortcell::cli
