#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "ablate/orchestrator.hpp"

namespace ablate {

// Loads the single-document study config (sections: space, knowledge,
// bandit, executor, ground_truth, run). Relative paths inside the file
// resolve against its directory. Structural problems throw ConfigError;
// semantic bounds are reported by validate_study_config.
StudyConfig load_study_config(const std::filesystem::path& file);

StudyConfig study_config_from_json(const nlohmann::json& doc,
                                   const std::filesystem::path& base_dir);

// Space invariants plus config-level bounds (budget, rounds, tiers, lambda,
// tau_crit, executor coverage, ground-truth consistency).
ValidationResult validate_study_config(const StudyConfig& config);

}  // namespace ablate
