#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "ablate/core.hpp"
#include "ablate/workspace.hpp"

namespace ablate {

enum class RunStatus { Success, Failed };

// Appendix-style failure taxonomy: mutation could not be mapped onto the
// code, the environment/artifacts were unusable, or the run itself crashed.
enum class FailureCategory { MappingFailure, EnvironmentFailure, RuntimeFailure };

std::string to_string(RunStatus status);
std::string to_string(FailureCategory category);

struct MetricsRecord {
    std::map<std::string, double> metrics;  // must include the primary metric on success
    double wall_seconds = 0.0;
    double cost_gpu_hours = 0.0;
    RunStatus status = RunStatus::Failed;
    std::optional<FailureCategory> failure_category;
};

// Per-arm reward model for the simulated verification environment.
struct SimulatedArmModel {
    std::string arm_id;
    double reward_mean = 0.0;
    double reward_std = 0.0;
    double failure_prob = 0.0;
};

using SimulatedEnv = std::map<std::string, SimulatedArmModel>;

// Draws a Gaussian reward observation from the candidate's arm model and
// converts it to a synthetic primary-metric score such that
// compute_reward(baseline, score, cost=0) recovers the drawn value. Fully
// determined by (candidate_id, seed): draws are counter-based, so results do
// not depend on execution order or parallelism. Failures are drawn with the
// arm's failure probability and categorized roughly 50/30/20 across the
// mapping/environment/runtime taxonomy.
MetricsRecord execute_simulated(const CandidateSpec& candidate, const SimulatedEnv& env,
                                std::uint64_t seed, double baseline_score,
                                const std::string& primary_metric);

struct ShellExecutorOptions {
    std::string command;  // may reference {workspace}, {candidate_id}, {seed}
    double timeout_seconds = 3600.0;
    std::string primary_metric = "score";
    std::filesystem::path log_dir;  // stdout/stderr capture; empty = workspace-local logs
    std::uint64_t seed = 0;
};

inline constexpr const char* kMetricsFileName = "ablate_metrics.json";

// Runs the configured command with the workspace as working directory. Exit
// code 0 plus a parseable ablate_metrics.json at the workspace root yields
// Success; nonzero exit or timeout yields RuntimeFailure; a missing or
// malformed metrics file yields EnvironmentFailure. Advances the workspace
// to Executed.
MetricsRecord execute_shell(const CandidateSpec& candidate, Workspace& ws,
                            const ShellExecutorOptions& options);

// Parses a flat {metric -> number} object, plus optional "cost_gpu_hours".
// Returns std::nullopt (with a reason) when the file is missing, malformed,
// or the primary metric is absent or non-finite.
std::optional<std::map<std::string, double>> parse_metrics_file(const std::filesystem::path& file,
                                                                const std::string& primary_metric,
                                                                std::string* error_out = nullptr);

}  // namespace ablate
