#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ablate/analysis.hpp"
#include "ablate/bandit.hpp"
#include "ablate/core.hpp"
#include "ablate/executor.hpp"
#include "ablate/knowledge.hpp"
#include "ablate/run_record.hpp"
#include "ablate/workspace.hpp"

namespace ablate {

enum class ExecutorKind { Simulated, Shell };
enum class CostSource { Estimated, Observed };
enum class Policy { Ucb, Random, Heuristic };

std::string to_string(Policy policy);
Policy policy_from_string(const std::string& name);

// Per-component patch bindings for the shell executor, keyed by mutation
// kind name. Templates may reference {factor}, {alternative}, {value},
// {key}; a set_key op with "scale": true multiplies by the mutation factor.
using PatchBindings = std::map<std::string, std::vector<PatchOp>>;

struct ShellConfig {
    std::filesystem::path base_dir;
    std::string command;
    double timeout_seconds = 3600.0;
    std::vector<std::string> artifact_globs;
    CostSource cost_source = CostSource::Estimated;
    std::map<std::string, PatchBindings> patches;  // component id -> bindings
};

struct GroundTruth {
    std::map<std::string, double> importances;
    std::vector<std::string> top_components;  // derived from importances when empty
};

struct StudyConfig {
    ComponentSpace space;
    KnowledgeBase knowledge;

    int max_rounds = 5;
    double beta_base = 2.0;
    BudgetTiers budgets;
    double lambda = 0.01;

    int budget = 25;
    std::uint64_t seed = 0;
    int max_parallel = 1;
    int max_targets = 1;
    int k = 5;
    double tau_crit = 0.05;
    std::size_t k_ret = 5;  // knowledge references retrieved into each round's context
    std::size_t enumeration_cap = kDefaultEnumerationCap;
    Policy policy = Policy::Ucb;

    ExecutorKind executor = ExecutorKind::Simulated;
    bool baseline_declared = true;
    SimulatedEnv simulated_env;
    ShellConfig shell;
    std::optional<GroundTruth> ground_truth;

    std::filesystem::path out_root = "ablate_out";
    bool write_archive = true;
};

// Stable identifier for (config, seed): excludes runtime-only knobs
// (max_parallel, output paths) so reruns land on the same run id.
std::string study_run_id(const StudyConfig& config);

// Declared arm priors overridden by knowledge weight hints where an entry
// links to the arm's components.
std::map<std::string, double> effective_arm_weights(const StudyConfig& config);

struct GenerationMemory {
    std::set<std::string> executed_ids;
    std::set<std::string> seen_component_kinds;  // "component|kind"

    void note(const CandidateSpec& candidate);
};

// Up to k unrun candidates from the arm's pool, preferring mutations not yet
// tried on their component, then mutation-kind diversity within the
// selection, then lower cost; candidate id breaks remaining ties.
// Deterministic given the memory.
std::vector<CandidateSpec> generate_candidates(const std::vector<CandidateSpec>& pool,
                                               const std::string& arm_id, int k,
                                               const GenerationMemory& memory);

// Convenience overload that enumerates the pool from the space.
std::vector<CandidateSpec> generate_candidates(const ComponentSpace& space,
                                               const std::string& arm_id, int k,
                                               const GenerationMemory& memory,
                                               std::size_t max_targets = 1);

// Expands a component's binding for one concrete mutation into an
// executable patch.
Patch compile_patch(const PatchBindings& bindings, const Mutation& mutation);

struct StudyResult {
    std::vector<RunRecord> records;
    StudyReport report;
    std::filesystem::path run_dir;  // empty when the archive is not written
    std::vector<std::string> events;  // serialized events.log lines
};

// The full study loop: per round, pick an arm (dynamic-UCB by default),
// derive the generation budget, generate candidates, execute them through
// the round graph with bounded parallelism, buffer rewards, and update the
// bandit state in candidate order. Stops when the execution budget or the
// round budget is exhausted, or no arm has candidates left.
StudyResult run_study(const StudyConfig& config);

struct ReplayOptions {
    std::optional<double> lambda_override;
};

// Rebuilds rewards, the bandit trajectory, and the report from a recorded
// events log, without re-executing anything. With no overrides the result
// matches the original report byte for byte; recorded rewards and bandit
// updates are cross-checked. Gaps or tampering raise Error.
StudyReport replay(const std::filesystem::path& events_log, const ReplayOptions& opts = {});

// Digest of an events log with volatile fields (timestamps, wall-clock
// durations) removed; equal digests mean equal recorded behavior.
std::string determinism_digest(const std::filesystem::path& events_log);
std::string determinism_digest_lines(const std::vector<std::string>& lines);

struct SweepRow {
    Policy policy = Policy::Ucb;
    int trials = 0;
    double mean_acc = 0.0;
    double mean_regret = 0.0;
    double mean_exec = 0.0;
};

// Runs `trials` seeded studies (seed, seed+1, ...) under one policy without
// writing archives; means are over trials with defined values.
SweepRow run_policy_sweep(StudyConfig config, Policy policy, int trials);

}  // namespace ablate
