#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ablate/run_record.hpp"

namespace ablate {

struct ImportanceEntry {
    std::string component_id;
    double effect_mean = 0.0;     // signed mean of (baseline - observed)
    double effect_max_abs = 0.0;  // worst-case |effect| across observations
    double importance = 0.0;      // |effect_mean|
    bool critical = false;        // importance >= tau_crit * |baseline|
    int n_observations = 0;
};

struct ArmSummary {
    std::string arm_id;
    int pulls = 0;
    double mean_reward = 0.0;
    std::optional<std::pair<double, double>> ci95;  // needs >= 2 observations
};

struct RunStats {
    std::optional<double> exec_rate;  // successes / attempts; absent with no attempts
    double tsr_reproduction = 0.0;
    double tsr_ablation = 0.0;
    double tsr_end_to_end = 0.0;
};

struct StudyReport {
    std::string run_id;
    std::uint64_t seed = 0;
    double baseline_score = 0.0;
    std::string primary_metric;
    bool higher_is_better = true;
    int budget = 0;
    int rounds_completed = 0;
    int execution_attempts = 0;
    double lambda = 0.0;
    double tau_crit = 0.0;
    int k = 5;
    std::vector<ImportanceEntry> importance;  // sorted by importance descending
    std::vector<std::string> top_k_pred;
    std::optional<double> acc_at_k;
    std::optional<double> simple_regret;
    RunStats stats;
    std::vector<ArmSummary> arms;
    double total_cost_gpu_hours = 0.0;
    std::string criticality_note;
    bool recomputed = false;  // set when replayed with overridden parameters
};

// Per-component signed ablation effects from successful single-target
// records: effect = mean over the component's records of (baseline -
// observed); multi-target candidates are excluded from attribution.
// Criticality compares |mean effect| against tau_crit * |baseline|.
std::vector<ImportanceEntry> component_effects(const std::vector<RunRecord>& records,
                                               double baseline, double tau_crit,
                                               const std::string& primary_metric);

// |first k of pred ∩ ground truth| / k. Requires k <= |ground_truth|.
double acc_at_k(const std::vector<std::string>& pred, const std::set<std::string>& ground_truth,
                int k);

// Shortfall of the predicted set's total importance versus the best
// importance sum achievable with k components. Every predicted component
// must appear in the importance map.
double simple_regret(const std::set<std::string>& pred,
                     const std::map<std::string, double>& importances, int k);

// Execution and task-success statistics. The reproduction stage is the
// baseline run (or its declared substitute); the ablation stage is scored by
// the fraction of candidates returning valid metrics; end-to-end is the
// product of the two stages.
RunStats run_statistics(const std::vector<RunRecord>& records, bool baseline_ok);

double end_to_end_tsr(double tsr_reproduction, double tsr_ablation);

// Two-sided 95% t-interval (n-1 degrees of freedom) around a sample mean.
std::pair<double, double> mean_ci95(double mean, double stddev, int n);

// Per-arm pull counts, reward means and confidence intervals from records.
std::vector<ArmSummary> arm_summaries(const std::vector<RunRecord>& records);

// Rounds to 6 significant digits; used for all floats emitted in reports so
// serialization is byte-stable.
double round6(double value);

enum class ReportFormat { Json, Text };

// Deterministic serialization: sorted keys, floats rounded to 6 significant
// digits. Identical reports serialize to identical bytes.
std::string emit_report(const StudyReport& report, ReportFormat format);

}  // namespace ablate
