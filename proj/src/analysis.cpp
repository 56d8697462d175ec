#include "ablate/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ablate/errors.hpp"

using nlohmann::json;

namespace ablate {

namespace {

// Two-sided 97.5% Student-t quantiles for 1..30 degrees of freedom; the
// normal quantile is close enough beyond that.
constexpr double kT975[30] = {
    12.706204736, 4.302652730, 3.182446305, 2.776445105, 2.570581836, 2.446911851,
    2.364624252,  2.306004135, 2.262157163, 2.228138852, 2.200985160, 2.178812830,
    2.160368656,  2.144786688, 2.131449546, 2.119905299, 2.109815578, 2.100922040,
    2.093024054,  2.085963447, 2.079613845, 2.073873068, 2.068657610, 2.063898562,
    2.059538553,  2.055529439, 2.051830516, 2.048407142, 2.045229642, 2.042272456};

double t975(int dof) {
    if (dof < 1) throw Error("mean_ci95: needs at least 2 observations");
    if (dof <= 30) return kT975[dof - 1];
    return 1.959963985;
}

}  // namespace

std::vector<ImportanceEntry> component_effects(const std::vector<RunRecord>& records,
                                               double baseline, double tau_crit,
                                               const std::string& primary_metric) {
    if (!std::isfinite(baseline)) throw Error("component_effects: baseline not finite");

    struct Acc {
        double sum = 0.0;
        double max_abs = 0.0;
        int n = 0;
    };
    std::map<std::string, Acc> by_component;

    for (const auto& record : records) {
        if (record.metrics.status != RunStatus::Success) continue;
        if (record.candidate.targets.size() != 1) continue;
        auto it = record.metrics.metrics.find(primary_metric);
        if (it == record.metrics.metrics.end()) continue;
        const double observed = it->second;
        auto& acc = by_component[record.candidate.targets[0]];
        acc.sum += baseline - observed;
        acc.max_abs = std::max(acc.max_abs, std::abs(baseline - observed));
        acc.n += 1;
    }

    std::vector<ImportanceEntry> entries;
    for (const auto& [component_id, acc] : by_component) {
        ImportanceEntry entry;
        entry.component_id = component_id;
        entry.effect_mean = acc.sum / static_cast<double>(acc.n);
        entry.effect_max_abs = acc.max_abs;
        entry.importance = std::abs(entry.effect_mean);
        entry.critical = entry.importance >= tau_crit * std::abs(baseline);
        entry.n_observations = acc.n;
        entries.push_back(std::move(entry));
    }
    std::sort(entries.begin(), entries.end(), [](const ImportanceEntry& a, const ImportanceEntry& b) {
        if (a.importance != b.importance) return a.importance > b.importance;
        return a.component_id < b.component_id;
    });
    return entries;
}

double acc_at_k(const std::vector<std::string>& pred, const std::set<std::string>& ground_truth,
                int k) {
    if (k < 1) throw Error("acc_at_k: k must be >= 1");
    if (static_cast<std::size_t>(k) > ground_truth.size())
        throw Error("acc_at_k: k exceeds ground-truth size");
    int hits = 0;
    const std::size_t take = std::min<std::size_t>(pred.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < take; ++i)
        if (ground_truth.count(pred[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(k);
}

double simple_regret(const std::set<std::string>& pred,
                     const std::map<std::string, double>& importances, int k) {
    if (k < 1) throw Error("simple_regret: k must be >= 1");
    if (pred.size() > static_cast<std::size_t>(k))
        throw Error("simple_regret: prediction larger than k");
    double pred_sum = 0.0;
    for (const auto& id : pred) {
        auto it = importances.find(id);
        if (it == importances.end()) throw Error("simple_regret: unknown component '" + id + "'");
        pred_sum += it->second;
    }
    std::vector<double> values;
    values.reserve(importances.size());
    for (const auto& [_, s] : importances) values.push_back(s);
    std::sort(values.begin(), values.end(), std::greater<double>());
    double best_sum = 0.0;
    for (std::size_t i = 0; i < values.size() && i < static_cast<std::size_t>(k); ++i)
        best_sum += values[i];
    // The true optimum is never below the prediction; any negative residue
    // here is summation-order roundoff.
    return std::max(0.0, best_sum - pred_sum);
}

RunStats run_statistics(const std::vector<RunRecord>& records, bool baseline_ok) {
    RunStats stats;
    stats.tsr_reproduction = baseline_ok ? 1.0 : 0.0;
    if (records.empty()) {
        stats.tsr_ablation = 0.0;
        stats.tsr_end_to_end = 0.0;
        return stats;
    }
    int successes = 0;
    for (const auto& record : records)
        if (record.metrics.status == RunStatus::Success) ++successes;
    stats.exec_rate = static_cast<double>(successes) / static_cast<double>(records.size());
    stats.tsr_ablation = *stats.exec_rate;
    stats.tsr_end_to_end = end_to_end_tsr(stats.tsr_reproduction, stats.tsr_ablation);
    return stats;
}

double end_to_end_tsr(double tsr_reproduction, double tsr_ablation) {
    return tsr_reproduction * tsr_ablation;
}

std::pair<double, double> mean_ci95(double mean, double stddev, int n) {
    if (n < 2) throw Error("mean_ci95: needs at least 2 observations");
    const double margin = t975(n - 1) * stddev / std::sqrt(static_cast<double>(n));
    return {mean - margin, mean + margin};
}

std::vector<ArmSummary> arm_summaries(const std::vector<RunRecord>& records) {
    std::map<std::string, std::vector<double>> rewards;
    for (const auto& record : records)
        if (record.reward.has_value()) rewards[record.candidate.arm_id].push_back(*record.reward);

    std::vector<ArmSummary> out;
    for (const auto& [arm_id, values] : rewards) {
        ArmSummary summary;
        summary.arm_id = arm_id;
        summary.pulls = static_cast<int>(values.size());
        double sum = 0.0;
        for (double v : values) sum += v;
        summary.mean_reward = sum / static_cast<double>(values.size());
        if (values.size() >= 2) {
            double sq = 0.0;
            for (double v : values) sq += (v - summary.mean_reward) * (v - summary.mean_reward);
            const double stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
            summary.ci95 = mean_ci95(summary.mean_reward, stddev, summary.pulls);
        }
        out.push_back(std::move(summary));
    }
    return out;
}

double round6(double value) {
    if (value == 0.0 || !std::isfinite(value)) return value;
    const double scale = std::pow(10.0, 5 - std::floor(std::log10(std::abs(value))));
    return std::round(value * scale) / scale;
}

namespace {

json importance_json(const ImportanceEntry& e) {
    return json{{"component", e.component_id},
                {"effect_mean", round6(e.effect_mean)},
                {"effect_max_abs", round6(e.effect_max_abs)},
                {"importance", round6(e.importance)},
                {"critical", e.critical},
                {"n_observations", e.n_observations}};
}

std::string fmt6(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

std::string emit_report(const StudyReport& report, ReportFormat format) {
    if (format == ReportFormat::Json) {
        json doc;
        doc["run_id"] = report.run_id;
        doc["seed"] = report.seed;
        doc["baseline_score"] = round6(report.baseline_score);
        doc["primary_metric"] = report.primary_metric;
        doc["higher_is_better"] = report.higher_is_better;
        doc["budget"] = report.budget;
        doc["rounds_completed"] = report.rounds_completed;
        doc["execution_attempts"] = report.execution_attempts;
        doc["lambda"] = round6(report.lambda);
        doc["tau_crit"] = round6(report.tau_crit);
        doc["k"] = report.k;
        doc["importance"] = json::array();
        for (const auto& e : report.importance) doc["importance"].push_back(importance_json(e));
        doc["top_k_pred"] = report.top_k_pred;
        if (report.acc_at_k.has_value()) doc["acc_at_k"] = round6(*report.acc_at_k);
        if (report.simple_regret.has_value()) doc["simple_regret"] = round6(*report.simple_regret);
        if (report.stats.exec_rate.has_value()) doc["exec_rate"] = round6(*report.stats.exec_rate);
        doc["tsr"] = json{{"reproduction", round6(report.stats.tsr_reproduction)},
                          {"ablation", round6(report.stats.tsr_ablation)},
                          {"end_to_end", round6(report.stats.tsr_end_to_end)}};
        doc["arms"] = json::array();
        for (const auto& arm : report.arms) {
            json a{{"arm", arm.arm_id},
                   {"pulls", arm.pulls},
                   {"mean_reward", round6(arm.mean_reward)}};
            if (arm.ci95.has_value())
                a["ci95"] = json::array({round6(arm.ci95->first), round6(arm.ci95->second)});
            doc["arms"].push_back(std::move(a));
        }
        doc["total_cost_gpu_hours"] = round6(report.total_cost_gpu_hours);
        doc["criticality_note"] = report.criticality_note;
        if (report.recomputed) doc["recomputed"] = true;
        return doc.dump(2) + "\n";
    }

    std::ostringstream out;
    out << "study " << report.run_id << " (seed " << report.seed << ")\n";
    out << "baseline " << report.primary_metric << " = " << fmt6(round6(report.baseline_score))
        << (report.higher_is_better ? " (higher is better)\n" : " (lower is better)\n");
    out << "rounds " << report.rounds_completed << ", attempts " << report.execution_attempts
        << " / budget " << report.budget << ", total cost "
        << fmt6(round6(report.total_cost_gpu_hours)) << " gpu-h\n";
    if (report.stats.exec_rate.has_value())
        out << "exec rate " << fmt6(round6(*report.stats.exec_rate)) << "\n";
    out << "tsr reproduction " << fmt6(round6(report.stats.tsr_reproduction)) << ", ablation "
        << fmt6(round6(report.stats.tsr_ablation)) << ", end-to-end "
        << fmt6(round6(report.stats.tsr_end_to_end)) << "\n";
    if (report.acc_at_k.has_value())
        out << "acc@" << report.k << " " << fmt6(round6(*report.acc_at_k)) << "\n";
    if (report.simple_regret.has_value())
        out << "simple regret " << fmt6(round6(*report.simple_regret)) << "\n";
    out << "\ncomponents by importance:\n";
    for (const auto& e : report.importance) {
        out << "  " << e.component_id << "  effect " << fmt6(round6(e.effect_mean)) << "  |max| "
            << fmt6(round6(e.effect_max_abs)) << "  importance " << fmt6(round6(e.importance))
            << (e.critical ? "  CRITICAL" : "") << "  (n=" << e.n_observations << ")\n";
    }
    out << "\narms:\n";
    for (const auto& arm : report.arms) {
        out << "  " << arm.arm_id << "  pulls " << arm.pulls << "  mean reward "
            << fmt6(round6(arm.mean_reward));
        if (arm.ci95.has_value())
            out << "  ci95 [" << fmt6(round6(arm.ci95->first)) << ", "
                << fmt6(round6(arm.ci95->second)) << "]";
        out << "\n";
    }
    if (!report.criticality_note.empty()) out << "\nnote: " << report.criticality_note << "\n";
    if (report.recomputed) out << "recomputed, not original\n";
    return out.str();
}

}  // namespace ablate
