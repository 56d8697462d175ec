#include "ablate/orchestrator.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ablate/errors.hpp"
#include "ablate/graph.hpp"
#include "ablate/hash.hpp"
#include "ablate/rng.hpp"
#include "ablate/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ablate {

std::string to_string(Policy policy) {
    switch (policy) {
        case Policy::Ucb: return "ucb";
        case Policy::Random: return "random";
        case Policy::Heuristic: return "heuristic";
    }
    return "unknown";
}

Policy policy_from_string(const std::string& name) {
    if (name == "ucb") return Policy::Ucb;
    if (name == "random") return Policy::Random;
    if (name == "heuristic") return Policy::Heuristic;
    throw ConfigError("unknown policy '" + name + "'");
}

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void to_json_ground_truth(json& j, const GroundTruth& gt) {
    j = json::object();
    if (!gt.importances.empty()) j["importances"] = gt.importances;
    if (!gt.top_components.empty()) j["top_components"] = gt.top_components;
}

GroundTruth ground_truth_from_json(const json& j) {
    GroundTruth gt;
    if (j.contains("importances"))
        gt.importances = j.at("importances").get<std::map<std::string, double>>();
    if (j.contains("top_components"))
        gt.top_components = j.at("top_components").get<std::vector<std::string>>();
    return gt;
}

// The identity-relevant slice of a study configuration: everything that can
// change recorded behavior, nothing that is runtime-only (max_parallel,
// output paths).
json stable_config_json(const StudyConfig& config) {
    json j;
    j["space"] = config.space;
    j["knowledge"] = config.knowledge;
    j["bandit"] = json{{"beta_base", config.beta_base},
                       {"max_rounds", config.max_rounds},
                       {"k_explore", config.budgets.k_explore},
                       {"k_base", config.budgets.k_base},
                       {"k_exploit", config.budgets.k_exploit},
                       {"lambda", config.lambda}};
    j["budget"] = config.budget;
    j["seed"] = config.seed;
    j["max_targets"] = config.max_targets;
    j["k"] = config.k;
    j["k_ret"] = config.k_ret;
    j["tau_crit"] = config.tau_crit;
    j["policy"] = to_string(config.policy);
    j["baseline_declared"] = config.baseline_declared;
    if (config.executor == ExecutorKind::Simulated) {
        j["executor"] = json{{"type", "simulated"}, {"arms", config.simulated_env}};
    } else {
        j["executor"] = json{{"type", "shell"},
                             {"base_dir", config.shell.base_dir.string()},
                             {"command", config.shell.command},
                             {"timeout_seconds", config.shell.timeout_seconds},
                             {"artifacts", config.shell.artifact_globs},
                             {"cost_source", config.shell.cost_source == CostSource::Estimated
                                                 ? "estimated"
                                                 : "observed"}};
    }
    if (config.ground_truth.has_value()) {
        json gt;
        to_json_ground_truth(gt, *config.ground_truth);
        j["ground_truth"] = gt;
    }
    return j;
}

class EventLog {
public:
    EventLog(const fs::path& file, bool to_file) {
        if (to_file) {
            stream_.open(file, std::ios::trunc);
            if (!stream_) throw Error("cannot open events log: " + file.string());
        }
    }

    void emit(json event) {
        event["seq"] = next_seq_++;
        if (!event.contains("ts")) event["ts"] = now_ms();
        std::string line = event.dump();
        if (stream_.is_open()) {
            stream_ << line << '\n';
            stream_.flush();
        }
        lines_.push_back(std::move(line));
    }

    std::vector<std::string> take_lines() { return std::move(lines_); }

private:
    std::ofstream stream_;
    std::vector<std::string> lines_;
    std::uint64_t next_seq_ = 0;
};

struct NodeTrace {
    std::string status = "ok";
    std::int64_t ts_start = 0;
    std::int64_t ts_end = 0;
};

double cost_for_reward(const StudyConfig& config, const CandidateSpec& candidate,
                       const MetricsRecord& metrics) {
    if (config.executor == ExecutorKind::Shell &&
        config.shell.cost_source == CostSource::Observed)
        return metrics.cost_gpu_hours;
    return candidate.estimated_cost;
}

std::set<std::string> ground_truth_top(const GroundTruth& gt, int k) {
    if (!gt.top_components.empty()) {
        const std::size_t take =
            std::min(gt.top_components.size(), static_cast<std::size_t>(k));
        return {gt.top_components.begin(),
                gt.top_components.begin() + static_cast<std::ptrdiff_t>(take)};
    }
    std::vector<std::pair<std::string, double>> ranked(gt.importances.begin(),
                                                       gt.importances.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::set<std::string> top;
    for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(k); ++i)
        top.insert(ranked[i].first);
    return top;
}

StudyReport assemble_report(const StudyConfig& config, const std::string& run_id,
                            double baseline, const std::vector<RunRecord>& records,
                            int rounds_completed, double total_cost) {
    StudyReport report;
    report.run_id = run_id;
    report.seed = config.seed;
    report.baseline_score = baseline;
    report.primary_metric = config.space.primary_metric;
    report.higher_is_better = config.space.higher_is_better;
    report.budget = config.budget;
    report.rounds_completed = rounds_completed;
    report.execution_attempts = static_cast<int>(records.size());
    report.lambda = config.lambda;
    report.tau_crit = config.tau_crit;
    report.k = config.k;
    report.importance =
        component_effects(records, baseline, config.tau_crit, config.space.primary_metric);
    for (const auto& entry : report.importance) {
        if (report.top_k_pred.size() >= static_cast<std::size_t>(config.k)) break;
        report.top_k_pred.push_back(entry.component_id);
    }
    if (config.ground_truth.has_value()) {
        const auto gt_set = ground_truth_top(*config.ground_truth, config.k);
        report.acc_at_k = acc_at_k(report.top_k_pred, gt_set, config.k);
        if (!config.ground_truth->importances.empty()) {
            std::set<std::string> pred(report.top_k_pred.begin(), report.top_k_pred.end());
            report.simple_regret =
                simple_regret(pred, config.ground_truth->importances, config.k);
        }
    }
    report.stats = run_statistics(records, /*baseline_ok=*/true);
    report.arms = arm_summaries(records);
    report.total_cost_gpu_hours = total_cost;
    report.criticality_note =
        "criticality threshold: |mean effect| >= tau_crit * |baseline| on metric '" +
        config.space.primary_metric +
        "'; for correlation-like metrics near 1 this is a strict bar";
    return report;
}

}  // namespace

std::map<std::string, double> effective_arm_weights(const StudyConfig& config) {
    std::map<std::string, double> weights;
    for (const auto& arm : config.space.arms) weights[arm.id] = arm.prior_weight;
    if (config.knowledge.entries.empty()) return weights;
    const auto derived = derive_arm_weights(config.knowledge, config.space);

    // Knowledge hints take precedence where an entry actually links to the
    // arm; elsewhere the declared prior stands.
    std::set<std::string> hinted;
    for (const auto& entry : config.knowledge.entries) {
        if (!entry.weight_hint.has_value()) continue;
        for (const auto& comp_id : entry.linked_components) {
            const Component* comp = config.space.find_component(comp_id);
            if (comp != nullptr) hinted.insert(comp->arm_id);
        }
    }
    for (const auto& arm_id : hinted) {
        auto it = derived.find(arm_id);
        if (it != derived.end()) weights[arm_id] = it->second;
    }
    return weights;
}

std::string study_run_id(const StudyConfig& config) {
    StudyConfig merged = config;
    const auto weights = effective_arm_weights(config);
    for (auto& arm : merged.space.arms) arm.prior_weight = weights.at(arm.id);
    return "run-" + content_hash(stable_config_json(merged).dump());
}

void GenerationMemory::note(const CandidateSpec& candidate) {
    executed_ids.insert(candidate.candidate_id);
    for (std::size_t i = 0; i < candidate.targets.size(); ++i)
        seen_component_kinds.insert(candidate.targets[i] + "|" +
                                    to_string(candidate.mutations[i].op));
}

std::vector<CandidateSpec> generate_candidates(const std::vector<CandidateSpec>& pool,
                                               const std::string& arm_id, int k,
                                               const GenerationMemory& memory) {
    if (k < 1) throw Error("generate_candidates: k must be >= 1");

    std::vector<const CandidateSpec*> avail;
    for (const auto& c : pool)
        if (c.arm_id == arm_id && !memory.executed_ids.count(c.candidate_id))
            avail.push_back(&c);

    std::set<std::string> seen_pairs = memory.seen_component_kinds;
    std::map<std::string, int> kind_counts;
    std::vector<CandidateSpec> selected;

    auto pair_keys = [](const CandidateSpec& c) {
        std::vector<std::string> keys;
        for (std::size_t i = 0; i < c.targets.size(); ++i)
            keys.push_back(c.targets[i] + "|" + to_string(c.mutations[i].op));
        return keys;
    };

    while (selected.size() < static_cast<std::size_t>(k) && !avail.empty()) {
        std::size_t best = 0;
        int best_novel = -1;
        int best_kind_count = 0;
        for (std::size_t i = 0; i < avail.size(); ++i) {
            const CandidateSpec& c = *avail[i];
            int novel = 0;
            for (const auto& key : pair_keys(c))
                if (!seen_pairs.count(key)) novel = 1;
            const int kc = kind_counts[to_string(c.mutations.front().op)];
            bool better = false;
            if (novel != best_novel) {
                better = novel > best_novel;
            } else if (kc != best_kind_count) {
                better = kc < best_kind_count;
            } else {
                const CandidateSpec& cur = *avail[best];
                if (c.estimated_cost != cur.estimated_cost)
                    better = c.estimated_cost < cur.estimated_cost;
                else
                    better = c.candidate_id < cur.candidate_id;
            }
            if (best_novel < 0 || better) {
                best = i;
                best_novel = novel;
                best_kind_count = kc;
            }
        }
        const CandidateSpec& chosen = *avail[best];
        for (const auto& key : pair_keys(chosen)) seen_pairs.insert(key);
        kind_counts[to_string(chosen.mutations.front().op)] += 1;
        selected.push_back(chosen);
        avail.erase(avail.begin() + static_cast<std::ptrdiff_t>(best));
    }
    return selected;
}

std::vector<CandidateSpec> generate_candidates(const ComponentSpace& space,
                                               const std::string& arm_id, int k,
                                               const GenerationMemory& memory,
                                               std::size_t max_targets) {
    return generate_candidates(enumerate_candidates(space, max_targets), arm_id, k, memory);
}

Patch compile_patch(const PatchBindings& bindings, const Mutation& mutation) {
    auto it = bindings.find(to_string(mutation.op));
    if (it == bindings.end())
        throw PatchError("no patch binding for mutation kind '" + to_string(mutation.op) + "'");

    char factor_buf[40];
    std::snprintf(factor_buf, sizeof(factor_buf), "%g", mutation.factor);
    auto expand = [&](std::string text) {
        auto replace_all = [&](const std::string& token, const std::string& value) {
            std::size_t pos = 0;
            while ((pos = text.find(token, pos)) != std::string::npos) {
                text.replace(pos, token.size(), value);
                pos += value.size();
            }
        };
        replace_all("{factor}", factor_buf);
        replace_all("{alternative}", mutation.alternative);
        replace_all("{value}", mutation.value);
        replace_all("{key}", mutation.param_key);
        return text;
    };

    Patch patch;
    for (PatchOp op : it->second) {
        op.key = expand(op.key);
        op.value = expand(op.value);
        op.anchor = expand(op.anchor);
        op.replacement = expand(op.replacement);
        if (op.kind == PatchOp::Kind::SetKey && op.scale.has_value()) op.scale = mutation.factor;
        patch.ops.push_back(std::move(op));
    }
    return patch;
}

namespace {

struct ExecOutcome {
    RunRecord record;
    NodeTrace trace;
};

// Runs one candidate end to end: workspace mutation (shell), execution,
// harvest, teardown. Thread-safe with respect to other candidates.
ExecOutcome run_candidate(const StudyConfig& config, const CandidateSpec& candidate, int round,
                          double baseline, WorkspaceManager* manager,
                          const BaseSnapshot* snapshot, const fs::path& run_dir) {
    ExecOutcome outcome;
    outcome.record.candidate = candidate;
    outcome.record.round = round;
    outcome.trace.ts_start = now_ms();
    outcome.record.started_ms = outcome.trace.ts_start;

    if (config.executor == ExecutorKind::Simulated) {
        outcome.record.workspace_id = "simulated";
        outcome.record.metrics = execute_simulated(candidate, config.simulated_env, config.seed,
                                                   baseline, config.space.primary_metric);
    } else {
        Workspace ws = manager->create_workspace(*snapshot, candidate.candidate_id);
        outcome.record.workspace_id = ws.workspace_id;
        bool mutated = false;
        try {
            Patch patch;
            for (std::size_t i = 0; i < candidate.targets.size(); ++i) {
                auto binding = config.shell.patches.find(candidate.targets[i]);
                if (binding == config.shell.patches.end())
                    throw PatchError("no patch bindings for component '" + candidate.targets[i] +
                                     "'");
                Patch part = compile_patch(binding->second, candidate.mutations[i]);
                for (auto& op : part.ops) patch.ops.push_back(std::move(op));
            }
            manager->apply_mutation(ws, patch);
            mutated = true;
        } catch (const PatchError&) {
            outcome.record.metrics.status = RunStatus::Failed;
            outcome.record.metrics.failure_category = FailureCategory::MappingFailure;
            outcome.record.metrics.cost_gpu_hours = candidate.estimated_cost;
        }
        if (mutated) {
            ShellExecutorOptions options;
            options.command = config.shell.command;
            options.timeout_seconds = config.shell.timeout_seconds;
            options.primary_metric = config.space.primary_metric;
            options.seed = config.seed;
            outcome.record.metrics = execute_shell(candidate, ws, options);
            if (!run_dir.empty())
                manager->harvest(ws, run_dir / "candidates" / candidate.candidate_id,
                                 config.shell.artifact_globs);
        }
        manager->destroy(ws);
    }

    outcome.trace.ts_end = now_ms();
    outcome.record.ended_ms = outcome.trace.ts_end;
    outcome.trace.status =
        outcome.record.metrics.status == RunStatus::Success ? "success" : "failed";
    return outcome;
}

}  // namespace

StudyResult run_study(const StudyConfig& config) {
    const auto space_check = validate_space(config.space);
    if (!space_check.ok())
        throw ConfigError("invalid component space: " + space_check.violations.front().message);
    if (config.budget < 1) throw ConfigError("budget must be >= 1");
    if (config.max_parallel < 1) throw ConfigError("max_parallel must be >= 1");
    if (config.executor == ExecutorKind::Simulated && !config.baseline_declared)
        throw ConfigError("simulated studies need a declared baseline score");

    StudyConfig cfg = config;
    const auto weights = effective_arm_weights(config);
    for (auto& arm : cfg.space.arms) arm.prior_weight = weights.at(arm.id);

    const std::string run_id = "run-" + content_hash(stable_config_json(cfg).dump());

    fs::path run_dir;
    if (cfg.write_archive) {
        run_dir = cfg.out_root / "runs" / run_id;
        fs::create_directories(run_dir);
    }
    EventLog log(run_dir / "events.log", cfg.write_archive);

    const auto pool = enumerate_candidates(cfg.space, static_cast<std::size_t>(cfg.max_targets),
                                           cfg.enumeration_cap);
    std::map<std::string, std::vector<CandidateSpec>> pool_by_arm;
    for (const auto& c : pool) pool_by_arm[c.arm_id].push_back(c);

    BanditState state = make_bandit_state(weights, cfg.max_rounds, cfg.beta_base, cfg.budgets,
                                          cfg.lambda);

    json start{{"event", "study_start"}, {"run_id", run_id}, {"config", stable_config_json(cfg)}};
    log.emit(start);

    std::unique_ptr<WorkspaceManager> manager;
    BaseSnapshot snapshot;
    if (cfg.executor == ExecutorKind::Shell) {
        manager = std::make_unique<WorkspaceManager>(cfg.out_root);
        snapshot = manager->snapshot(cfg.shell.base_dir);
        log.emit(json{{"event", "snapshot"},
                      {"snapshot_id", snapshot.snapshot_id},
                      {"files", snapshot.root_manifest.size()}});
    }

    // Baseline: declared in config, or measured by one execution of the
    // unmutated snapshot.
    double baseline = cfg.space.baseline_score;
    if (cfg.baseline_declared) {
        log.emit(json{{"event", "baseline"}, {"score", baseline}, {"source", "declared"}});
    } else {
        Workspace ws = manager->create_workspace(snapshot, "baseline");
        manager->apply_mutation(ws, Patch{});
        CandidateSpec pseudo;
        pseudo.candidate_id = "baseline";
        pseudo.estimated_cost = 0.0;
        ShellExecutorOptions options;
        options.command = cfg.shell.command;
        options.timeout_seconds = cfg.shell.timeout_seconds;
        options.primary_metric = cfg.space.primary_metric;
        options.seed = cfg.seed;
        MetricsRecord metrics = execute_shell(pseudo, ws, options);
        if (!run_dir.empty())
            manager->harvest(ws, run_dir / "candidates" / "baseline", cfg.shell.artifact_globs);
        manager->destroy(ws);
        if (metrics.status != RunStatus::Success)
            throw Error("baseline execution failed; cannot compute rewards");
        baseline = metrics.metrics.at(cfg.space.primary_metric);
        cfg.space.baseline_score = baseline;
        log.emit(json{{"event", "baseline"}, {"score", baseline}, {"source", "measured"}});
    }

    CounterRng policy_rng(cfg.seed, "policy.random");
    std::vector<std::string> heuristic_order;
    {
        std::vector<std::pair<double, std::string>> ranked;
        for (const auto& [arm_id, w] : weights) ranked.push_back({w, arm_id});
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (const auto& [_, arm_id] : ranked) heuristic_order.push_back(arm_id);
    }

    GenerationMemory memory;
    std::vector<RunRecord> records;
    double total_cost = 0.0;
    int attempts = 0;

    while (state.round < cfg.max_rounds) {
        if (attempts >= cfg.budget) break;

        std::set<std::string> eligible;
        for (const auto& [arm_id, arm_pool] : pool_by_arm) {
            for (const auto& c : arm_pool) {
                if (!memory.executed_ids.count(c.candidate_id)) {
                    eligible.insert(arm_id);
                    break;
                }
            }
        }
        if (eligible.empty()) {
            log.emit(json{{"event", "arms_exhausted"}, {"round", state.round}});
            break;
        }

        const double beta = effective_beta(state);
        std::string arm;
        int k_budget = 0;
        std::vector<CandidateSpec> candidates;
        while (!eligible.empty()) {
            switch (cfg.policy) {
                case Policy::Ucb:
                    arm = select_arm_among(state, eligible);
                    break;
                case Policy::Random: {
                    std::vector<std::string> ids(eligible.begin(), eligible.end());
                    arm = ids[policy_rng.next_u64() % ids.size()];
                    break;
                }
                case Policy::Heuristic:
                    for (const auto& candidate_arm : heuristic_order)
                        if (eligible.count(candidate_arm)) {
                            arm = candidate_arm;
                            break;
                        }
                    break;
            }
            k_budget = generation_budget(state, arm);
            candidates = generate_candidates(pool_by_arm[arm], arm, k_budget, memory);
            if (!candidates.empty()) break;
            log.emit(json{{"event", "arm_exhausted"}, {"round", state.round}, {"arm", arm}});
            eligible.erase(arm);
        }
        if (candidates.empty()) break;

        json round_start{{"event", "round_start"},
                         {"round", state.round},
                         {"beta", beta},
                         {"selected_arm", arm},
                         {"k_budget", k_budget},
                         {"candidates", candidates}};
        if (!cfg.knowledge.entries.empty()) {
            // Retrieved component references accompany the round as context,
            // queried with the selected arm's component vocabulary.
            std::string query;
            for (const auto& comp : cfg.space.components) {
                if (comp.arm_id != arm) continue;
                query += comp.id + " " + comp.name + " " + comp.description + " ";
            }
            json refs = json::array();
            for (const auto& hit : retrieve(query, cfg.knowledge, cfg.k_ret))
                if (hit.score > 0.0) refs.push_back(hit.entry->entry_id);
            round_start["knowledge_refs"] = refs;
        }
        if (attempts + static_cast<int>(candidates.size()) > cfg.budget) {
            std::vector<std::string> dropped;
            for (std::size_t i = static_cast<std::size_t>(cfg.budget - attempts);
                 i < candidates.size(); ++i)
                dropped.push_back(candidates[i].candidate_id);
            candidates.resize(static_cast<std::size_t>(cfg.budget - attempts));
            round_start["candidates"] = candidates;
            round_start["dropped_for_budget"] = dropped;
        }
        log.emit(round_start);

        ExecutionGraph graph = build_round_graph(arm, candidates, state.round);
        const auto batches = schedule(graph, cfg.max_parallel);

        std::map<std::string, NodeTrace> traces;
        std::map<std::string, ExecOutcome> outcomes;  // candidate id -> outcome
        std::vector<std::pair<std::string, double>> ranking;  // candidate, |effect|

        for (const auto& batch : batches) {
            std::vector<const GraphNode*> exec_nodes;
            for (const auto& node_id : batch) {
                const GraphNode* node = graph.find(node_id);
                if (node->kind == NodeKind::Execution) exec_nodes.push_back(node);
            }

            if (!exec_nodes.empty()) {
                std::vector<std::thread> workers;
                std::vector<ExecOutcome> results(exec_nodes.size());
                for (std::size_t i = 0; i < exec_nodes.size(); ++i) {
                    const CandidateSpec* candidate = nullptr;
                    for (const auto& c : candidates)
                        if (c.candidate_id == exec_nodes[i]->payload) candidate = &c;
                    workers.emplace_back([&, i, candidate]() {
                        results[i] = run_candidate(cfg, *candidate, state.round, baseline,
                                                   manager.get(), &snapshot, run_dir);
                    });
                }
                for (auto& w : workers) w.join();
                for (std::size_t i = 0; i < exec_nodes.size(); ++i) {
                    traces[exec_nodes[i]->id] = results[i].trace;
                    outcomes[exec_nodes[i]->payload] = std::move(results[i]);
                }
            }

            for (const auto& node_id : batch) {
                const GraphNode* node = graph.find(node_id);
                if (node->kind == NodeKind::Execution) continue;
                NodeTrace trace;
                trace.ts_start = now_ms();
                if (node->kind == NodeKind::Ranking) {
                    for (const auto& c : candidates) {
                        const auto& rec = outcomes.at(c.candidate_id).record;
                        if (rec.metrics.status != RunStatus::Success) continue;
                        auto it = rec.metrics.metrics.find(cfg.space.primary_metric);
                        if (it == rec.metrics.metrics.end()) continue;
                        ranking.push_back({c.candidate_id, std::abs(baseline - it->second)});
                    }
                    std::sort(ranking.begin(), ranking.end(), [](const auto& a, const auto& b) {
                        if (a.second != b.second) return a.second > b.second;
                        return a.first < b.first;
                    });
                } else if (node->kind == NodeKind::Reflection) {
                    // Rewards are buffered and applied in candidate order,
                    // regardless of how the batch executed.
                    for (const auto& c : candidates) {
                        auto& rec = outcomes.at(c.candidate_id).record;
                        if (rec.metrics.status != RunStatus::Success) continue;
                        RewardInput input;
                        input.baseline_score = baseline;
                        input.observed_score = rec.metrics.metrics.at(cfg.space.primary_metric);
                        input.cost_gpu_hours = cost_for_reward(cfg, c, rec.metrics);
                        rec.reward = compute_reward(input, cfg.lambda);
                        update(state, c.arm_id, *rec.reward);
                    }
                }
                trace.ts_end = now_ms();
                traces[node->id] = trace;
            }
        }

        // Trace and result events, in deterministic (node id / candidate)
        // order so the log does not depend on max_parallel.
        for (const auto& node : graph.nodes) {
            const NodeTrace& trace = traces.at(node.id);
            log.emit(json{{"event", "node"},
                          {"node", node.id},
                          {"kind", to_string(node.kind)},
                          {"round", state.round},
                          {"status", trace.status},
                          {"ts_start", trace.ts_start},
                          {"ts_end", trace.ts_end}});
        }
        for (const auto& c : candidates) {
            const auto& rec = outcomes.at(c.candidate_id).record;
            log.emit(json{{"event", "metrics"},
                          {"round", state.round},
                          {"candidate", c.candidate_id},
                          {"workspace", rec.workspace_id},
                          {"record", rec.metrics}});
        }
        for (const auto& c : candidates) {
            const auto& rec = outcomes.at(c.candidate_id).record;
            if (!rec.reward.has_value()) continue;
            const ArmStats& stats = state.arms.at(c.arm_id);
            log.emit(json{{"event", "reward"},
                          {"candidate", c.candidate_id},
                          {"arm", c.arm_id},
                          {"value", *rec.reward}});
            log.emit(json{{"event", "bandit_update"},
                          {"arm", c.arm_id},
                          {"pulls", stats.pulls},
                          {"mean", stats.mean_reward},
                          {"sum", stats.sum_reward},
                          {"total_trials", state.total_trials}});
        }

        json arm_means = json::object();
        for (const auto& [arm_id, stats] : state.arms)
            if (stats.pulls > 0)
                arm_means[arm_id] = json{{"pulls", stats.pulls}, {"mean", stats.mean_reward}};
        json ranking_json = json::array();
        for (const auto& [cid, _] : ranking) ranking_json.push_back(cid);
        json round_end{{"event", "round_end"},
                       {"round", state.round},
                       {"ranking", ranking_json},
                       {"arm_means", arm_means}};
        if (!ranking.empty()) round_end["best_candidate"] = ranking.front().first;
        log.emit(round_end);

        for (const auto& c : candidates) {
            auto& outcome = outcomes.at(c.candidate_id);
            total_cost += cost_for_reward(cfg, c, outcome.record.metrics);
            memory.note(c);
            records.push_back(std::move(outcome.record));
        }
        attempts += static_cast<int>(candidates.size());
        state.round += 1;
    }

    log.emit(json{{"event", "study_end"},
                  {"rounds_completed", state.round},
                  {"execution_attempts", attempts},
                  {"total_cost_gpu_hours", total_cost}});

    StudyResult result;
    result.report = assemble_report(cfg, run_id, baseline, records, state.round, total_cost);
    result.records = std::move(records);
    result.run_dir = run_dir;
    result.events = log.take_lines();

    if (cfg.write_archive) {
        std::ofstream json_out(run_dir / "report.json", std::ios::binary | std::ios::trunc);
        json_out << emit_report(result.report, ReportFormat::Json);
        std::ofstream text_out(run_dir / "report.txt", std::ios::binary | std::ios::trunc);
        text_out << emit_report(result.report, ReportFormat::Text);
    }
    return result;
}

namespace {

std::vector<json> parse_events(const fs::path& events_log) {
    std::ifstream in(events_log);
    if (!in) throw Error("cannot open events log: " + events_log.string());
    std::vector<json> events;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json event = json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (event.is_discarded())
            throw Error("events.log corrupt at line " + std::to_string(line_no));
        events.push_back(std::move(event));
    }
    if (events.empty()) throw Error("events.log is empty");
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (!events[i].contains("seq"))
            throw Error("events.log integrity: event without seq at line " + std::to_string(i + 1));
        const auto seq = events[i].at("seq").get<std::uint64_t>();
        if (seq != i)
            throw Error("events.log integrity: missing seq " + std::to_string(i) +
                        " (found seq " + std::to_string(seq) + ")");
    }
    return events;
}

}  // namespace

StudyReport replay(const fs::path& events_log, const ReplayOptions& opts) {
    const auto events = parse_events(events_log);
    if (events.front().value("event", "") != "study_start")
        throw Error("events.log integrity: first event is not study_start");
    if (events.back().value("event", "") != "study_end")
        throw Error("events.log integrity: log truncated (no study_end)");

    const json& cfg_json = events.front().at("config");
    StudyConfig cfg;
    cfg.space = cfg_json.at("space").get<ComponentSpace>();
    const json& bandit = cfg_json.at("bandit");
    cfg.max_rounds = bandit.at("max_rounds").get<int>();
    cfg.beta_base = bandit.at("beta_base").get<double>();
    cfg.budgets.k_explore = bandit.at("k_explore").get<int>();
    cfg.budgets.k_base = bandit.at("k_base").get<int>();
    cfg.budgets.k_exploit = bandit.at("k_exploit").get<int>();
    cfg.lambda = bandit.at("lambda").get<double>();
    cfg.budget = cfg_json.at("budget").get<int>();
    cfg.seed = cfg_json.at("seed").get<std::uint64_t>();
    cfg.k = cfg_json.at("k").get<int>();
    cfg.tau_crit = cfg_json.at("tau_crit").get<double>();
    cfg.policy = policy_from_string(cfg_json.at("policy").get<std::string>());
    const std::string executor_type = cfg_json.at("executor").at("type").get<std::string>();
    cfg.executor = executor_type == "shell" ? ExecutorKind::Shell : ExecutorKind::Simulated;
    if (cfg.executor == ExecutorKind::Shell) {
        const std::string cost = cfg_json.at("executor").value("cost_source", "estimated");
        cfg.shell.cost_source = cost == "observed" ? CostSource::Observed : CostSource::Estimated;
    }
    if (cfg_json.contains("ground_truth"))
        cfg.ground_truth = ground_truth_from_json(cfg_json.at("ground_truth"));
    const std::string run_id = events.front().at("run_id").get<std::string>();

    const bool recompute = opts.lambda_override.has_value();
    const double lambda = opts.lambda_override.value_or(cfg.lambda);
    cfg.lambda = lambda;

    std::optional<double> baseline;
    std::map<std::string, CandidateSpec> candidates;
    std::vector<RunRecord> records;
    std::map<std::string, double> recorded_rewards;
    struct RecordedArm {
        int pulls = 0;
        double mean = 0.0;
    };
    std::map<std::string, RecordedArm> recorded_arms;
    int recorded_trials = 0;
    int rounds_completed = 0;
    double total_cost = 0.0;

    for (const auto& event : events) {
        const std::string kind = event.value("event", "");
        if (kind == "baseline") {
            baseline = event.at("score").get<double>();
        } else if (kind == "round_start") {
            for (const auto& cj : event.at("candidates")) {
                CandidateSpec spec = cj.get<CandidateSpec>();
                candidates[spec.candidate_id] = std::move(spec);
            }
        } else if (kind == "metrics") {
            if (!baseline.has_value()) throw Error("events.log integrity: metrics before baseline");
            const std::string cid = event.at("candidate").get<std::string>();
            auto it = candidates.find(cid);
            if (it == candidates.end())
                throw Error("events.log integrity: metrics for unknown candidate " + cid);
            RunRecord rec;
            rec.candidate = it->second;
            rec.round = event.at("round").get<int>();
            rec.workspace_id = event.value("workspace", "");
            rec.metrics = event.at("record").get<MetricsRecord>();
            if (rec.metrics.status == RunStatus::Success) {
                RewardInput input;
                input.baseline_score = *baseline;
                input.observed_score = rec.metrics.metrics.at(cfg.space.primary_metric);
                input.cost_gpu_hours = cost_for_reward(cfg, rec.candidate, rec.metrics);
                rec.reward = compute_reward(input, lambda);
            }
            total_cost += cost_for_reward(cfg, rec.candidate, rec.metrics);
            rounds_completed = std::max(rounds_completed, rec.round + 1);
            records.push_back(std::move(rec));
        } else if (kind == "reward") {
            const std::string cid = event.at("candidate").get<std::string>();
            recorded_rewards[cid] = event.at("value").get<double>();
        } else if (kind == "bandit_update") {
            auto& arm = recorded_arms[event.at("arm").get<std::string>()];
            arm.pulls = event.at("pulls").get<int>();
            arm.mean = event.at("mean").get<double>();
            recorded_trials = event.at("total_trials").get<int>();
        } else if (kind == "study_end") {
            rounds_completed = event.at("rounds_completed").get<int>();
        }
    }
    if (!baseline.has_value()) throw Error("events.log integrity: no baseline event");

    // Cross-check recorded rewards and the bandit trajectory against a
    // recomputation from the raw metrics.
    if (!recompute) {
        std::map<std::string, double> weights;
        for (const auto& arm : cfg.space.arms) weights[arm.id] = arm.prior_weight;
        BanditState check = make_bandit_state(weights, cfg.max_rounds, cfg.beta_base, cfg.budgets,
                                              cfg.lambda);
        for (const auto& rec : records) {
            if (!rec.reward.has_value()) continue;
            auto it = recorded_rewards.find(rec.candidate.candidate_id);
            if (it == recorded_rewards.end())
                throw Error("events.log integrity: missing reward event for " +
                            rec.candidate.candidate_id);
            if (it->second != *rec.reward)
                throw Error("events.log integrity: reward mismatch for " +
                            rec.candidate.candidate_id);
            update(check, rec.candidate.arm_id, *rec.reward);
        }
        if (check.total_trials != recorded_trials)
            throw Error("events.log integrity: trial count mismatch");
        for (const auto& [arm_id, recorded] : recorded_arms) {
            const ArmStats& stats = check.arms.at(arm_id);
            if (stats.pulls != recorded.pulls || stats.mean_reward != recorded.mean)
                throw Error("events.log integrity: bandit trajectory mismatch for arm " + arm_id);
        }
    }

    StudyReport report = assemble_report(cfg, run_id, *baseline, records, rounds_completed,
                                         total_cost);
    report.recomputed = recompute;
    return report;
}

std::string determinism_digest_lines(const std::vector<std::string>& lines) {
    // Volatile fields are wall-clock measurements: timestamps, durations,
    // and the observed cost (which falls back to wall time when the metrics
    // file does not report one).
    std::function<void(json&)> strip = [&](json& node) {
        if (node.is_object()) {
            node.erase("ts");
            node.erase("ts_start");
            node.erase("ts_end");
            node.erase("wall_seconds");
            node.erase("cost_gpu_hours");
            for (auto& [_, child] : node.items()) strip(child);
        } else if (node.is_array()) {
            for (auto& child : node) strip(child);
        }
    };
    std::string all;
    for (const auto& line : lines) {
        json event = json::parse(line);
        strip(event);
        all += event.dump();
        all += '\n';
    }
    return content_hash(all);
}

std::string determinism_digest(const fs::path& events_log) {
    std::ifstream in(events_log);
    if (!in) throw Error("cannot open events log: " + events_log.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return determinism_digest_lines(lines);
}

SweepRow run_policy_sweep(StudyConfig config, Policy policy, int trials) {
    if (trials < 1) throw ConfigError("sweep: trials must be >= 1");
    config.policy = policy;
    config.write_archive = false;

    SweepRow row;
    row.policy = policy;
    row.trials = trials;
    int acc_n = 0, regret_n = 0, exec_n = 0;
    const std::uint64_t base_seed = config.seed;
    for (int t = 0; t < trials; ++t) {
        config.seed = base_seed + static_cast<std::uint64_t>(t);
        StudyResult result = run_study(config);
        if (result.report.acc_at_k.has_value()) {
            row.mean_acc += *result.report.acc_at_k;
            ++acc_n;
        }
        if (result.report.simple_regret.has_value()) {
            row.mean_regret += *result.report.simple_regret;
            ++regret_n;
        }
        if (result.report.stats.exec_rate.has_value()) {
            row.mean_exec += *result.report.stats.exec_rate;
            ++exec_n;
        }
    }
    if (acc_n > 0) row.mean_acc /= acc_n;
    if (regret_n > 0) row.mean_regret /= regret_n;
    if (exec_n > 0) row.mean_exec /= exec_n;
    return row;
}

}  // namespace ablate
