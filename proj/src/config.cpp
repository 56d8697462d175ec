#include "ablate/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "ablate/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ablate {

namespace {

json parse_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file: " + file.string());
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded()) throw ConfigError("config file is not valid JSON: " + file.string());
    return doc;
}

}  // namespace

StudyConfig study_config_from_json(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    StudyConfig config;
    try {
        if (!doc.contains("space")) throw ConfigError("config is missing the 'space' section");
        config.space = doc.at("space").get<ComponentSpace>();
        config.baseline_declared =
            doc.at("space").contains("baseline_score") &&
            !doc.at("space").at("baseline_score").is_null();

        if (doc.contains("knowledge")) {
            const json& k = doc.at("knowledge");
            if (k.contains("file")) {
                fs::path kb_file = k.at("file").get<std::string>();
                if (kb_file.is_relative()) kb_file = base_dir / kb_file;
                config.knowledge = parse_file(kb_file).get<KnowledgeBase>();
            } else if (k.contains("entries")) {
                config.knowledge = k.get<KnowledgeBase>();
            }
            config.k_ret = k.value("k_ret", std::size_t{5});
        }

        if (doc.contains("bandit")) {
            const json& b = doc.at("bandit");
            config.beta_base = b.value("beta_base", 2.0);
            config.max_rounds = b.value("max_rounds", 5);
            config.budgets.k_explore = b.value("k_explore", 5);
            config.budgets.k_base = b.value("k_base", 3);
            config.budgets.k_exploit = b.value("k_exploit", 2);
            config.lambda = b.value("lambda", 0.01);
        }

        if (doc.contains("executor")) {
            const json& e = doc.at("executor");
            const std::string type = e.value("type", "simulated");
            if (type == "simulated") {
                config.executor = ExecutorKind::Simulated;
                if (e.contains("arms")) {
                    for (const auto& [arm_id, model_json] : e.at("arms").items()) {
                        SimulatedArmModel model = model_json.get<SimulatedArmModel>();
                        model.arm_id = arm_id;
                        config.simulated_env[arm_id] = model;
                    }
                }
            } else if (type == "shell") {
                config.executor = ExecutorKind::Shell;
                fs::path dir = e.value("base_dir", std::string());
                if (dir.is_relative()) dir = base_dir / dir;
                config.shell.base_dir = dir;
                config.shell.command = e.value("command", std::string());
                config.shell.timeout_seconds = e.value("timeout_seconds", 3600.0);
                config.shell.artifact_globs =
                    e.value("artifacts", std::vector<std::string>{kMetricsFileName});
                const std::string cost = e.value("cost_source", "estimated");
                config.shell.cost_source =
                    cost == "observed" ? CostSource::Observed : CostSource::Estimated;
                if (e.contains("patches")) {
                    for (const auto& [comp_id, bindings_json] : e.at("patches").items()) {
                        PatchBindings bindings;
                        for (const auto& [kind, ops_json] : bindings_json.items())
                            bindings[kind] = ops_json.get<std::vector<PatchOp>>();
                        config.shell.patches[comp_id] = std::move(bindings);
                    }
                }
            } else {
                throw ConfigError("unknown executor type '" + type + "'");
            }
        }

        if (doc.contains("ground_truth")) {
            const json& g = doc.at("ground_truth");
            GroundTruth gt;
            if (g.contains("importances"))
                gt.importances = g.at("importances").get<std::map<std::string, double>>();
            if (g.contains("top_components"))
                gt.top_components = g.at("top_components").get<std::vector<std::string>>();
            config.ground_truth = std::move(gt);
        }

        if (doc.contains("run")) {
            const json& r = doc.at("run");
            config.seed = r.value("seed", std::uint64_t{0});
            config.budget = r.value("budget", 25);
            config.max_parallel = r.value("max_parallel", 1);
            config.max_targets = r.value("max_targets", 1);
            config.k = r.value("k", 5);
            config.tau_crit = r.value("tau_crit", 0.05);
            config.enumeration_cap = r.value("enumeration_cap", kDefaultEnumerationCap);
            if (r.contains("policy"))
                config.policy = policy_from_string(r.at("policy").get<std::string>());
            if (r.contains("out_dir")) {
                fs::path out = r.at("out_dir").get<std::string>();
                if (out.is_relative()) out = base_dir / out;
                config.out_root = out;
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return config;
}

StudyConfig load_study_config(const fs::path& file) {
    return study_config_from_json(parse_file(file), file.parent_path());
}

ValidationResult validate_study_config(const StudyConfig& config) {
    ValidationResult result = validate_space(config.space);
    auto add = [&](std::string code, std::string message) {
        result.violations.push_back({std::move(code), std::move(message)});
    };

    if (config.budget < 1) add("bad-budget", "run.budget must be >= 1");
    if (config.max_rounds < 1) add("bad-rounds", "bandit.max_rounds must be >= 1");
    if (!(config.beta_base > 0.0)) add("bad-beta", "bandit.beta_base must be positive");
    if (config.budgets.k_explore < 1 || config.budgets.k_base < 1 || config.budgets.k_exploit < 1)
        add("bad-tiers", "bandit k tiers must be positive");
    if (config.lambda < 0.0) add("bad-lambda", "bandit.lambda must be non-negative");
    if (config.tau_crit < 0.0) add("bad-tau", "run.tau_crit must be non-negative");
    if (config.k < 1) add("bad-k", "run.k must be >= 1");
    if (config.max_parallel < 1) add("bad-parallel", "run.max_parallel must be >= 1");
    if (config.max_targets < 1) add("bad-targets", "run.max_targets must be >= 1");
    if (config.k_ret < 1) add("bad-k-ret", "knowledge.k_ret must be >= 1");
    if (config.enumeration_cap < 1) add("bad-cap", "run.enumeration_cap must be >= 1");

    if (config.executor == ExecutorKind::Simulated) {
        if (!config.baseline_declared)
            add("no-baseline", "simulated executor requires space.baseline_score");
        for (const auto& arm : config.space.arms)
            if (config.simulated_env.find(arm.id) == config.simulated_env.end())
                add("missing-arm-model", "no simulated model for arm '" + arm.id + "'");
        for (const auto& [arm_id, model] : config.simulated_env) {
            if (model.reward_std < 0.0)
                add("bad-model", "arm '" + arm_id + "' has negative reward std");
            if (model.failure_prob < 0.0 || model.failure_prob > 1.0)
                add("bad-model", "arm '" + arm_id + "' failure_prob outside [0,1]");
        }
    } else {
        if (config.shell.command.empty()) add("no-command", "shell executor needs a command");
        if (config.shell.timeout_seconds <= 0.0)
            add("bad-timeout", "shell timeout must be positive");
    }

    if (config.ground_truth.has_value()) {
        const GroundTruth& gt = *config.ground_truth;
        std::set<std::string> known;
        for (const auto& c : config.space.components) known.insert(c.id);
        for (const auto& [comp_id, value] : gt.importances) {
            if (!known.count(comp_id))
                add("bad-ground-truth", "ground-truth component '" + comp_id + "' not in space");
            if (!(value >= 0.0) || !std::isfinite(value))
                add("bad-ground-truth", "importance for '" + comp_id + "' must be >= 0");
        }
        for (const auto& comp_id : gt.top_components)
            if (!known.count(comp_id))
                add("bad-ground-truth", "ground-truth component '" + comp_id + "' not in space");
        const std::size_t gt_size =
            gt.top_components.empty() ? gt.importances.size() : gt.top_components.size();
        if (gt_size < static_cast<std::size_t>(config.k))
            add("bad-ground-truth", "ground truth smaller than k");
        if (!gt.importances.empty() && gt.importances.size() < known.size())
            add("bad-ground-truth", "ground-truth importances must cover every component");
    }
    return result;
}

}  // namespace ablate
