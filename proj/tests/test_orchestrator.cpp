#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "ablate/config.hpp"
#include "ablate/orchestrator.hpp"
#include "bench_env.hpp"
#include "support.hpp"

using namespace ablate;
using namespace ablate::test;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

MutationDecl wide_grid(int n) {
    std::vector<std::string> values;
    for (int i = 0; i < n; ++i) values.push_back(std::to_string(i));
    return MutationDecl{MutationOp::ParamGrid, {}, {}, "setting", values};
}

// Three arms with deterministic rewards and distinct prior weights; enough
// candidates per arm that no pool runs dry inside five rounds.
StudyConfig scripted_three_arm_config() {
    StudyConfig config;
    config.space.baseline_score = 1.0;
    config.space.primary_metric = "score";
    struct Row {
        const char* comp;
        const char* arm;
        double weight;
        double mean;
    };
    const Row rows[] = {{"comp_a", "a", 0.9, 0.30},
                        {"comp_b", "b", 0.5, 0.55},
                        {"comp_c", "c", 0.7, 0.50}};
    for (const Row& row : rows) {
        Component c;
        c.id = row.comp;
        c.name = row.comp;
        c.arm_id = row.arm;
        c.estimated_cost = 0.0;
        c.allowed_mutations = {wide_grid(8)};
        config.space.components.push_back(c);
        config.space.arms.push_back({row.arm, row.weight});
        SimulatedArmModel model;
        model.arm_id = row.arm;
        model.reward_mean = row.mean;
        model.reward_std = 0.0;
        model.failure_prob = 0.0;
        config.simulated_env[row.arm] = model;
    }
    config.max_rounds = 5;
    config.beta_base = 2.0;
    config.budgets = {5, 3, 2};
    config.lambda = 0.01;
    config.budget = 25;
    config.seed = 1;
    config.k = 3;
    config.executor = ExecutorKind::Simulated;
    config.write_archive = false;
    return config;
}

struct RoundTrace {
    double beta;
    std::string arm;
    int k_budget;
    int total_trials = 0;
    std::map<std::string, std::pair<int, double>> arm_stats;  // pulls, mean
};

std::vector<RoundTrace> extract_trace(const std::vector<std::string>& events) {
    std::vector<RoundTrace> rounds;
    for (const auto& line : events) {
        const json event = json::parse(line);
        const std::string kind = event.value("event", "");
        if (kind == "round_start") {
            RoundTrace rt;
            rt.beta = event.at("beta").get<double>();
            rt.arm = event.at("selected_arm").get<std::string>();
            rt.k_budget = event.at("k_budget").get<int>();
            rounds.push_back(rt);
        } else if (kind == "bandit_update") {
            rounds.back().total_trials = event.at("total_trials").get<int>();
            rounds.back().arm_stats[event.at("arm").get<std::string>()] = {
                event.at("pulls").get<int>(), event.at("mean").get<double>()};
        }
    }
    return rounds;
}

}  // namespace

TEST_CASE("the scripted three-arm study reproduces the hand-computed trace") {
    const StudyResult result = run_study(scripted_three_arm_config());
    const auto trace = extract_trace(result.events);

    // Hand-simulated: weights order the unexplored phase a (0.9), c (0.7),
    // b (0.5); with T=15 the UCB picks b (mean 0.55), then with T=18 and
    // beta dropped to 1.0 the bonus sqrt(ln19/5) lifts c over b.
    struct Expected {
        double beta;
        const char* arm;
        int k;
        const char* updated_arm;
        int pulls;
        double mean;
        int total;
    };
    const Expected expected[5] = {
        {3.0, "a", 5, "a", 5, 0.30, 5},
        {3.0, "c", 5, "c", 5, 0.50, 10},
        {2.0, "b", 5, "b", 5, 0.55, 15},
        {2.0, "b", 3, "b", 8, 0.55, 18},
        {1.0, "c", 3, "c", 8, 0.50, 21},
    };

    REQUIRE(trace.size() == 5);
    for (int r = 0; r < 5; ++r) {
        INFO("round ", r);
        CHECK(trace[r].beta == doctest::Approx(expected[r].beta).epsilon(1e-12));
        CHECK(trace[r].arm == expected[r].arm);
        CHECK(trace[r].k_budget == expected[r].k);
        CHECK(trace[r].total_trials == expected[r].total);
        const auto& [pulls, mean] = trace[r].arm_stats.at(expected[r].updated_arm);
        CHECK(pulls == expected[r].pulls);
        CHECK(mean == doctest::Approx(expected[r].mean).epsilon(1e-12));
    }
    CHECK(result.report.execution_attempts == 21);
}

TEST_CASE("generate_candidates truncates to the arm's unrun pool") {
    ComponentSpace space = toggle_space(3);
    for (auto& c : space.components) c.arm_id = "arm1";
    space.arms = {{"arm1", 1.0}};
    GenerationMemory memory;
    const auto picked = generate_candidates(space, "arm1", 5, memory, 1);
    CHECK(picked.size() == 3);  // three unrun toggles, K=5
}

TEST_CASE("generate_candidates prefers mutation-kind diversity") {
    ComponentSpace space = toggle_space(1);
    space.components[0].allowed_mutations.push_back(scale_decl({0.5, 2.0}));
    GenerationMemory memory;
    const auto picked = generate_candidates(space, "arm1", 2, memory, 1);
    REQUIRE(picked.size() == 2);
    CHECK(picked[0].mutations[0].op != picked[1].mutations[0].op);
}

TEST_CASE("generate_candidates never re-emits executed candidates") {
    ComponentSpace space = toggle_space(2);
    for (auto& c : space.components) c.arm_id = "arm1";
    space.arms = {{"arm1", 1.0}};
    GenerationMemory memory;
    const auto first = generate_candidates(space, "arm1", 2, memory, 1);
    REQUIRE(first.size() == 2);
    for (const auto& c : first) memory.note(c);
    CHECK(generate_candidates(space, "arm1", 2, memory, 1).empty());
}

TEST_CASE("a full-budget study uses exactly B attempts over R rounds") {
    StudyConfig config = bench18_config();
    config.seed = 11;
    const StudyResult result = run_study(config);
    CHECK(result.report.execution_attempts == 25);
    CHECK(result.report.rounds_completed == 5);
    CHECK(result.records.size() == 25);
}

TEST_CASE("a tiny budget truncates the first round and records the drop") {
    StudyConfig config = bench18_config();
    config.budget = 3;
    const StudyResult result = run_study(config);
    CHECK(result.report.execution_attempts == 3);
    CHECK(result.report.rounds_completed == 1);

    bool saw_drop = false;
    for (const auto& line : result.events) {
        const json event = json::parse(line);
        if (event.value("event", "") == "round_start" && event.contains("dropped_for_budget")) {
            saw_drop = true;
            CHECK(event.at("dropped_for_budget").size() == 2);
        }
    }
    CHECK(saw_drop);
}

TEST_CASE("a dominant arm collects the most pulls in at least 95 of 100 seeds") {
    StudyConfig config;
    config.space.baseline_score = 1.0;
    config.space.primary_metric = "score";
    for (int i = 0; i < 3; ++i) {
        Component c;
        c.id = "comp" + std::to_string(i);
        c.arm_id = "arm" + std::to_string(i);
        c.estimated_cost = 0.0;
        c.allowed_mutations = {wide_grid(12)};
        config.space.components.push_back(c);
        config.space.arms.push_back({c.arm_id, 1.0});
        SimulatedArmModel model;
        model.arm_id = c.arm_id;
        model.reward_mean = i == 1 ? 10.0 : 1.0;
        model.reward_std = 0.1;
        config.simulated_env[c.arm_id] = model;
    }
    config.budget = 25;
    config.max_rounds = 5;
    config.write_archive = false;

    int dominant_wins = 0;
    for (int seed = 0; seed < 100; ++seed) {
        config.seed = static_cast<std::uint64_t>(seed);
        const StudyResult result = run_study(config);
        int best_pulls = -1;
        std::string best_arm;
        for (const auto& arm : result.report.arms) {
            if (arm.pulls > best_pulls) {
                best_pulls = arm.pulls;
                best_arm = arm.arm_id;
            }
        }
        if (best_arm == "arm1") ++dominant_wins;
    }
    CHECK(dominant_wins >= 95);
}

TEST_CASE("exhausted arms fall back to arms with remaining candidates") {
    StudyConfig config;
    config.space.baseline_score = 1.0;
    config.space.primary_metric = "score";
    for (int i = 0; i < 2; ++i) {
        Component c;
        c.id = "comp" + std::to_string(i);
        c.arm_id = "arm" + std::to_string(i);
        c.allowed_mutations = {MutationDecl{MutationOp::Toggle, {}, {}, "", {}}};
        config.space.components.push_back(c);
        config.space.arms.push_back({c.arm_id, i == 0 ? 2.0 : 1.0});
        SimulatedArmModel model;
        model.arm_id = c.arm_id;
        model.reward_mean = 0.5;
        config.simulated_env[c.arm_id] = model;
    }
    config.budget = 25;
    config.max_rounds = 5;
    config.write_archive = false;

    const StudyResult result = run_study(config);
    CHECK(result.report.execution_attempts == 2);
    CHECK(result.report.rounds_completed == 2);

    std::vector<std::string> selected;
    for (const auto& line : result.events) {
        const json event = json::parse(line);
        if (event.value("event", "") == "round_start")
            selected.push_back(event.at("selected_arm").get<std::string>());
    }
    CHECK(selected == std::vector<std::string>{"arm0", "arm1"});
}

TEST_CASE("rounds carry retrieved knowledge references for the selected arm") {
    StudyConfig config = scripted_three_arm_config();
    KnowledgeEntry entry;
    entry.entry_id = "e_comp_a";
    entry.text = "comp_a drives everything";
    entry.linked_components = {"comp_a"};
    config.knowledge.entries.push_back(entry);
    KnowledgeEntry other;
    other.entry_id = "e_other";
    other.text = "unrelated background material";
    config.knowledge.entries.push_back(other);
    config.k_ret = 1;

    const StudyResult result = run_study(config);
    bool saw_refs = false;
    for (const auto& line : result.events) {
        const json event = json::parse(line);
        if (event.value("event", "") != "round_start") continue;
        REQUIRE(event.contains("knowledge_refs"));
        if (event.at("selected_arm") == "a") {
            REQUIRE(event.at("knowledge_refs").size() == 1);
            CHECK(event.at("knowledge_refs")[0] == "e_comp_a");
            saw_refs = true;
        }
    }
    CHECK(saw_refs);
}

TEST_CASE("the reported exec rate equals a brute-force count over records") {
    StudyConfig config = bench18_config();
    for (auto& [_, model] : config.simulated_env) model.failure_prob = 0.3;
    config.seed = 97;
    const StudyResult result = run_study(config);

    int successes = 0;
    for (const auto& rec : result.records) {
        if (rec.metrics.status == RunStatus::Success) ++successes;
        CHECK(rec.reward.has_value() == (rec.metrics.status == RunStatus::Success));
    }
    REQUIRE(result.report.stats.exec_rate.has_value());
    CHECK(*result.report.stats.exec_rate ==
          static_cast<double>(successes) / static_cast<double>(result.records.size()));
}

TEST_CASE("a fully-failed round still advances the round counter, not the trial count") {
    StudyConfig config = scripted_three_arm_config();
    for (auto& [_, model] : config.simulated_env) model.failure_prob = 1.0;
    config.max_rounds = 2;
    const StudyResult result = run_study(config);

    CHECK(result.report.rounds_completed == 2);
    // Failures never increment pulls, so the max-weight arm stays
    // unexplored and is reselected: 5 candidates, then its remaining 3.
    CHECK(result.report.execution_attempts == 8);
    for (const auto& rec : result.records) CHECK_FALSE(rec.reward.has_value());
    REQUIRE(result.report.stats.exec_rate.has_value());
    CHECK(*result.report.stats.exec_rate == 0.0);

    // No successful observation: nothing to rank, no bandit updates.
    for (const auto& line : result.events) {
        const json event = json::parse(line);
        CHECK(event.value("event", "") != "bandit_update");
    }
    CHECK(result.report.importance.empty());
    CHECK(result.report.top_k_pred.empty());
}

TEST_CASE("knowledge weight hints override declared priors for linked arms") {
    StudyConfig config = scripted_three_arm_config();
    KnowledgeEntry entry;
    entry.entry_id = "e1";
    entry.linked_components = {"comp_b"};
    entry.weight_hint = 9.0;
    config.knowledge.entries.push_back(entry);

    const auto weights = effective_arm_weights(config);
    CHECK(weights.at("b") == 9.0);
    CHECK(weights.at("a") == 0.9);

    const StudyResult result = run_study(config);
    const auto trace = extract_trace(result.events);
    CHECK(trace[0].arm == "b");
}

TEST_CASE("events and reports are identical across max_parallel settings") {
    std::vector<std::string> digests;
    std::vector<std::string> reports;
    for (int parallel : {1, 4, 16}) {
        TempDir out("determinism");
        StudyConfig config = bench18_config();
        config.seed = 5;
        config.write_archive = true;
        config.out_root = out.path();
        config.max_parallel = parallel;
        const StudyResult result = run_study(config);
        digests.push_back(determinism_digest(result.run_dir / "events.log"));
        reports.push_back(read_file(result.run_dir / "report.json"));
    }
    CHECK(digests[0] == digests[1]);
    CHECK(digests[0] == digests[2]);
    CHECK(reports[0] == reports[1]);
    CHECK(reports[0] == reports[2]);
}

TEST_CASE("replay reproduces the report byte-for-byte") {
    TempDir out("replay");
    StudyConfig config = bench18_config();
    config.seed = 21;
    config.write_archive = true;
    config.out_root = out.path();
    const StudyResult result = run_study(config);

    const StudyReport replayed = replay(result.run_dir / "events.log");
    CHECK(emit_report(replayed, ReportFormat::Json) == read_file(result.run_dir / "report.json"));
}

TEST_CASE("a log with a removed record fails integrity naming the gap") {
    TempDir out("tamper");
    StudyConfig config = bench18_config();
    config.seed = 33;
    config.write_archive = true;
    config.out_root = out.path();
    const StudyResult result = run_study(config);

    std::ifstream in(result.run_dir / "events.log");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    in.close();
    REQUIRE(lines.size() > 10);
    lines.erase(lines.begin() + 6);
    const fs::path tampered = out.path() / "tampered.log";
    std::ofstream outf(tampered);
    for (const auto& l : lines) outf << l << "\n";
    outf.close();

    CHECK_THROWS_WITH_AS(replay(tampered), doctest::Contains("missing seq 6"), Error);
}

TEST_CASE("replay with a changed lambda recomputes rewards and flags the report") {
    TempDir out("lambda");
    StudyConfig config = scripted_three_arm_config();
    for (auto& comp : config.space.components) comp.estimated_cost = 1.0;
    config.write_archive = true;
    config.out_root = out.path();
    const StudyResult result = run_study(config);

    ReplayOptions opts;
    opts.lambda_override = 0.5;
    const StudyReport recomputed = replay(result.run_dir / "events.log", opts);
    CHECK(recomputed.recomputed);
    CHECK(recomputed.lambda == 0.5);

    const StudyReport original = replay(result.run_dir / "events.log");
    REQUIRE_FALSE(original.recomputed);
    REQUIRE(!original.arms.empty());
    // Cost 1.0 per candidate: lowering rewards by (0.5 - 0.01) shifts every
    // arm mean.
    CHECK(recomputed.arms[0].mean_reward ==
          doctest::Approx(original.arms[0].mean_reward - 0.49).epsilon(1e-9));
    const std::string rendered = emit_report(recomputed, ReportFormat::Json);
    CHECK(rendered.find("recomputed") != std::string::npos);
}

TEST_CASE("shell studies produce identical logs and reports across max_parallel") {
    TempDir tmp("shell-det");
    const fs::path base = tmp.path() / "repo";
    write_file(base / "config.ini", "strength=4\nboost=8\n");
    write_file(base / "run.sh",
               "s=$(sed -n 's/^strength=//p' config.ini)\n"
               "b=$(sed -n 's/^boost=//p' config.ini)\n"
               "printf '{\"score\": %s}' \"$((s + b))\" > ablate_metrics.json\n");

    auto make_config = [&](int parallel, const fs::path& out) {
        StudyConfig config;
        config.space.primary_metric = "score";
        Component strength;
        strength.id = "strength_knob";
        strength.arm_id = "arm_strength";
        strength.allowed_mutations = {MutationDecl{MutationOp::Toggle, {}, {}, "", {}},
                                      scale_decl({0.5, 2.0})};
        Component boost;
        boost.id = "boost_knob";
        boost.arm_id = "arm_boost";
        boost.allowed_mutations = {MutationDecl{MutationOp::Toggle, {}, {}, "", {}},
                                   scale_decl({0.5, 2.0})};
        config.space.components = {strength, boost};
        config.space.arms = {{"arm_strength", 2.0}, {"arm_boost", 1.0}};
        config.baseline_declared = false;
        config.executor = ExecutorKind::Shell;
        config.shell.base_dir = base;
        config.shell.command = "sh run.sh";
        config.shell.timeout_seconds = 30.0;
        config.shell.artifact_globs = {"ablate_metrics.json"};
        for (const char* comp : {"strength_knob", "boost_knob"}) {
            const std::string key = comp == std::string("strength_knob") ? "strength" : "boost";
            PatchOp toggle;
            toggle.kind = PatchOp::Kind::SetKey;
            toggle.file = "config.ini";
            toggle.key = key;
            toggle.value = "0";
            config.shell.patches[comp]["toggle"] = {toggle};
            PatchOp scaled = toggle;
            scaled.value.clear();
            scaled.scale = 1.0;
            config.shell.patches[comp]["scale"] = {scaled};
        }
        config.budget = 6;
        config.max_rounds = 2;
        config.budgets = {3, 3, 3};
        config.max_parallel = parallel;
        config.out_root = out;
        return config;
    };

    TempDir out1("shell-det-out1");
    TempDir out3("shell-det-out3");
    const StudyResult serial = run_study(make_config(1, out1.path()));
    const StudyResult parallel = run_study(make_config(3, out3.path()));

    CHECK(determinism_digest(serial.run_dir / "events.log") ==
          determinism_digest(parallel.run_dir / "events.log"));
    CHECK(read_file(serial.run_dir / "report.json") ==
          read_file(parallel.run_dir / "report.json"));
    CHECK(serial.report.baseline_score == 12.0);
}

TEST_CASE("budget safety holds across random configurations") {
    std::mt19937_64 rng(71);
    for (int trial = 0; trial < 60; ++trial) {
        StudyConfig config;
        config.space.baseline_score = 1.0;
        config.space.primary_metric = "score";
        const int arms = 1 + static_cast<int>(rng() % 5);
        for (int i = 0; i < arms; ++i) {
            Component c;
            c.id = "comp" + std::to_string(i);
            c.arm_id = "arm" + std::to_string(i);
            c.estimated_cost = 0.0;
            c.allowed_mutations = {wide_grid(1 + static_cast<int>(rng() % 6))};
            config.space.components.push_back(c);
            config.space.arms.push_back({c.arm_id, 1.0});
            SimulatedArmModel model;
            model.arm_id = c.arm_id;
            model.reward_mean = static_cast<double>(rng() % 100) / 10.0;
            model.reward_std = static_cast<double>(rng() % 20) / 10.0;
            model.failure_prob = static_cast<double>(rng() % 4) / 10.0;
            config.simulated_env[c.arm_id] = model;
        }
        config.budget = 1 + static_cast<int>(rng() % 30);
        config.max_rounds = 1 + static_cast<int>(rng() % 6);
        config.seed = rng();
        config.write_archive = false;
        const StudyResult result = run_study(config);
        CHECK(result.report.execution_attempts <= config.budget);
        CHECK(result.records.size() == static_cast<std::size_t>(result.report.execution_attempts));
    }
}
