#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>

#include "ablate/bandit.hpp"
#include "ablate/executor.hpp"
#include "ablate/workspace.hpp"
#include "support.hpp"

using namespace ablate;
using namespace ablate::test;
namespace fs = std::filesystem;

namespace {

CandidateSpec arm_candidate(const ComponentSpace& space, const std::string& component) {
    Mutation toggle;
    const Component* comp = space.find_component(component);
    return make_candidate(space, comp->arm_id, {component}, {toggle});
}

SimulatedEnv single_arm_env(const std::string& arm, double mean, double stddev,
                            double failure_prob) {
    SimulatedArmModel model;
    model.arm_id = arm;
    model.reward_mean = mean;
    model.reward_std = stddev;
    model.failure_prob = failure_prob;
    return {{arm, model}};
}

struct ShellFixture {
    TempDir tmp;
    WorkspaceManager manager{tmp.path() / "store"};
    BaseSnapshot snap;
    ComponentSpace space = toggle_space(1);

    explicit ShellFixture(const std::string& script) {
        write_file(tmp.path() / "base/run.sh", script);
        write_file(tmp.path() / "base/config.ini", "x=1\n");
        snap = manager.snapshot(tmp.path() / "base");
    }

    Workspace mutated_workspace(const std::string& cid) {
        Workspace ws = manager.create_workspace(snap, cid);
        manager.apply_mutation(ws, Patch{});
        return ws;
    }
};

}  // namespace

TEST_CASE("a zero-variance arm yields exactly the mean, bit-identically across calls") {
    ComponentSpace space = toggle_space(1);
    const auto candidate = arm_candidate(space, "c1");
    const auto env = single_arm_env("arm1", 6.700, 0.0, 0.0);

    const auto a = execute_simulated(candidate, env, 7, 0.9129, "pearson");
    const auto b = execute_simulated(candidate, env, 7, 0.9129, "pearson");
    REQUIRE(a.status == RunStatus::Success);
    CHECK(a.metrics.at("pearson") == b.metrics.at("pearson"));
    // Score placed so the reward computation recovers the drawn value at
    // zero cost.
    CHECK(compute_reward({0.9129, a.metrics.at("pearson"), 0.0}, 0.01) ==
          doctest::Approx(6.700).epsilon(1e-12));
}

TEST_CASE("draws are deterministic per (candidate, seed) and vary across seeds") {
    ComponentSpace space = toggle_space(1);
    const auto candidate = arm_candidate(space, "c1");
    const auto env = single_arm_env("arm1", 6.700, 1.206, 0.0);

    const auto first = execute_simulated(candidate, env, 42, 0.0, "score");
    const auto second = execute_simulated(candidate, env, 42, 0.0, "score");
    CHECK(first.metrics.at("score") == second.metrics.at("score"));

    const auto other_seed = execute_simulated(candidate, env, 43, 0.0, "score");
    CHECK(first.metrics.at("score") != other_seed.metrics.at("score"));
}

TEST_CASE("simulated draws match the arm model's mean and spread") {
    // Sample statistics over many candidates against the perturbation-GNN
    // arm model (mean 6.700, std 1.206).
    ComponentSpace space = toggle_space(1);
    space.components[0].allowed_mutations = {grid_decl("i", [] {
        std::vector<std::string> v;
        for (int i = 0; i < 5000; ++i) v.push_back(std::to_string(i));
        return v;
    }())};
    const auto env = single_arm_env("arm1", 6.700, 1.206, 0.0);
    const auto candidates = enumerate_candidates(space, 1, 10000);

    double sum = 0.0, sq = 0.0;
    for (const auto& c : candidates) {
        const auto rec = execute_simulated(c, env, 1, 0.0, "score");
        const double drawn = std::abs(0.0 - rec.metrics.at("score"));
        sum += drawn;
        sq += drawn * drawn;
    }
    const double n = static_cast<double>(candidates.size());
    const double mean = sum / n;
    const double stddev = std::sqrt(sq / n - mean * mean);
    CHECK(std::abs(mean - 6.700) < 0.07);
    CHECK(std::abs(stddev - 1.206) < 0.07);
}

TEST_CASE("failure_prob=1 always fails with a seeded taxonomy category") {
    ComponentSpace space = toggle_space(1);
    space.components[0].allowed_mutations = {grid_decl("i", [] {
        std::vector<std::string> v;
        for (int i = 0; i < 3000; ++i) v.push_back(std::to_string(i));
        return v;
    }())};
    const auto env = single_arm_env("arm1", 5.0, 1.0, 1.0);

    int mapping = 0, environment = 0, runtime = 0;
    for (const auto& c : enumerate_candidates(space, 1, 10000)) {
        const auto rec = execute_simulated(c, env, 3, 0.0, "score");
        REQUIRE(rec.status == RunStatus::Failed);
        CHECK(rec.metrics.empty());
        REQUIRE(rec.failure_category.has_value());
        switch (*rec.failure_category) {
            case FailureCategory::MappingFailure: ++mapping; break;
            case FailureCategory::EnvironmentFailure: ++environment; break;
            case FailureCategory::RuntimeFailure: ++runtime; break;
        }
    }
    // Roughly the 50/30/20 mix.
    const double total = mapping + environment + runtime;
    CHECK(std::abs(mapping / total - 0.5) < 0.05);
    CHECK(std::abs(environment / total - 0.3) < 0.05);
    CHECK(std::abs(runtime / total - 0.2) < 0.05);
}

TEST_CASE("an unknown arm is an error") {
    ComponentSpace space = toggle_space(2);
    const auto candidate = arm_candidate(space, "c2");
    const auto env = single_arm_env("arm1", 5.0, 1.0, 0.0);
    CHECK_THROWS_AS(execute_simulated(candidate, env, 1, 0.0, "score"), Error);
}

TEST_CASE("shell executor parses the metrics contract on exit 0") {
    ShellFixture fx("printf '{\"pearson\": 0.9129, \"mse\": 0.0303}' > ablate_metrics.json\n");
    Workspace ws = fx.mutated_workspace("cand");
    const auto candidate = arm_candidate(fx.space, "c1");

    ShellExecutorOptions options;
    options.command = "sh run.sh";
    options.timeout_seconds = 10.0;
    options.primary_metric = "pearson";
    const auto rec = execute_shell(candidate, ws, options);

    REQUIRE(rec.status == RunStatus::Success);
    CHECK(rec.metrics.at("pearson") == doctest::Approx(0.9129).epsilon(1e-12));
    CHECK(rec.metrics.at("mse") == doctest::Approx(0.0303).epsilon(1e-12));
    CHECK(ws.state == WorkspaceState::Executed);
    fx.manager.destroy(ws);
}

TEST_CASE("nonzero exit maps to a runtime failure with no reward downstream") {
    ShellFixture fx("exit 1\n");
    Workspace ws = fx.mutated_workspace("cand");
    ShellExecutorOptions options;
    options.command = "sh run.sh";
    options.timeout_seconds = 10.0;
    options.primary_metric = "pearson";
    const auto rec = execute_shell(arm_candidate(fx.space, "c1"), ws, options);
    CHECK(rec.status == RunStatus::Failed);
    CHECK(rec.failure_category == FailureCategory::RuntimeFailure);
    fx.manager.destroy(ws);
}

TEST_CASE("a command exceeding the timeout is killed and recorded as failed") {
    ShellFixture fx("sleep 30\n");
    Workspace ws = fx.mutated_workspace("cand");
    ShellExecutorOptions options;
    options.command = "sh run.sh";
    options.timeout_seconds = 0.2;
    options.primary_metric = "pearson";

    const auto started = std::chrono::steady_clock::now();
    const auto rec = execute_shell(arm_candidate(fx.space, "c1"), ws, options);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    CHECK(rec.status == RunStatus::Failed);
    CHECK(rec.failure_category == FailureCategory::RuntimeFailure);
    CHECK(elapsed < 5.0);
    fx.manager.destroy(ws);
}

TEST_CASE("missing or malformed metrics files map to environment failures") {
    SUBCASE("missing file") {
        ShellFixture fx("true\n");
        Workspace ws = fx.mutated_workspace("cand");
        ShellExecutorOptions options;
        options.command = "sh run.sh";
        options.primary_metric = "pearson";
        const auto rec = execute_shell(arm_candidate(fx.space, "c1"), ws, options);
        CHECK(rec.status == RunStatus::Failed);
        CHECK(rec.failure_category == FailureCategory::EnvironmentFailure);
        fx.manager.destroy(ws);
    }
    SUBCASE("malformed json") {
        ShellFixture fx("printf 'not json' > ablate_metrics.json\n");
        Workspace ws = fx.mutated_workspace("cand");
        ShellExecutorOptions options;
        options.command = "sh run.sh";
        options.primary_metric = "pearson";
        const auto rec = execute_shell(arm_candidate(fx.space, "c1"), ws, options);
        CHECK(rec.failure_category == FailureCategory::EnvironmentFailure);
        fx.manager.destroy(ws);
    }
    SUBCASE("primary metric absent") {
        ShellFixture fx("printf '{\"mse\": 0.03}' > ablate_metrics.json\n");
        Workspace ws = fx.mutated_workspace("cand");
        ShellExecutorOptions options;
        options.command = "sh run.sh";
        options.primary_metric = "pearson";
        const auto rec = execute_shell(arm_candidate(fx.space, "c1"), ws, options);
        CHECK(rec.failure_category == FailureCategory::EnvironmentFailure);
        fx.manager.destroy(ws);
    }
}

TEST_CASE("command templating expands workspace, candidate and seed") {
    ShellFixture fx("irrelevant\n");
    Workspace ws = fx.mutated_workspace("cand");
    const auto candidate = arm_candidate(fx.space, "c1");

    ShellExecutorOptions options;
    options.command =
        "printf '{\"score\": 1.0}' > ablate_metrics.json && printf '%s' '{candidate_id}:{seed}' "
        "> tag.txt && test -d {workspace}";
    options.primary_metric = "score";
    options.seed = 99;
    const auto rec = execute_shell(candidate, ws, options);
    REQUIRE(rec.status == RunStatus::Success);
    CHECK(read_file(ws.path / "tag.txt") == candidate.candidate_id + ":99");
    fx.manager.destroy(ws);
}

TEST_CASE("cost_gpu_hours from the metrics file is captured separately") {
    ShellFixture fx(
        "printf '{\"score\": 1.0, \"cost_gpu_hours\": 2.5}' > ablate_metrics.json\n");
    Workspace ws = fx.mutated_workspace("cand");
    ShellExecutorOptions options;
    options.command = "sh run.sh";
    options.primary_metric = "score";
    const auto rec = execute_shell(arm_candidate(fx.space, "c1"), ws, options);
    REQUIRE(rec.status == RunStatus::Success);
    CHECK(rec.cost_gpu_hours == 2.5);
    CHECK(rec.metrics.find("cost_gpu_hours") == rec.metrics.end());
    fx.manager.destroy(ws);
}

TEST_CASE("parse_metrics_file rejects non-numeric values") {
    TempDir tmp;
    write_file(tmp.path() / "m.json", "{\"score\": \"high\"}");
    std::string why;
    CHECK_FALSE(parse_metrics_file(tmp.path() / "m.json", "score", &why).has_value());
    CHECK(why.find("not a number") != std::string::npos);
}
