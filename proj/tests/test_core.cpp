#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "ablate/core.hpp"
#include "ablate/errors.hpp"
#include "support.hpp"

using namespace ablate;
using namespace ablate::test;

TEST_CASE("validate_space flags duplicate component ids") {
    ComponentSpace space = toggle_space(2);
    space.components[1].id = "c1";
    space.components[1].arm_id = "arm1";
    space.arms.pop_back();
    const auto result = validate_space(space);
    REQUIRE(result.violations.size() == 1);
    CHECK(result.violations[0].code == "duplicate-component");
}

TEST_CASE("validate_space accepts a 12-component space with 8 toggle, 3 scale, 1 replace targets") {
    ComponentSpace space;
    space.baseline_score = 0.9129;
    space.primary_metric = "pearson";
    const char* arms[] = {"unified_latent", "reconstruction", "encoder",  "adversarial",
                          "pert_embedding", "cov_embedding",  "dose_time"};
    for (const char* a : arms) space.arms.push_back({a, 1.0});

    auto add = [&](const std::string& id, const std::string& arm, MutationDecl decl) {
        Component c;
        c.id = id;
        c.name = id;
        c.arm_id = arm;
        c.allowed_mutations = {std::move(decl)};
        space.components.push_back(c);
    };
    add("unified_latent_embedding", "unified_latent", toggle_decl());
    add("latent_composition_sum", "unified_latent", toggle_decl());
    add("reconstruction_loss", "reconstruction", replace_decl({"nb", "poisson"}));
    add("encoder_hidden_width", "encoder", scale_decl({0.5, 2.0}));
    add("encoder_depth", "encoder", scale_decl({0.5, 2.0}));
    add("adversarial_discriminator", "adversarial", toggle_decl());
    add("adversarial_penalty_weight", "adversarial", scale_decl({0.5, 2.0}));
    add("classifier_gradient_reversal", "adversarial", toggle_decl());
    add("perturbation_embedding_dictionary", "pert_embedding", toggle_decl());
    add("covariate_embedding_dictionary", "cov_embedding", toggle_decl());
    add("dose_nonlinear_scaler", "dose_time", toggle_decl());
    add("time_nonlinear_scaler", "dose_time", toggle_decl());

    REQUIRE(space.components.size() == 12);
    int toggles = 0, scales = 0, replaces = 0;
    for (const auto& c : space.components) {
        switch (c.allowed_mutations[0].op) {
            case MutationOp::Toggle: ++toggles; break;
            case MutationOp::Scale: ++scales; break;
            case MutationOp::Replace: ++replaces; break;
            default: break;
        }
    }
    CHECK(toggles == 8);
    CHECK(scales == 3);
    CHECK(replaces == 1);
    CHECK(validate_space(space).ok());
}

TEST_CASE("validate_space rejects an empty component list") {
    ComponentSpace space;
    const auto result = validate_space(space);
    REQUIRE_FALSE(result.ok());
    CHECK(result.violations[0].code == "empty-space");
}

TEST_CASE("validate_space reports orphan arms and negative weights") {
    ComponentSpace space = toggle_space(1);
    space.components[0].arm_id = "ghost";
    space.arms[0].prior_weight = -0.5;
    const auto result = validate_space(space);
    REQUIRE(result.violations.size() == 2);
    CHECK(result.violations[0].code == "negative-weight");
    CHECK(result.violations[1].code == "orphan-arm");
}

TEST_CASE("validate_space checks mutation payloads") {
    ComponentSpace space = toggle_space(1);
    space.components[0].allowed_mutations = {scale_decl({-1.0})};
    CHECK_FALSE(validate_space(space).ok());
    space.components[0].allowed_mutations = {grid_decl("k", {})};
    CHECK_FALSE(validate_space(space).ok());
    space.components[0].allowed_mutations.clear();
    CHECK_FALSE(validate_space(space).ok());
}

TEST_CASE("enumerate: toggle-only single targets give one candidate per component") {
    const auto candidates = enumerate_candidates(toggle_space(3), 1);
    CHECK(candidates.size() == 3);
}

TEST_CASE("enumerate: three toggle components with max_targets=2 give 6 candidates") {
    // Independent count: 3 singletons plus C(3,2)=3 pairs.
    const auto candidates = enumerate_candidates(toggle_space(3), 2);
    REQUIRE(candidates.size() == 6);
    int singles = 0, pairs = 0;
    for (const auto& c : candidates) (c.targets.size() == 1 ? singles : pairs) += 1;
    CHECK(singles == 3);
    CHECK(pairs == 3);
}

TEST_CASE("enumerate: a scale grid {0.5, 2.0} yields one candidate per factor") {
    ComponentSpace space = toggle_space(1);
    space.components[0].allowed_mutations = {scale_decl({0.5, 2.0})};
    const auto candidates = enumerate_candidates(space, 1);
    REQUIRE(candidates.size() == 2);
    std::vector<double> factors{candidates[0].mutations[0].factor,
                                candidates[1].mutations[0].factor};
    std::sort(factors.begin(), factors.end());
    CHECK(factors[0] == 0.5);
    CHECK(factors[1] == 2.0);
}

TEST_CASE("enumerate is pure: identical inputs give identical ordered output") {
    ComponentSpace space = toggle_space(4);
    space.components[1].allowed_mutations.push_back(scale_decl({0.5, 2.0}));
    space.components[2].allowed_mutations.push_back(grid_decl("dim", {"64", "128"}));
    const auto a = enumerate_candidates(space, 2);
    const auto b = enumerate_candidates(space, 2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].candidate_id == b[i].candidate_id);
        CHECK(a[i].description == b[i].description);
    }
    CHECK(std::is_sorted(a.begin(), a.end(), [](const auto& x, const auto& y) {
        return x.candidate_id < y.candidate_id;
    }));
}

TEST_CASE("every emitted candidate passes its own validation") {
    ComponentSpace space = toggle_space(3);
    space.components[0].allowed_mutations.push_back(replace_decl({"alt_a", "alt_b"}));
    space.components[2].allowed_mutations.push_back(grid_decl("lr", {"0.1", "0.01"}));
    for (const auto& c : enumerate_candidates(space, 2)) {
        INFO("candidate ", c.candidate_id, ": ", c.description);
        CHECK(validate_candidate(space, c).ok());
    }
}

TEST_CASE("toggle-only spaces of any size have exactly m single-target candidates") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 1 + static_cast<int>(rng() % 8);
        CHECK(enumerate_candidates(toggle_space(m), 1).size() == static_cast<std::size_t>(m));
    }
}

TEST_CASE("enumeration over the cap throws") {
    ComponentSpace space = toggle_space(10);
    CHECK_THROWS_AS(enumerate_candidates(space, 3, 50), Error);
}

TEST_CASE("candidate ids are content hashes, independent of target order") {
    ComponentSpace space = toggle_space(2);
    Mutation toggle;
    const auto a = make_candidate(space, "arm1", {"c1", "c2"}, {toggle, toggle});
    const auto b = make_candidate(space, "arm1", {"c2", "c1"}, {toggle, toggle});
    CHECK(a.candidate_id == b.candidate_id);
    CHECK(a.candidate_id == candidate_content_id(a));
    const auto c = make_candidate(space, "arm2", {"c1", "c2"}, {toggle, toggle});
    CHECK(a.candidate_id != c.candidate_id);
}

TEST_CASE("validate_candidate rejects unknown targets and disallowed mutations") {
    ComponentSpace space = toggle_space(2);
    Mutation toggle;
    auto ok = make_candidate(space, "arm1", {"c1"}, {toggle});
    CHECK(validate_candidate(space, ok).ok());

    auto unknown = ok;
    unknown.targets = {"zzz"};
    unknown.candidate_id = candidate_content_id(unknown);
    CHECK_FALSE(validate_candidate(space, unknown).ok());

    Mutation scale;
    scale.op = MutationOp::Scale;
    scale.factor = 0.5;
    auto disallowed = make_candidate(space, "arm1", {"c1"}, {scale});
    CHECK_FALSE(validate_candidate(space, disallowed).ok());

    auto stale = ok;
    stale.candidate_id = "0000000000000000";
    CHECK_FALSE(validate_candidate(space, stale).ok());
}
