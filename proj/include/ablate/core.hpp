#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ablate {

enum class MutationOp { Toggle, Scale, Replace, ParamGrid };

std::string to_string(MutationOp op);

// A mutation as declared on a component: the options a generator may draw
// from. Scale/Replace/ParamGrid carry the full option list; enumeration
// expands one concrete candidate per option.
struct MutationDecl {
    MutationOp op = MutationOp::Toggle;
    std::vector<double> factors;            // Scale: positive factors
    std::vector<std::string> alternatives;  // Replace: named alternatives
    std::string param_key;                  // ParamGrid
    std::vector<std::string> values;        // ParamGrid: finite non-empty list
};

// A concrete mutation attached to one candidate target. Exactly one option
// chosen from the component's declaration.
struct Mutation {
    MutationOp op = MutationOp::Toggle;
    double factor = 1.0;        // Scale
    std::string alternative;    // Replace
    std::string param_key;      // ParamGrid
    std::string value;          // ParamGrid

    // Canonical text used for hashing and logs, e.g. "scale:0.5".
    std::string canonical() const;
    std::string describe() const;
};

struct Component {
    std::string id;
    std::string name;
    std::string arm_id;
    std::string description;
    std::vector<MutationDecl> allowed_mutations;
    double estimated_cost = 1.0;  // GPU-hours per candidate touching this component
};

struct Arm {
    std::string id;
    double prior_weight = 1.0;
};

// The declared component space of a target system: what can be mutated, how
// components group into hypothesis-family arms, and the baseline score the
// ablation effects are measured against.
struct ComponentSpace {
    std::vector<Component> components;
    std::vector<Arm> arms;
    double baseline_score = 0.0;
    std::string primary_metric = "score";
    bool higher_is_better = true;

    const Component* find_component(const std::string& id) const;
    const Arm* find_arm(const std::string& id) const;
};

// One executable mutation configuration: a non-empty set of target
// components, one concrete mutation per target, attributed to a single
// generating arm.
struct CandidateSpec {
    std::string candidate_id;  // stable content hash of (targets, mutations, arm)
    std::vector<std::string> targets;  // component ids, sorted
    std::vector<Mutation> mutations;   // parallel to targets
    std::string arm_id;
    std::string description;
    double estimated_cost = 1.0;
};

struct Violation {
    std::string code;
    std::string message;
};

struct ValidationResult {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

// Checks every declared invariant of the space: non-empty component list,
// unique ids, non-empty mutation sets with valid payloads, arms resolvable,
// non-negative prior weights. Violations are data, not failures.
ValidationResult validate_space(const ComponentSpace& space);

// Checks a candidate against the space it was built from.
ValidationResult validate_candidate(const ComponentSpace& space, const CandidateSpec& candidate);

// Recomputes the content hash for a candidate's (targets, mutations, arm).
std::string candidate_content_id(const CandidateSpec& candidate);

// Builds a single-arm candidate from explicit parts, filling in the id,
// description and cost.
CandidateSpec make_candidate(const ComponentSpace& space, const std::string& arm_id,
                             std::vector<std::string> targets, std::vector<Mutation> mutations);

inline constexpr std::size_t kDefaultEnumerationCap = 200000;

// All candidates with |targets| <= max_targets, one concrete mutation per
// target drawn from the target's declared options. For multi-target
// candidates the generating arm is the arm of the first target in component
// id order. Output is sorted by candidate_id; throws Error when the
// expansion would exceed `cap`.
std::vector<CandidateSpec> enumerate_candidates(const ComponentSpace& space,
                                                std::size_t max_targets,
                                                std::size_t cap = kDefaultEnumerationCap);

}  // namespace ablate
