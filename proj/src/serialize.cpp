#include "ablate/serialize.hpp"

#include "ablate/errors.hpp"

using nlohmann::json;

namespace ablate {

MutationOp mutation_op_from_string(const std::string& name) {
    if (name == "toggle") return MutationOp::Toggle;
    if (name == "scale") return MutationOp::Scale;
    if (name == "replace") return MutationOp::Replace;
    if (name == "param_grid") return MutationOp::ParamGrid;
    throw ConfigError("unknown mutation kind '" + name + "'");
}

namespace {

// Config files may express grid values as numbers, booleans or strings;
// they are canonicalized to their JSON text form.
std::string scalar_to_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

}  // namespace

void to_json(json& j, const MutationDecl& decl) {
    j = json{{"kind", to_string(decl.op)}};
    switch (decl.op) {
        case MutationOp::Toggle: break;
        case MutationOp::Scale: j["factors"] = decl.factors; break;
        case MutationOp::Replace: j["alternatives"] = decl.alternatives; break;
        case MutationOp::ParamGrid:
            j["key"] = decl.param_key;
            j["values"] = decl.values;
            break;
    }
}

void from_json(const json& j, MutationDecl& decl) {
    decl.op = mutation_op_from_string(j.at("kind").get<std::string>());
    switch (decl.op) {
        case MutationOp::Toggle: break;
        case MutationOp::Scale: decl.factors = j.at("factors").get<std::vector<double>>(); break;
        case MutationOp::Replace:
            decl.alternatives = j.at("alternatives").get<std::vector<std::string>>();
            break;
        case MutationOp::ParamGrid:
            decl.param_key = j.at("key").get<std::string>();
            decl.values.clear();
            for (const auto& v : j.at("values")) decl.values.push_back(scalar_to_text(v));
            break;
    }
}

void to_json(json& j, const Mutation& m) {
    j = json{{"kind", to_string(m.op)}};
    switch (m.op) {
        case MutationOp::Toggle: break;
        case MutationOp::Scale: j["factor"] = m.factor; break;
        case MutationOp::Replace: j["alternative"] = m.alternative; break;
        case MutationOp::ParamGrid:
            j["key"] = m.param_key;
            j["value"] = m.value;
            break;
    }
}

void from_json(const json& j, Mutation& m) {
    m.op = mutation_op_from_string(j.at("kind").get<std::string>());
    switch (m.op) {
        case MutationOp::Toggle: break;
        case MutationOp::Scale: m.factor = j.at("factor").get<double>(); break;
        case MutationOp::Replace: m.alternative = j.at("alternative").get<std::string>(); break;
        case MutationOp::ParamGrid:
            m.param_key = j.at("key").get<std::string>();
            m.value = scalar_to_text(j.at("value"));
            break;
    }
}

void to_json(json& j, const Component& c) {
    j = json{{"id", c.id},
             {"name", c.name},
             {"arm", c.arm_id},
             {"mutations", c.allowed_mutations},
             {"estimated_cost", c.estimated_cost}};
    if (!c.description.empty()) j["description"] = c.description;
}

void from_json(const json& j, Component& c) {
    c.id = j.at("id").get<std::string>();
    c.name = j.value("name", c.id);
    c.arm_id = j.value("arm", c.id);
    c.description = j.value("description", std::string());
    c.allowed_mutations = j.at("mutations").get<std::vector<MutationDecl>>();
    c.estimated_cost = j.value("estimated_cost", 1.0);
}

void to_json(json& j, const Arm& a) { j = json{{"id", a.id}, {"weight", a.prior_weight}}; }

void from_json(const json& j, Arm& a) {
    if (j.is_string()) {
        a.id = j.get<std::string>();
        a.prior_weight = 1.0;
        return;
    }
    a.id = j.at("id").get<std::string>();
    a.prior_weight = j.value("weight", 1.0);
}

void to_json(json& j, const ComponentSpace& space) {
    j = json{{"components", space.components},
             {"arms", space.arms},
             {"baseline_score", space.baseline_score},
             {"primary_metric", space.primary_metric},
             {"higher_is_better", space.higher_is_better}};
}

void from_json(const json& j, ComponentSpace& space) {
    space.components = j.at("components").get<std::vector<Component>>();
    if (j.contains("arms")) {
        space.arms = j.at("arms").get<std::vector<Arm>>();
    } else {
        // Default grouping: one arm per component.
        space.arms.clear();
        for (const auto& c : space.components) space.arms.push_back({c.arm_id, 1.0});
    }
    space.baseline_score = j.value("baseline_score", 0.0);
    space.primary_metric = j.value("primary_metric", std::string("score"));
    space.higher_is_better = j.value("higher_is_better", true);
}

void to_json(json& j, const CandidateSpec& c) {
    j = json{{"candidate_id", c.candidate_id},
             {"targets", c.targets},
             {"mutations", c.mutations},
             {"arm", c.arm_id},
             {"description", c.description},
             {"estimated_cost", c.estimated_cost}};
}

void from_json(const json& j, CandidateSpec& c) {
    c.candidate_id = j.at("candidate_id").get<std::string>();
    c.targets = j.at("targets").get<std::vector<std::string>>();
    c.mutations = j.at("mutations").get<std::vector<Mutation>>();
    c.arm_id = j.at("arm").get<std::string>();
    c.description = j.value("description", std::string());
    c.estimated_cost = j.value("estimated_cost", 1.0);
}

void to_json(json& j, const KnowledgeEntry& e) {
    j = json{{"id", e.entry_id},
             {"text", e.text},
             {"tags", e.tags},
             {"components", e.linked_components}};
    if (e.weight_hint.has_value()) j["weight_hint"] = *e.weight_hint;
}

void from_json(const json& j, KnowledgeEntry& e) {
    e.entry_id = j.at("id").get<std::string>();
    e.text = j.value("text", std::string());
    e.tags = j.value("tags", std::vector<std::string>());
    e.linked_components = j.value("components", std::vector<std::string>());
    if (j.contains("weight_hint")) e.weight_hint = j.at("weight_hint").get<double>();
}

void to_json(json& j, const KnowledgeBase& kb) { j = json{{"entries", kb.entries}}; }

void from_json(const json& j, KnowledgeBase& kb) {
    kb.entries = j.at("entries").get<std::vector<KnowledgeEntry>>();
}

void to_json(json& j, const SimulatedArmModel& m) {
    j = json{{"mean", m.reward_mean}, {"std", m.reward_std}, {"failure_prob", m.failure_prob}};
}

void from_json(const json& j, SimulatedArmModel& m) {
    m.reward_mean = j.at("mean").get<double>();
    m.reward_std = j.value("std", 0.0);
    m.failure_prob = j.value("failure_prob", 0.0);
}

void to_json(json& j, const PatchOp& op) {
    switch (op.kind) {
        case PatchOp::Kind::SetKey:
            j = json{{"op", "set_key"}, {"file", op.file}, {"key", op.key}};
            if (op.scale.has_value())
                j["scale"] = *op.scale;
            else
                j["value"] = op.value;
            break;
        case PatchOp::Kind::ReplaceAnchored:
            j = json{{"op", "replace_anchored"},
                     {"file", op.file},
                     {"anchor", op.anchor},
                     {"replacement", op.replacement}};
            break;
        case PatchOp::Kind::DeleteLines:
            j = json{{"op", "delete_lines"}, {"file", op.file}, {"anchor", op.anchor}};
            break;
    }
}

void from_json(const json& j, PatchOp& op) {
    const std::string kind = j.at("op").get<std::string>();
    op.file = j.at("file").get<std::string>();
    if (kind == "set_key") {
        op.kind = PatchOp::Kind::SetKey;
        op.key = j.at("key").get<std::string>();
        if (j.contains("scale")) {
            if (j.at("scale").is_boolean()) {
                // `true` defers the factor to the mutation being applied.
                if (j.at("scale").get<bool>()) op.scale = 1.0;
            } else {
                op.scale = j.at("scale").get<double>();
            }
        } else {
            op.value = scalar_to_text(j.at("value"));
        }
    } else if (kind == "replace_anchored") {
        op.kind = PatchOp::Kind::ReplaceAnchored;
        op.anchor = j.at("anchor").get<std::string>();
        op.replacement = j.at("replacement").get<std::string>();
    } else if (kind == "delete_lines") {
        op.kind = PatchOp::Kind::DeleteLines;
        op.anchor = j.at("anchor").get<std::string>();
    } else {
        throw ConfigError("unknown patch op '" + kind + "'");
    }
}

void to_json(json& j, const MetricsRecord& r) {
    j = json{{"status", to_string(r.status)},
             {"metrics", r.metrics},
             {"wall_seconds", r.wall_seconds},
             {"cost_gpu_hours", r.cost_gpu_hours}};
    if (r.failure_category.has_value()) j["failure_category"] = to_string(*r.failure_category);
}

void from_json(const json& j, MetricsRecord& r) {
    const std::string status = j.at("status").get<std::string>();
    r.status = status == "success" ? RunStatus::Success : RunStatus::Failed;
    r.metrics = j.value("metrics", std::map<std::string, double>());
    r.wall_seconds = j.value("wall_seconds", 0.0);
    r.cost_gpu_hours = j.value("cost_gpu_hours", 0.0);
    if (j.contains("failure_category")) {
        const std::string cat = j.at("failure_category").get<std::string>();
        if (cat == "mapping_failure") r.failure_category = FailureCategory::MappingFailure;
        else if (cat == "environment_failure") r.failure_category = FailureCategory::EnvironmentFailure;
        else if (cat == "runtime_failure") r.failure_category = FailureCategory::RuntimeFailure;
    }
}

}  // namespace ablate
