#include "ablate/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "ablate/errors.hpp"
#include "ablate/hash.hpp"

namespace ablate {

namespace {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string to_string(MutationOp op) {
    switch (op) {
        case MutationOp::Toggle: return "toggle";
        case MutationOp::Scale: return "scale";
        case MutationOp::Replace: return "replace";
        case MutationOp::ParamGrid: return "param_grid";
    }
    return "unknown";
}

std::string Mutation::canonical() const {
    switch (op) {
        case MutationOp::Toggle: return "toggle";
        case MutationOp::Scale: return "scale:" + format_double(factor);
        case MutationOp::Replace: return "replace:" + alternative;
        case MutationOp::ParamGrid: return "grid:" + param_key + "=" + value;
    }
    return "unknown";
}

std::string Mutation::describe() const {
    switch (op) {
        case MutationOp::Toggle: return "toggle";
        case MutationOp::Scale: {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%g", factor);
            return std::string("scale by ") + buf;
        }
        case MutationOp::Replace: return "replace with " + alternative;
        case MutationOp::ParamGrid: return "set " + param_key + "=" + value;
    }
    return "unknown";
}

const Component* ComponentSpace::find_component(const std::string& id) const {
    for (const auto& c : components)
        if (c.id == id) return &c;
    return nullptr;
}

const Arm* ComponentSpace::find_arm(const std::string& id) const {
    for (const auto& a : arms)
        if (a.id == id) return &a;
    return nullptr;
}

ValidationResult validate_space(const ComponentSpace& space) {
    ValidationResult result;
    auto add = [&](std::string code, std::string message) {
        result.violations.push_back({std::move(code), std::move(message)});
    };

    if (space.components.empty())
        add("empty-space", "component space has no components");

    std::set<std::string> seen_ids;
    std::set<std::string> arm_ids;
    for (const auto& arm : space.arms) {
        if (!arm_ids.insert(arm.id).second)
            add("duplicate-arm", "duplicate arm id '" + arm.id + "'");
        if (arm.prior_weight < 0.0)
            add("negative-weight", "arm '" + arm.id + "' has negative prior weight");
    }

    for (const auto& c : space.components) {
        if (!seen_ids.insert(c.id).second)
            add("duplicate-component", "duplicate component id '" + c.id + "'");
        if (arm_ids.find(c.arm_id) == arm_ids.end())
            add("orphan-arm", "component '" + c.id + "' references undeclared arm '" + c.arm_id + "'");
        if (c.allowed_mutations.empty())
            add("no-mutations", "component '" + c.id + "' declares no allowed mutations");
        if (c.estimated_cost < 0.0)
            add("negative-cost", "component '" + c.id + "' has negative estimated cost");
        for (const auto& m : c.allowed_mutations) {
            switch (m.op) {
                case MutationOp::Toggle:
                    break;
                case MutationOp::Scale:
                    if (m.factors.empty())
                        add("bad-scale", "component '" + c.id + "' scale mutation lists no factors");
                    for (double f : m.factors)
                        if (!(f > 0.0) || !std::isfinite(f))
                            add("bad-scale", "component '" + c.id + "' scale factor must be positive and finite");
                    break;
                case MutationOp::Replace:
                    if (m.alternatives.empty())
                        add("bad-replace", "component '" + c.id + "' replace mutation lists no alternatives");
                    break;
                case MutationOp::ParamGrid:
                    if (m.param_key.empty())
                        add("bad-grid", "component '" + c.id + "' param grid has no key");
                    if (m.values.empty())
                        add("bad-grid", "component '" + c.id + "' param grid '" + m.param_key + "' has no values");
                    break;
            }
        }
    }
    if (!std::isfinite(space.baseline_score))
        add("bad-baseline", "baseline score is not finite");
    return result;
}

ValidationResult validate_candidate(const ComponentSpace& space, const CandidateSpec& candidate) {
    ValidationResult result;
    auto add = [&](std::string code, std::string message) {
        result.violations.push_back({std::move(code), std::move(message)});
    };

    if (candidate.targets.empty()) add("empty-targets", "candidate has no targets");
    if (candidate.targets.size() != candidate.mutations.size())
        add("shape-mismatch", "targets and mutations differ in length");

    bool arm_matches_target = false;
    for (std::size_t i = 0; i < candidate.targets.size(); ++i) {
        const Component* comp = space.find_component(candidate.targets[i]);
        if (comp == nullptr) {
            add("unknown-target", "target '" + candidate.targets[i] + "' not in space");
            continue;
        }
        if (comp->arm_id == candidate.arm_id) arm_matches_target = true;
        if (i >= candidate.mutations.size()) continue;
        const Mutation& m = candidate.mutations[i];
        bool allowed = false;
        for (const auto& decl : comp->allowed_mutations) {
            if (decl.op != m.op) continue;
            switch (m.op) {
                case MutationOp::Toggle:
                    allowed = true;
                    break;
                case MutationOp::Scale:
                    allowed = std::find(decl.factors.begin(), decl.factors.end(), m.factor) !=
                              decl.factors.end();
                    break;
                case MutationOp::Replace:
                    allowed = std::find(decl.alternatives.begin(), decl.alternatives.end(),
                                        m.alternative) != decl.alternatives.end();
                    break;
                case MutationOp::ParamGrid:
                    allowed = decl.param_key == m.param_key &&
                              std::find(decl.values.begin(), decl.values.end(), m.value) !=
                                  decl.values.end();
                    break;
            }
            if (allowed) break;
        }
        if (!allowed)
            add("disallowed-mutation", "mutation '" + m.canonical() + "' not allowed on component '" +
                                           comp->id + "'");
    }
    if (!candidate.targets.empty() && !arm_matches_target)
        add("arm-mismatch", "arm '" + candidate.arm_id + "' matches no target component");
    if (candidate.estimated_cost < 0.0)
        add("negative-cost", "candidate estimated cost is negative");
    if (candidate.candidate_id != candidate_content_id(candidate))
        add("stale-id", "candidate id does not match its content hash");
    return result;
}

std::string candidate_content_id(const CandidateSpec& candidate) {
    std::ostringstream data;
    data << "arm=" << candidate.arm_id;
    for (std::size_t i = 0; i < candidate.targets.size(); ++i) {
        data << ";" << candidate.targets[i] << ":";
        if (i < candidate.mutations.size()) data << candidate.mutations[i].canonical();
    }
    return content_hash(data.str());
}

CandidateSpec make_candidate(const ComponentSpace& space, const std::string& arm_id,
                             std::vector<std::string> targets, std::vector<Mutation> mutations) {
    if (targets.size() != mutations.size())
        throw Error("make_candidate: targets/mutations length mismatch");
    // Keep (target, mutation) pairs in component-id order so the content hash
    // is independent of the caller's ordering.
    std::vector<std::size_t> order(targets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return targets[a] < targets[b]; });

    CandidateSpec spec;
    spec.arm_id = arm_id;
    double cost = 0.0;
    std::string desc;
    for (std::size_t idx : order) {
        spec.targets.push_back(targets[idx]);
        spec.mutations.push_back(mutations[idx]);
        const Component* comp = space.find_component(targets[idx]);
        cost += comp != nullptr ? comp->estimated_cost : 1.0;
        if (!desc.empty()) desc += "; ";
        desc += mutations[idx].describe() + " " + targets[idx];
    }
    spec.estimated_cost = spec.targets.empty() ? 0.0 : cost / static_cast<double>(spec.targets.size());
    spec.description = desc;
    spec.candidate_id = candidate_content_id(spec);
    return spec;
}

namespace {

std::vector<Mutation> expand_options(const Component& comp) {
    std::vector<Mutation> out;
    for (const auto& decl : comp.allowed_mutations) {
        switch (decl.op) {
            case MutationOp::Toggle: {
                Mutation m;
                m.op = MutationOp::Toggle;
                out.push_back(m);
                break;
            }
            case MutationOp::Scale:
                for (double f : decl.factors) {
                    Mutation m;
                    m.op = MutationOp::Scale;
                    m.factor = f;
                    out.push_back(m);
                }
                break;
            case MutationOp::Replace:
                for (const auto& alt : decl.alternatives) {
                    Mutation m;
                    m.op = MutationOp::Replace;
                    m.alternative = alt;
                    out.push_back(m);
                }
                break;
            case MutationOp::ParamGrid:
                for (const auto& v : decl.values) {
                    Mutation m;
                    m.op = MutationOp::ParamGrid;
                    m.param_key = decl.param_key;
                    m.value = v;
                    out.push_back(m);
                }
                break;
        }
    }
    return out;
}

}  // namespace

std::vector<CandidateSpec> enumerate_candidates(const ComponentSpace& space,
                                                std::size_t max_targets, std::size_t cap) {
    if (max_targets < 1) throw Error("enumerate_candidates: max_targets must be >= 1");
    ValidationResult check = validate_space(space);
    if (!check.ok())
        throw Error("enumerate_candidates: invalid space: " + check.violations.front().message);

    // Components in id order; the generating arm of a multi-target candidate
    // is the arm of its first target in this order.
    std::vector<const Component*> comps;
    comps.reserve(space.components.size());
    for (const auto& c : space.components) comps.push_back(&c);
    std::sort(comps.begin(), comps.end(),
              [](const Component* a, const Component* b) { return a->id < b->id; });

    std::vector<std::vector<Mutation>> options(comps.size());
    for (std::size_t i = 0; i < comps.size(); ++i) options[i] = expand_options(*comps[i]);

    std::vector<CandidateSpec> out;
    std::vector<std::size_t> subset;

    // Depth-first over component subsets of size <= max_targets, then the
    // cross product of per-target options within the subset.
    auto emit_subset = [&]() {
        std::vector<std::size_t> pick(subset.size(), 0);
        while (true) {
            std::vector<std::string> targets;
            std::vector<Mutation> muts;
            for (std::size_t j = 0; j < subset.size(); ++j) {
                targets.push_back(comps[subset[j]]->id);
                muts.push_back(options[subset[j]][pick[j]]);
            }
            if (out.size() >= cap)
                throw Error("enumerate_candidates: candidate count exceeds cap of " +
                            std::to_string(cap));
            out.push_back(make_candidate(space, comps[subset[0]]->arm_id, std::move(targets),
                                         std::move(muts)));
            std::size_t j = subset.size();
            while (j > 0) {
                --j;
                if (++pick[j] < options[subset[j]].size()) break;
                pick[j] = 0;
                if (j == 0) return;
            }
        }
    };

    auto recurse = [&](auto&& self, std::size_t start) -> void {
        if (!subset.empty()) emit_subset();
        if (subset.size() == max_targets) return;
        for (std::size_t i = start; i < comps.size(); ++i) {
            subset.push_back(i);
            self(self, i + 1);
            subset.pop_back();
        }
    };
    recurse(recurse, 0);

    std::sort(out.begin(), out.end(), [](const CandidateSpec& a, const CandidateSpec& b) {
        return a.candidate_id < b.candidate_id;
    });
    return out;
}

}  // namespace ablate
