#pragma once

#include <nlohmann/json.hpp>

#include "ablate/analysis.hpp"
#include "ablate/core.hpp"
#include "ablate/executor.hpp"
#include "ablate/knowledge.hpp"
#include "ablate/workspace.hpp"

namespace ablate {

void to_json(nlohmann::json& j, const MutationDecl& decl);
void from_json(const nlohmann::json& j, MutationDecl& decl);

void to_json(nlohmann::json& j, const Mutation& m);
void from_json(const nlohmann::json& j, Mutation& m);

void to_json(nlohmann::json& j, const Component& c);
void from_json(const nlohmann::json& j, Component& c);

void to_json(nlohmann::json& j, const Arm& a);
void from_json(const nlohmann::json& j, Arm& a);

void to_json(nlohmann::json& j, const ComponentSpace& space);
void from_json(const nlohmann::json& j, ComponentSpace& space);

void to_json(nlohmann::json& j, const CandidateSpec& c);
void from_json(const nlohmann::json& j, CandidateSpec& c);

void to_json(nlohmann::json& j, const KnowledgeEntry& e);
void from_json(const nlohmann::json& j, KnowledgeEntry& e);

void to_json(nlohmann::json& j, const KnowledgeBase& kb);
void from_json(const nlohmann::json& j, KnowledgeBase& kb);

void to_json(nlohmann::json& j, const SimulatedArmModel& m);
void from_json(const nlohmann::json& j, SimulatedArmModel& m);

void to_json(nlohmann::json& j, const PatchOp& op);
void from_json(const nlohmann::json& j, PatchOp& op);

void to_json(nlohmann::json& j, const MetricsRecord& r);
void from_json(const nlohmann::json& j, MetricsRecord& r);

MutationOp mutation_op_from_string(const std::string& name);

}  // namespace ablate
