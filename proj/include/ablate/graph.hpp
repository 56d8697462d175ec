#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ablate/core.hpp"

namespace ablate {

enum class NodeKind { Generation, Execution, Ranking, Reflection };

std::string to_string(NodeKind kind);

struct GraphNode {
    std::string id;
    NodeKind kind = NodeKind::Generation;
    std::string payload;  // candidate id for execution nodes, arm id for generation
};

// One ablation round as a DAG of operation nodes. Rebuilt per round; no
// cross-round edges.
struct ExecutionGraph {
    std::vector<GraphNode> nodes;
    std::vector<std::pair<std::string, std::string>> edges;  // from -> to
    int round_index = 0;

    const GraphNode* find(const std::string& id) const;
};

// generation -> K executions -> ranking -> reflection. Node ids embed the
// round and the candidate's position in the generated batch so that id order
// equals generation order.
ExecutionGraph build_round_graph(const std::string& selected_arm,
                                 const std::vector<CandidateSpec>& candidates, int round);

// Dependency-respecting batches: repeatedly takes up to max_parallel of the
// currently-ready nodes in id order. With max_parallel == 1 this is exactly
// a stable (id-ordered) Kahn topological sort, one node per batch. Throws on
// cycles.
std::vector<std::vector<std::string>> schedule(const ExecutionGraph& graph, int max_parallel);

}  // namespace ablate
