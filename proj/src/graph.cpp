#include "ablate/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "ablate/errors.hpp"

namespace ablate {

std::string to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::Generation: return "generation";
        case NodeKind::Execution: return "execution";
        case NodeKind::Ranking: return "ranking";
        case NodeKind::Reflection: return "reflection";
    }
    return "unknown";
}

const GraphNode* ExecutionGraph::find(const std::string& id) const {
    for (const auto& n : nodes)
        if (n.id == id) return &n;
    return nullptr;
}

ExecutionGraph build_round_graph(const std::string& selected_arm,
                                 const std::vector<CandidateSpec>& candidates, int round) {
    if (candidates.empty()) throw Error("build_round_graph: no candidates for round");

    char prefix[16];
    std::snprintf(prefix, sizeof(prefix), "r%03d.", round);

    ExecutionGraph graph;
    graph.round_index = round;

    const std::string gen_id = std::string(prefix) + "generate";
    const std::string rank_id = std::string(prefix) + "rank";
    const std::string reflect_id = std::string(prefix) + "reflect";

    graph.nodes.push_back({gen_id, NodeKind::Generation, selected_arm});
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "exec%03zu", i);
        const std::string exec_id = std::string(prefix) + buf;
        graph.nodes.push_back({exec_id, NodeKind::Execution, candidates[i].candidate_id});
        graph.edges.emplace_back(gen_id, exec_id);
        graph.edges.emplace_back(exec_id, rank_id);
    }
    graph.nodes.push_back({rank_id, NodeKind::Ranking, ""});
    graph.nodes.push_back({reflect_id, NodeKind::Reflection, ""});
    graph.edges.emplace_back(rank_id, reflect_id);
    return graph;
}

std::vector<std::vector<std::string>> schedule(const ExecutionGraph& graph, int max_parallel) {
    if (max_parallel < 1) throw Error("schedule: max_parallel must be >= 1");

    std::map<std::string, int> indegree;
    std::map<std::string, std::vector<std::string>> children;
    for (const auto& node : graph.nodes) indegree[node.id];  // ensure present
    for (const auto& [from, to] : graph.edges) {
        if (indegree.find(from) == indegree.end() || indegree.find(to) == indegree.end())
            throw Error("schedule: edge references unknown node");
        indegree[to] += 1;
        children[from].push_back(to);
    }

    std::vector<std::vector<std::string>> batches;
    std::size_t scheduled = 0;
    std::map<std::string, bool> done;

    while (scheduled < graph.nodes.size()) {
        std::vector<std::string> ready;
        for (const auto& [id, deg] : indegree)
            if (deg == 0 && !done[id]) ready.push_back(id);
        if (ready.empty()) throw Error("schedule: cycle detected");

        std::sort(ready.begin(), ready.end());
        if (ready.size() > static_cast<std::size_t>(max_parallel))
            ready.resize(static_cast<std::size_t>(max_parallel));

        for (const auto& id : ready) {
            done[id] = true;
            for (const auto& child : children[id]) indegree[child] -= 1;
        }
        scheduled += ready.size();
        batches.push_back(std::move(ready));
    }
    return batches;
}

}  // namespace ablate
