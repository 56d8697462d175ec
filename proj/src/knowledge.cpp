#include "ablate/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ablate/errors.hpp"

namespace ablate {

std::vector<std::string> normalize_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (c >= 0x80) continue;
        if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
        const bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
        if (keep) {
            current.push_back(static_cast<char>(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

namespace {

std::set<std::string> token_set(const std::string& text) {
    auto tokens = normalize_tokens(text);
    return {tokens.begin(), tokens.end()};
}

}  // namespace

std::vector<ScoredEntry> retrieve(const std::string& query, const KnowledgeBase& kb,
                                  std::size_t k_ret) {
    if (kb.entries.empty()) throw Error("retrieve: knowledge base is empty");
    if (k_ret < 1) throw Error("retrieve: k_ret must be >= 1");

    const std::set<std::string> q = token_set(query);

    std::vector<ScoredEntry> scored;
    scored.reserve(kb.entries.size());
    for (const auto& entry : kb.entries) {
        std::string doc = entry.text;
        for (const auto& tag : entry.tags) doc += " " + tag;
        const std::set<std::string> d = token_set(doc);

        std::size_t overlap = 0;
        for (const auto& tok : q)
            if (d.count(tok)) ++overlap;

        double score = 0.0;
        if (!q.empty() && !d.empty() && overlap > 0)
            score = static_cast<double>(overlap) /
                    (std::sqrt(static_cast<double>(q.size())) * std::sqrt(static_cast<double>(d.size())));
        scored.push_back({&entry, score});
    }

    std::sort(scored.begin(), scored.end(), [](const ScoredEntry& a, const ScoredEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.entry->entry_id < b.entry->entry_id;
    });
    if (scored.size() > k_ret) scored.resize(k_ret);
    return scored;
}

std::map<std::string, double> derive_arm_weights(const KnowledgeBase& kb,
                                                 const ComponentSpace& space) {
    std::map<std::string, double> weights;
    for (const auto& arm : space.arms) weights[arm.id] = 1.0;

    std::map<std::string, const std::string*> component_arm;
    for (const auto& comp : space.components) component_arm[comp.id] = &comp.arm_id;

    std::map<std::string, double> hinted;
    for (const auto& entry : kb.entries) {
        if (!entry.weight_hint.has_value()) continue;
        for (const auto& comp_id : entry.linked_components) {
            auto it = component_arm.find(comp_id);
            if (it == component_arm.end()) continue;
            const std::string& arm_id = *it->second;
            auto [pos, inserted] = hinted.emplace(arm_id, *entry.weight_hint);
            if (!inserted) pos->second = std::max(pos->second, *entry.weight_hint);
        }
    }
    for (const auto& [arm_id, hint] : hinted) weights[arm_id] = hint;
    return weights;
}

}  // namespace ablate
