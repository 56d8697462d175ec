#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ablate/core.hpp"

namespace ablate {

struct KnowledgeEntry {
    std::string entry_id;
    std::string text;
    std::vector<std::string> tags;
    std::vector<std::string> linked_components;
    std::optional<double> weight_hint;
};

struct KnowledgeBase {
    std::vector<KnowledgeEntry> entries;
};

struct ScoredEntry {
    const KnowledgeEntry* entry;
    double score;
};

// Tokenization used for retrieval, fixed for cross-platform stability:
// bytes >= 0x80 are dropped, ASCII letters are lowercased, digits kept,
// every other byte separates tokens.
std::vector<std::string> normalize_tokens(const std::string& text);

// Token-overlap cosine between the query and each entry's text + tags:
// |Q ∩ D| / (sqrt(|Q|) * sqrt(|D|)) over unique-token sets. Top k_ret by
// score descending, ties by entry id. Throws on an empty knowledge base.
std::vector<ScoredEntry> retrieve(const std::string& query, const KnowledgeBase& kb,
                                  std::size_t k_ret);

// Arm prior weights from the knowledge base: for each arm, the max
// weight_hint over entries linked to any of the arm's components, defaulting
// to 1.0 where no hinted entry links to the arm.
std::map<std::string, double> derive_arm_weights(const KnowledgeBase& kb,
                                                 const ComponentSpace& space);

}  // namespace ablate
