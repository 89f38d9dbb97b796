#pragma once

#include "motifidx/types.hpp"

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace motifidx::motif {

/// Hierarchical motif identifier: theme letter plus dotted path, e.g. B3.1.
struct MotifId {
    char theme = 'A';
    std::vector<int> path;

    /// Lexicographic by (theme, path); B3 < B3.1 < B4 < B10.
    auto operator<=>(const MotifId&) const = default;
    bool operator==(const MotifId&) const = default;

    std::string str() const;
};

/// Accepts THEME + dotted non-negative integers ("B3.1", "U10.0.1").
/// Surrounding whitespace is ignored and leading zeros are canonicalized away.
/// Throws MALFORMED_ID naming the offending substring.
MotifId parse_motif_id(std::string_view s);

std::optional<MotifId> parent_of(const MotifId& id);

struct PageRef {
    std::string edition_id;
    int volume_no = 0;
    int page_no = 0;

    bool operator==(const PageRef&) const = default;
};

struct MotifEntry {
    MotifId id;
    std::string description;
    Complexity conceptual = Complexity::Simple;
    std::optional<int> graph_node_count;
    std::vector<PageRef> page_refs;

    char theme() const noexcept { return id.theme; }
    std::optional<MotifId> parent() const { return parent_of(id); }
};

/// Conceptual complexity implied by a semantic-graph size: complex iff more than two nodes.
Complexity conceptual_from_nodes(int graph_node_count) noexcept;

class MotifIndex {
public:
    MotifIndex() = default;
    /// Validates and sorts; throws DUPLICATE_ID or LABEL_CONFLICT.
    explicit MotifIndex(std::vector<MotifEntry> entries);

    const std::vector<MotifEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    const MotifEntry* find(const MotifId& id) const;
    const MotifEntry* find(std::string_view id) const;

    /// Entries whose parent id is not itself in the index (the index is non-exhaustive).
    std::vector<MotifId> missing_parents() const;
    std::size_t count(Complexity conceptual) const;

    nlohmann::json to_json() const;

private:
    std::vector<MotifEntry> entries_;
    std::map<MotifId, std::size_t> by_id_;
};

/// CSV with header `motif_id,description,theme,conceptual,graph_node_count,page_refs`
/// (page_refs = `edition:vol:page;...`) or a JSON array with the same keys.
MotifIndex load_index(const std::filesystem::path& path);
MotifIndex parse_index_csv(std::string_view text);
MotifIndex parse_index_json(const nlohmann::json& doc);

} // namespace motifidx::motif
