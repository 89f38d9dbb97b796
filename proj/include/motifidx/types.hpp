#pragma once

#include <compare>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace motifidx {

enum class Label { Positive, Negative };
enum class Complexity { Simple, Complex };

std::string_view to_string(Label label) noexcept;
std::string_view to_string(Complexity c) noexcept;
/// Accepts "POSITIVE"/"NEGATIVE" (any case) and "yes"/"no", "true"/"false".
std::optional<Label> parse_label(std::string_view s) noexcept;
std::optional<Complexity> parse_complexity(std::string_view s) noexcept;

/// (motif, sentence) key shared by retrieval, classification, annotation and metrics.
struct PairId {
    std::string motif_id;
    std::string sentence_id;

    auto operator<=>(const PairId&) const = default;
    bool operator==(const PairId&) const = default;

    /// "motif_id:sentence_id"; motif ids never contain ':'.
    std::string key() const { return motif_id + ":" + sentence_id; }
    static std::optional<PairId> from_key(std::string_view key);
};

struct PairIdHash {
    std::size_t operator()(const PairId& p) const noexcept
    {
        std::size_t h = std::hash<std::string>{}(p.motif_id);
        return h ^ (std::hash<std::string>{}(p.sentence_id) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    }
};

} // namespace motifidx
