#pragma once

// Page-boundary alignment between two editions of the same text: a
// synonym-aware Needleman-Wunsch over word windows, and an embedding
// sliding-window variant sharing the same incremental cursor.

#include "motifidx/corpus.hpp"
#include "motifidx/providers.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace motifidx::align {

struct ScoringScheme {
    double match_score = 1.0;
    double partial_score = 0.8;
    double mismatch_score = 0.0;
    double gap_penalty = -0.5;

    /// INVALID_CONFIG unless match >= partial >= mismatch and gap <= 0.
    void validate() const;
};

/// GAP_B aligns a token of A against a gap (consumes A only); GAP_A aligns a
/// token of B against a gap (consumes B only).
enum class OpKind { Match, Partial, Mismatch, GapA, GapB };

std::string_view to_string(OpKind k) noexcept;

struct AlignOp {
    OpKind kind = OpKind::Match;
    std::optional<std::size_t> a; ///< index into seq_a, absent for GAP_A
    std::optional<std::size_t> b; ///< index into seq_b, absent for GAP_B

    bool operator==(const AlignOp&) const = default;
};

struct Alignment {
    double score = 0.0;
    std::vector<AlignOp> ops;
};

double op_score(OpKind k, const ScoringScheme& scheme) noexcept;

double word_match_score(const corpus::Token& a, const corpus::Token& b, const corpus::LexicalResource& resource,
                        const ScoringScheme& scheme);

constexpr std::size_t kDefaultWindowBound = 512;

/// Maximum-score global alignment; ties prefer diagonal, then GAP_B, then GAP_A.
/// WINDOW_TOO_LARGE when either sequence is longer than `window_bound`.
Alignment nw_align(std::span<const corpus::Token> seq_a, std::span<const corpus::Token> seq_b,
                   const corpus::LexicalResource& resource, const ScoringScheme& scheme = {},
                   std::size_t window_bound = kDefaultWindowBound);

/// Same optimum as nw_align(...).score in linear memory, without the traceback.
double nw_score(std::span<const corpus::Token> seq_a, std::span<const corpus::Token> seq_b,
                const corpus::LexicalResource& resource, const ScoringScheme& scheme = {},
                std::size_t window_bound = kDefaultWindowBound);

// ---------------------------------------------------------------------------
// page maps

struct AlignmentEntry {
    int source_volume = 0;
    int source_page = 0;
    int target_volume = 0;
    std::size_t target_char_start = 0;
    std::size_t target_char_end = 0;
    double confidence = 0.0;

    bool operator==(const AlignmentEntry&) const = default;
};

struct AlignmentMap {
    std::vector<AlignmentEntry> entries;
    /// Set when the cursor ran off the target before every source page was
    /// placed; `entries` then stops at the failure point.
    bool exhausted = false;
    std::string failure;
};

nlohmann::json to_json(const AlignmentMap& map);
AlignmentMap alignment_map_from_json(const nlohmann::json& j);

struct CursorOptions {
    int window_words = 100;
    int stride = 10;
    /// Search horizon, in expected page lengths past the cursor.
    double horizon_pages = 5.0;
    std::size_t window_bound = kDefaultWindowBound;

    void validate() const;
};

AlignmentMap align_pages_nw(const corpus::Edition& source, const corpus::Edition& target,
                            const corpus::LexicalResource& resource, const ScoringScheme& scheme = {},
                            const CursorOptions& options = {});

/// Candidate windows are scored by cosine against the query window embedding.
AlignmentMap align_pages_embed(const corpus::Edition& source, const corpus::Edition& target,
                               EmbeddingProvider& embedder, const CursorOptions& options = {});

struct GoldPage {
    int source_volume = 0;
    int source_page = 0;
    std::size_t true_char_start = 0;
    std::size_t true_char_end = 0;
};

std::vector<GoldPage> load_gold_jsonl(const std::filesystem::path& path);

/// Fraction of gold pages whose mapped start and end both lie within
/// `tolerance_chars` of truth. Unmapped gold pages count as misses. EMPTY_GOLD.
double audit_alignment(const AlignmentMap& map, std::span<const GoldPage> gold, std::size_t tolerance_chars);

} // namespace motifidx::align
