#pragma once

// Machine-in-the-loop annotation: a candidate queue, batch assignment with a
// double-annotated subset, label records, disagreements and adjudication.
//
// State is an append-only JSONL log (record_type enqueue | assign | label |
// adjudicate) replayed on open; the in-memory view is derived from it.
// Mutations serialize on one writer lock; reads share it.

#include "motifidx/corpus.hpp"
#include "motifidx/metrics.hpp"
#include "motifidx/motif_index.hpp"
#include "motifidx/types.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <tuple>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace motifidx::annotation {

struct AnnotationRecord {
    PairId pair;
    std::string annotator_id;
    Label label = Label::Negative;
    std::optional<Complexity> expression; ///< required iff POSITIVE
    bool flagged = false;
    std::string timestamp;

    bool operator==(const AnnotationRecord&) const = default;
};

nlohmann::json to_json(const AnnotationRecord& r);
/// INVALID_INPUT (schema) for malformed bodies; domain checks happen in the store.
AnnotationRecord record_from_json(const nlohmann::json& j);

struct Batch {
    std::string batch_id;
    std::string annotator_id;
    std::vector<PairId> pairs;
    std::vector<PairId> double_subset;
};

nlohmann::json to_json(const Batch& b);

struct Adjudication {
    PairId pair;
    Label final_label = Label::Negative;
    std::optional<Complexity> final_expression;
    std::string resolver_id;
    std::string note;
    std::string timestamp;

    bool operator==(const Adjudication&) const = default;
};

nlohmann::json to_json(const Adjudication& a);
/// final_expression, resolver_id and note are optional keys; INVALID_INPUT.
Adjudication adjudication_from_json(const nlohmann::json& j);

/// Pair of an object carrying motif_id/sentence_id or pair_id ([m, s] or "m:s").
PairId pair_from_json(const nlohmann::json& j);

struct Disagreement {
    PairId pair;
    std::vector<AnnotationRecord> records;
};

struct GoldLabel {
    Label label = Label::Negative;
    std::optional<Complexity> expression;

    bool operator==(const GoldLabel&) const = default;
};

struct MotifCounts {
    std::size_t positives = 0;
    std::size_t negatives = 0;

    bool operator==(const MotifCounts&) const = default;
};

/// Bookkeeping totals. `annotated_pairs` counts distinct pairs with at least
/// one record; positives/negatives count gold labels, so an unresolved
/// conflict is annotated but in neither column.
struct Accounting {
    std::size_t annotated_pairs = 0;
    std::size_t unique_sentences = 0;
    std::size_t records = 0;
    std::size_t double_annotated = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::size_t unresolved = 0;
    std::size_t adjudicated = 0;
    std::size_t queued = 0; ///< enqueued, never assigned
    std::map<std::string, MotifCounts> per_motif;

    bool operator==(const Accounting&) const = default;
    nlohmann::json to_json() const;
};

/// Motifs and sentences the store may reference, in document order.
struct Catalog {
    struct Motif {
        std::string description;
        Complexity conceptual = Complexity::Simple;
        /// Motif-level expression category when known up front; otherwise
        /// derived from annotations (COMPLEX iff any positive is complex).
        std::optional<Complexity> expression;
    };
    struct Sentence {
        std::string sentence_id;
        int volume_no = 0;
        std::string text;
    };

    std::map<std::string, Motif> motifs;
    std::vector<Sentence> sentences;

    static Catalog from(const motif::MotifIndex& index, std::span<const corpus::SentenceRecord> sentences);
    void add_sentence(Sentence s);
    std::optional<std::size_t> sentence_index(const std::string& sentence_id) const;

private:
    std::unordered_map<std::string, std::size_t> by_id_;
};

struct ContextView {
    PairId pair;
    std::string motif_description;
    Catalog::Sentence sentence;
    std::vector<Catalog::Sentence> before; ///< document order
    std::vector<Catalog::Sentence> after;

    nlohmann::json to_json() const;
};

struct KappaCell {
    std::size_t pairs = 0;
    std::optional<metrics::Kappa> kappa;
};

/// Kappa over double-annotated pairs by (conceptual, motif expression), with
/// OVERALL margins.
struct AgreementGrid {
    std::map<std::pair<metrics::Axis, metrics::Axis>, KappaCell> cells;

    nlohmann::json to_json() const;
};

struct StoreOptions {
    /// Record log; absent keeps the store in memory only.
    std::optional<std::filesystem::path> log_path;
    /// Timestamp source for records that arrive without one.
    std::function<std::string()> clock;
};

std::string utc_timestamp();

class AnnotationStore {
public:
    explicit AnnotationStore(Catalog catalog, StoreOptions options = {});
    ~AnnotationStore();
    AnnotationStore(const AnnotationStore&) = delete;
    AnnotationStore& operator=(const AnnotationStore&) = delete;

    /// Already-queued pairs are skipped; UNKNOWN_REFERENCE rejects
    /// the whole call before anything is added.
    std::size_t enqueue_candidates(std::span<const PairId> pairs, int priority = 0);

    /// round(size * double_rate) pairs assigned to exactly one other annotator
    /// (oldest assignment first), then fresh pairs by priority and arrival,
    /// topping up from either pool when the other runs short. EMPTY_QUEUE.
    Batch next_batch(const std::string& annotator_id, std::size_t size = 1500, double double_rate = 0.5);

    /// NOT_ASSIGNED, DUPLICATE_RECORD, MISSING_EXPRESSION; an expression on a
    /// negative is INVALID_INPUT.
    AnnotationRecord record_label(AnnotationRecord record);

    /// Pairs with two conflicting records (label or expression) and no adjudication.
    std::vector<Disagreement> disagreements() const;
    /// Unadjudicated pairs carrying a flagged record.
    std::vector<PairId> flagged() const;

    /// NOT_IN_QUEUE unless the pair is in conflict or flagged and not yet adjudicated.
    Adjudication adjudicate(const PairId& pair, Label final_label, std::optional<Complexity> final_expression,
                            const std::string& resolver_id, const std::string& note = "");

    /// Adjudication > agreeing double records > single record.
    std::map<PairId, GoldLabel> gold() const;
    /// Gold in the shape the metrics module consumes, ordered by pair.
    std::vector<metrics::LabeledPair> export_gold() const;

    Accounting accounting() const;
    AgreementGrid agreement() const;
    /// UNKNOWN_REFERENCE for pairs outside the catalog.
    ContextView context(const PairId& pair, std::size_t radius = 2) const;

    /// Assigned to this annotator and not yet labeled by them, in assignment order.
    std::vector<PairId> pending(const std::string& annotator_id) const;
    std::vector<AnnotationRecord> records() const;
    std::vector<Batch> batches() const;
    /// Motif-level expression category used for agreement and grid reports.
    std::optional<Complexity> motif_expression(const std::string& motif_id) const;

    const Catalog& catalog() const noexcept { return catalog_; }
    /// Canonical JSON of the full derived state, for comparisons.
    nlohmann::json state_json() const;

private:
    struct PairState {
        PairId id;
        int priority = 0;
        std::uint64_t seq = 0;
        std::vector<std::string> assignees;
        std::uint64_t assign_seq = 0; ///< order of first assignment
        std::vector<AnnotationRecord> records;
        std::optional<Adjudication> adjudication;

        bool conflicting() const;
        bool has_flag() const;
    };

    std::size_t apply_enqueue(std::span<const PairId> pairs, int priority);
    void apply_assign(const Batch& batch);
    void apply_label(const AnnotationRecord& r);
    void apply_adjudicate(const Adjudication& a);
    void validate_label(const AnnotationRecord& r) const;
    void validate_reference(const PairId& p) const;
    void append(const nlohmann::json& row);
    void replay(const std::filesystem::path& path);
    std::string now() const;
    std::optional<Complexity> motif_expression_locked(const std::string& motif_id) const;
    std::map<PairId, GoldLabel> gold_locked() const;

    Catalog catalog_;
    StoreOptions options_;
    mutable std::shared_mutex mutex_;
    std::ofstream log_;

    std::vector<PairState> pairs_;
    std::unordered_map<PairId, std::size_t, PairIdHash> index_;
    /// (-priority, seq) -> pair index, for never-assigned pairs
    std::set<std::tuple<int, std::uint64_t, std::size_t>> fresh_;
    /// (assign_seq, pair index) for pairs with exactly one assignee
    std::set<std::pair<std::uint64_t, std::size_t>> singles_;
    std::uint64_t enqueue_seq_ = 0;
    std::uint64_t assign_seq_ = 0;
    std::vector<Batch> batches_;
    std::vector<std::pair<std::size_t, std::size_t>> record_order_; ///< (pair index, record slot)
};

} // namespace motifidx::annotation
