#pragma once

// Evaluation arithmetic: P/R/F1, stage recall, Cohen's kappa, balanced
// resampling, motif-disjoint splits and the conceptual x expression grid.

#include "motifidx/classifiers.hpp"
#include "motifidx/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace motifidx::metrics {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    ConfusionCounts& operator+=(const ConfusionCounts& o);
    bool operator==(const ConfusionCounts&) const = default;
};

/// 0/0 yields 0; the flags record where that convention applied.
struct Prf1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

Prf1 prf1(const ConfusionCounts& c);
/// Harmonic mean of p and r, 0 when both are 0.
double f1_score(double precision, double recall);

/// |retrieved ∩ gold| / |gold|; EMPTY_GOLD.
double stage_recall(const std::set<std::string>& retrieved, const std::set<std::string>& gold);

struct Kappa {
    double value = 0.0;
    /// Chance agreement of 1 (both raters constant and equal); value is then 1.
    bool degenerate = false;
    double observed = 0.0;
    double expected = 0.0;
};

/// LENGTH_MISMATCH for unequal or empty lists.
Kappa cohens_kappa(std::span<const Label> a, std::span<const Label> b);

struct LabeledPair {
    std::string motif_id;
    std::string sentence_id;
    Label label = Label::Negative;
    std::optional<Complexity> expression; ///< annotated expression of a positive

    PairId pair() const { return {motif_id, sentence_id}; }
};

/// Keeps every positive and samples as many negatives per motif, without
/// replacement. Output is grouped by motif id, positives first, each group in
/// input order. INSUFFICIENT_NEGATIVES lists every offending motif.
std::vector<LabeledPair> resample_balanced(std::span<const LabeledPair> pairs, std::uint64_t seed);

/// (conceptual, expression)
using CellKey = std::pair<Complexity, Complexity>;

struct MotifCell {
    std::string motif_id;
    Complexity conceptual = Complexity::Simple;
    Complexity expression = Complexity::Simple;
};

struct SplitTargets {
    std::size_t train = 0;
    std::size_t val = 0;
    std::size_t test = 0;

    std::size_t total() const noexcept { return train + val + test; }
};

struct SplitSpec {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
    std::uint64_t seed = 0;
};

/// Published per-cell targets; they sum to 140/30/30.
const std::map<CellKey, SplitTargets>& published_split_targets();

/// Seeded stratified draw per cell. INFEASIBLE_TARGETS when a cell's targets
/// do not sum to its population. Split lists come back sorted.
SplitSpec split_by_motif(std::span<const MotifCell> motifs, const std::map<CellKey, SplitTargets>& targets,
                         std::uint64_t seed);

nlohmann::json to_json(const SplitSpec& s);

// ---------------------------------------------------------------------------
// grid report

enum class Axis { Simple, Complex, Overall };
std::string_view to_string(Axis a) noexcept;
Axis axis_of(Complexity c) noexcept;

struct GridCell {
    ConfusionCounts counts;
    Prf1 scores;
};

struct GridReport {
    std::string method_id;
    /// (conceptual, expression) -> cell, including the OVERALL margins.
    std::map<std::pair<Axis, Axis>, GridCell> cells;

    const GridCell& at(Axis conceptual, Axis expression) const { return cells.at({conceptual, expression}); }
    nlohmann::json to_json() const;
    /// Three rows (conceptual) by three columns (expression) of P/R/F1.
    std::string render_table() const;
};

using PairLabels = std::unordered_map<PairId, Label, PairIdHash>;
using PairComplexity = std::unordered_map<PairId, Complexity, PairIdHash>;

/// Pools confusion counts per cell; OVERALL margins pool their component
/// counts. MISSING_LABEL names the first verdict lacking gold or a category,
/// and is also raised for an empty verdict list.
GridReport grid_report(std::string method_id, std::span<const classify::Verdict> verdicts, const PairLabels& gold,
                       const PairComplexity& expression_labels,
                       const std::map<std::string, Complexity>& conceptual_labels);

// ---------------------------------------------------------------------------
// published score tables

/// One printed (precision, recall, f1) cell, values kept as printed.
struct ReportedRow {
    std::string method;
    std::string conceptual;
    std::string expression;
    std::string precision;
    std::string recall;
    std::string f1;
};

/// CSV `method,conceptual,expression,precision,recall,f1`.
std::vector<ReportedRow> parse_reported_rows(std::string_view csv_text);

struct RowCheck {
    ReportedRow row;
    /// Empty when the row passed the sanity precheck.
    std::string excluded_because;
    double f1_recomputed = 0.0;
    double f1_error = 0.0;
};

/// Sanity precheck, then F1 recomputed from the row's own precision and recall.
/// A row is excluded when a value is not a two-decimal number in [0,1], when
/// no values consistent with two-decimal rounding satisfy the harmonic-mean
/// identity, or when an OVERALL cell duplicates one component cell while the
/// other component differs (a copied cell).
std::vector<RowCheck> check_reported_rows(std::span<const ReportedRow> rows);

} // namespace motifidx::metrics
