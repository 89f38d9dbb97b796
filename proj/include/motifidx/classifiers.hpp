#pragma once

// Yes/No verdicts for sentence-motif pairs: pair-scorer reranking,
// embedding-threshold classification, and prompted generation.

#include "motifidx/error.hpp"
#include "motifidx/providers.hpp"
#include "motifidx/types.hpp"

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace motifidx::classify {

enum class Method { Rerank, Threshold, Generative };

std::string_view to_string(Method m) noexcept;
std::optional<Method> parse_method(std::string_view s) noexcept;

struct Verdict {
    std::string motif_id;
    std::string sentence_id;
    Label label = Label::Negative;
    Method method = Method::Rerank;
    std::optional<double> score;
    std::optional<std::string> raw;

    PairId pair() const { return {motif_id, sentence_id}; }
};

nlohmann::json to_json(const Verdict& v);
Verdict verdict_from_json(const nlohmann::json& j);

/// A pair to classify, carrying the texts the backends need.
struct ClassificationPair {
    std::string motif_id;
    std::string sentence_id;
    std::string motif_description;
    std::string sentence_text;
};

struct BatchOptions {
    std::size_t batch_size = 32;
    std::size_t max_in_flight = 8;
};

/// One verdict per pair, in input order. A failing batch raises PROVIDER_ERROR
/// naming its batch index; no partial result is returned.
std::vector<Verdict> rerank(std::span<const ClassificationPair> pairs, PairScorerProvider& scorer,
                            const BatchOptions& options = {});

// ---------------------------------------------------------------------------
// threshold classification

enum class ThresholdProvenance { Published, LocallyCalibrated, Configured };

std::string_view to_string(ThresholdProvenance p) noexcept;
std::optional<ThresholdProvenance> parse_provenance(std::string_view s) noexcept;

struct ThresholdModel {
    std::string provider_id;
    double threshold = 0.0;
    ThresholdProvenance provenance = ThresholdProvenance::Configured;
    bool fine_tuned = false;
};

/// Published operating points of the five off-the-shelf and two fine-tuned embedders.
const std::vector<ThresholdModel>& published_thresholds();

/// Midpoint of the positive and negative mean similarities, pooled across motifs.
/// Throws EMPTY_CALIBRATION_SET naming the empty side.
double calibrate_threshold(std::span<const double> pos_sims, std::span<const double> neg_sims);

/// POSITIVE iff similarity >= threshold.
Label threshold_classify(double similarity, const ThresholdModel& model) noexcept;

/// Cosine similarity of each (description, sentence) embedding pair, in input order.
std::vector<double> pair_similarities(std::span<const ClassificationPair> pairs, EmbeddingProvider& embedder);

std::vector<Verdict> threshold_classify_pairs(std::span<const ClassificationPair> pairs, EmbeddingProvider& embedder,
                                              const ThresholdModel& model);

// ---------------------------------------------------------------------------
// prompts

struct FewShotExample {
    std::string motif_description;
    std::string positive_sentence;
    std::string negative_sentence;
};

/// The four shots (Mermaid; Barber as know-all expert; Blind promise of
/// immunity; Adam created from clay) in prompt order.
const std::vector<FewShotExample>& reference_shots();

extern const char* const kSystemPrompt;

/// Single left-to-right pass: substituted values are never re-scanned.
std::string substitute(std::string_view tmpl, std::span<const std::pair<std::string, std::string>> bindings);

PromptBundle build_zero_shot_prompt(std::string_view motif_description, std::string_view sentence_text);
/// Throws EMPTY_SHOTS for an empty shot list.
PromptBundle build_few_shot_prompt(std::span<const FewShotExample> shots, std::string_view motif_description,
                                   std::string_view sentence_text);

/// Reads the motif and sentence of the final query block back out of a prompt.
std::optional<TextPair> extract_query(const PromptBundle& prompt);

/// Case-insensitive, whitespace-trimmed "yes"/"no". Throws UNPARSEABLE_VERDICT.
Label parse_verdict(std::string_view raw);
/// "Yes" or "No".
std::string render_verdict(Label label);

struct ZeroShot {};
struct FewShot {
    std::vector<FewShotExample> shots;
};
using PromptMode = std::variant<ZeroShot, FewShot>;

struct PairFailure {
    std::size_t index;
    PairId pair;
    std::string code; ///< module-qualified, e.g. classifiers.UNPARSEABLE_VERDICT
    std::string message;
    std::optional<std::string> raw;
};

struct GenerativeRun {
    std::vector<Verdict> verdicts; ///< successful pairs, input order
    std::vector<PairFailure> failures;
};

/// Failures are collected per pair and the run continues.
GenerativeRun generative_classify(std::span<const ClassificationPair> pairs, const PromptMode& mode,
                                  GenerationProvider& generator, std::size_t max_in_flight = 8);

} // namespace motifidx::classify
