#pragma once

// Project configuration and the lazily loaded pipeline state the CLI and the
// REST service share: editions, sentences, index, lexicon, providers.

#include "motifidx/align.hpp"
#include "motifidx/annotation_store.hpp"
#include "motifidx/classifiers.hpp"
#include "motifidx/corpus.hpp"
#include "motifidx/motif_index.hpp"
#include "motifidx/providers.hpp"
#include "motifidx/retrieval.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace motifidx::gateway {

/// Provider id that always resolves to the deterministic in-process mocks.
inline constexpr const char* kMockProvider = "mock";

/// A JSON document; relative paths resolve against the config file's directory.
///
///   editions   {manifest, source, target, corpus}   edition ids in the manifest
///   sentences  pre-segmented JSONL (else the corpus edition is segmented)
///   index, lexicon, shots
///   scoring    {match, partial, mismatch, gap}
///   bm25       {k1, b}
///   retrieval  {lexical_cap, semantic_cap, semantic_provider}
///   alignment  {window_words, stride, horizon_pages, window_bound}
///   thresholds [{provider_id, threshold, provenance?, fine_tuned?}]
///   seeds      {resample, split}
///   providers  [{kind, provider_id, base_url, timeout_ms, max_in_flight, max_retries}]
///   store      {log}
///   service    {host, port, bearer_token}
///   mock       {dim}
///
/// Environment overrides: MOTIFIDX_PROVIDER_<ID>_URL, MOTIFIDX_PROVIDER_<ID>_TOKEN
/// (ID upper-cased, non-alphanumerics as '_') and MOTIFIDX_SERVICE_TOKEN.
struct ProjectConfig {
    std::filesystem::path base_dir;

    std::optional<std::filesystem::path> manifest;
    std::string source_edition;
    std::string target_edition;
    std::string corpus_edition;
    std::optional<std::filesystem::path> sentences;
    std::optional<std::filesystem::path> index;
    std::optional<std::filesystem::path> lexicon;
    std::optional<std::filesystem::path> shots;

    align::ScoringScheme scoring;
    align::CursorOptions alignment;
    retrieval::Bm25Params bm25;
    std::size_t lexical_cap = 100;
    std::size_t semantic_cap = 100;
    std::string semantic_provider; ///< empty: lexical stage only

    /// Published operating points, overlaid by configured entries.
    std::vector<classify::ThresholdModel> thresholds;
    std::uint64_t resample_seed = 0;
    std::uint64_t split_seed = 0;
    std::vector<ProviderConfig> providers;
    std::size_t mock_dim = 1024;

    std::optional<std::filesystem::path> store_log;
    std::string service_host = "127.0.0.1";
    int service_port = 8080;
    std::string service_token;

    /// INVALID_CONFIG for unknown kinds, bad values, or missing files.
    static ProjectConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir);
    static ProjectConfig load(const std::filesystem::path& path);

    /// Echo for reports: thresholds, BM25 params, caps, seeds.
    nlohmann::json echo() const;

    const ProviderConfig* provider(ProviderKind kind, const std::string& provider_id) const;
    /// INVALID_CONFIG when no threshold is known for the provider.
    const classify::ThresholdModel& threshold_for(const std::string& provider_id) const;
};

void apply_env_overrides(ProjectConfig& config);

/// Loads each input the first time it is asked for. Thread-safe.
class Project {
public:
    explicit Project(ProjectConfig config);

    const ProjectConfig& config() const noexcept { return config_; }

    std::shared_ptr<const corpus::LexicalResource> lexicon();
    const std::vector<corpus::Edition>& editions();
    /// INVALID_CONFIG when the id is not in the manifest.
    const corpus::Edition& edition(const std::string& edition_id);
    const std::vector<corpus::SentenceRecord>& sentences();
    const motif::MotifIndex& index();
    const retrieval::InvertedIndex& inverted_index();
    std::vector<classify::FewShotExample> shots();

    std::shared_ptr<EmbeddingProvider> embedder(const std::string& provider_id);
    std::shared_ptr<PairScorerProvider> scorer(const std::string& provider_id);
    std::shared_ptr<GenerationProvider> generator(const std::string& provider_id);

    /// Lexical top-k plus, when `semantic_provider` is set, semantic top-k;
    /// UNKNOWN_REFERENCE for a motif id outside the index.
    retrieval::CandidateSet retrieve(const std::string& motif_id, const std::string& semantic_provider);

    /// Catalog of the index and sentences, for the annotation store.
    annotation::Catalog catalog();
    /// The store behind the configured log (in memory when none is configured).
    std::shared_ptr<annotation::AnnotationStore> store();

    /// Text of a sentence; UNKNOWN_REFERENCE.
    const corpus::SentenceRecord& sentence(const std::string& sentence_id);
    /// Joins a pair to its motif description and sentence text; UNKNOWN_REFERENCE.
    classify::ClassificationPair classification_pair(const PairId& pair);

private:
    const ProviderConfig& require_provider(ProviderKind kind, const std::string& provider_id) const;

    ProjectConfig config_;
    std::recursive_mutex mutex_;
    std::shared_ptr<const corpus::LexicalResource> lexicon_;
    std::optional<std::vector<corpus::Edition>> editions_;
    std::optional<std::vector<corpus::SentenceRecord>> sentences_;
    std::map<std::string, std::size_t> sentence_by_id_;
    std::optional<motif::MotifIndex> index_;
    std::optional<retrieval::InvertedIndex> inverted_;
    std::map<std::string, std::shared_ptr<EmbeddingProvider>> embedders_;
    std::map<std::string, std::shared_ptr<PairScorerProvider>> scorers_;
    std::map<std::string, std::shared_ptr<GenerationProvider>> generators_;
    std::map<std::string, std::vector<retrieval::SentenceVector>> sentence_vectors_;
    std::shared_ptr<annotation::AnnotationStore> store_;
};

enum class ClassifyMethod { Rerank, Threshold, ZeroShot, FewShot };

/// "rerank", "threshold", "zero-shot", "few-shot".
std::optional<ClassifyMethod> parse_classify_method(std::string_view s) noexcept;
std::string_view to_string(ClassifyMethod m) noexcept;

struct ClassifyRun {
    std::vector<classify::Verdict> verdicts;
    std::vector<classify::PairFailure> failures;
};

/// Threshold runs use `threshold` when given, else the configured table.
ClassifyRun run_classification(Project& project, ClassifyMethod method, const std::string& provider_id,
                               std::span<const PairId> pairs,
                               std::optional<classify::ThresholdModel> threshold = std::nullopt);

nlohmann::json to_json(const classify::PairFailure& f);

struct Calibration {
    classify::ThresholdModel model;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    double positive_mean = 0.0;
    double negative_mean = 0.0;

    nlohmann::json to_json() const;
};

/// Midpoint threshold from the labeled pairs whose motif is in `motifs`
/// (every motif when empty), pooled across motifs.
Calibration calibrate(Project& project, const std::string& provider_id, std::span<const metrics::LabeledPair> labeled,
                      const std::set<std::string>& motifs = {});

/// Shots file: JSON array of {motif_description, positive_sentence, negative_sentence}.
std::vector<classify::FewShotExample> load_shots(const std::filesystem::path& path);

} // namespace motifidx::gateway
