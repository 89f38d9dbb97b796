#pragma once

// Candidate generation: Okapi BM25 over sentence lemmas and exact cosine
// search over sentence embeddings, merged into one deduplicated candidate list.

#include "motifidx/corpus.hpp"
#include "motifidx/providers.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace motifidx::retrieval {

struct Bm25Params {
    double k1 = 1.5;
    double b = 0.75;

    void validate() const;
};

struct Scored {
    std::string sentence_id;
    double score = 0.0;

    bool operator==(const Scored&) const = default;
};

using RankedList = std::vector<Scored>;

class InvertedIndex {
public:
    struct Posting {
        std::uint32_t doc; ///< dense document number; ascending doc == ascending sentence_id
        std::uint32_t tf;
    };

    /// Throws EMPTY_CORPUS for an empty sentence list.
    static InvertedIndex build(std::span<const corpus::SentenceRecord> sentences, Bm25Params params = {});

    const Bm25Params& params() const noexcept { return params_; }
    std::size_t doc_count() const noexcept { return sentence_ids_.size(); }
    double avg_doc_length() const noexcept { return avg_doc_length_; }
    std::size_t doc_length(std::string_view sentence_id) const;
    /// Number of documents containing `lemma`.
    std::size_t document_frequency(std::string_view lemma) const;
    const std::vector<Posting>* postings(std::string_view lemma) const;
    const std::string& sentence_id(std::uint32_t doc) const { return sentence_ids_[doc]; }
    std::optional<std::uint32_t> doc_of(std::string_view sentence_id) const;

    double idf(std::string_view lemma) const;

    /// Okapi BM25 of the distinct query lemmas; throws UNKNOWN_SENTENCE.
    double bm25_score(std::span<const std::string> query_lemmas, std::string_view sentence_id) const;

    /// Top-k by score, ties by ascending sentence_id; only nonzero scores.
    RankedList retrieve(std::span<const std::string> query_lemmas, std::size_t k) const;

private:
    Bm25Params params_;
    std::vector<std::string> sentence_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    double avg_doc_length_ = 0.0;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::unordered_map<std::string, std::uint32_t> doc_by_id_;
};

/// Lemmas of a text after normalization, in order (duplicates kept).
std::vector<std::string> query_lemmas(std::string_view text, const corpus::LexicalResource& resource);

RankedList lexical_retrieve(const InvertedIndex& index, std::string_view motif_description,
                            const corpus::LexicalResource& resource, std::size_t k = 100);

/// dot(u,v)/(|u||v|); throws DIM_MISMATCH or ZERO_VECTOR.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

struct SentenceVector {
    std::string sentence_id;
    EmbeddingVector vector;
};

/// Exact top-k by cosine, ties by ascending sentence_id. Zero sentence vectors
/// are never retrieved; a zero motif vector raises ZERO_VECTOR.
RankedList semantic_retrieve(std::span<const SentenceVector> sentence_vectors, const EmbeddingVector& motif_vector,
                             std::size_t k = 100);

enum class Stage { Lex, Sem, Both };
std::string_view to_string(Stage s) noexcept;

struct MergedCandidate {
    std::string sentence_id;
    Stage stage = Stage::Lex;
    std::optional<double> lex_score;
    std::optional<double> sem_score;
};

struct CandidateSet {
    std::string motif_id;
    RankedList lexical;
    RankedList semantic;
    std::vector<MergedCandidate> merged;
};

/// Union in lexical order then semantic-only order, each sentence once.
std::vector<MergedCandidate> merge_candidates(const RankedList& lex, const RankedList& sem);

/// JSONL rows {motif_id, sentence_id, stage, lex_score, sem_score}.
std::vector<nlohmann::json> export_rows(const CandidateSet& set);

// ---------------------------------------------------------------------------
// embedding cache

/// Vectors keyed by content hash for one provider, persisted as JSON with a
/// header {provider_id, dim, count}.
class EmbeddingCache {
public:
    explicit EmbeddingCache(std::string provider_id) : provider_id_(std::move(provider_id)) {}

    static EmbeddingCache load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    static std::string content_key(std::string_view text);

    const std::string& provider_id() const noexcept { return provider_id_; }
    std::optional<std::size_t> dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return entries_.size(); }

    const EmbeddingVector* find(std::string_view text) const;
    /// Throws DIM_MISMATCH when the vector disagrees with the cached dim.
    void put(std::string_view text, EmbeddingVector v);

private:
    std::string provider_id_;
    std::optional<std::size_t> dim_;
    std::map<std::string, EmbeddingVector> entries_;
};

/// Wraps a provider with a cache; misses are embedded in batches with at most
/// `max_in_flight` concurrent requests and reassembled in input order.
class CachedEmbedder final : public EmbeddingProvider {
public:
    CachedEmbedder(EmbeddingProvider& inner, EmbeddingCache& cache, std::size_t batch_size = 64,
                   std::size_t max_in_flight = 8);

    const std::string& provider_id() const override { return inner_.provider_id(); }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

private:
    EmbeddingProvider& inner_;
    EmbeddingCache& cache_;
    std::size_t batch_size_;
    std::size_t max_in_flight_;
};

/// Embeds every sentence text through `embedder`.
std::vector<SentenceVector> embed_sentences(std::span<const corpus::SentenceRecord> sentences,
                                            EmbeddingProvider& embedder);

} // namespace motifidx::retrieval
