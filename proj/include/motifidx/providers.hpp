#pragma once

// Model backends behind abstract interfaces. Real backends speak the JSON
// wire protocol over HTTP (/v1/embed, /v1/score, /v1/generate); the mocks
// implement the same contracts deterministically for tests and offline runs.

#include "motifidx/corpus.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace motifidx {

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }
    bool is_zero() const noexcept;
};

/// Decoding constants for generative classification. They are not settable.
struct Decoding {
    static constexpr double temperature = 0.0;
    static constexpr int max_new_tokens = 1;
};

struct PromptBundle {
    std::string system;
    std::string user;
    Decoding decoding;

    bool operator==(const PromptBundle& o) const { return system == o.system && user == o.user; }
};

struct PairScore {
    bool label = false;
    std::optional<double> score;
};

using TextPair = std::pair<std::string, std::string>; ///< (motif description, sentence text)

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual const std::string& provider_id() const = 0;
    /// One vector per input text, all of the provider's dimension.
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
};

class PairScorerProvider {
public:
    virtual ~PairScorerProvider() = default;
    virtual const std::string& provider_id() const = 0;
    virtual std::vector<PairScore> score(std::span<const TextPair> pairs) = 0;
};

class GenerationProvider {
public:
    virtual ~GenerationProvider() = default;
    virtual const std::string& provider_id() const = 0;
    virtual std::string generate(const PromptBundle& prompt) = 0;
};

// ---------------------------------------------------------------------------
// HTTP clients

enum class ProviderKind { Embed, PairScore, Generate };

std::string_view to_string(ProviderKind kind) noexcept;
std::optional<ProviderKind> parse_provider_kind(std::string_view s) noexcept;

struct ProviderConfig {
    ProviderKind kind = ProviderKind::Embed;
    std::string provider_id;
    std::string base_url; ///< scheme://host:port[/prefix]
    int timeout_ms = 30000;
    int max_in_flight = 8;
    int max_retries = 2; ///< transport-level retries, same idempotency key
    std::string bearer_token;

    void validate() const;
};

/// Shared transport: POSTs JSON with an Idempotency-Key per logical request,
/// retries only on transport failures, maps failures to PROVIDER_TIMEOUT,
/// TRANSPORT or PROVIDER_ERROR (non-2xx), and rejects non-JSON bodies with
/// SCHEMA_VIOLATION.
class HttpTransport {
public:
    explicit HttpTransport(ProviderConfig config);
    ~HttpTransport();
    HttpTransport(const HttpTransport&) = delete;
    HttpTransport& operator=(const HttpTransport&) = delete;

    const ProviderConfig& config() const noexcept { return config_; }
    std::string next_request_id();
    /// Returns the parsed response body.
    std::string post_json(const std::string& route, const std::string& body, const std::string& request_id);

private:
    ProviderConfig config_;
    std::string host_;
    std::string prefix_;
    std::atomic<std::uint64_t> counter_{0};
};

class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(ProviderConfig config);
    const std::string& provider_id() const override { return transport_.config().provider_id; }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

private:
    HttpTransport transport_;
    std::mutex dim_mutex_;
    std::optional<std::size_t> session_dim_;
};

class HttpPairScorer final : public PairScorerProvider {
public:
    explicit HttpPairScorer(ProviderConfig config);
    const std::string& provider_id() const override { return transport_.config().provider_id; }
    std::vector<PairScore> score(std::span<const TextPair> pairs) override;

private:
    HttpTransport transport_;
};

class HttpGenerator final : public GenerationProvider {
public:
    explicit HttpGenerator(ProviderConfig config);
    const std::string& provider_id() const override { return transport_.config().provider_id; }
    std::string generate(const PromptBundle& prompt) override;

private:
    HttpTransport transport_;
};

// Wire-format helpers, shared by the clients and by test backends.
std::string embed_request_json(std::span<const std::string> texts);
std::vector<EmbeddingVector> parse_embed_response(const std::string& body, std::size_t expected_count);
std::string score_request_json(std::span<const TextPair> pairs);
std::vector<PairScore> parse_score_response(const std::string& body, std::size_t expected_count);
std::string generate_request_json(const PromptBundle& prompt);
std::string parse_generate_response(const std::string& body);

// ---------------------------------------------------------------------------
// Mocks

/// Bag-of-lemma count vectors hashed into `dim` buckets.
class BagOfLemmaEmbedder final : public EmbeddingProvider {
public:
    explicit BagOfLemmaEmbedder(std::shared_ptr<const corpus::LexicalResource> resource, std::size_t dim = 1024,
                                std::string provider_id = "mock");
    const std::string& provider_id() const override { return id_; }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
    std::size_t calls() const noexcept { return calls_; }

private:
    std::shared_ptr<const corpus::LexicalResource> resource_;
    std::size_t dim_;
    std::string id_;
    std::atomic<std::size_t> calls_{0};
};

/// Positive iff the sentence contains any lemma of the motif description.
/// The score is the fraction of distinct description lemmas present.
class LemmaOverlapScorer final : public PairScorerProvider {
public:
    explicit LemmaOverlapScorer(std::shared_ptr<const corpus::LexicalResource> resource,
                                std::string provider_id = "mock");
    const std::string& provider_id() const override { return id_; }
    std::vector<PairScore> score(std::span<const TextPair> pairs) override;

private:
    std::shared_ptr<const corpus::LexicalResource> resource_;
    std::string id_;
};

/// Scores through a caller-supplied predicate.
class ScriptedPairScorer final : public PairScorerProvider {
public:
    using Fn = std::function<PairScore(const TextPair&)>;
    explicit ScriptedPairScorer(Fn fn, std::string provider_id = "scripted");
    const std::string& provider_id() const override { return id_; }
    std::vector<PairScore> score(std::span<const TextPair> pairs) override;

private:
    Fn fn_;
    std::string id_;
};

/// Answers from a (motif, sentence) lookup table, reading both back out of the
/// prompt's final Motif/Sentence lines. Unknown pairs answer `fallback`, or
/// raise PROVIDER_ERROR when no fallback is set.
class ScriptedGenerator final : public GenerationProvider {
public:
    explicit ScriptedGenerator(std::map<TextPair, std::string> table,
                               std::optional<std::string> fallback = std::nullopt,
                               std::string provider_id = "scripted");
    const std::string& provider_id() const override { return id_; }
    std::string generate(const PromptBundle& prompt) override;
    std::size_t calls() const noexcept { return calls_; }

private:
    std::map<TextPair, std::string> table_;
    std::optional<std::string> fallback_;
    std::string id_;
    std::atomic<std::size_t> calls_{0};
};

/// "Yes" iff the queried sentence shares a lemma with the queried motif.
class LemmaOverlapGenerator final : public GenerationProvider {
public:
    explicit LemmaOverlapGenerator(std::shared_ptr<const corpus::LexicalResource> resource,
                                   std::string provider_id = "mock");
    const std::string& provider_id() const override { return id_; }
    std::string generate(const PromptBundle& prompt) override;

private:
    LemmaOverlapScorer scorer_;
    std::string id_;
};

} // namespace motifidx
