#include "motifidx/classifiers.hpp"
#include "motifidx/error.hpp"
#include "motifidx/providers.hpp"
#include "motifidx/util.hpp"

#include <set>

namespace motifidx {

namespace {

std::set<std::string> lemma_set(std::string_view text, const corpus::LexicalResource& resource)
{
    std::set<std::string> out;
    for (const auto& tok : corpus::tokenize(corpus::normalize(text), resource)) {
        out.insert(tok.lemma);
    }
    return out;
}

} // namespace

BagOfLemmaEmbedder::BagOfLemmaEmbedder(std::shared_ptr<const corpus::LexicalResource> resource, std::size_t dim,
                                       std::string provider_id)
    : resource_(std::move(resource)), dim_(dim), id_(std::move(provider_id))
{
    if (!resource_) {
        resource_ = std::make_shared<corpus::LexicalResource>();
    }
    if (dim_ == 0) {
        throw Error("gateway", Errc::InvalidConfig, "mock embedder dim must be positive");
    }
}

std::vector<EmbeddingVector> BagOfLemmaEmbedder::embed(std::span<const std::string> texts)
{
    ++calls_;
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        EmbeddingVector v;
        v.values.assign(dim_, 0.0);
        for (const auto& tok : corpus::tokenize(corpus::normalize(text), *resource_)) {
            v.values[util::fnv1a64(tok.lemma) % dim_] += 1.0;
        }
        out.push_back(std::move(v));
    }
    return out;
}

LemmaOverlapScorer::LemmaOverlapScorer(std::shared_ptr<const corpus::LexicalResource> resource,
                                       std::string provider_id)
    : resource_(std::move(resource)), id_(std::move(provider_id))
{
    if (!resource_) {
        resource_ = std::make_shared<corpus::LexicalResource>();
    }
}

std::vector<PairScore> LemmaOverlapScorer::score(std::span<const TextPair> pairs)
{
    std::vector<PairScore> out;
    out.reserve(pairs.size());
    for (const auto& [motif, sentence] : pairs) {
        const auto wanted = lemma_set(motif, *resource_);
        const auto have = lemma_set(sentence, *resource_);
        std::size_t hits = 0;
        for (const auto& l : wanted) {
            hits += have.contains(l) ? 1 : 0;
        }
        PairScore ps;
        ps.label = hits > 0;
        ps.score = wanted.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(wanted.size());
        out.push_back(ps);
    }
    return out;
}

ScriptedPairScorer::ScriptedPairScorer(Fn fn, std::string provider_id) : fn_(std::move(fn)), id_(std::move(provider_id)) {}

std::vector<PairScore> ScriptedPairScorer::score(std::span<const TextPair> pairs)
{
    std::vector<PairScore> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) {
        out.push_back(fn_(p));
    }
    return out;
}

ScriptedGenerator::ScriptedGenerator(std::map<TextPair, std::string> table, std::optional<std::string> fallback,
                                     std::string provider_id)
    : table_(std::move(table)), fallback_(std::move(fallback)), id_(std::move(provider_id))
{}

std::string ScriptedGenerator::generate(const PromptBundle& prompt)
{
    ++calls_;
    const auto query = classify::extract_query(prompt);
    if (query) {
        if (auto it = table_.find(*query); it != table_.end()) {
            return it->second;
        }
    }
    if (fallback_) {
        return *fallback_;
    }
    throw Error("gateway", Errc::ProviderError, id_ + ": no scripted answer for the queried pair");
}

LemmaOverlapGenerator::LemmaOverlapGenerator(std::shared_ptr<const corpus::LexicalResource> resource,
                                             std::string provider_id)
    : scorer_(std::move(resource), provider_id), id_(std::move(provider_id))
{}

std::string LemmaOverlapGenerator::generate(const PromptBundle& prompt)
{
    const auto query = classify::extract_query(prompt);
    if (!query) {
        throw Error("gateway", Errc::ProviderError, id_ + ": prompt has no Motif/Sentence query");
    }
    const TextPair pair = *query;
    return scorer_.score(std::span<const TextPair>(&pair, 1)).front().label ? "Yes" : "No";
}

} // namespace motifidx
