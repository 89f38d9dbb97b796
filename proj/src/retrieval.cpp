#include "motifidx/retrieval.hpp"

#include "motifidx/error.hpp"
#include "motifidx/util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace motifidx::retrieval {

namespace {

constexpr const char* kModule = "retrieval";

std::vector<std::string> distinct_sorted(std::span<const std::string> lemmas)
{
    std::vector<std::string> out(lemmas.begin(), lemmas.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool ranks_before(const Scored& a, const Scored& b)
{
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.sentence_id < b.sentence_id;
}

} // namespace

void Bm25Params::validate() const
{
    if (!(k1 > 0.0) || !std::isfinite(k1)) {
        throw Error(kModule, Errc::InvalidConfig, "bm25 k1 must be positive");
    }
    if (!(b >= 0.0 && b <= 1.0)) {
        throw Error(kModule, Errc::InvalidConfig, "bm25 b must lie in [0,1]");
    }
}

InvertedIndex InvertedIndex::build(std::span<const corpus::SentenceRecord> sentences, Bm25Params params)
{
    params.validate();
    if (sentences.empty()) {
        throw Error(kModule, Errc::EmptyCorpus, "cannot index an empty corpus");
    }
    std::vector<std::size_t> order(sentences.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return sentences[a].sentence_id < sentences[b].sentence_id; });

    InvertedIndex idx;
    idx.params_ = params;
    idx.sentence_ids_.reserve(sentences.size());
    idx.doc_lengths_.reserve(sentences.size());
    double total = 0.0;
    for (std::size_t d = 0; d < order.size(); ++d) {
        const auto& s = sentences[order[d]];
        const auto doc = static_cast<std::uint32_t>(d);
        if (!idx.doc_by_id_.emplace(s.sentence_id, doc).second) {
            throw Error(kModule, Errc::InvalidInput, "duplicate sentence_id " + s.sentence_id);
        }
        idx.sentence_ids_.push_back(s.sentence_id);
        idx.doc_lengths_.push_back(static_cast<std::uint32_t>(s.tokens.size()));
        total += static_cast<double>(s.tokens.size());
        std::map<std::string_view, std::uint32_t> tf;
        for (const auto& tok : s.tokens) {
            ++tf[tok.lemma];
        }
        // docs are visited in ascending order, so postings stay sorted
        for (const auto& [lemma, count] : tf) {
            idx.postings_[std::string(lemma)].push_back({doc, count});
        }
    }
    idx.avg_doc_length_ = total / static_cast<double>(sentences.size());
    return idx;
}

std::optional<std::uint32_t> InvertedIndex::doc_of(std::string_view sentence_id) const
{
    const auto it = doc_by_id_.find(std::string(sentence_id));
    if (it == doc_by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t InvertedIndex::doc_length(std::string_view sentence_id) const
{
    const auto doc = doc_of(sentence_id);
    if (!doc) {
        throw Error(kModule, Errc::UnknownSentence, "unknown sentence " + std::string(sentence_id));
    }
    return doc_lengths_[*doc];
}

const std::vector<InvertedIndex::Posting>* InvertedIndex::postings(std::string_view lemma) const
{
    const auto it = postings_.find(std::string(lemma));
    return it == postings_.end() ? nullptr : &it->second;
}

std::size_t InvertedIndex::document_frequency(std::string_view lemma) const
{
    const auto* p = postings(lemma);
    return p ? p->size() : 0;
}

double InvertedIndex::idf(std::string_view lemma) const
{
    const auto n = static_cast<double>(doc_count());
    const auto df = static_cast<double>(document_frequency(lemma));
    return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double InvertedIndex::bm25_score(std::span<const std::string> query_lemmas, std::string_view sentence_id) const
{
    const auto doc = doc_of(sentence_id);
    if (!doc) {
        throw Error(kModule, Errc::UnknownSentence, "unknown sentence " + std::string(sentence_id));
    }
    const double len_norm = avg_doc_length_ > 0 ? doc_lengths_[*doc] / avg_doc_length_ : 0.0;
    double score = 0.0;
    for (const auto& lemma : distinct_sorted(query_lemmas)) {
        const auto* plist = postings(lemma);
        if (!plist) {
            continue;
        }
        const auto it = std::lower_bound(plist->begin(), plist->end(), *doc,
                                         [](const Posting& p, std::uint32_t d) { return p.doc < d; });
        if (it == plist->end() || it->doc != *doc) {
            continue;
        }
        const double tf = it->tf;
        score += idf(lemma) * tf * (params_.k1 + 1.0) / (tf + params_.k1 * (1.0 - params_.b + params_.b * len_norm));
    }
    return score;
}

RankedList InvertedIndex::retrieve(std::span<const std::string> query_lemmas, std::size_t k) const
{
    if (k == 0) {
        throw Error(kModule, Errc::InvalidInput, "k must be at least 1");
    }
    std::vector<double> acc(doc_count(), 0.0);
    std::vector<std::uint32_t> touched;
    for (const auto& lemma : distinct_sorted(query_lemmas)) {
        const auto* plist = postings(lemma);
        if (!plist) {
            continue;
        }
        const double w = idf(lemma);
        for (const auto& p : *plist) {
            const double len_norm = avg_doc_length_ > 0 ? doc_lengths_[p.doc] / avg_doc_length_ : 0.0;
            const double tf = p.tf;
            if (acc[p.doc] == 0.0) {
                touched.push_back(p.doc);
            }
            acc[p.doc] += w * tf * (params_.k1 + 1.0) / (tf + params_.k1 * (1.0 - params_.b + params_.b * len_norm));
        }
    }
    RankedList out;
    out.reserve(touched.size());
    for (auto d : touched) {
        if (acc[d] > 0.0) {
            out.push_back({sentence_ids_[d], acc[d]});
        }
    }
    const auto keep = std::min(k, out.size());
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(), ranks_before);
    out.resize(keep);
    return out;
}

std::vector<std::string> query_lemmas(std::string_view text, const corpus::LexicalResource& resource)
{
    std::vector<std::string> out;
    for (auto& tok : corpus::tokenize(corpus::normalize(text), resource)) {
        out.push_back(std::move(tok.lemma));
    }
    return out;
}

RankedList lexical_retrieve(const InvertedIndex& index, std::string_view motif_description,
                            const corpus::LexicalResource& resource, std::size_t k)
{
    const auto lemmas = query_lemmas(motif_description, resource);
    return index.retrieve(lemmas, k);
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v)
{
    if (u.dim() != v.dim()) {
        throw Error(kModule, Errc::DimMismatch,
                    "cosine of vectors with dims " + std::to_string(u.dim()) + " and " + std::to_string(v.dim()));
    }
    double dot = 0.0;
    double nu = 0.0;
    double nv = 0.0;
    for (std::size_t i = 0; i < u.dim(); ++i) {
        dot += u.values[i] * v.values[i];
        nu += u.values[i] * u.values[i];
        nv += v.values[i] * v.values[i];
    }
    if (nu == 0.0 || nv == 0.0) {
        throw Error(kModule, Errc::ZeroVector, "cosine of a zero vector is undefined");
    }
    const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::clamp(c, -1.0, 1.0);
}

RankedList semantic_retrieve(std::span<const SentenceVector> sentence_vectors, const EmbeddingVector& motif_vector,
                             std::size_t k)
{
    if (k == 0) {
        throw Error(kModule, Errc::InvalidInput, "k must be at least 1");
    }
    if (motif_vector.is_zero()) {
        throw Error(kModule, Errc::ZeroVector, "motif vector is zero");
    }
    RankedList out;
    out.reserve(sentence_vectors.size());
    for (const auto& sv : sentence_vectors) {
        if (sv.vector.dim() != motif_vector.dim()) {
            throw Error(kModule, Errc::DimMismatch,
                        sv.sentence_id + " has dim " + std::to_string(sv.vector.dim()) + ", motif has "
                            + std::to_string(motif_vector.dim()));
        }
        if (sv.vector.is_zero()) {
            continue;
        }
        out.push_back({sv.sentence_id, cosine(sv.vector, motif_vector)});
    }
    const auto keep = std::min(k, out.size());
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(), ranks_before);
    out.resize(keep);
    return out;
}

std::string_view to_string(Stage s) noexcept
{
    switch (s) {
    case Stage::Lex: return "lex";
    case Stage::Sem: return "sem";
    case Stage::Both: return "both";
    }
    return "lex";
}

std::vector<MergedCandidate> merge_candidates(const RankedList& lex, const RankedList& sem)
{
    std::vector<MergedCandidate> out;
    out.reserve(lex.size() + sem.size());
    std::unordered_map<std::string, std::size_t> pos;
    for (const auto& s : lex) {
        if (pos.contains(s.sentence_id)) {
            continue;
        }
        pos.emplace(s.sentence_id, out.size());
        out.push_back({s.sentence_id, Stage::Lex, s.score, std::nullopt});
    }
    for (const auto& s : sem) {
        if (auto it = pos.find(s.sentence_id); it != pos.end()) {
            auto& m = out[it->second];
            if (!m.sem_score) {
                m.stage = m.lex_score ? Stage::Both : Stage::Sem;
                m.sem_score = s.score;
            }
            continue;
        }
        pos.emplace(s.sentence_id, out.size());
        out.push_back({s.sentence_id, Stage::Sem, std::nullopt, s.score});
    }
    return out;
}

std::vector<nlohmann::json> export_rows(const CandidateSet& set)
{
    std::vector<nlohmann::json> rows;
    rows.reserve(set.merged.size());
    for (const auto& m : set.merged) {
        rows.push_back({{"motif_id", set.motif_id},
                        {"sentence_id", m.sentence_id},
                        {"stage", to_string(m.stage)},
                        {"lex_score", m.lex_score ? nlohmann::json(*m.lex_score) : nlohmann::json()},
                        {"sem_score", m.sem_score ? nlohmann::json(*m.sem_score) : nlohmann::json()}});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// embedding cache

std::string EmbeddingCache::content_key(std::string_view text)
{
    return util::hex64(util::fnv1a64(text));
}

const EmbeddingVector* EmbeddingCache::find(std::string_view text) const
{
    const auto it = entries_.find(content_key(text));
    return it == entries_.end() ? nullptr : &it->second;
}

void EmbeddingCache::put(std::string_view text, EmbeddingVector v)
{
    if (dim_ && *dim_ != v.dim()) {
        throw Error(kModule, Errc::DimMismatch,
                    provider_id_ + " cache holds dim " + std::to_string(*dim_) + ", got " + std::to_string(v.dim()));
    }
    dim_ = v.dim();
    entries_[content_key(text)] = std::move(v);
}

EmbeddingCache EmbeddingCache::load(const std::filesystem::path& path)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(util::read_file(path));
        EmbeddingCache cache(doc.at("provider_id").get<std::string>());
        const auto dim = doc.at("dim").get<std::size_t>();
        const auto count = doc.at("count").get<std::size_t>();
        const auto& entries = doc.at("entries");
        if (entries.size() != count) {
            throw Error(kModule, Errc::InvalidInput, path.string() + ": header count differs from entries");
        }
        for (const auto& [key, values] : entries.items()) {
            EmbeddingVector v{values.get<std::vector<double>>()};
            if (v.dim() != dim) {
                throw Error(kModule, Errc::DimMismatch, path.string() + ": entry " + key + " has the wrong dim");
            }
            cache.entries_[key] = std::move(v);
        }
        if (count > 0 || dim > 0) {
            cache.dim_ = dim;
        }
        return cache;
    } catch (const nlohmann::json::exception& e) {
        throw Error(kModule, Errc::InvalidInput, path.string() + ": " + e.what());
    }
}

void EmbeddingCache::save(const std::filesystem::path& path) const
{
    nlohmann::json entries = nlohmann::json::object();
    for (const auto& [key, v] : entries_) {
        entries[key] = v.values;
    }
    const nlohmann::json doc = {
        {"provider_id", provider_id_}, {"dim", dim_.value_or(0)}, {"count", entries_.size()}, {"entries", entries}};
    util::write_file(path, doc.dump());
}

CachedEmbedder::CachedEmbedder(EmbeddingProvider& inner, EmbeddingCache& cache, std::size_t batch_size,
                               std::size_t max_in_flight)
    : inner_(inner), cache_(cache), batch_size_(std::max<std::size_t>(1, batch_size)),
      max_in_flight_(std::max<std::size_t>(1, max_in_flight))
{}

std::vector<EmbeddingVector> CachedEmbedder::embed(std::span<const std::string> texts)
{
    std::vector<std::string> missing;
    std::set<std::string> queued;
    for (const auto& t : texts) {
        if (!cache_.find(t) && queued.insert(t).second) {
            missing.push_back(t);
        }
    }
    const std::size_t batches = (missing.size() + batch_size_ - 1) / batch_size_;
    std::vector<std::vector<EmbeddingVector>> results(batches);
    const auto errors = util::parallel_for(batches, max_in_flight_, [&](std::size_t b) {
        const auto begin = b * batch_size_;
        const auto end = std::min(missing.size(), begin + batch_size_);
        results[b] = inner_.embed(std::span<const std::string>(missing.data() + begin, end - begin));
        if (results[b].size() != end - begin) {
            throw Error(kModule, Errc::SchemaViolation, "provider returned the wrong number of vectors");
        }
    });
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t i = 0; i < results[b].size(); ++i) {
            cache_.put(missing[b * batch_size_ + i], std::move(results[b][i]));
        }
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        out.push_back(*cache_.find(t));
    }
    return out;
}

std::vector<SentenceVector> embed_sentences(std::span<const corpus::SentenceRecord> sentences,
                                            EmbeddingProvider& embedder)
{
    std::vector<std::string> texts;
    texts.reserve(sentences.size());
    for (const auto& s : sentences) {
        texts.push_back(s.text);
    }
    auto vectors = embedder.embed(texts);
    if (vectors.size() != texts.size()) {
        throw Error(kModule, Errc::SchemaViolation, "provider returned the wrong number of vectors");
    }
    std::vector<SentenceVector> out;
    out.reserve(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        out.push_back({sentences[i].sentence_id, std::move(vectors[i])});
    }
    return out;
}

} // namespace motifidx::retrieval
