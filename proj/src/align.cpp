#include "motifidx/align.hpp"

#include "motifidx/error.hpp"
#include "motifidx/retrieval.hpp"
#include "motifidx/util.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <unordered_map>

namespace motifidx::align {

namespace {

constexpr const char* kModule = "align";

/// Interned lemmas with their synonym closure (synonyms plus the lemma itself,
/// sorted), so the inner DP loop compares integers.
class Matcher {
public:
    explicit Matcher(const corpus::LexicalResource& resource) : resource_(resource) {}

    int intern(const std::string& lemma)
    {
        const int id = id_of(lemma);
        const auto u = static_cast<std::size_t>(id);
        if (!complete_[u]) {
            complete_[u] = true;
            std::vector<int> c{id};
            for (const auto& syn : resource_.synonyms_of_lemma(lemma)) {
                c.push_back(id_of(syn));
            }
            std::sort(c.begin(), c.end());
            c.erase(std::unique(c.begin(), c.end()), c.end());
            closures_[u] = std::move(c);
        }
        return id;
    }

    std::vector<int> intern_all(std::span<const corpus::Token> toks)
    {
        std::vector<int> out;
        out.reserve(toks.size());
        for (const auto& t : toks) {
            out.push_back(intern(t.lemma));
        }
        return out;
    }

    OpKind kind(int a, int b) const
    {
        if (a == b) {
            return OpKind::Match;
        }
        const auto& ca = closures_[static_cast<std::size_t>(a)];
        const auto& cb = closures_[static_cast<std::size_t>(b)];
        if (ca.size() == 1 && cb.size() == 1) {
            return OpKind::Mismatch;
        }
        auto i = ca.begin();
        auto j = cb.begin();
        while (i != ca.end() && j != cb.end()) {
            if (*i == *j) {
                return OpKind::Partial;
            }
            if (*i < *j) {
                ++i;
            } else {
                ++j;
            }
        }
        return OpKind::Mismatch;
    }

private:
    // Synonyms get an id so they can take part in intersections; their own
    // closure is filled in once they are interned as a text lemma.
    int id_of(const std::string& lemma)
    {
        if (auto it = ids_.find(lemma); it != ids_.end()) {
            return it->second;
        }
        const int id = static_cast<int>(closures_.size());
        ids_.emplace(lemma, id);
        closures_.push_back({id});
        complete_.push_back(false);
        return id;
    }

    const corpus::LexicalResource& resource_;
    std::unordered_map<std::string, int> ids_;
    std::vector<std::vector<int>> closures_;
    std::vector<bool> complete_;
};

void check_bound(std::size_t n, std::size_t m, std::size_t bound)
{
    if (n > bound || m > bound) {
        throw Error(kModule, Errc::WindowTooLarge,
                    "sequence lengths " + std::to_string(n) + "x" + std::to_string(m) + " exceed the window bound "
                        + std::to_string(bound));
    }
}

double score_ids(std::span<const int> a, std::span<const int> b, const Matcher& matcher, const ScoringScheme& s)
{
    std::vector<double> prev(b.size() + 1);
    std::vector<double> cur(b.size() + 1);
    prev[0] = 0.0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
        prev[j] = prev[j - 1] + s.gap_penalty;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = prev[0] + s.gap_penalty;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const double diag = prev[j - 1] + op_score(matcher.kind(a[i - 1], b[j - 1]), s);
            const double up = prev[j] + s.gap_penalty;
            const double left = cur[j - 1] + s.gap_penalty;
            cur[j] = std::max({diag, up, left});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

struct VolumeTokens {
    const corpus::Volume* volume = nullptr;
    std::vector<corpus::Token> tokens;
    std::vector<int> ids;
    std::vector<std::size_t> page_begin; ///< token index where each page starts; back() == tokens.size()

    std::size_t token_end_char(std::size_t t) const { return tokens[t].offset + tokens[t].surface.size(); }

    std::string window_text(std::size_t b, std::size_t e) const
    {
        if (b >= e) {
            return {};
        }
        return volume->full_text.substr(tokens[b].offset, token_end_char(e - 1) - tokens[b].offset);
    }
};

VolumeTokens tokenize_volume(const corpus::Volume& v, const corpus::LexicalResource& resource, Matcher* matcher)
{
    VolumeTokens vt;
    vt.volume = &v;
    vt.tokens = corpus::tokenize(v.full_text, resource);
    if (matcher) {
        vt.ids = matcher->intern_all(vt.tokens);
    }
    for (std::size_t p = 0; p < v.pages.size(); ++p) {
        const auto start = v.page_start(p);
        const auto it = std::lower_bound(vt.tokens.begin(), vt.tokens.end(), start,
                                         [](const corpus::Token& t, std::size_t off) { return t.offset < off; });
        vt.page_begin.push_back(static_cast<std::size_t>(it - vt.tokens.begin()));
    }
    vt.page_begin.push_back(vt.tokens.size());
    return vt;
}

bool is_space(char c)
{
    return c == ' ' || c == '\n' || c == '\t' || c == '\r';
}

/// Scores candidate window ends; returns one score per end, in order.
using BatchScorer = std::function<std::vector<double>(const std::vector<std::size_t>&)>;

/// Coarse scan on the stride grid, then a unit-step refinement around the
/// coarse winner. Ties go to the earliest end.
std::pair<std::size_t, double> search_window_end(std::size_t cursor, std::size_t hi, std::size_t stride,
                                                 const BatchScorer& scorer)
{
    std::map<std::size_t, double> seen;
    std::vector<std::size_t> coarse;
    for (auto e = cursor + stride; e < hi; e += stride) {
        coarse.push_back(e);
    }
    coarse.push_back(hi);
    const auto coarse_scores = scorer(coarse);
    for (std::size_t i = 0; i < coarse.size(); ++i) {
        seen[coarse[i]] = coarse_scores[i];
    }
    auto best = [&] {
        auto it = seen.begin();
        for (auto j = seen.begin(); j != seen.end(); ++j) {
            if (j->second > it->second) {
                it = j;
            }
        }
        return *it;
    };
    const auto coarse_best = best().first;
    std::vector<std::size_t> fine;
    const auto lo = std::max(cursor + 1, coarse_best + 1 > stride ? coarse_best + 1 - stride : cursor + 1);
    const auto up = std::min(hi, coarse_best + stride - 1);
    for (auto e = lo; e <= up; ++e) {
        if (!seen.contains(e)) {
            fine.push_back(e);
        }
    }
    if (!fine.empty()) {
        const auto fine_scores = scorer(fine);
        for (std::size_t i = 0; i < fine.size(); ++i) {
            seen[fine[i]] = fine_scores[i];
        }
    }
    return best();
}

/// Callback building the scorer for one source page: (query token range, target tokens).
using ScorerFactory = std::function<BatchScorer(const VolumeTokens& src, std::size_t qb, std::size_t qe,
                                                const VolumeTokens& tgt, std::size_t window)>;

/// The incremental cursor procedure shared by both methods. Returns false on exhaustion.
bool align_volume(const VolumeTokens& src, const VolumeTokens& tgt, int target_volume_no, const CursorOptions& opt,
                  bool clamp_confidence_by_query, const ScorerFactory& factory, AlignmentMap& out)
{
    const auto W = static_cast<std::size_t>(opt.window_words);
    const auto stride = static_cast<std::size_t>(opt.stride);
    const auto N = tgt.tokens.size();
    const double ratio = src.tokens.empty() ? 1.0
                                            : static_cast<double>(N) / static_cast<double>(src.tokens.size());
    const auto& text = tgt.volume->full_text;
    std::size_t cursor = 0;
    std::size_t prev_end = 0;
    for (std::size_t p = 0; p < src.volume->pages.size(); ++p) {
        AlignmentEntry entry;
        entry.source_volume = src.volume->volume_no;
        entry.source_page = src.volume->pages[p].page_no;
        entry.target_volume = target_volume_no;
        auto start = prev_end;
        while (start < text.size() && is_space(text[start])) {
            ++start;
        }
        const auto pb = src.page_begin[p];
        const auto pe = src.page_begin[p + 1];
        if (pb == pe) {
            // a page without words keeps an empty span at the cursor
            entry.target_char_start = entry.target_char_end = std::max(prev_end, std::min(start, text.size()));
            out.entries.push_back(entry);
            continue;
        }
        if (cursor >= N) {
            out.exhausted = true;
            out.failure = "source volume " + std::to_string(entry.source_volume) + " page "
                          + std::to_string(entry.source_page) + ": cursor reached the end of target volume "
                          + std::to_string(target_volume_no);
            return false;
        }
        const auto qb = pe > W ? pe - W : 0;
        const double expected = static_cast<double>(pe - pb) * ratio;
        const auto horizon = std::max<std::size_t>(stride, static_cast<std::size_t>(std::ceil(opt.horizon_pages * expected)));
        const auto hi = std::min(N, cursor + horizon);
        const auto [e, score] = search_window_end(cursor, hi, stride, factory(src, qb, pe, tgt, W));

        auto end = e < N ? tgt.tokens[e].offset : text.size();
        while (end > start && is_space(text[end - 1])) {
            --end;
        }
        entry.target_char_start = start;
        entry.target_char_end = std::max(start, end);
        const double norm = clamp_confidence_by_query ? static_cast<double>(pe - qb) : 1.0;
        entry.confidence = std::clamp(score / norm, 0.0, 1.0);
        out.entries.push_back(entry);
        cursor = e;
        prev_end = entry.target_char_end;
    }
    return true;
}

AlignmentMap align_editions(const corpus::Edition& source, const corpus::Edition& target,
                            const corpus::LexicalResource& resource, Matcher* matcher, bool normalize_by_query,
                            const CursorOptions& options, const ScorerFactory& factory)
{
    options.validate();
    std::map<int, const corpus::Volume*> targets;
    for (const auto& v : target.volumes) {
        targets[v.volume_no] = &v;
    }
    AlignmentMap out;
    for (const auto& sv : source.volumes) {
        const auto it = targets.find(sv.volume_no);
        if (it == targets.end()) {
            throw Error(kModule, Errc::InvalidInput,
                        "target edition has no volume " + std::to_string(sv.volume_no));
        }
        const auto src = tokenize_volume(sv, resource, matcher);
        const auto tgt = tokenize_volume(*it->second, resource, matcher);
        if (!align_volume(src, tgt, it->second->volume_no, options, normalize_by_query, factory, out)) {
            break;
        }
    }
    return out;
}

} // namespace

void ScoringScheme::validate() const
{
    const bool finite = std::isfinite(match_score) && std::isfinite(partial_score) && std::isfinite(mismatch_score)
                        && std::isfinite(gap_penalty);
    if (!finite || !(match_score >= partial_score && partial_score >= mismatch_score) || gap_penalty > 0) {
        throw Error(kModule, Errc::InvalidConfig,
                    "scoring scheme needs match >= partial >= mismatch and gap_penalty <= 0");
    }
}

void CursorOptions::validate() const
{
    if (window_words < 10) {
        throw Error(kModule, Errc::InvalidConfig, "window_words must be at least 10");
    }
    if (static_cast<std::size_t>(window_words) > window_bound) {
        throw Error(kModule, Errc::WindowTooLarge,
                    "window_words " + std::to_string(window_words) + " exceeds the window bound "
                        + std::to_string(window_bound));
    }
    if (stride < 1) {
        throw Error(kModule, Errc::InvalidConfig, "stride must be positive");
    }
    if (!(horizon_pages > 0) || !std::isfinite(horizon_pages)) {
        throw Error(kModule, Errc::InvalidConfig, "horizon_pages must be positive");
    }
}

std::string_view to_string(OpKind k) noexcept
{
    switch (k) {
    case OpKind::Match: return "MATCH";
    case OpKind::Partial: return "PARTIAL";
    case OpKind::Mismatch: return "MISMATCH";
    case OpKind::GapA: return "GAP_A";
    case OpKind::GapB: return "GAP_B";
    }
    return "MATCH";
}

double op_score(OpKind k, const ScoringScheme& scheme) noexcept
{
    switch (k) {
    case OpKind::Match: return scheme.match_score;
    case OpKind::Partial: return scheme.partial_score;
    case OpKind::Mismatch: return scheme.mismatch_score;
    case OpKind::GapA:
    case OpKind::GapB: return scheme.gap_penalty;
    }
    return 0.0;
}

double word_match_score(const corpus::Token& a, const corpus::Token& b, const corpus::LexicalResource& resource,
                        const ScoringScheme& scheme)
{
    Matcher m(resource);
    const int ia = m.intern(a.lemma);
    const int ib = m.intern(b.lemma);
    return op_score(m.kind(ia, ib), scheme);
}

Alignment nw_align(std::span<const corpus::Token> seq_a, std::span<const corpus::Token> seq_b,
                   const corpus::LexicalResource& resource, const ScoringScheme& scheme, std::size_t window_bound)
{
    scheme.validate();
    check_bound(seq_a.size(), seq_b.size(), window_bound);
    Matcher matcher(resource);
    const auto a = matcher.intern_all(seq_a);
    const auto b = matcher.intern_all(seq_b);
    const auto n = a.size();
    const auto m = b.size();
    const auto cols = m + 1;
    std::vector<double> h((n + 1) * cols);
    // 0 diagonal, 1 GAP_B (up), 2 GAP_A (left)
    std::vector<unsigned char> dir((n + 1) * cols, 0);
    std::vector<OpKind> diag_kind((n + 1) * cols, OpKind::Match);
    for (std::size_t j = 1; j <= m; ++j) {
        h[j] = h[j - 1] + scheme.gap_penalty;
        dir[j] = 2;
    }
    for (std::size_t i = 1; i <= n; ++i) {
        h[i * cols] = h[(i - 1) * cols] + scheme.gap_penalty;
        dir[i * cols] = 1;
        for (std::size_t j = 1; j <= m; ++j) {
            const auto kind = matcher.kind(a[i - 1], b[j - 1]);
            const double diag = h[(i - 1) * cols + j - 1] + op_score(kind, scheme);
            const double up = h[(i - 1) * cols + j] + scheme.gap_penalty;
            const double left = h[i * cols + j - 1] + scheme.gap_penalty;
            auto& cell = h[i * cols + j];
            if (diag >= up && diag >= left) {
                cell = diag;
                dir[i * cols + j] = 0;
                diag_kind[i * cols + j] = kind;
            } else if (up >= left) {
                cell = up;
                dir[i * cols + j] = 1;
            } else {
                cell = left;
                dir[i * cols + j] = 2;
            }
        }
    }
    Alignment out;
    out.score = h[n * cols + m];
    std::size_t i = n;
    std::size_t j = m;
    while (i > 0 || j > 0) {
        const auto d = dir[i * cols + j];
        if (d == 0) {
            out.ops.push_back({diag_kind[i * cols + j], i - 1, j - 1});
            --i;
            --j;
        } else if (d == 1) {
            out.ops.push_back({OpKind::GapB, i - 1, std::nullopt});
            --i;
        } else {
            out.ops.push_back({OpKind::GapA, std::nullopt, j - 1});
            --j;
        }
    }
    std::reverse(out.ops.begin(), out.ops.end());
    return out;
}

double nw_score(std::span<const corpus::Token> seq_a, std::span<const corpus::Token> seq_b,
                const corpus::LexicalResource& resource, const ScoringScheme& scheme, std::size_t window_bound)
{
    scheme.validate();
    check_bound(seq_a.size(), seq_b.size(), window_bound);
    Matcher matcher(resource);
    const auto a = matcher.intern_all(seq_a);
    const auto b = matcher.intern_all(seq_b);
    return score_ids(a, b, matcher, scheme);
}

nlohmann::json to_json(const AlignmentMap& map)
{
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : map.entries) {
        entries.push_back({{"source_volume", e.source_volume},
                           {"source_page", e.source_page},
                           {"target_volume", e.target_volume},
                           {"target_char_start", e.target_char_start},
                           {"target_char_end", e.target_char_end},
                           {"confidence", e.confidence}});
    }
    return entries;
}

AlignmentMap alignment_map_from_json(const nlohmann::json& j)
{
    AlignmentMap map;
    try {
        const auto& arr = j.is_object() ? j.at("entries") : j;
        for (const auto& e : arr) {
            map.entries.push_back({e.at("source_volume").get<int>(), e.at("source_page").get<int>(),
                                   e.at("target_volume").get<int>(), e.at("target_char_start").get<std::size_t>(),
                                   e.at("target_char_end").get<std::size_t>(), e.at("confidence").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(kModule, Errc::InvalidInput, std::string("malformed alignment map: ") + e.what());
    }
    return map;
}

AlignmentMap align_pages_nw(const corpus::Edition& source, const corpus::Edition& target,
                            const corpus::LexicalResource& resource, const ScoringScheme& scheme,
                            const CursorOptions& options)
{
    scheme.validate();
    Matcher matcher(resource);
    const ScorerFactory factory = [&](const VolumeTokens& src, std::size_t qb, std::size_t qe, const VolumeTokens& tgt,
                                      std::size_t window) -> BatchScorer {
        const std::span<const int> query(src.ids.data() + qb, qe - qb);
        return [&, query, window](const std::vector<std::size_t>& ends) {
            std::vector<double> scores;
            scores.reserve(ends.size());
            for (auto e : ends) {
                const auto b = e > window ? e - window : 0;
                scores.push_back(score_ids(query, std::span<const int>(tgt.ids.data() + b, e - b), matcher, scheme));
            }
            return scores;
        };
    };
    return align_editions(source, target, resource, &matcher, true, options, factory);
}

AlignmentMap align_pages_embed(const corpus::Edition& source, const corpus::Edition& target,
                               EmbeddingProvider& embedder, const CursorOptions& options)
{
    static const corpus::LexicalResource no_lemmas;
    const ScorerFactory factory = [&](const VolumeTokens& src, std::size_t qb, std::size_t qe, const VolumeTokens& tgt,
                                      std::size_t window) -> BatchScorer {
        const std::vector<std::string> query_text{src.window_text(qb, qe)};
        auto query_vec = embedder.embed(query_text);
        if (query_vec.size() != 1) {
            throw Error(kModule, Errc::SchemaViolation, "embedder returned the wrong number of vectors");
        }
        return [&, q = std::move(query_vec.front()), window](const std::vector<std::size_t>& ends) {
            std::vector<std::string> texts;
            texts.reserve(ends.size());
            for (auto e : ends) {
                texts.push_back(tgt.window_text(e > window ? e - window : 0, e));
            }
            const auto vecs = embedder.embed(texts);
            if (vecs.size() != texts.size()) {
                throw Error(kModule, Errc::SchemaViolation, "embedder returned the wrong number of vectors");
            }
            std::vector<double> scores;
            scores.reserve(vecs.size());
            for (const auto& v : vecs) {
                // a zero vector carries no evidence; rank it below everything
                scores.push_back(v.is_zero() || q.is_zero() ? -1.0 : retrieval::cosine(q, v));
            }
            return scores;
        };
    };
    return align_editions(source, target, no_lemmas, nullptr, false, options, factory);
}

std::vector<GoldPage> load_gold_jsonl(const std::filesystem::path& path)
{
    std::vector<GoldPage> gold;
    for (const auto& row : util::read_jsonl(path)) {
        try {
            gold.push_back({row.at("source_volume").get<int>(), row.at("source_page").get<int>(),
                            row.at("true_char_start").get<std::size_t>(), row.at("true_char_end").get<std::size_t>()});
        } catch (const nlohmann::json::exception& e) {
            throw Error(kModule, Errc::InvalidInput, path.string() + ": " + e.what());
        }
    }
    return gold;
}

double audit_alignment(const AlignmentMap& map, std::span<const GoldPage> gold, std::size_t tolerance_chars)
{
    if (gold.empty()) {
        throw Error(kModule, Errc::EmptyGold, "audit needs at least one gold page");
    }
    std::map<std::pair<int, int>, const AlignmentEntry*> by_page;
    for (const auto& e : map.entries) {
        by_page.emplace(std::pair{e.source_volume, e.source_page}, &e);
    }
    auto near = [tolerance_chars](std::size_t x, std::size_t y) { return (x > y ? x - y : y - x) <= tolerance_chars; };
    std::size_t hits = 0;
    for (const auto& g : gold) {
        const auto it = by_page.find({g.source_volume, g.source_page});
        if (it != by_page.end() && near(it->second->target_char_start, g.true_char_start)
            && near(it->second->target_char_end, g.true_char_end)) {
            ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(gold.size());
}

} // namespace motifidx::align
