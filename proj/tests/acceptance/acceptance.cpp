// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.
// Every provider is an in-process mock.

#include "motifidx/align.hpp"
#include "motifidx/annotation_store.hpp"
#include "motifidx/classifiers.hpp"
#include "motifidx/error.hpp"
#include "motifidx/metrics.hpp"
#include "motifidx/project.hpp"
#include "motifidx/providers.hpp"
#include "motifidx/retrieval.hpp"
#include "motifidx/util.hpp"
#include "support.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

using namespace motifidx;

namespace {

// Tolerances.
constexpr long kBoundaryTokens = 10;
constexpr double kBm25Tolerance = 1e-9;
constexpr double kKappaTolerance = 1e-9;
constexpr double kF1Tolerance = 0.01;
constexpr double kFloatTolerance = 1e-12;

struct Checks {
    std::size_t total = 0;
    std::vector<std::string> failures;

    void expect(bool ok, const std::string& what)
    {
        ++total;
        if (!ok) {
            failures.push_back(what);
        }
    }
};

std::string joined(const std::vector<std::string>& words)
{
    std::string out;
    for (const auto& w : words) {
        out += (out.empty() ? "" : " ") + w;
    }
    return out;
}

template <class T>
std::string str(const T& v)
{
    std::ostringstream os;
    os << v;
    return os.str();
}

using Criterion = std::function<std::string(Checks&)>;

bool run(const std::string& name, const Criterion& fn)
{
    Checks checks;
    std::string detail;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        detail = fn(checks);
    } catch (const std::exception& e) {
        checks.failures.push_back(std::string("uncaught: ") + e.what());
    }
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    const bool ok = checks.failures.empty();
    std::cout << (ok ? "PASS " : "FAIL ") << name << " [" << checks.total << " checks, " << ms.count() << " ms]";
    if (ok) {
        std::cout << " " << detail << "\n";
    } else {
        std::cout << " " << checks.failures.size() << " failed; first: " << checks.failures.front() << "\n";
    }
    return ok;
}

// ---------------------------------------------------------------------------
// alignment

std::shared_ptr<corpus::LexicalResource> alphabet_resource(bool with_synonyms)
{
    auto res = std::make_shared<corpus::LexicalResource>();
    if (with_synonyms) {
        const std::vector<std::string> w{"w"};
        const std::vector<std::string> x{"x"};
        res->add("w", w, x);
        res->add("x", x, w);
    }
    return res;
}

std::string alignment_oracle(Checks& c)
{
    static const char* alphabet[] = {"w", "x", "y", "z"};
    std::mt19937_64 rng(2024);
    const align::ScoringScheme scheme;
    std::size_t cases = 0;
    for (bool syn : {false, true}) {
        const auto res = alphabet_resource(syn);
        auto check = [&](const std::vector<std::string>& wa, const std::vector<std::string>& wb) {
            const auto a = support::tokens_of(wa, *res);
            const auto b = support::tokens_of(wb, *res);
            const auto al = align::nw_align(a, b, *res, scheme);
            const double brute = support::brute_force_nw(a, b, *res, scheme);
            const auto label = joined(wa) + " | " + joined(wb) + (syn ? " (syn)" : "");
            c.expect(al.score == brute, "score " + str(al.score) + " != brute " + str(brute) + " for " + label);
            std::vector<corpus::Token> ra;
            std::vector<corpus::Token> rb;
            for (const auto& op : al.ops) {
                if (op.a) {
                    ra.push_back(a[*op.a]);
                }
                if (op.b) {
                    rb.push_back(b[*op.b]);
                }
            }
            c.expect(ra == a && rb == b, "replay differs for " + label);
            ++cases;
        };
        // every pair up to length 2, then random pairs up to length 6
        std::vector<std::vector<std::string>> small{{}};
        for (const char* x : alphabet) {
            small.push_back({x});
            for (const char* y : alphabet) {
                small.push_back({x, y});
            }
        }
        for (const auto& a : small) {
            for (const auto& b : small) {
                check(a, b);
            }
        }
        for (int i = 0; i < 4600; ++i) {
            auto draw = [&] {
                std::vector<std::string> w(util::uniform_below(rng, 7));
                for (auto& s : w) {
                    s = alphabet[util::uniform_below(rng, 4)];
                }
                return w;
            };
            check(draw(), draw());
        }
    }
    return str(cases) + " pairs, exact equality with exhaustive maximum";
}

std::string synthetic_alignment(Checks& c)
{
    long worst_nw = 0;
    long worst_embed = 0;
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    for (const auto seed : seeds) {
        const auto eds = support::make_synthetic_editions(seed, 20, 0.2);
        c.expect(eds.substituted * 10 >= eds.words, "substitution share below 10% for seed " + str(seed));
        BagOfLemmaEmbedder embedder(eds.lexicon);
        const std::vector<std::pair<std::string, align::AlignmentMap>> maps{
            {"nw", align::align_pages_nw(eds.source, eds.target, *eds.lexicon)},
            {"embed", align::align_pages_embed(eds.source, eds.target, embedder)}};
        for (const auto& [method, map] : maps) {
            c.expect(!map.exhausted, method + " exhausted on seed " + str(seed) + ": " + map.failure);
            c.expect(map.entries.size() == 20, method + " placed " + str(map.entries.size()) + " pages");
            std::size_t within = 0;
            for (std::size_t k = 0; k < map.entries.size() && k < eds.source_page_ends.size(); ++k) {
                const auto tok = static_cast<long>(support::target_token_at(eds, map.entries[k].target_char_end));
                const long err = std::abs(tok - static_cast<long>(eds.source_page_ends[k]));
                (method == "nw" ? worst_nw : worst_embed) = std::max(method == "nw" ? worst_nw : worst_embed, err);
                within += err <= kBoundaryTokens ? 1 : 0;
                c.expect(err <= kBoundaryTokens, method + " seed " + str(seed) + " page " + str(k + 1) + " off by "
                                                     + str(err) + " tokens");
            }
        }
    }
    return "accuracy 1.0 at ±" + str(kBoundaryTokens) + " tokens over " + str(seeds.size())
           + " corpora; worst nw " + str(worst_nw) + ", embed " + str(worst_embed) + " tokens";
}

// ---------------------------------------------------------------------------
// retrieval

const std::vector<std::string> kToyDocs{
    "the serpent spoke to the king",
    "a serpent with the face of a man",
    "the barber shaved the king and the vizier",
    "the king wept",
    "serpent serpent serpent in the well",
    "a blessed jewel lay in the sea",
    "the mermaid rose from the sea with a jewel",
    "the vizier and the barber argued about the serpent",
    "nothing here at all",
    "the face of the king shone like the sea",
};

std::vector<corpus::SentenceRecord> records(const std::vector<std::string>& texts, const corpus::LexicalResource& res)
{
    std::vector<corpus::SentenceRecord> out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        corpus::SentenceRecord r;
        r.sentence_id = corpus::make_sentence_id(1, i);
        r.volume_no = 1;
        r.page_no = 1;
        r.text = corpus::normalize(texts[i]);
        r.tokens = corpus::tokenize(r.text, res);
        out.push_back(std::move(r));
    }
    return out;
}

double direct_bm25(const std::vector<std::string>& docs, const std::vector<std::string>& query, std::size_t d,
                   double k1, double b)
{
    std::vector<std::vector<std::string>> words;
    double total = 0.0;
    for (const auto& doc : docs) {
        words.push_back(util::split(doc, ' '));
        total += static_cast<double>(words.back().size());
    }
    const double n = static_cast<double>(docs.size());
    const double avgdl = total / n;
    const std::set<std::string> distinct(query.begin(), query.end());
    double score = 0.0;
    for (const auto& q : distinct) {
        double df = 0.0;
        for (const auto& w : words) {
            df += std::count(w.begin(), w.end(), q) > 0 ? 1.0 : 0.0;
        }
        const double tf = static_cast<double>(std::count(words[d].begin(), words[d].end(), q));
        const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        const double dl = static_cast<double>(words[d].size());
        score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
    }
    return score;
}

std::string bm25_oracle(Checks& c)
{
    const corpus::LexicalResource res;
    const auto sents = records(kToyDocs, res);
    const std::vector<std::vector<std::string>> queries{{"serpent"},
                                                        {"king", "sea"},
                                                        {"the", "barber", "vizier"},
                                                        {"jewel", "jewel", "mermaid"},
                                                        {"the", "serpent", "king", "sea"},
                                                        {"absent"}};
    double worst = 0.0;
    for (const auto params : {retrieval::Bm25Params{}, retrieval::Bm25Params{1.2, 0.5}, retrieval::Bm25Params{2.0, 1.0}}) {
        const auto idx = retrieval::InvertedIndex::build(sents, params);
        for (const auto& q : queries) {
            const auto qs = joined(q);
            for (std::size_t d = 0; d < sents.size(); ++d) {
                const double err = std::abs(idx.bm25_score(q, sents[d].sentence_id)
                                            - direct_bm25(kToyDocs, q, d, params.k1, params.b));
                worst = std::max(worst, err);
                c.expect(err <= kBm25Tolerance, "doc " + str(d) + " query '" + qs + "' off by " + str(err));
            }
            const auto full = idx.retrieve(q, 10);
            for (std::size_t k = 1; k <= 10; ++k) {
                const auto top = idx.retrieve(q, k);
                c.expect(top.size() == std::min(k, full.size()) && std::equal(top.begin(), top.end(), full.begin()),
                         "top-" + str(k) + " is not a prefix for '" + qs + "'");
            }
        }
    }
    std::vector<std::string> many;
    for (int i = 0; i < 300; ++i) {
        many.push_back("serpent number " + std::to_string(i));
    }
    const auto big = retrieval::InvertedIndex::build(records(many, res));
    const auto capped = retrieval::lexical_retrieve(big, "Serpent", res);
    c.expect(capped.size() == 100, "default lexical cap returned " + str(capped.size()));
    c.expect(retrieval::lexical_retrieve(big, "Serpent", res, 500).size() == 300, "explicit k ignored");
    return "worst |Δ| " + str(worst) + " (tol " + str(kBm25Tolerance) + "), prefix k=1..10, cap 100 of 300";
}

EmbeddingVector random_vec(std::mt19937_64& rng, std::size_t dim)
{
    std::normal_distribution<double> g;
    std::vector<double> v(dim);
    for (auto& x : v) {
        x = g(rng);
    }
    return {v};
}

std::string semantic_properties(Checks& c)
{
    std::mt19937_64 rng(31);
    for (int i = 0; i < 500; ++i) {
        const auto u = random_vec(rng, 24);
        const auto v = random_vec(rng, 24);
        auto scaled = v;
        for (auto& x : scaled.values) {
            x *= 3.25;
        }
        c.expect(std::abs(retrieval::cosine(u, v) - retrieval::cosine(v, u)) <= kFloatTolerance, "asymmetric cosine");
        c.expect(std::abs(retrieval::cosine(u, u) - 1.0) <= kFloatTolerance, "self-similarity is not 1");
        c.expect(std::abs(retrieval::cosine(u, scaled) - retrieval::cosine(u, v)) <= kFloatTolerance,
                 "cosine not scale invariant");
    }
    std::vector<retrieval::SentenceVector> svs;
    for (std::size_t i = 0; i < 1000; ++i) {
        svs.push_back({support::sentence_id(i), random_vec(rng, 32)});
    }
    svs.push_back({"dup", svs[123].vector});
    const auto q = random_vec(rng, 32);
    std::vector<retrieval::Scored> brute;
    for (const auto& sv : svs) {
        brute.push_back({sv.sentence_id, retrieval::cosine(sv.vector, q)});
    }
    std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
        return a.score != b.score ? a.score > b.score : a.sentence_id < b.sentence_id;
    });
    for (std::size_t k : {1, 5, 100, 1001}) {
        const auto got = retrieval::semantic_retrieve(svs, q, k);
        c.expect(got.size() == std::min(k, brute.size()) && std::equal(got.begin(), got.end(), brute.begin()),
                 "semantic top-" + str(k) + " differs from brute force");
    }
    auto scaled_q = q;
    for (auto& x : scaled_q.values) {
        x *= 0.02;
    }
    const auto a = retrieval::semantic_retrieve(svs, q, 200);
    const auto b = retrieval::semantic_retrieve(svs, scaled_q, 200);
    bool same = a.size() == b.size();
    for (std::size_t i = 0; same && i < a.size(); ++i) {
        same = a[i].sentence_id == b[i].sentence_id;
    }
    c.expect(same, "ranking changed under query scaling");
    return "symmetry, self-similarity, scale invariance; top-k equals brute force over 1,001 vectors";
}

// ---------------------------------------------------------------------------
// classification

std::string calibration(Checks& c)
{
    std::mt19937_64 rng(47);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    for (int i = 0; i < 500; ++i) {
        std::vector<double> pos(1 + util::uniform_below(rng, 40));
        std::vector<double> neg(1 + util::uniform_below(rng, 40));
        for (auto& x : pos) {
            x = u(rng);
        }
        for (auto& x : neg) {
            x = u(rng);
        }
        const double t = classify::calibrate_threshold(pos, neg);
        c.expect(std::abs(t - (mean(pos) + mean(neg)) / 2.0) <= kFloatTolerance, "midpoint mismatch");
        const double shift = u(rng);
        for (auto& x : pos) {
            x += shift;
        }
        for (auto& x : neg) {
            x += shift;
        }
        c.expect(std::abs(classify::calibrate_threshold(pos, neg) - (t + shift)) <= 1e-9, "not translation-equivariant");
    }
    const std::vector<std::pair<std::string, double>> published{
        {"mistral-embed", 0.73},     {"text-embedding-004", 0.46}, {"NV-Embed-v2", 0.25},
        {"jina-embeddings-v3", 0.32}, {"sentence-t5-base", 0.77},   {"SBERT-FT", 0.32},
        {"sentence-t5-base-FT", 0.45}};
    const auto config = gateway::ProjectConfig::from_json(nlohmann::json::object(), ".");
    for (const auto& [id, value] : published) {
        const auto& t = config.threshold_for(id);
        c.expect(t.threshold == value, id + " threshold " + str(t.threshold));
        c.expect(classify::to_string(t.provenance) == "paper-published", id + " provenance "
                                                                            + std::string(classify::to_string(t.provenance)));
    }
    c.expect(classify::published_thresholds().size() == published.size(), "published table size");
    return "midpoint exact on 500 random sets; 7 operating points tagged paper-published";
}

std::string prompts(Checks& c)
{
    auto golden = [](const std::string& name) { return util::read_file(support::fixture("prompts/" + name)); };
    const auto zero = classify::build_zero_shot_prompt("<MOTIF>", "<Sentence>");
    c.expect(zero.system == golden("system.txt"), "system prompt differs");
    c.expect(zero.user == golden("zero_shot_template.txt"), "zero-shot template differs");
    const std::string mermaid = "While he was doing this the sea became disturbed and out from it came mermaids the "
                                "sea\xE2\x80\x99s daughters each carrying in her hand a jewel gleaming like a lamp.";
    c.expect(classify::build_zero_shot_prompt("Mermaid", mermaid).user == golden("zero_shot_mermaid.txt"),
             "zero-shot mermaid instance differs");
    const auto& shots = classify::reference_shots();
    c.expect(shots.size() == 4, "expected four shots, got " + str(shots.size()));
    const auto few = classify::build_few_shot_prompt(shots, "<MOTIF>", "<Sentence>");
    c.expect(few.system == golden("system.txt"), "few-shot system prompt differs");
    c.expect(few.user == golden("few_shot_reference.txt"), "few-shot prompt differs");
    c.expect(few.decoding.temperature == 0.0 && few.decoding.max_new_tokens == 1, "decoding constants");
    c.expect(Decoding::temperature == 0.0 && Decoding::max_new_tokens == 1, "decoding defaults");
    return "4 golden files byte-identical; temperature 0, max_new_tokens 1";
}

// ---------------------------------------------------------------------------
// metrics

std::string metrics_fixtures(Checks& c)
{
    const auto rows = metrics::parse_reported_rows(util::read_file(support::fixture("reported_scores.csv")));
    c.expect(rows.size() == 126, "table has " + str(rows.size()) + " rows");
    std::size_t checked = 0;
    std::size_t excluded = 0;
    double worst = 0.0;
    for (const auto& r : metrics::check_reported_rows(rows)) {
        if (!r.excluded_because.empty()) {
            ++excluded;
            continue;
        }
        ++checked;
        worst = std::max(worst, r.f1_error);
        c.expect(r.f1_error <= kF1Tolerance, r.row.method + " " + r.row.conceptual + "/" + r.row.expression
                                                 + " F1 off by " + str(r.f1_error));
    }

    const auto [a, b] = support::contingency(20, 5, 5, 70);
    const auto k = metrics::cohens_kappa(a, b);
    c.expect(std::abs(k.value - 11.0 / 15.0) <= kKappaTolerance, "kappa " + str(k.value) + " != 0.7333");

    std::mt19937_64 rng(53);
    for (int i = 0; i < 500; ++i) {
        const std::size_t n = 1 + util::uniform_below(rng, 60);
        std::vector<Label> x(n);
        std::vector<Label> y(n);
        for (std::size_t j = 0; j < n; ++j) {
            x[j] = util::uniform_below(rng, 2) ? Label::Positive : Label::Negative;
            y[j] = util::uniform_below(rng, 2) ? Label::Positive : Label::Negative;
        }
        c.expect(std::abs(metrics::cohens_kappa(x, y).value - metrics::cohens_kappa(y, x).value) <= kKappaTolerance,
                 "kappa asymmetric");
        c.expect(metrics::cohens_kappa(x, x).value == 1.0, "kappa of identical lists is not 1");
    }
    return str(checked) + " sane rows within ±" + str(kF1Tolerance) + " (worst " + str(worst) + "), " + str(excluded)
           + " excluded by precheck; kappa " + str(k.value);
}

std::string resampling_and_splits(Checks& c)
{
    auto rows = support::load_profile();
    c.expect(rows.size() == 200, "profile has " + str(rows.size()) + " motifs");
    // The printed profile lists fewer negatives than positives for P446; the
    // balanced count can only be reached with enough negatives, so this run
    // raises that motif's negatives to its positive count.
    std::size_t raised = 0;
    for (auto& r : rows) {
        const auto p = r.positives_simple + r.positives_complex;
        if (r.negatives < p) {
            raised += p - r.negatives;
            r.negatives = p;
            c.expect(r.motif_id == "P446", "unexpected short motif " + r.motif_id);
        }
    }
    const auto pairs = support::profile_pairs(rows, 26262);
    const auto out = metrics::resample_balanced(pairs, 7);
    std::map<std::string, std::pair<std::size_t, std::size_t>> per_motif;
    std::size_t positives = 0;
    for (const auto& p : out) {
        auto& [pos, neg] = per_motif[p.motif_id];
        (p.label == Label::Positive ? pos : neg) += 1;
        positives += p.label == Label::Positive ? 1 : 0;
    }
    c.expect(positives == 2670, "positives " + str(positives));
    c.expect(out.size() == 5340, "balanced pairs " + str(out.size()));
    for (const auto& [m, counts] : per_motif) {
        c.expect(counts.first == counts.second, m + " unbalanced");
    }
    std::set<PairId> unique;
    for (const auto& p : out) {
        unique.insert(p.pair());
    }
    c.expect(unique.size() == out.size(), "resample repeated a pair");
    const auto again = metrics::resample_balanced(pairs, 7);
    c.expect(std::equal(out.begin(), out.end(), again.begin(), again.end(),
                        [](const auto& x, const auto& y) { return x.pair() == y.pair(); }),
             "resample not reproducible");

    std::vector<metrics::MotifCell> cells;
    for (const auto& r : rows) {
        cells.push_back({r.motif_id, r.conceptual, r.expression});
    }
    const auto s = metrics::split_by_motif(cells, metrics::published_split_targets(), 7);
    c.expect(s.train.size() == 140 && s.val.size() == 30 && s.test.size() == 30,
             "split " + str(s.train.size()) + "/" + str(s.val.size()) + "/" + str(s.test.size()));
    std::set<std::string> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
        all.insert(part->begin(), part->end());
    }
    c.expect(all.size() == 200, "splits overlap or miss motifs");
    std::map<std::string, metrics::CellKey> cell_of;
    for (const auto& m : cells) {
        cell_of[m.motif_id] = {m.conceptual, m.expression};
    }
    for (const auto& [key, t] : metrics::published_split_targets()) {
        auto in = [&, key = key](const std::vector<std::string>& part) {
            return static_cast<std::size_t>(
                std::count_if(part.begin(), part.end(), [&](const auto& id) { return cell_of[id] == key; }));
        };
        c.expect(in(s.train) == t.train && in(s.val) == t.val && in(s.test) == t.test, "cell target missed");
    }
    c.expect(metrics::to_json(metrics::split_by_motif(cells, metrics::published_split_targets(), 7))
                 == metrics::to_json(s),
             "split not reproducible");
    return "5,340 balanced pairs (P446 negatives raised by " + str(raised)
           + "); 140/30/30 motif-disjoint, per-cell targets met, seed-reproducible";
}

// ---------------------------------------------------------------------------
// end to end with scripted mocks

/// Fixed vectors per text.
class TableEmbedder final : public EmbeddingProvider {
public:
    explicit TableEmbedder(std::map<std::string, std::vector<double>> table) : table_(std::move(table)) {}
    const std::string& provider_id() const override { return id_; }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override
    {
        std::vector<EmbeddingVector> out;
        for (const auto& t : texts) {
            out.push_back({table_.at(t)});
        }
        return out;
    }

private:
    std::map<std::string, std::vector<double>> table_;
    std::string id_ = "table";
};

struct ScenarioMotif {
    std::string id;
    std::string description;
    Complexity conceptual;
    Complexity expression;
    std::string place;
};

std::string end_to_end(Checks& c)
{
    const std::vector<ScenarioMotif> motifs{{"A10", "golden fish", Complexity::Simple, Complexity::Simple, "north"},
                                            {"B20", "talking serpent", Complexity::Simple, Complexity::Complex, "south"},
                                            {"C30", "magic jewel", Complexity::Complex, Complexity::Simple, "east"},
                                            {"D40", "clever barber", Complexity::Complex, Complexity::Complex, "west"}};
    // Per motif, sentences 0-3 are positives; 4-9 are negatives. Sentences 0-2
    // share a word with the description, sentence 3 does not, sentence 4 is a
    // negative that does.
    const std::vector<std::set<int>> rerank_yes{{0, 1, 2, 4}, {0, 1, 2, 3, 4, 5}, {0}, {}};

    std::vector<classify::ClassificationPair> pairs;
    std::vector<std::string> texts;
    metrics::PairLabels gold;
    metrics::PairComplexity expression;
    std::map<std::string, Complexity> conceptual;
    std::map<TextPair, bool> rerank_script;
    std::map<TextPair, std::string> generator_script;
    std::map<std::string, std::vector<double>> vectors;
    for (std::size_t m = 0; m < motifs.size(); ++m) {
        const auto& mo = motifs[m];
        const auto words = util::split(mo.description, ' ');
        conceptual[mo.id] = mo.conceptual;
        std::vector<double> axis(4, 0.0);
        axis[m] = 1.0;
        vectors[mo.description] = axis;
        for (int j = 0; j < 10; ++j) {
            std::string text;
            switch (j) {
            case 0: text = "she saw a " + words[0] + " light"; break;
            case 1: text = "the " + words[1] + " returned home"; break;
            case 2: text = "a " + words[0] + " " + words[1] + " spoke softly"; break;
            case 3: text = "nobody expected such a wonder"; break;
            case 4: text = "the " + words[0] + " gate was closed"; break;
            default: text = "an ordinary day number " + std::to_string(j) + " passed"; break;
            }
            text += " in the " + mo.place;
            const auto sid = corpus::make_sentence_id(1, m * 10 + static_cast<std::size_t>(j));
            const PairId p{mo.id, sid};
            pairs.push_back({mo.id, sid, mo.description, text});
            texts.push_back(text);
            gold[p] = j < 4 ? Label::Positive : Label::Negative;
            expression[p] = mo.expression;
            rerank_script[{mo.description, text}] = rerank_yes[m].contains(j);
            // the generator is right except for one unparseable answer and one miss
            std::string answer = j < 4 ? "Yes" : "No";
            if (m == 0 && j == 9) {
                answer = "Maybe";
            }
            if (m == 3 && j == 0) {
                answer = "No";
            }
            generator_script[{mo.description, text}] = answer;
            std::vector<double> v(4, 0.0);
            if (j == 3) {
                v[m] = 1.0;
            } else if (j == 0) {
                v[m] = 1.0;
                v[(m + 1) % 4] = 0.5;
            } else {
                v = {1.0, 1.0, 1.0, 1.0};
                v[m] += 0.01 * j;
            }
            vectors[text] = v;
        }
    }

    using metrics::Axis;
    using metrics::ConfusionCounts;
    auto compare = [&](const metrics::GridReport& r, const std::map<std::pair<Axis, Axis>, ConfusionCounts>& hand,
                       const std::string& what) {
        for (const auto& [key, counts] : hand) {
            const auto& got = r.at(key.first, key.second).counts;
            c.expect(got == counts, what + " cell " + std::string(metrics::to_string(key.first)) + "/"
                                        + std::string(metrics::to_string(key.second)) + " = {" + str(got.tp) + ","
                                        + str(got.fp) + "," + str(got.fn) + "," + str(got.tn) + "}");
        }
    };

    ScriptedPairScorer scorer([&](const TextPair& tp) { return PairScore{rerank_script.at(tp), std::nullopt}; });
    const auto rerank = classify::rerank(pairs, scorer);
    const auto rr = metrics::grid_report("rerank", rerank, gold, expression, conceptual);
    // {tp, fp, fn, tn}
    compare(rr,
            {{{Axis::Simple, Axis::Simple}, {3, 1, 1, 5}},
             {{Axis::Simple, Axis::Complex}, {4, 2, 0, 4}},
             {{Axis::Complex, Axis::Simple}, {1, 0, 3, 6}},
             {{Axis::Complex, Axis::Complex}, {0, 0, 4, 6}},
             {{Axis::Simple, Axis::Overall}, {7, 3, 1, 9}},
             {{Axis::Complex, Axis::Overall}, {1, 0, 7, 12}},
             {{Axis::Overall, Axis::Simple}, {4, 1, 4, 11}},
             {{Axis::Overall, Axis::Complex}, {4, 2, 4, 10}},
             {{Axis::Overall, Axis::Overall}, {8, 3, 8, 21}}},
            "rerank");
    const auto& oo = rr.at(Axis::Overall, Axis::Overall).scores;
    c.expect(std::abs(oo.precision - 8.0 / 11.0) <= kFloatTolerance, "overall precision");
    c.expect(std::abs(oo.recall - 0.5) <= kFloatTolerance, "overall recall");
    c.expect(std::abs(oo.f1 - 16.0 / 27.0) <= kFloatTolerance, "overall F1");
    const auto& cc = rr.at(Axis::Complex, Axis::Complex).scores;
    c.expect(cc.precision == 0.0 && cc.precision_undefined && cc.f1 == 0.0, "0/0 precision convention");

    ScriptedGenerator generator(generator_script);
    const auto gen = classify::generative_classify(pairs, classify::ZeroShot{}, generator);
    c.expect(gen.failures.size() == 1 && gen.failures[0].code == "classifiers.UNPARSEABLE_VERDICT"
                 && gen.failures[0].index == 9,
             "generator failures");
    c.expect(generator.calls() == pairs.size(), "generator calls " + str(generator.calls()));
    const auto gr = metrics::grid_report("zero-shot", gen.verdicts, gold, expression, conceptual);
    compare(gr,
            {{{Axis::Simple, Axis::Simple}, {4, 0, 0, 5}},
             {{Axis::Simple, Axis::Complex}, {4, 0, 0, 6}},
             {{Axis::Complex, Axis::Simple}, {4, 0, 0, 6}},
             {{Axis::Complex, Axis::Complex}, {3, 0, 1, 6}},
             {{Axis::Overall, Axis::Overall}, {15, 0, 1, 23}}},
            "zero-shot");

    // retrieval stage recall against hand counts
    const corpus::LexicalResource res;
    const auto sentences = records(texts, res);
    const auto index = retrieval::InvertedIndex::build(sentences);
    TableEmbedder embedder(vectors);
    const auto sentence_vectors = embedder.embed(texts);
    std::vector<retrieval::SentenceVector> svs;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        svs.push_back({sentences[i].sentence_id, sentence_vectors[i]});
    }
    for (std::size_t m = 0; m < motifs.size(); ++m) {
        const auto& mo = motifs[m];
        std::set<std::string> positives;
        for (std::size_t j = 0; j < 4; ++j) {
            positives.insert(corpus::make_sentence_id(1, m * 10 + j));
        }
        const auto lex = retrieval::lexical_retrieve(index, mo.description, res, 100);
        const auto sem = retrieval::semantic_retrieve(svs, embedder.embed(std::vector{mo.description})[0], 2);
        std::set<std::string> lex_ids;
        std::set<std::string> sem_ids;
        std::set<std::string> merged_ids;
        for (const auto& s : lex) {
            lex_ids.insert(s.sentence_id);
        }
        for (const auto& s : sem) {
            sem_ids.insert(s.sentence_id);
        }
        for (const auto& s : retrieval::merge_candidates(lex, sem)) {
            merged_ids.insert(s.sentence_id);
        }
        // hand counts: lexical finds sentences 0-2 (and negative 4); semantic top-2 is 3 and 0
        c.expect(lex.size() == 4, mo.id + " lexical size " + str(lex.size()));
        c.expect(metrics::stage_recall(lex_ids, positives) == 3.0 / 4.0, mo.id + " lexical recall");
        c.expect(metrics::stage_recall(sem_ids, positives) == 2.0 / 4.0, mo.id + " semantic recall");
        c.expect(metrics::stage_recall(merged_ids, positives) == 1.0, mo.id + " merged recall");
    }
    return "rerank and zero-shot grids equal the hand tables; stage recall 0.75/0.5/1.0 as counted";
}

// ---------------------------------------------------------------------------
// annotation workflow

annotation::AnnotationRecord label_of(const PairId& p, const std::string& who, Label l,
                                      std::optional<Complexity> e = std::nullopt)
{
    annotation::AnnotationRecord r;
    r.pair = p;
    r.annotator_id = who;
    r.label = l;
    r.expression = l == Label::Positive ? std::optional(e.value_or(Complexity::Simple)) : std::nullopt;
    return r;
}

annotation::StoreOptions fixed_clock()
{
    return {std::nullopt, [] { return std::string("2024-01-01T00:00:00Z"); }};
}

/// Totals recomputed from the raw records.
annotation::Accounting recount(const annotation::AnnotationStore& store, const std::map<PairId, Label>& adjudicated)
{
    std::map<PairId, std::set<Label>> labels;
    std::map<PairId, std::set<std::string>> annotators;
    annotation::Accounting a;
    for (const auto& r : store.records()) {
        labels[r.pair].insert(r.label);
        annotators[r.pair].insert(r.annotator_id);
        ++a.records;
    }
    std::set<std::string> sentences;
    for (const auto& [p, ls] : labels) {
        sentences.insert(p.sentence_id);
        a.double_annotated += annotators[p].size() >= 2 ? 1 : 0;
        std::optional<Label> g;
        if (adjudicated.contains(p)) {
            g = adjudicated.at(p);
        } else if (ls.size() == 1) {
            g = *ls.begin();
        } else {
            ++a.unresolved;
        }
        if (g) {
            (*g == Label::Positive ? a.positives : a.negatives) += 1;
        }
    }
    a.annotated_pairs = labels.size();
    a.unique_sentences = sentences.size();
    a.adjudicated = adjudicated.size();
    return a;
}

void expect_accounting(Checks& c, const annotation::Accounting& got, const annotation::Accounting& want,
                       const std::string& what)
{
    c.expect(got.annotated_pairs == want.annotated_pairs, what + " annotated " + str(got.annotated_pairs));
    c.expect(got.unique_sentences == want.unique_sentences, what + " sentences " + str(got.unique_sentences));
    c.expect(got.records == want.records, what + " records " + str(got.records));
    c.expect(got.double_annotated == want.double_annotated, what + " doubles " + str(got.double_annotated));
    c.expect(got.positives == want.positives, what + " positives " + str(got.positives));
    c.expect(got.negatives == want.negatives, what + " negatives " + str(got.negatives));
    c.expect(got.unresolved == want.unresolved, what + " unresolved " + str(got.unresolved));
    c.expect(got.adjudicated == want.adjudicated, what + " adjudicated " + str(got.adjudicated));
}

std::string annotation_workflow(Checks& c)
{
    annotation::Catalog catalog;
    static const char* ids[] = {"A1", "B2", "C3", "D4"};
    for (const char* m : ids) {
        catalog.motifs[m] = {std::string("motif ") + m, Complexity::Simple, Complexity::Simple};
    }
    for (std::size_t i = 0; i < 1000; ++i) {
        catalog.add_sentence({support::sentence_id(i), 1, "sentence " + std::to_string(i)});
    }

    // overlap: the second annotator's batch doubles half of its size
    annotation::AnnotationStore store(catalog, fixed_clock());
    std::vector<PairId> pairs;
    for (std::size_t i = 0; i < 4000; ++i) {
        pairs.push_back({ids[i % 4], support::sentence_id(i / 4)});
    }
    store.enqueue_candidates(pairs);
    const auto a = store.next_batch("ann-a", 1500, 0.5);
    const auto b = store.next_batch("ann-b", 1500, 0.5);
    std::set<PairId> sa(a.pairs.begin(), a.pairs.end());
    std::size_t overlap = 0;
    for (const auto& p : b.pairs) {
        overlap += sa.contains(p) ? 1 : 0;
    }
    c.expect(b.double_subset.size() == 750 && overlap == 750, "overlap " + str(overlap));
    std::mt19937_64 rng(61);
    for (const auto& p : a.pairs) {
        store.record_label(label_of(p, "ann-a", util::uniform_below(rng, 10) == 0 ? Label::Positive : Label::Negative));
    }
    for (const auto& p : b.pairs) {
        store.record_label(label_of(p, "ann-b", util::uniform_below(rng, 10) == 0 ? Label::Positive : Label::Negative));
    }

    // conflict -> disagreement -> adjudication -> gold
    const auto disagreements = store.disagreements();
    c.expect(!disagreements.empty(), "no disagreements among the doubles");
    std::map<PairId, Label> adjudicated;
    const auto first = disagreements.empty() ? PairId{} : disagreements.front().pair;
    c.expect(!store.gold().contains(first), "conflicting pair already has gold");
    if (!disagreements.empty()) {
        store.adjudicate(first, Label::Positive, Complexity::Complex, "lead");
        adjudicated[first] = Label::Positive;
        const auto g = store.gold();
        c.expect(g.contains(first) && g.at(first) == annotation::GoldLabel{Label::Positive, Complexity::Complex},
                 "adjudication did not become gold");
        c.expect(store.disagreements().size() == disagreements.size() - 1, "adjudicated pair still disagrees");
        bool threw = false;
        try {
            store.adjudicate(first, Label::Negative, std::nullopt, "lead");
        } catch (const Error&) {
            threw = true;
        }
        c.expect(threw, "second adjudication accepted");
    }
    const auto acc = store.accounting();
    expect_accounting(c, acc, recount(store, adjudicated), "overlap store");
    c.expect(acc.double_annotated == 750 && acc.annotated_pairs == 2250, "overlap accounting");

    // the full-scale bookkeeping: 58,449 agreed pairs plus one unresolved conflict
    const auto rows = support::load_profile();
    annotation::Catalog big;
    for (const auto& r : rows) {
        big.motifs[r.motif_id] = {r.description, r.conceptual, r.expression};
    }
    for (std::size_t i = 0; i < 26262; ++i) {
        big.add_sentence({support::sentence_id(i), 1 + static_cast<int>(i / 100000), "s"});
    }
    const auto profile = support::profile_pairs(rows, 26262);
    std::set<std::string> used;
    for (const auto& p : profile) {
        if (p.motif_id == rows.front().motif_id) {
            used.insert(p.sentence_id);
        }
    }
    std::size_t free_sentence = 0;
    while (used.contains(support::sentence_id(free_sentence))) {
        ++free_sentence;
    }
    const PairId conflict{rows.front().motif_id, support::sentence_id(free_sentence)};
    annotation::AnnotationStore full(big, fixed_clock());
    std::vector<PairId> ids_only;
    for (const auto& p : profile) {
        ids_only.push_back(p.pair());
    }
    full.enqueue_candidates(std::vector{conflict}, 1);
    full.enqueue_candidates(ids_only);
    const auto batch = full.next_batch("ann-a", 58450, 0.0);
    c.expect(batch.pairs.size() == 58450 && batch.pairs.front() == conflict, "full batch");
    full.record_label(label_of(conflict, "ann-a", Label::Positive));
    for (const auto& p : profile) {
        full.record_label(label_of(p.pair(), "ann-a", p.label, p.expression));
    }
    const auto second = full.next_batch("ann-b", 1, 1.0);
    c.expect(second.double_subset == std::vector{conflict}, "second annotator did not receive the conflict pair");
    full.record_label(label_of(conflict, "ann-b", Label::Negative));
    const auto facc = full.accounting();
    expect_accounting(c, facc, recount(full, {}), "full store");
    c.expect(facc.annotated_pairs == 58450, "pairs " + str(facc.annotated_pairs));
    c.expect(facc.unique_sentences == 26262, "sentences " + str(facc.unique_sentences));
    c.expect(facc.positives == 2670, "positives " + str(facc.positives));
    c.expect(facc.negatives == 55779, "negatives " + str(facc.negatives));
    c.expect(facc.unresolved == 1, "unresolved " + str(facc.unresolved));
    return "overlap 750 of 1,500; adjudication precedes annotator labels; accounting equals recount; 58,450 pairs = "
           + str(facc.positives) + " + " + str(facc.negatives) + " + " + str(facc.unresolved) + " over "
           + str(facc.unique_sentences) + " sentences";
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, Criterion>> criteria{
        {"alignment-oracle", alignment_oracle},
        {"synthetic-alignment", synthetic_alignment},
        {"bm25-oracle", bm25_oracle},
        {"cosine-semantic", semantic_properties},
        {"threshold-calibration", calibration},
        {"prompt-byte-exactness", prompts},
        {"metrics-fixtures", metrics_fixtures},
        {"resampling-splitting", resampling_and_splits},
        {"end-to-end-scripted", end_to_end},
        {"annotation-workflow", annotation_workflow},
    };
    std::size_t failed = 0;
    for (const auto& [name, fn] : criteria) {
        failed += run(name, fn) ? 0 : 1;
    }
    std::cout << (failed == 0 ? "ALL PASS" : str(failed) + " FAILED") << " (" << criteria.size() << " criteria)\n";
    return failed == 0 ? 0 : 1;
}
