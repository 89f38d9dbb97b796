#include "support.hpp"

#include "motifidx/error.hpp"
#include "motifidx/util.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <limits>
#include <random>

#include <unistd.h>

#include <json.hpp>

#ifndef MOTIFIDX_FIXTURES
#error "MOTIFIDX_FIXTURES must point at tests/fixtures"
#endif

namespace support {

using namespace motifidx;

std::filesystem::path fixture(const std::string& relative)
{
    return std::filesystem::path(MOTIFIDX_FIXTURES) / relative;
}

std::filesystem::path scratch_dir(const std::string& tag)
{
    static std::atomic<int> counter{0};
    auto dir = std::filesystem::temp_directory_path()
             / ("motifidx-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

double brute_force_nw(const std::vector<corpus::Token>& a, const std::vector<corpus::Token>& b,
                      const corpus::LexicalResource& resource, const align::ScoringScheme& scheme)
{
    double best = -std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
        if (i == a.size() && j == b.size()) {
            best = std::max(best, acc);
            return;
        }
        if (i < a.size() && j < b.size()) {
            walk(i + 1, j + 1, acc + align::word_match_score(a[i], b[j], resource, scheme));
        }
        if (i < a.size()) {
            walk(i + 1, j, acc + scheme.gap_penalty);
        }
        if (j < b.size()) {
            walk(i, j + 1, acc + scheme.gap_penalty);
        }
    };
    walk(0, 0, 0.0);
    return best;
}

std::vector<corpus::Token> tokens_of(const std::vector<std::string>& words, const corpus::LexicalResource& resource)
{
    std::string text;
    for (const auto& w : words) {
        if (!text.empty()) {
            text += ' ';
        }
        text += w;
    }
    return corpus::tokenize(text, resource);
}

namespace {

std::vector<std::string> make_words(std::size_t n)
{
    static const std::string cons = "bdfgklmnprstvz";
    static const std::string vow = "aeiou";
    std::vector<std::string> out;
    for (std::size_t i = 0; out.size() < n; ++i) {
        std::string w;
        std::size_t x = i;
        for (int s = 0; s < 3; ++s) {
            w += cons[x % cons.size()];
            x /= cons.size();
            w += vow[x % vow.size()];
            x /= vow.size();
        }
        out.push_back(w);
    }
    return out;
}

std::string join_page(const std::vector<std::string>& words, std::size_t from, std::size_t to)
{
    std::string out;
    for (std::size_t i = from; i < to; ++i) {
        if (i > from) {
            out += ' ';
        }
        out += words[i];
        if ((i + 1) % 13 == 0) {
            out += '.';
        }
    }
    return out;
}

} // namespace

SyntheticEditions make_synthetic_editions(std::uint64_t seed, int pages, double substitution_rate)
{
    constexpr std::size_t kVocab = 300;
    std::mt19937_64 rng(seed);
    const auto pool = make_words(2 * kVocab);
    SyntheticEditions eds;
    eds.lexicon = std::make_shared<corpus::LexicalResource>();
    for (std::size_t i = 0; i < kVocab; ++i) {
        const std::vector<std::string> w{pool[i]};
        const std::vector<std::string> s{pool[kVocab + i]};
        eds.lexicon->add(pool[i], w, s);
        eds.lexicon->add(pool[kVocab + i], s, w);
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<std::string> source_words;
    std::vector<std::string> raw_source;
    for (int p = 0; p < pages; ++p) {
        const auto len = 180 + util::uniform_below(rng, 141);
        const auto from = source_words.size();
        for (std::size_t k = 0; k < len; ++k) {
            const double u = unit(rng);
            source_words.push_back(pool[static_cast<std::size_t>(u * u * kVocab)]);
        }
        raw_source.push_back(join_page(source_words, from, source_words.size()));
        eds.source_page_ends.push_back(source_words.size());
    }
    eds.words = source_words.size();

    std::vector<std::string> target_words = source_words;
    for (auto& w : target_words) {
        if (unit(rng) < substitution_rate) {
            const auto idx = static_cast<std::size_t>(std::find(pool.begin(), pool.end(), w) - pool.begin());
            w = pool[kVocab + idx];
            ++eds.substituted;
        }
    }
    std::vector<std::string> raw_target;
    for (std::size_t from = 0; from < target_words.size();) {
        const auto len = std::min<std::size_t>(250 + util::uniform_below(rng, 151), target_words.size() - from);
        raw_target.push_back(join_page(target_words, from, from + len));
        from += len;
    }

    eds.source.edition_id = "src";
    eds.source.volumes.push_back(corpus::make_volume(1, raw_source));
    eds.target.edition_id = "tgt";
    eds.target.volumes.push_back(corpus::make_volume(1, raw_target));
    for (const auto& tok : corpus::tokenize(eds.target.volumes[0].full_text, *eds.lexicon)) {
        eds.target_token_offsets.push_back(tok.offset);
    }
    return eds;
}

std::filesystem::path write_manifest(const SyntheticEditions& eds, const std::filesystem::path& dir)
{
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto* ed : {&eds.source, &eds.target}) {
        const auto& vol = ed->volumes.front();
        std::string raw;
        std::vector<std::size_t> breaks;
        for (std::size_t i = 0; i < vol.pages.size(); ++i) {
            if (i > 0) {
                raw += '\n';
                breaks.push_back(raw.size());
            }
            raw += vol.pages[i].text;
        }
        const auto file = ed->edition_id + "-v1.txt";
        util::write_file(dir / file, raw);
        manifest.push_back({{"edition_id", ed->edition_id}, {"volume_no", 1}, {"file", file}, {"page_breaks", breaks}});
    }
    const auto path = dir / "manifest.json";
    util::write_file(path, manifest.dump(2));
    return path;
}

std::size_t target_token_at(const SyntheticEditions& eds, std::size_t char_offset)
{
    const auto& offs = eds.target_token_offsets;
    return static_cast<std::size_t>(std::lower_bound(offs.begin(), offs.end(), char_offset) - offs.begin());
}

std::vector<ProfileRow> load_profile()
{
    const auto rows = util::parse_csv(util::read_file(fixture("motif_profile.csv")));
    std::vector<ProfileRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        ProfileRow p;
        p.motif_id = r.at(0);
        p.description = r.at(1);
        p.conceptual = *parse_complexity(r.at(2));
        p.expression = *parse_complexity(r.at(3));
        p.expression_profile = r.at(4);
        p.positives_simple = std::stoul(r.at(5));
        p.positives_complex = std::stoul(r.at(6));
        p.negatives = std::stoul(r.at(7));
        out.push_back(std::move(p));
    }
    return out;
}

std::string sentence_id(std::size_t i)
{
    return corpus::make_sentence_id(1 + static_cast<int>(i / 100000), i % 100000);
}

std::vector<metrics::LabeledPair> profile_pairs(const std::vector<ProfileRow>& rows, std::size_t sentence_count)
{
    std::vector<metrics::LabeledPair> out;
    std::size_t cursor = 0;
    auto next_sentence = [&] { return sentence_id(cursor++ % sentence_count); };
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < r.positives_simple; ++k) {
            out.push_back({r.motif_id, next_sentence(), Label::Positive, Complexity::Simple});
        }
        for (std::size_t k = 0; k < r.positives_complex; ++k) {
            out.push_back({r.motif_id, next_sentence(), Label::Positive, Complexity::Complex});
        }
        for (std::size_t k = 0; k < r.negatives; ++k) {
            out.push_back({r.motif_id, next_sentence(), Label::Negative, std::nullopt});
        }
    }
    return out;
}

std::pair<std::vector<Label>, std::vector<Label>>
contingency(std::size_t both_yes, std::size_t a_yes_b_no, std::size_t a_no_b_yes, std::size_t both_no)
{
    std::vector<Label> a;
    std::vector<Label> b;
    auto push = [&](std::size_t n, Label x, Label y) {
        a.insert(a.end(), n, x);
        b.insert(b.end(), n, y);
    };
    push(both_yes, Label::Positive, Label::Positive);
    push(a_yes_b_no, Label::Positive, Label::Negative);
    push(a_no_b_yes, Label::Negative, Label::Positive);
    push(both_no, Label::Negative, Label::Negative);
    return {a, b};
}

} // namespace support
