#include "motifidx/corpus.hpp"

#include "motifidx/error.hpp"
#include "motifidx/util.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace motifidx::corpus {

namespace {

constexpr const char* kModule = "corpus";

struct CodePoint {
    char32_t value;
    std::size_t length; ///< bytes consumed; invalid sequences consume one byte
    bool valid;
};

CodePoint decode(std::string_view s, std::size_t i)
{
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        return {b0, 1, true};
    }
    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return {b0, 1, false};
    }
    if (i + len > s.size()) {
        return {b0, 1, false};
    }
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) {
            return {b0, 1, false};
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    return {cp, len, true};
}

void encode(char32_t cp, std::string& out)
{
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

bool is_space(char32_t cp)
{
    switch (cp) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
        return true;
    default:
        return cp >= 0x2000 && cp <= 0x200A;
    }
}

bool is_control(char32_t cp)
{
    return cp < 0x20 || cp == 0x7F || (cp >= 0x80 && cp <= 0x9F) || cp == 0x200B || cp == 0xFEFF;
}

char32_t to_lower(char32_t cp)
{
    if (cp >= U'A' && cp <= U'Z') {
        return cp + 0x20;
    }
    if (cp < 0xC0) {
        return cp;
    }
    if (cp <= 0xDE) {
        return cp == 0xD7 ? cp : cp + 0x20;
    }
    if (cp >= 0x100 && cp <= 0x137) {
        return cp | 1;
    }
    if (cp >= 0x139 && cp <= 0x148) {
        return (cp & 1) ? cp + 1 : cp;
    }
    if (cp >= 0x14A && cp <= 0x177) {
        return cp | 1;
    }
    if (cp == 0x178) {
        return 0xFF;
    }
    if (cp >= 0x179 && cp <= 0x17E) {
        return (cp & 1) ? cp + 1 : cp;
    }
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) {
        return cp + 0x20;
    }
    if (cp >= 0x410 && cp <= 0x42F) {
        return cp + 0x20;
    }
    if (cp >= 0x400 && cp <= 0x40F) {
        return cp + 0x50;
    }
    return cp;
}

bool is_word_char(char32_t cp)
{
    if (cp < 0x80) {
        return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z') || (cp >= U'0' && cp <= U'9');
    }
    if (cp <= 0xBF || cp == 0xD7 || cp == 0xF7) {
        return false;
    }
    if ((cp >= 0x2000 && cp <= 0x206F) || (cp >= 0x2190 && cp <= 0x2BFF) || (cp >= 0x3000 && cp <= 0x303F)
        || (cp >= 0xFE30 && cp <= 0xFE4F) || (cp >= 0xFF01 && cp <= 0xFF0F)) {
        return false;
    }
    return true;
}

bool is_apostrophe(char32_t cp) { return cp == U'\'' || cp == 0x2019; }

bool is_closer(char32_t cp)
{
    return cp == U'"' || cp == U'\'' || cp == U')' || cp == U']' || cp == 0x201D || cp == 0x2019 || cp == 0xBB;
}

bool is_opener(char32_t cp)
{
    return cp == U'"' || cp == U'\'' || cp == U'(' || cp == U'[' || cp == 0x201C || cp == 0x2018 || cp == 0xAB;
}

std::string lowercase(std::string_view s)
{
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size();) {
        const auto cp = decode(s, i);
        if (cp.valid) {
            encode(to_lower(cp.value), out);
        } else {
            out += s[i];
        }
        i += cp.length;
    }
    return out;
}

bool has_word_char(std::string_view s)
{
    for (std::size_t i = 0; i < s.size();) {
        const auto cp = decode(s, i);
        if (cp.valid && is_word_char(cp.value)) {
            return true;
        }
        i += cp.length;
    }
    return false;
}

} // namespace

// ---------------------------------------------------------------------------
// LexicalResource

LexicalResource LexicalResource::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(kModule, Errc::Io, "cannot open lexical resource " + path.string());
    }
    return parse(in);
}

LexicalResource LexicalResource::parse(std::istream& in)
{
    LexicalResource res;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto content = util::trim(line);
        if (content.empty() || content.front() == '#') {
            continue;
        }
        const auto fields = util::split(line, '\t');
        if (fields.empty() || util::trim(fields[0]).empty() || fields.size() > 3) {
            throw Error(kModule, Errc::InvalidInput,
                        "lexical resource line " + std::to_string(line_no) + ": expected lemma<TAB>surfaces<TAB>synonyms");
        }
        auto list = [](const std::string& field) {
            std::vector<std::string> items;
            for (const auto& item : util::split(field, ',')) {
                const auto t = util::trim(item);
                if (!t.empty()) {
                    items.push_back(lowercase(t));
                }
            }
            return items;
        };
        const auto surfaces = fields.size() > 1 ? list(fields[1]) : std::vector<std::string>{};
        const auto syns = fields.size() > 2 ? list(fields[2]) : std::vector<std::string>{};
        res.add(lowercase(util::trim(fields[0])), surfaces, syns);
    }
    return res;
}

void LexicalResource::add(std::string_view lemma, std::span<const std::string> surfaces,
                          std::span<const std::string> synonyms)
{
    const std::string key(lemma);
    surface_to_lemma_.try_emplace(key, key);
    for (const auto& s : surfaces) {
        surface_to_lemma_[s] = key;
    }
    auto& set = synonyms_[key];
    for (const auto& s : synonyms) {
        if (s != key) {
            set.insert(s);
        }
    }
}

std::string LexicalResource::lemma_of(std::string_view word) const
{
    auto lower = lowercase(word);
    if (auto it = surface_to_lemma_.find(lower); it != surface_to_lemma_.end()) {
        return it->second;
    }
    return lower;
}

const std::set<std::string>& LexicalResource::synonyms_of_lemma(const std::string& lemma) const
{
    static const std::set<std::string> none;
    if (auto it = synonyms_.find(lemma); it != synonyms_.end()) {
        return it->second;
    }
    return none;
}

std::set<std::string> synonyms(std::string_view word, const LexicalResource& resource)
{
    const auto lemma = resource.lemma_of(word);
    auto out = resource.synonyms_of_lemma(lemma);
    out.erase(lemma);
    return out;
}

// ---------------------------------------------------------------------------
// Volume / Edition

std::size_t Volume::page_start(std::size_t index) const
{
    std::size_t offset = 0;
    for (std::size_t i = 0; i < index && i < pages.size(); ++i) {
        offset += pages[i].text.size();
    }
    return offset;
}

int Volume::page_at(std::size_t offset) const
{
    if (pages.empty()) {
        return 0;
    }
    std::size_t start = 0;
    int found = pages.front().page_no;
    for (const auto& page : pages) {
        if (start > offset) {
            break;
        }
        if (!page.text.empty()) {
            found = page.page_no;
        }
        start += page.text.size();
    }
    return found;
}

void Volume::rebuild_text()
{
    full_text.clear();
    for (const auto& page : pages) {
        full_text += page.text;
    }
}

void Edition::validate() const
{
    if (edition_id.empty()) {
        throw Error(kModule, Errc::InvalidInput, "edition_id must be non-empty");
    }
    for (std::size_t i = 0; i < volumes.size(); ++i) {
        const auto& vol = volumes[i];
        if (vol.volume_no <= 0) {
            throw Error(kModule, Errc::InvalidInput, "volume numbers must be positive");
        }
        if (i > 0 && volumes[i - 1].volume_no >= vol.volume_no) {
            throw Error(kModule, Errc::InvalidInput,
                        "volumes of " + edition_id + " must be strictly increasing by number");
        }
        std::string joined;
        for (std::size_t p = 0; p < vol.pages.size(); ++p) {
            if (p > 0 && vol.pages[p - 1].page_no >= vol.pages[p].page_no) {
                throw Error(kModule, Errc::InvalidInput,
                            "page numbers of volume " + std::to_string(vol.volume_no) + " must increase");
            }
            joined += vol.pages[p].text;
        }
        if (joined != vol.full_text) {
            throw Error(kModule, Errc::InvalidInput,
                        "volume " + std::to_string(vol.volume_no) + " full_text differs from its pages");
        }
    }
}

// ---------------------------------------------------------------------------
// normalize / tokenize / segment

std::string normalize(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (std::size_t i = 0; i < text.size();) {
        const auto cp = decode(text, i);
        i += cp.length;
        if (!cp.valid) {
            if (pending_space && !out.empty()) {
                out += ' ';
            }
            pending_space = false;
            out += text[i - 1];
            continue;
        }
        if (is_space(cp.value)) {
            pending_space = true;
            continue;
        }
        if (is_control(cp.value)) {
            continue;
        }
        if (pending_space && !out.empty()) {
            out += ' ';
        }
        pending_space = false;
        encode(to_lower(cp.value), out);
    }
    return out;
}

std::vector<Token> tokenize(std::string_view text, const LexicalResource& resource)
{
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        auto cp = decode(text, i);
        if (!(cp.valid && is_word_char(cp.value))) {
            i += cp.length;
            continue;
        }
        const std::size_t start = i;
        std::size_t end = i;
        while (i < text.size()) {
            cp = decode(text, i);
            if (cp.valid && is_word_char(cp.value)) {
                i += cp.length;
                end = i;
                continue;
            }
            if (cp.valid && is_apostrophe(cp.value) && i + cp.length < text.size()) {
                const auto next = decode(text, i + cp.length);
                if (next.valid && is_word_char(next.value)) {
                    i += cp.length;
                    continue;
                }
            }
            break;
        }
        Token tok;
        tok.surface = std::string(text.substr(start, end - start));
        tok.lemma = resource.lemma_of(tok.surface);
        tok.offset = start;
        tokens.push_back(std::move(tok));
        i = end;
    }
    return tokens;
}

std::set<std::string, std::less<>> SegmenterOptions::default_abbreviations()
{
    return {"mr", "mrs", "ms", "dr", "st", "prof", "rev", "gen", "col", "capt", "lt", "sgt",
            "messrs", "vol", "vols", "pp", "ch", "chap", "cf", "e.g", "i.e", "viz", "vs",
            "fig", "ed", "eds", "jr", "sr", "mt"};
}

std::string make_sentence_id(int volume_no, std::size_t index)
{
    char buf[48];
    std::snprintf(buf, sizeof(buf), "v%02d-s%06zu", volume_no, index);
    return buf;
}

namespace {

struct Span {
    std::size_t start;
    std::size_t end;
};

bool abbreviation_before(std::string_view text, std::size_t dot, const SegmenterOptions& options)
{
    std::size_t b = dot;
    while (b > 0 && text[b - 1] != ' ') {
        --b;
    }
    std::string_view word = text.substr(b, dot - b);
    // strip opening quotes or brackets glued to the word
    while (!word.empty()) {
        const auto cp = decode(word, 0);
        if (cp.valid && is_opener(cp.value)) {
            word.remove_prefix(cp.length);
        } else {
            break;
        }
    }
    return !word.empty() && options.abbreviations.contains(word);
}

std::vector<Span> sentence_spans(std::string_view text, const SegmenterOptions& options)
{
    std::vector<Span> spans;
    std::size_t i = 0;
    auto skip_space = [&](std::size_t p) {
        while (p < text.size()) {
            const auto cp = decode(text, p);
            if (!(cp.valid && is_space(cp.value))) {
                break;
            }
            p += cp.length;
        }
        return p;
    };
    std::size_t start = skip_space(0);
    i = start;
    while (i < text.size()) {
        const char c = text[i];
        if (c != '.' && c != '!' && c != '?') {
            i += decode(text, i).length;
            continue;
        }
        const std::size_t run_start = i;
        while (i < text.size() && (text[i] == '.' || text[i] == '!' || text[i] == '?')) {
            ++i;
        }
        const bool single_dot = (i - run_start == 1) && c == '.';
        std::size_t end = i;
        while (end < text.size()) {
            const auto cp = decode(text, end);
            if (cp.valid && is_closer(cp.value)) {
                end += cp.length;
            } else {
                break;
            }
        }
        const bool at_boundary = end == text.size() || (decode(text, end).valid && is_space(decode(text, end).value));
        if (!at_boundary) {
            i = end > i ? end : i;
            continue;
        }
        if (single_dot && abbreviation_before(text, run_start, options)) {
            i = end;
            continue;
        }
        spans.push_back({start, end});
        start = skip_space(end);
        i = start;
    }
    if (start < text.size()) {
        std::size_t end = text.size();
        while (end > start && text[end - 1] == ' ') {
            --end;
        }
        if (end > start) {
            spans.push_back({start, end});
        }
    }

    // Punctuation-only fragments join their neighbour so every sentence has tokens.
    std::vector<Span> merged;
    for (const auto& s : spans) {
        if (!has_word_char(text.substr(s.start, s.end - s.start)) && !merged.empty()) {
            merged.back().end = s.end;
        } else {
            merged.push_back(s);
        }
    }
    if (merged.size() > 1 && !has_word_char(text.substr(merged[0].start, merged[0].end - merged[0].start))) {
        merged[1].start = merged[0].start;
        merged.erase(merged.begin());
    }
    return merged;
}

} // namespace

std::vector<SentenceRecord> segment_sentences(const Volume& volume, const LexicalResource& resource,
                                              const SegmenterOptions& options)
{
    std::vector<SentenceRecord> out;
    const std::string_view text = volume.full_text;
    const auto spans = sentence_spans(text, options);
    out.reserve(spans.size());
    for (std::size_t k = 0; k < spans.size(); ++k) {
        SentenceRecord rec;
        rec.sentence_id = make_sentence_id(volume.volume_no, k);
        rec.volume_no = volume.volume_no;
        rec.page_no = volume.page_at(spans[k].start);
        rec.char_start = spans[k].start;
        rec.char_end = spans[k].end;
        rec.text = std::string(text.substr(spans[k].start, spans[k].end - spans[k].start));
        rec.tokens = tokenize(rec.text, resource);
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<SentenceRecord> segment_edition(const Edition& edition, const LexicalResource& resource,
                                            const SegmenterOptions& options)
{
    std::vector<SentenceRecord> all;
    for (const auto& vol : edition.volumes) {
        auto part = segment_sentences(vol, resource, options);
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return all;
}

// ---------------------------------------------------------------------------
// Loading

Volume make_volume(int volume_no, std::span<const std::string> raw_pages, int first_page)
{
    Volume vol;
    vol.volume_no = volume_no;
    for (std::size_t i = 0; i < raw_pages.size(); ++i) {
        Page page;
        page.page_no = first_page + static_cast<int>(i);
        page.text = normalize(raw_pages[i]);
        vol.pages.push_back(std::move(page));
    }
    // Single-space joints; a page never ends with the joint if nothing follows it.
    for (std::size_t i = 0; i + 1 < vol.pages.size(); ++i) {
        if (vol.pages[i].text.empty()) {
            continue;
        }
        const bool later_text = std::any_of(vol.pages.begin() + static_cast<std::ptrdiff_t>(i + 1), vol.pages.end(),
                                            [](const Page& p) { return !p.text.empty(); });
        if (later_text) {
            vol.pages[i].text += ' ';
        }
    }
    vol.rebuild_text();
    return vol;
}

std::vector<Edition> load_manifest(const std::filesystem::path& manifest)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(util::read_file(manifest));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(kModule, Errc::InvalidInput, "manifest " + manifest.string() + ": " + e.what());
    }
    const nlohmann::json entries = doc.is_object() && doc.contains("volumes") ? doc["volumes"] : doc;
    if (!entries.is_array()) {
        throw Error(kModule, Errc::InvalidInput, "manifest must be an array of volume entries");
    }
    std::map<std::string, Edition> by_id;
    std::vector<std::string> order;
    const auto base = manifest.parent_path();
    for (const auto& e : entries) {
        try {
            const auto edition_id = e.at("edition_id").get<std::string>();
            const int volume_no = e.at("volume_no").get<int>();
            const auto raw = util::read_file(base / e.at("file").get<std::string>());
            std::vector<std::size_t> breaks = e.value("page_breaks", std::vector<std::size_t>{});
            const int first_page = e.value("first_page", 1);
            if (!breaks.empty() && breaks.front() == 0) {
                breaks.erase(breaks.begin());
            }
            std::vector<std::string> pages;
            std::size_t prev = 0;
            for (auto b : breaks) {
                if (b <= prev || b > raw.size()) {
                    throw Error(kModule, Errc::InvalidInput,
                                "page_breaks of " + edition_id + " volume " + std::to_string(volume_no)
                                    + " must be increasing offsets within the file");
                }
                pages.push_back(raw.substr(prev, b - prev));
                prev = b;
            }
            pages.push_back(raw.substr(prev));
            if (!by_id.contains(edition_id)) {
                order.push_back(edition_id);
                by_id[edition_id].edition_id = edition_id;
            }
            auto& ed = by_id[edition_id];
            for (const auto& v : ed.volumes) {
                if (v.volume_no == volume_no) {
                    throw Error(kModule, Errc::InvalidInput,
                                "duplicate volume " + std::to_string(volume_no) + " in " + edition_id);
                }
            }
            ed.volumes.push_back(make_volume(volume_no, pages, first_page));
        } catch (const nlohmann::json::exception& ex) {
            throw Error(kModule, Errc::InvalidInput, std::string("manifest entry: ") + ex.what());
        }
    }
    std::vector<Edition> out;
    for (const auto& id : order) {
        auto ed = std::move(by_id[id]);
        std::sort(ed.volumes.begin(), ed.volumes.end(),
                  [](const Volume& a, const Volume& b) { return a.volume_no < b.volume_no; });
        ed.validate();
        out.push_back(std::move(ed));
    }
    return out;
}

std::vector<SentenceRecord> load_sentences_jsonl(const std::filesystem::path& path,
                                                 const LexicalResource& resource)
{
    std::vector<SentenceRecord> out;
    std::map<int, std::size_t> cursor_by_volume;
    for (const auto& row : util::read_jsonl(path)) {
        SentenceRecord rec;
        try {
            rec.sentence_id = row.at("sentence_id").get<std::string>();
            rec.volume_no = row.at("volume_no").get<int>();
            rec.page_no = row.at("page_no").get<int>();
            rec.text = normalize(row.at("text").get<std::string>());
        } catch (const nlohmann::json::exception& ex) {
            throw Error(kModule, Errc::InvalidInput, path.string() + ": " + ex.what());
        }
        auto& cursor = cursor_by_volume[rec.volume_no];
        rec.char_start = cursor;
        rec.char_end = cursor + rec.text.size();
        cursor = rec.char_end + 1;
        rec.tokens = tokenize(rec.text, resource);
        out.push_back(std::move(rec));
    }
    std::set<std::string> seen;
    for (const auto& rec : out) {
        if (!seen.insert(rec.sentence_id).second) {
            throw Error(kModule, Errc::InvalidInput, "duplicate sentence_id " + rec.sentence_id);
        }
    }
    return out;
}

} // namespace motifidx::corpus
