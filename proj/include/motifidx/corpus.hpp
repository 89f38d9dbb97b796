#pragma once

// Edition ingestion: normalization, sentence segmentation, tokenization and
// the lemma/synonym resource used by alignment.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace motifidx::corpus {

struct Token {
    std::string surface;
    std::string lemma;
    std::size_t offset = 0; ///< byte offset into the tokenized text

    bool operator==(const Token&) const = default;
};

/// Lemma table plus synonym table loaded from a TSV file with lines
/// `lemma<TAB>surface,surface,...<TAB>synonym,synonym,...`.
///
/// Unknown words lemmatize to their lowercased form and have no synonyms.
class LexicalResource {
public:
    LexicalResource() = default;

    static LexicalResource load(const std::filesystem::path& path);
    static LexicalResource parse(std::istream& in);

    /// Merges one record; repeated lemmas accumulate surfaces and synonyms.
    void add(std::string_view lemma, std::span<const std::string> surfaces,
             std::span<const std::string> synonyms);

    std::string lemma_of(std::string_view word) const;
    /// Stored synonyms of `lemma`, never including the lemma itself.
    const std::set<std::string>& synonyms_of_lemma(const std::string& lemma) const;

    std::size_t lemma_count() const noexcept { return synonyms_.size(); }
    bool empty() const noexcept { return surface_to_lemma_.empty() && synonyms_.empty(); }

private:
    std::map<std::string, std::string, std::less<>> surface_to_lemma_;
    std::map<std::string, std::set<std::string>, std::less<>> synonyms_;
};

struct Page {
    int page_no = 0;
    std::string text;
};

/// One volume of an edition. `full_text` is the concatenation of page texts.
struct Volume {
    int volume_no = 0;
    std::vector<Page> pages;
    std::string full_text;

    /// Byte offset of page `index` in full_text.
    std::size_t page_start(std::size_t index) const;
    /// Page number containing byte `offset` (last page for offsets past the end).
    int page_at(std::size_t offset) const;
    /// Rebuilds full_text from pages.
    void rebuild_text();
};

struct Edition {
    std::string edition_id;
    std::vector<Volume> volumes;

    /// Throws InvalidInput when ids, volume order or page order are broken.
    void validate() const;
};

struct SentenceRecord {
    std::string sentence_id;
    int volume_no = 0;
    int page_no = 0;
    std::size_t char_start = 0; ///< half-open span in Volume::full_text
    std::size_t char_end = 0;
    std::string text;
    std::vector<Token> tokens;
};

/// Lowercases, collapses whitespace runs to one space, trims, and drops
/// control characters. Idempotent.
std::string normalize(std::string_view text);

struct SegmenterOptions {
    /// Words that do not end a sentence when followed by '.'.
    std::set<std::string, std::less<>> abbreviations = default_abbreviations();

    static std::set<std::string, std::less<>> default_abbreviations();
};

/// Splits a normalized volume into sentences covering its text in order.
std::vector<SentenceRecord> segment_sentences(const Volume& volume, const LexicalResource& resource,
                                              const SegmenterOptions& options = {});

std::vector<Token> tokenize(std::string_view text, const LexicalResource& resource);

/// Synonyms of a word's lemma; empty for unknown words.
std::set<std::string> synonyms(std::string_view word, const LexicalResource& resource);

/// Stable sentence id: "v<volume:02>-s<index:06>".
std::string make_sentence_id(int volume_no, std::size_t index);

// ---------------------------------------------------------------------------
// Loading

/// Loads a volume manifest: a JSON array (or {"volumes": [...]}) of
/// {edition_id, volume_no, file, page_breaks, first_page?}. `page_breaks`
/// are byte offsets in the raw file where pages after the first begin.
/// Page texts are normalized individually and joined by single spaces.
std::vector<Edition> load_manifest(const std::filesystem::path& manifest);

/// Builds a volume from raw page texts (normalizing each page).
Volume make_volume(int volume_no, std::span<const std::string> raw_pages, int first_page = 1);

/// Reads pre-segmented JSONL {sentence_id, volume_no, page_no, text}.
/// Spans index a synthetic volume text made by joining sentences with spaces.
std::vector<SentenceRecord> load_sentences_jsonl(const std::filesystem::path& path,
                                                 const LexicalResource& resource);

/// All sentences of an edition in document order.
std::vector<SentenceRecord> segment_edition(const Edition& edition, const LexicalResource& resource,
                                            const SegmenterOptions& options = {});

} // namespace motifidx::corpus
