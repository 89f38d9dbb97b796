#pragma once

// Shared fixtures and oracles for the unit suites and the acceptance run.

#include "motifidx/align.hpp"
#include "motifidx/corpus.hpp"
#include "motifidx/metrics.hpp"
#include "motifidx/types.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace support {

std::filesystem::path fixture(const std::string& relative);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

// ---------------------------------------------------------------------------
// alignment

/// Exhaustive maximum over every global alignment path, summed in path order.
double brute_force_nw(const std::vector<motifidx::corpus::Token>& a, const std::vector<motifidx::corpus::Token>& b,
                      const motifidx::corpus::LexicalResource& resource, const motifidx::align::ScoringScheme& scheme);

std::vector<motifidx::corpus::Token> tokens_of(const std::vector<std::string>& words,
                                               const motifidx::corpus::LexicalResource& resource);

/// Two editions of one text: the target substitutes a synonym for a share of
/// the words and is paginated differently. `source_page_ends[k]` is the number
/// of tokens through source page k; the target's token stream is parallel.
struct SyntheticEditions {
    motifidx::corpus::Edition source;
    motifidx::corpus::Edition target;
    std::shared_ptr<motifidx::corpus::LexicalResource> lexicon;
    std::vector<std::size_t> source_page_ends;
    std::vector<std::size_t> target_token_offsets; ///< byte offset of each target token in volume text
    std::size_t substituted = 0;
    std::size_t words = 0;
};

SyntheticEditions make_synthetic_editions(std::uint64_t seed, int pages = 20, double substitution_rate = 0.2);

/// Writes both editions as raw files plus a manifest; returns the manifest path.
std::filesystem::path write_manifest(const SyntheticEditions& eds, const std::filesystem::path& dir);

/// Token index of a character offset in the target volume text.
std::size_t target_token_at(const SyntheticEditions& eds, std::size_t char_offset);

// ---------------------------------------------------------------------------
// 200-motif profile

struct ProfileRow {
    std::string motif_id;
    std::string description;
    motifidx::Complexity conceptual = motifidx::Complexity::Simple;
    motifidx::Complexity expression = motifidx::Complexity::Simple; ///< motif-level category
    std::string expression_profile;                                 ///< SIMPLE_ONLY | BOTH | COMPLEX_ONLY
    std::size_t positives_simple = 0;
    std::size_t positives_complex = 0;
    std::size_t negatives = 0;
};

std::vector<ProfileRow> load_profile();

/// Labeled pairs for the profile. Sentence ids cycle through `sentence_count`
/// ids so every sentence is used and no motif repeats a sentence.
std::vector<motifidx::metrics::LabeledPair> profile_pairs(const std::vector<ProfileRow>& rows,
                                                          std::size_t sentence_count);

std::string sentence_id(std::size_t i);

// ---------------------------------------------------------------------------
// kappa

/// Two parallel label lists realising a 2x2 contingency table.
std::pair<std::vector<motifidx::Label>, std::vector<motifidx::Label>>
contingency(std::size_t both_yes, std::size_t a_yes_b_no, std::size_t a_no_b_yes, std::size_t both_no);

} // namespace support
