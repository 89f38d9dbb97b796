#pragma once

// Small shared helpers: file IO, CSV rows, hashing and seeded sampling.

#include <cstdint>
#include <exception>
#include <functional>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace motifidx::util {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);

/// RFC 4180 rows: quoted fields, doubled quotes, CRLF or LF line ends.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

std::uint64_t fnv1a64(std::string_view data) noexcept;
std::string hex64(std::uint64_t v);

/// Uniform integer in [0, bound) using rejection on the raw engine output, so
/// that draws are identical across standard library implementations.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);

/// Runs fn(0..count-1) on at most `workers` threads. Returns one slot per
/// index holding the exception it threw, if any.
std::vector<std::exception_ptr> parallel_for(std::size_t count, std::size_t workers,
                                             const std::function<void(std::size_t)>& fn);

template <typename T>
void seeded_shuffle(std::vector<T>& items, std::mt19937_64& rng)
{
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace motifidx::util
