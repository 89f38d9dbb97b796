#include "motifidx/util.hpp"

#include "motifidx/error.hpp"

#include <algorithm>
#include <fstream>
#include <atomic>
#include <limits>
#include <thread>
#include <sstream>

namespace motifidx::util {

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("io", Errc::Io, "cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content)
{
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("io", Errc::Io, "cannot write " + path.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path)
{
    const auto text = read_file(path);
    std::vector<nlohmann::json> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            nl = text.size();
        }
        ++line_no;
        const auto line = trim(std::string_view(text).substr(pos, nl - pos));
        if (!line.empty()) {
            try {
                rows.push_back(nlohmann::json::parse(line));
            } catch (const nlohmann::json::parse_error& e) {
                throw Error("io", Errc::InvalidInput,
                            path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        pos = nl + 1;
    }
    return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows)
{
    std::string out;
    for (const auto& row : rows) {
        out += row.dump();
        out += '\n';
    }
    write_file(path, out);
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            quoted = true;
            field_started = true;
            break;
        case ',':
            row.push_back(std::move(field));
            field.clear();
            field_started = true;
            break;
        case '\r':
            break;
        case '\n':
            if (field_started || !field.empty() || !row.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            field.clear();
            row.clear();
            field_started = false;
            break;
        default:
            field += c;
            field_started = true;
        }
    }
    if (quoted) {
        throw Error("io", Errc::InvalidInput, "unterminated quoted CSV field");
    }
    if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string csv_escape(std::string_view field)
{
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        parts.emplace_back(s.substr(pos, next - pos));
        if (next == std::string_view::npos) {
            break;
        }
        pos = next + 1;
    }
    return parts;
}

std::string_view trim(std::string_view s)
{
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::uint64_t fnv1a64(std::string_view data) noexcept
{
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound)
{
    if (bound <= 1) {
        return 0;
    }
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max()
                                - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t draw = 0;
    do {
        draw = rng();
    } while (draw >= limit);
    return draw % bound;
}

std::vector<std::exception_ptr> parallel_for(std::size_t count, std::size_t workers,
                                             const std::function<void(std::size_t)>& fn)
{
    std::vector<std::exception_ptr> errors(count);
    auto run = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            run(i);
        }
        return errors;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (auto i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                run(i);
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    return errors;
}

} // namespace motifidx::util
