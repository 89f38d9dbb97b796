#include "motifidx/motif_index.hpp"

#include "motifidx/error.hpp"
#include "motifidx/util.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

namespace motifidx::motif {

namespace {

constexpr const char* kModule = "motif-index";

[[noreturn]] void malformed(std::string_view whole, std::size_t pos, std::string_view why)
{
    const auto bad = whole.substr(std::min(pos, whole.size()));
    throw Error(kModule, Errc::MalformedId,
                "malformed motif id '" + std::string(whole) + "': " + std::string(why) + " at '"
                    + std::string(bad.empty() ? whole : bad) + "'");
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

} // namespace

std::string MotifId::str() const
{
    std::string out(1, theme);
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (i > 0) {
            out += '.';
        }
        out += std::to_string(path[i]);
    }
    return out;
}

MotifId parse_motif_id(std::string_view raw)
{
    const auto s = util::trim(raw);
    if (s.empty()) {
        malformed(raw, 0, "empty id");
    }
    if (s[0] < 'A' || s[0] > 'Z') {
        malformed(s, 0, "theme letter must lead");
    }
    MotifId id;
    id.theme = s[0];
    std::size_t i = 1;
    while (true) {
        if (i >= s.size() || !is_digit(s[i])) {
            malformed(s, i, "expected digits");
        }
        long long value = 0;
        while (i < s.size() && is_digit(s[i])) {
            value = value * 10 + (s[i] - '0');
            if (value > std::numeric_limits<int>::max()) {
                malformed(s, i, "path segment too large");
            }
            ++i;
        }
        id.path.push_back(static_cast<int>(value));
        if (i == s.size()) {
            break;
        }
        if (s[i] != '.') {
            malformed(s, i, "unexpected character");
        }
        ++i;
    }
    return id;
}

std::optional<MotifId> parent_of(const MotifId& id)
{
    if (id.path.size() <= 1) {
        return std::nullopt;
    }
    MotifId parent = id;
    parent.path.pop_back();
    return parent;
}

Complexity conceptual_from_nodes(int graph_node_count) noexcept
{
    return graph_node_count > 2 ? Complexity::Complex : Complexity::Simple;
}

MotifIndex::MotifIndex(std::vector<MotifEntry> entries) : entries_(std::move(entries))
{
    std::stable_sort(entries_.begin(), entries_.end(),
                     [](const MotifEntry& a, const MotifEntry& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (e.graph_node_count && conceptual_from_nodes(*e.graph_node_count) != e.conceptual) {
            throw Error(kModule, Errc::LabelConflict,
                        e.id.str() + ": conceptual label " + std::string(to_string(e.conceptual))
                            + " contradicts graph_node_count " + std::to_string(*e.graph_node_count));
        }
        if (!by_id_.emplace(e.id, i).second) {
            throw Error(kModule, Errc::DuplicateId, "duplicate motif id " + e.id.str());
        }
    }
}

const MotifEntry* MotifIndex::find(const MotifId& id) const
{
    const auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

const MotifEntry* MotifIndex::find(std::string_view id) const
{
    try {
        return find(parse_motif_id(id));
    } catch (const Error&) {
        return nullptr;
    }
}

std::vector<MotifId> MotifIndex::missing_parents() const
{
    std::vector<MotifId> out;
    for (const auto& e : entries_) {
        if (auto p = e.parent(); p && !by_id_.contains(*p)) {
            out.push_back(e.id);
        }
    }
    return out;
}

std::size_t MotifIndex::count(Complexity conceptual) const
{
    return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(),
                                                  [&](const MotifEntry& e) { return e.conceptual == conceptual; }));
}

nlohmann::json MotifIndex::to_json() const
{
    auto arr = nlohmann::json::array();
    for (const auto& e : entries_) {
        nlohmann::json refs = nlohmann::json::array();
        for (const auto& r : e.page_refs) {
            refs.push_back({{"edition_id", r.edition_id}, {"volume_no", r.volume_no}, {"page_no", r.page_no}});
        }
        nlohmann::json row = {
            {"motif_id", e.id.str()},
            {"description", e.description},
            {"theme", std::string(1, e.theme())},
            {"conceptual", to_string(e.conceptual)},
            {"graph_node_count", e.graph_node_count ? nlohmann::json(*e.graph_node_count) : nlohmann::json()},
            {"page_refs", refs},
            {"parent", e.parent() ? nlohmann::json(e.parent()->str()) : nlohmann::json()},
        };
        arr.push_back(std::move(row));
    }
    return arr;
}

namespace {

std::vector<PageRef> parse_page_refs(std::string_view field, const std::string& id)
{
    std::vector<PageRef> refs;
    for (const auto& item : util::split(field, ';')) {
        const auto t = util::trim(item);
        if (t.empty()) {
            continue;
        }
        const auto parts = util::split(t, ':');
        if (parts.size() != 3) {
            throw Error(kModule, Errc::InvalidInput, id + ": page ref '" + std::string(t) + "' is not edition:vol:page");
        }
        try {
            refs.push_back({parts[0], std::stoi(parts[1]), std::stoi(parts[2])});
        } catch (const std::exception&) {
            throw Error(kModule, Errc::InvalidInput, id + ": page ref '" + std::string(t) + "' has non-numeric parts");
        }
    }
    return refs;
}

MotifEntry make_entry(std::string_view id_text, std::string description, std::string_view theme,
                      std::string_view conceptual, std::optional<int> nodes, std::vector<PageRef> refs)
{
    MotifEntry e;
    e.id = parse_motif_id(id_text);
    e.description = std::move(description);
    const auto t = util::trim(theme);
    if (!t.empty() && (t.size() != 1 || t[0] != e.id.theme)) {
        throw Error(kModule, Errc::LabelConflict,
                    e.id.str() + ": theme column '" + std::string(t) + "' differs from the id's theme");
    }
    const auto c = util::trim(conceptual);
    if (c.empty()) {
        if (!nodes) {
            throw Error(kModule, Errc::InvalidInput, e.id.str() + ": needs conceptual or graph_node_count");
        }
        e.conceptual = conceptual_from_nodes(*nodes);
    } else if (auto parsed = parse_complexity(c)) {
        e.conceptual = *parsed;
    } else {
        throw Error(kModule, Errc::InvalidInput, e.id.str() + ": conceptual must be SIMPLE or COMPLEX");
    }
    e.graph_node_count = nodes;
    e.page_refs = std::move(refs);
    return e;
}

} // namespace

MotifIndex parse_index_csv(std::string_view text)
{
    const auto rows = util::parse_csv(text);
    if (rows.empty()) {
        return MotifIndex{};
    }
    const std::vector<std::string> expected = {"motif_id", "description", "theme", "conceptual",
                                               "graph_node_count", "page_refs"};
    std::vector<std::string> header;
    for (const auto& h : rows[0]) {
        header.emplace_back(util::trim(h));
    }
    if (header != expected) {
        throw Error(kModule, Errc::InvalidInput,
                    "index CSV header must be motif_id,description,theme,conceptual,graph_node_count,page_refs");
    }
    std::vector<MotifEntry> entries;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() == 1 && util::trim(row[0]).empty()) {
            continue;
        }
        if (row.size() != expected.size()) {
            throw Error(kModule, Errc::InvalidInput, "index CSV row " + std::to_string(r + 1) + " has "
                                                         + std::to_string(row.size()) + " fields");
        }
        std::optional<int> nodes;
        if (const auto n = util::trim(row[4]); !n.empty()) {
            try {
                nodes = std::stoi(std::string(n));
            } catch (const std::exception&) {
                throw Error(kModule, Errc::InvalidInput, row[0] + ": graph_node_count must be an integer");
            }
        }
        entries.push_back(make_entry(row[0], std::string(util::trim(row[1])), row[2], row[3], nodes,
                                     parse_page_refs(row[5], row[0])));
    }
    return MotifIndex(std::move(entries));
}

MotifIndex parse_index_json(const nlohmann::json& doc)
{
    if (!doc.is_array()) {
        throw Error(kModule, Errc::InvalidInput, "index JSON must be an array");
    }
    std::vector<MotifEntry> entries;
    for (const auto& row : doc) {
        try {
            const auto id = row.at("motif_id").get<std::string>();
            std::optional<int> nodes;
            if (row.contains("graph_node_count") && !row["graph_node_count"].is_null()) {
                nodes = row["graph_node_count"].get<int>();
            }
            std::vector<PageRef> refs;
            if (row.contains("page_refs")) {
                const auto& pr = row["page_refs"];
                if (pr.is_string()) {
                    refs = parse_page_refs(pr.get<std::string>(), id);
                } else {
                    for (const auto& r : pr) {
                        refs.push_back({r.at("edition_id").get<std::string>(), r.at("volume_no").get<int>(),
                                        r.at("page_no").get<int>()});
                    }
                }
            }
            entries.push_back(make_entry(id, row.value("description", std::string{}), row.value("theme", std::string{}),
                                         row.value("conceptual", std::string{}), nodes, std::move(refs)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(kModule, Errc::InvalidInput, std::string("index JSON entry: ") + e.what());
        }
    }
    return MotifIndex(std::move(entries));
}

MotifIndex load_index(const std::filesystem::path& path)
{
    const auto text = util::read_file(path);
    if (path.extension() == ".json") {
        if (util::trim(text).empty()) {
            return MotifIndex{};
        }
        try {
            return parse_index_json(nlohmann::json::parse(text));
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(kModule, Errc::InvalidInput, path.string() + ": " + e.what());
        }
    }
    return parse_index_csv(text);
}

} // namespace motifidx::motif
