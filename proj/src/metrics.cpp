#include "motifidx/metrics.hpp"

#include "motifidx/error.hpp"
#include "motifidx/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <tuple>
#include <cstdio>
#include <random>
#include <sstream>

namespace motifidx::metrics {

namespace {

constexpr const char* kModule = "metrics";

double ratio(std::size_t num, std::size_t den, bool& undefined)
{
    if (den == 0) {
        undefined = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o)
{
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
}

double f1_score(double precision, double recall)
{
    if (precision + recall == 0.0) {
        return 0.0;
    }
    return 2.0 * precision * recall / (precision + recall);
}

Prf1 prf1(const ConfusionCounts& c)
{
    Prf1 out;
    out.precision = ratio(c.tp, c.tp + c.fp, out.precision_undefined);
    out.recall = ratio(c.tp, c.tp + c.fn, out.recall_undefined);
    out.f1_undefined = out.precision + out.recall == 0.0;
    out.f1 = f1_score(out.precision, out.recall);
    return out;
}

double stage_recall(const std::set<std::string>& retrieved, const std::set<std::string>& gold)
{
    if (gold.empty()) {
        throw Error(kModule, Errc::EmptyGold, "stage recall needs a non-empty gold set");
    }
    std::size_t hit = 0;
    for (const auto& g : gold) {
        hit += retrieved.contains(g) ? 1 : 0;
    }
    return static_cast<double>(hit) / static_cast<double>(gold.size());
}

Kappa cohens_kappa(std::span<const Label> a, std::span<const Label> b)
{
    if (a.size() != b.size() || a.empty()) {
        throw Error(kModule, Errc::LengthMismatch,
                    "kappa needs equal non-empty label lists, got " + std::to_string(a.size()) + " and "
                        + std::to_string(b.size()));
    }
    const auto n = static_cast<double>(a.size());
    std::size_t agree = 0;
    std::size_t a_pos = 0;
    std::size_t b_pos = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        agree += a[i] == b[i] ? 1 : 0;
        a_pos += a[i] == Label::Positive ? 1 : 0;
        b_pos += b[i] == Label::Positive ? 1 : 0;
    }
    Kappa k;
    k.observed = static_cast<double>(agree) / n;
    const double pa = static_cast<double>(a_pos) / n;
    const double pb = static_cast<double>(b_pos) / n;
    k.expected = pa * pb + (1.0 - pa) * (1.0 - pb);
    if (k.expected >= 1.0) {
        k.degenerate = true;
        k.value = 1.0;
        return k;
    }
    k.value = (k.observed - k.expected) / (1.0 - k.expected);
    return k;
}

std::vector<LabeledPair> resample_balanced(std::span<const LabeledPair> pairs, std::uint64_t seed)
{
    std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_motif;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto& [pos, neg] = by_motif[pairs[i].motif_id];
        (pairs[i].label == Label::Positive ? pos : neg).push_back(i);
    }
    std::vector<std::string> short_motifs;
    for (const auto& [motif, groups] : by_motif) {
        if (groups.second.size() < groups.first.size()) {
            short_motifs.push_back(motif + " (" + std::to_string(groups.first.size()) + " pos, "
                                   + std::to_string(groups.second.size()) + " neg)");
        }
    }
    if (!short_motifs.empty()) {
        std::string msg = "motifs with fewer negatives than positives:";
        for (const auto& m : short_motifs) {
            msg += " " + m;
        }
        throw Error(kModule, Errc::InsufficientNegatives, msg);
    }
    std::mt19937_64 rng(seed);
    std::vector<LabeledPair> out;
    for (auto& [motif, groups] : by_motif) {
        auto& [pos, neg] = groups;
        if (pos.empty()) {
            continue;
        }
        util::seeded_shuffle(neg, rng);
        neg.resize(pos.size());
        std::sort(neg.begin(), neg.end());
        for (auto i : pos) {
            out.push_back(pairs[i]);
        }
        for (auto i : neg) {
            out.push_back(pairs[i]);
        }
    }
    return out;
}

const std::map<CellKey, SplitTargets>& published_split_targets()
{
    using C = Complexity;
    static const std::map<CellKey, SplitTargets> targets = {
        {{C::Simple, C::Simple}, {22, 3, 9}},
        {{C::Simple, C::Complex}, {81, 17, 10}},
        {{C::Complex, C::Simple}, {6, 3, 2}},
        {{C::Complex, C::Complex}, {31, 7, 9}},
    };
    return targets;
}

SplitSpec split_by_motif(std::span<const MotifCell> motifs, const std::map<CellKey, SplitTargets>& targets,
                         std::uint64_t seed)
{
    std::map<CellKey, std::vector<std::string>> cells;
    std::set<std::string> seen;
    for (const auto& m : motifs) {
        if (!seen.insert(m.motif_id).second) {
            throw Error(kModule, Errc::InvalidInput, "motif " + m.motif_id + " listed twice");
        }
        cells[{m.conceptual, m.expression}].push_back(m.motif_id);
    }
    auto cell_name = [](const CellKey& k) {
        return std::string(to_string(k.first)) + "/" + std::string(to_string(k.second));
    };
    for (const auto& [key, t] : targets) {
        const auto have = cells.contains(key) ? cells.at(key).size() : 0;
        if (t.total() != have) {
            throw Error(kModule, Errc::InfeasibleTargets,
                        "cell " + cell_name(key) + " has " + std::to_string(have) + " motifs but targets sum to "
                            + std::to_string(t.total()));
        }
    }
    for (const auto& [key, ids] : cells) {
        if (!targets.contains(key)) {
            throw Error(kModule, Errc::InfeasibleTargets,
                        "cell " + cell_name(key) + " has " + std::to_string(ids.size()) + " motifs but no targets");
        }
    }
    SplitSpec spec;
    spec.seed = seed;
    std::mt19937_64 rng(seed);
    for (auto& [key, ids] : cells) {
        std::sort(ids.begin(), ids.end());
        util::seeded_shuffle(ids, rng);
        const auto& t = targets.at(key);
        spec.train.insert(spec.train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(t.train));
        spec.val.insert(spec.val.end(), ids.begin() + static_cast<std::ptrdiff_t>(t.train),
                        ids.begin() + static_cast<std::ptrdiff_t>(t.train + t.val));
        spec.test.insert(spec.test.end(), ids.begin() + static_cast<std::ptrdiff_t>(t.train + t.val), ids.end());
    }
    std::sort(spec.train.begin(), spec.train.end());
    std::sort(spec.val.begin(), spec.val.end());
    std::sort(spec.test.begin(), spec.test.end());
    return spec;
}

nlohmann::json to_json(const SplitSpec& s)
{
    return {{"seed", s.seed}, {"train", s.train}, {"val", s.val}, {"test", s.test}};
}

std::string_view to_string(Axis a) noexcept
{
    switch (a) {
    case Axis::Simple: return "SIMPLE";
    case Axis::Complex: return "COMPLEX";
    case Axis::Overall: return "OVERALL";
    }
    return "OVERALL";
}

Axis axis_of(Complexity c) noexcept
{
    return c == Complexity::Simple ? Axis::Simple : Axis::Complex;
}

nlohmann::json GridReport::to_json() const
{
    nlohmann::json cells_json = nlohmann::json::array();
    for (const auto& [key, cell] : cells) {
        cells_json.push_back({{"conceptual", metrics::to_string(key.first)},
                              {"expression", metrics::to_string(key.second)},
                              {"tp", cell.counts.tp},
                              {"fp", cell.counts.fp},
                              {"fn", cell.counts.fn},
                              {"tn", cell.counts.tn},
                              {"precision", cell.scores.precision},
                              {"recall", cell.scores.recall},
                              {"f1", cell.scores.f1},
                              {"undefined",
                               {{"precision", cell.scores.precision_undefined},
                                {"recall", cell.scores.recall_undefined},
                                {"f1", cell.scores.f1_undefined}}}});
    }
    return {{"method_id", method_id}, {"overall_pooling", "micro"}, {"zero_division", 0}, {"cells", cells_json}};
}

std::string GridReport::render_table() const
{
    constexpr Axis axes[] = {Axis::Simple, Axis::Complex, Axis::Overall};
    auto pad = [](std::string s, std::size_t w) {
        if (s.size() < w) {
            s.append(w - s.size(), ' ');
        }
        return s;
    };
    std::ostringstream out;
    out << method_id << "  (precision/recall/f1; rows conceptual, columns expression)\n";
    out << pad("", 12);
    for (auto e : axes) {
        out << pad(std::string(metrics::to_string(e)), 18);
    }
    out << '\n';
    for (auto c : axes) {
        out << pad(std::string(metrics::to_string(c)), 12);
        for (auto e : axes) {
            const auto it = cells.find({c, e});
            std::string text = "-";
            if (it != cells.end()) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.2f/%.2f/%.2f", it->second.scores.precision,
                              it->second.scores.recall, it->second.scores.f1);
                text = buf;
            }
            out << pad(text, 18);
        }
        out << '\n';
    }
    return out.str();
}

GridReport grid_report(std::string method_id, std::span<const classify::Verdict> verdicts, const PairLabels& gold,
                       const PairComplexity& expression_labels,
                       const std::map<std::string, Complexity>& conceptual_labels)
{
    if (verdicts.empty()) {
        throw Error(kModule, Errc::MissingLabel, "no verdicts to evaluate");
    }
    GridReport report;
    report.method_id = std::move(method_id);
    constexpr Axis axes[] = {Axis::Simple, Axis::Complex, Axis::Overall};
    for (auto c : axes) {
        for (auto e : axes) {
            report.cells[{c, e}];
        }
    }
    for (const auto& v : verdicts) {
        const auto pair = v.pair();
        const auto g = gold.find(pair);
        if (g == gold.end()) {
            throw Error(kModule, Errc::MissingLabel, "no gold label for " + pair.key());
        }
        const auto ex = expression_labels.find(pair);
        if (ex == expression_labels.end()) {
            throw Error(kModule, Errc::MissingLabel, "no expression category for " + pair.key());
        }
        const auto co = conceptual_labels.find(v.motif_id);
        if (co == conceptual_labels.end()) {
            throw Error(kModule, Errc::MissingLabel, "no conceptual category for " + pair.key());
        }
        ConfusionCounts one;
        const bool pred = v.label == Label::Positive;
        const bool truth = g->second == Label::Positive;
        (pred ? (truth ? one.tp : one.fp) : (truth ? one.fn : one.tn)) = 1;
        const auto ca = axis_of(co->second);
        const auto ea = axis_of(ex->second);
        for (auto c : {ca, Axis::Overall}) {
            for (auto e : {ea, Axis::Overall}) {
                report.cells[{c, e}].counts += one;
            }
        }
    }
    for (auto& [key, cell] : report.cells) {
        cell.scores = prf1(cell.counts);
    }
    return report;
}

// ---------------------------------------------------------------------------
// published score tables

std::vector<ReportedRow> parse_reported_rows(std::string_view csv_text)
{
    const auto rows = util::parse_csv(csv_text);
    const std::vector<std::string> header{"method", "conceptual", "expression", "precision", "recall", "f1"};
    if (rows.empty() || rows.front() != header) {
        throw Error(kModule, Errc::InvalidInput, "score table needs header method,conceptual,expression,precision,recall,f1");
    }
    std::vector<ReportedRow> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != header.size()) {
            throw Error(kModule, Errc::InvalidInput, "score table row " + std::to_string(i) + " has the wrong width");
        }
        out.push_back({r[0], r[1], r[2], r[3], r[4], r[5]});
    }
    return out;
}

namespace {

std::optional<double> two_decimal(const std::string& s)
{
    // "0.dd" or "1.00"
    if (s.size() != 4 || s[1] != '.' || !std::isdigit(static_cast<unsigned char>(s[0]))
        || !std::isdigit(static_cast<unsigned char>(s[2])) || !std::isdigit(static_cast<unsigned char>(s[3]))) {
        return std::nullopt;
    }
    const double v = std::stod(s);
    if (v < 0.0 || v > 1.0) {
        return std::nullopt;
    }
    return v;
}

bool rounding_feasible(double p, double r, double f)
{
    constexpr double h = 0.005;
    const double lo = f1_score(std::max(0.0, p - h), std::max(0.0, r - h));
    const double hi = f1_score(std::min(1.0, p + h), std::min(1.0, r + h));
    // f1 is monotone in both arguments, so its range over the box is [lo, hi]
    return hi >= f - h && lo <= f + h;
}

} // namespace

std::vector<RowCheck> check_reported_rows(std::span<const ReportedRow> rows)
{
    std::vector<RowCheck> out;
    out.reserve(rows.size());
    auto triple = [](const ReportedRow& r) { return std::tuple(r.precision, r.recall, r.f1); };
    std::map<std::tuple<std::string, std::string, std::string>, const ReportedRow*> cells;
    for (const auto& r : rows) {
        cells[{r.method, r.conceptual, r.expression}] = &r;
    }
    for (const auto& r : rows) {
        RowCheck c;
        c.row = r;
        const auto p = two_decimal(r.precision);
        const auto rc = two_decimal(r.recall);
        const auto f = two_decimal(r.f1);
        if (!p || !rc || !f) {
            c.excluded_because = "value not printed as a two-decimal number in [0,1]";
            out.push_back(std::move(c));
            continue;
        }
        c.f1_recomputed = f1_score(*p, *rc);
        c.f1_error = std::abs(c.f1_recomputed - *f);
        if (!rounding_feasible(*p, *rc, *f)) {
            c.excluded_because = "no values within rounding of the printed precision/recall give the printed f1";
        } else if (r.expression == "OVERALL") {
            const auto s = cells.find({r.method, r.conceptual, "SIMPLE"});
            const auto x = cells.find({r.method, r.conceptual, "COMPLEX"});
            if (s != cells.end() && x != cells.end()) {
                const bool same_s = triple(*s->second) == triple(r);
                const bool same_x = triple(*x->second) == triple(r);
                if (same_s != same_x) {
                    c.excluded_because = "OVERALL cell repeats one component cell while the other differs";
                }
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace motifidx::metrics
