#include "motifidx/annotation_store.hpp"

#include "motifidx/error.hpp"
#include "motifidx/util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <mutex>

namespace motifidx::annotation {

namespace {

constexpr const char* kModule = "annotation";

Error schema_error(const std::string& msg)
{
    return Error(kModule, Errc::InvalidInput, msg);
}

nlohmann::json pair_json(const PairId& p)
{
    return nlohmann::json::array({p.motif_id, p.sentence_id});
}

PairId pair_from(const nlohmann::json& j)
{
    if (j.is_array() && j.size() == 2 && j[0].is_string() && j[1].is_string()) {
        return {j[0].get<std::string>(), j[1].get<std::string>()};
    }
    if (j.is_string()) {
        if (auto p = PairId::from_key(j.get<std::string>())) {
            return *p;
        }
    }
    throw schema_error("pair must be [motif_id, sentence_id] or \"motif_id:sentence_id\"");
}

/// Reads the pair of an object given either motif_id/sentence_id or pair_id.
PairId object_pair(const nlohmann::json& j)
{
    if (j.contains("pair_id")) {
        return pair_from(j.at("pair_id"));
    }
    if (!j.contains("motif_id") || !j.contains("sentence_id") || !j["motif_id"].is_string()
        || !j["sentence_id"].is_string()) {
        throw schema_error("missing motif_id/sentence_id");
    }
    return {j["motif_id"].get<std::string>(), j["sentence_id"].get<std::string>()};
}

std::optional<Complexity> optional_complexity(const nlohmann::json& j, const char* key)
{
    if (!j.contains(key) || j[key].is_null()) {
        return std::nullopt;
    }
    if (!j[key].is_string()) {
        throw schema_error(std::string(key) + " must be a string");
    }
    const auto c = parse_complexity(j[key].get<std::string>());
    if (!c) {
        throw schema_error(std::string(key) + " must be SIMPLE or COMPLEX");
    }
    return c;
}

Label required_label(const nlohmann::json& j, const char* key)
{
    if (!j.contains(key) || !j[key].is_string()) {
        throw schema_error(std::string(key) + " must be a string");
    }
    const auto l = parse_label(j[key].get<std::string>());
    if (!l) {
        throw schema_error(std::string(key) + " must be POSITIVE or NEGATIVE");
    }
    return *l;
}

std::string optional_string(const nlohmann::json& j, const char* key)
{
    if (!j.contains(key) || j[key].is_null()) {
        return {};
    }
    if (!j[key].is_string()) {
        throw schema_error(std::string(key) + " must be a string");
    }
    return j[key].get<std::string>();
}

nlohmann::json complexity_json(const std::optional<Complexity>& c)
{
    return c ? nlohmann::json(to_string(*c)) : nlohmann::json();
}

Adjudication adjudication_from(const nlohmann::json& j)
{
    Adjudication a;
    a.pair = object_pair(j);
    a.final_label = required_label(j, "final_label");
    a.final_expression = optional_complexity(j, "final_expression");
    a.resolver_id = optional_string(j, "resolver_id");
    a.note = optional_string(j, "note");
    a.timestamp = optional_string(j, "timestamp");
    return a;
}

Batch batch_from_json(const nlohmann::json& j)
{
    Batch b;
    b.batch_id = optional_string(j, "batch_id");
    b.annotator_id = optional_string(j, "annotator_id");
    for (const auto& p : j.at("pairs")) {
        b.pairs.push_back(pair_from(p));
    }
    for (const auto& p : j.at("double_subset")) {
        b.double_subset.push_back(pair_from(p));
    }
    return b;
}

void check_expression(Label label, const std::optional<Complexity>& expression)
{
    if (label == Label::Positive && !expression) {
        throw Error(kModule, Errc::MissingExpression, "a POSITIVE label needs an expression category");
    }
    if (label == Label::Negative && expression) {
        throw Error(kModule, Errc::InvalidInput, "a NEGATIVE label carries no expression category");
    }
}

} // namespace

// ---------------------------------------------------------------------------
// codecs

PairId pair_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw schema_error("expected a JSON object");
    }
    return object_pair(j);
}

Adjudication adjudication_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw schema_error("expected a JSON object");
    }
    return adjudication_from(j);
}

nlohmann::json to_json(const AnnotationRecord& r)
{
    return {{"motif_id", r.pair.motif_id},
            {"sentence_id", r.pair.sentence_id},
            {"annotator_id", r.annotator_id},
            {"label", to_string(r.label)},
            {"expression", complexity_json(r.expression)},
            {"flagged", r.flagged},
            {"timestamp", r.timestamp}};
}

AnnotationRecord record_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw schema_error("label record must be an object");
    }
    AnnotationRecord r;
    r.pair = object_pair(j);
    r.annotator_id = optional_string(j, "annotator_id");
    if (r.annotator_id.empty()) {
        throw schema_error("annotator_id is required");
    }
    r.label = required_label(j, "label");
    r.expression = optional_complexity(j, "expression");
    if (j.contains("flagged") && !j["flagged"].is_null()) {
        if (!j["flagged"].is_boolean()) {
            throw schema_error("flagged must be a boolean");
        }
        r.flagged = j["flagged"].get<bool>();
    }
    r.timestamp = optional_string(j, "timestamp");
    return r;
}

nlohmann::json to_json(const Batch& b)
{
    nlohmann::json pairs = nlohmann::json::array();
    nlohmann::json doubles = nlohmann::json::array();
    for (const auto& p : b.pairs) {
        pairs.push_back(pair_json(p));
    }
    for (const auto& p : b.double_subset) {
        doubles.push_back(pair_json(p));
    }
    return {{"batch_id", b.batch_id}, {"annotator_id", b.annotator_id}, {"pairs", pairs}, {"double_subset", doubles}};
}

nlohmann::json to_json(const Adjudication& a)
{
    return {{"motif_id", a.pair.motif_id},
            {"sentence_id", a.pair.sentence_id},
            {"final_label", to_string(a.final_label)},
            {"final_expression", complexity_json(a.final_expression)},
            {"resolver_id", a.resolver_id},
            {"note", a.note},
            {"timestamp", a.timestamp}};
}

nlohmann::json Accounting::to_json() const
{
    nlohmann::json motifs = nlohmann::json::object();
    for (const auto& [id, c] : per_motif) {
        motifs[id] = {{"positives", c.positives}, {"negatives", c.negatives}};
    }
    return {{"annotated_pairs", annotated_pairs},
            {"unique_sentences", unique_sentences},
            {"records", records},
            {"double_annotated", double_annotated},
            {"positives", positives},
            {"negatives", negatives},
            {"unresolved", unresolved},
            {"adjudicated", adjudicated},
            {"queued", queued},
            {"per_motif", motifs}};
}

nlohmann::json ContextView::to_json() const
{
    auto sentence_json = [](const Catalog::Sentence& s) {
        return nlohmann::json{{"sentence_id", s.sentence_id}, {"volume_no", s.volume_no}, {"text", s.text}};
    };
    nlohmann::json b = nlohmann::json::array();
    nlohmann::json a = nlohmann::json::array();
    for (const auto& s : before) {
        b.push_back(sentence_json(s));
    }
    for (const auto& s : after) {
        a.push_back(sentence_json(s));
    }
    return {{"motif_id", pair.motif_id},
            {"sentence_id", pair.sentence_id},
            {"motif_description", motif_description},
            {"sentence", sentence_json(sentence)},
            {"before", b},
            {"after", a}};
}

nlohmann::json AgreementGrid::to_json() const
{
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [key, cell] : cells) {
        nlohmann::json c = {{"conceptual", metrics::to_string(key.first)},
                            {"expression", metrics::to_string(key.second)},
                            {"pairs", cell.pairs}};
        if (cell.kappa) {
            c["kappa"] = cell.kappa->value;
            c["degenerate"] = cell.kappa->degenerate;
            c["observed"] = cell.kappa->observed;
            c["expected"] = cell.kappa->expected;
        } else {
            c["kappa"] = nullptr;
        }
        out.push_back(c);
    }
    return {{"cells", out}};
}

// ---------------------------------------------------------------------------
// catalog

Catalog Catalog::from(const motif::MotifIndex& index, std::span<const corpus::SentenceRecord> sentences)
{
    Catalog c;
    for (const auto& e : index.entries()) {
        c.motifs[e.id.str()] = {e.description, e.conceptual, std::nullopt};
    }
    for (const auto& s : sentences) {
        c.add_sentence({s.sentence_id, s.volume_no, s.text});
    }
    return c;
}

void Catalog::add_sentence(Sentence s)
{
    if (!by_id_.emplace(s.sentence_id, sentences.size()).second) {
        throw Error(kModule, Errc::InvalidInput, "duplicate sentence " + s.sentence_id + " in catalog");
    }
    sentences.push_back(std::move(s));
}

std::optional<std::size_t> Catalog::sentence_index(const std::string& sentence_id) const
{
    const auto it = by_id_.find(sentence_id);
    if (it == by_id_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

// ---------------------------------------------------------------------------
// store

bool AnnotationStore::PairState::conflicting() const
{
    return records.size() == 2
           && (records[0].label != records[1].label || records[0].expression != records[1].expression);
}

bool AnnotationStore::PairState::has_flag() const
{
    return std::any_of(records.begin(), records.end(), [](const AnnotationRecord& r) { return r.flagged; });
}

AnnotationStore::AnnotationStore(Catalog catalog, StoreOptions options)
    : catalog_(std::move(catalog)), options_(std::move(options))
{
    if (!options_.log_path) {
        return;
    }
    const auto& path = *options_.log_path;
    if (std::filesystem::exists(path)) {
        replay(path);
    } else if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    log_.open(path, std::ios::binary | std::ios::app);
    if (!log_) {
        throw Error(kModule, Errc::Io, "cannot open record log " + path.string());
    }
}

AnnotationStore::~AnnotationStore() = default;

std::string AnnotationStore::now() const
{
    return options_.clock ? options_.clock() : utc_timestamp();
}

void AnnotationStore::append(const nlohmann::json& row)
{
    if (!log_.is_open()) {
        return;
    }
    log_ << row.dump() << '\n';
    log_.flush();
    if (!log_) {
        throw Error(kModule, Errc::Io, "failed to append to the record log");
    }
}

void AnnotationStore::replay(const std::filesystem::path& path)
{
    const auto text = util::read_file(path);
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        const bool terminated = nl != std::string::npos;
        if (!terminated) {
            nl = text.size();
        }
        ++line_no;
        const auto line = util::trim(std::string_view(text).substr(pos, nl - pos));
        pos = nl + 1;
        if (line.empty()) {
            continue;
        }
        nlohmann::json row;
        try {
            row = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            if (!terminated) {
                break; // torn final write
            }
            throw Error(kModule, Errc::InvalidInput,
                        path.string() + ":" + std::to_string(line_no) + ": unparseable log record");
        }
        try {
            const auto type = row.at("record_type").get<std::string>();
            if (type == "enqueue") {
                std::vector<PairId> pairs;
                for (const auto& p : row.at("pairs")) {
                    pairs.push_back(pair_from(p));
                    validate_reference(pairs.back());
                }
                apply_enqueue(pairs, row.value("priority", 0));
            } else if (type == "assign") {
                apply_assign(batch_from_json(row));
            } else if (type == "label") {
                const auto r = record_from_json(row);
                validate_label(r);
                apply_label(r);
            } else if (type == "adjudicate") {
                apply_adjudicate(adjudication_from(row));
            } else {
                throw schema_error("unknown record_type " + type);
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(kModule, Errc::InvalidInput, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(kModule, e.code(), path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void AnnotationStore::validate_reference(const PairId& p) const
{
    if (!catalog_.motifs.contains(p.motif_id)) {
        throw Error(kModule, Errc::UnknownReference, "unknown motif " + p.motif_id);
    }
    if (!catalog_.sentence_index(p.sentence_id)) {
        throw Error(kModule, Errc::UnknownReference, "unknown sentence " + p.sentence_id);
    }
}

std::size_t AnnotationStore::apply_enqueue(std::span<const PairId> pairs, int priority)
{
    std::size_t added = 0;
    for (const auto& p : pairs) {
        if (index_.contains(p)) {
            continue;
        }
        const auto idx = pairs_.size();
        PairState st;
        st.id = p;
        st.priority = priority;
        st.seq = enqueue_seq_++;
        pairs_.push_back(std::move(st));
        index_.emplace(p, idx);
        fresh_.emplace(-priority, pairs_[idx].seq, idx);
        ++added;
    }
    return added;
}

std::size_t AnnotationStore::enqueue_candidates(std::span<const PairId> pairs, int priority)
{
    std::unique_lock lock(mutex_);
    for (const auto& p : pairs) {
        validate_reference(p);
    }
    std::vector<PairId> fresh;
    std::unordered_map<PairId, bool, PairIdHash> in_call;
    for (const auto& p : pairs) {
        if (!index_.contains(p) && in_call.emplace(p, true).second) {
            fresh.push_back(p);
        }
    }
    if (fresh.empty()) {
        return 0;
    }
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : fresh) {
        arr.push_back(pair_json(p));
    }
    append({{"record_type", "enqueue"}, {"priority", priority}, {"pairs", arr}});
    return apply_enqueue(fresh, priority);
}

void AnnotationStore::apply_assign(const Batch& batch)
{
    for (const auto& p : batch.pairs) {
        const auto it = index_.find(p);
        if (it == index_.end()) {
            throw Error(kModule, Errc::NotInQueue, "assignment of unqueued pair " + p.key());
        }
        auto& st = pairs_[it->second];
        if (std::find(st.assignees.begin(), st.assignees.end(), batch.annotator_id) != st.assignees.end()
            || st.assignees.size() >= 2) {
            throw Error(kModule, Errc::InvalidInput, "pair " + p.key() + " cannot be assigned again");
        }
        st.assignees.push_back(batch.annotator_id);
        if (st.assignees.size() == 1) {
            fresh_.erase({-st.priority, st.seq, it->second});
            st.assign_seq = assign_seq_++;
            singles_.emplace(st.assign_seq, it->second);
        } else {
            singles_.erase({st.assign_seq, it->second});
        }
    }
    batches_.push_back(batch);
}

Batch AnnotationStore::next_batch(const std::string& annotator_id, std::size_t size, double double_rate)
{
    if (annotator_id.empty()) {
        throw Error(kModule, Errc::InvalidInput, "annotator_id is required");
    }
    if (size == 0) {
        throw Error(kModule, Errc::InvalidInput, "batch size must be positive");
    }
    if (!(double_rate >= 0.0 && double_rate <= 1.0)) {
        throw Error(kModule, Errc::InvalidInput, "double_rate must lie in [0,1]");
    }
    std::unique_lock lock(mutex_);
    const auto want_double = std::min<std::size_t>(
        size, static_cast<std::size_t>(std::llround(static_cast<double>(size) * double_rate)));

    Batch b;
    b.annotator_id = annotator_id;
    auto single_it = singles_.begin();
    auto take_doubles = [&](std::size_t limit) {
        while (b.pairs.size() < limit && single_it != singles_.end()) {
            const auto& st = pairs_[single_it->second];
            ++single_it;
            if (st.assignees.front() == annotator_id) {
                continue;
            }
            b.pairs.push_back(st.id);
            b.double_subset.push_back(st.id);
        }
    };
    take_doubles(want_double);
    for (auto it = fresh_.begin(); it != fresh_.end() && b.pairs.size() < size; ++it) {
        b.pairs.push_back(pairs_[std::get<2>(*it)].id);
    }
    take_doubles(size);
    if (b.pairs.empty()) {
        throw Error(kModule, Errc::EmptyQueue, "no assignable pairs for annotator " + annotator_id);
    }
    char id[32];
    std::snprintf(id, sizeof id, "b%06zu", batches_.size() + 1);
    b.batch_id = id;
    auto row = to_json(b);
    row["record_type"] = "assign";
    append(row);
    apply_assign(b);
    return b;
}

void AnnotationStore::validate_label(const AnnotationRecord& r) const
{
    if (r.annotator_id.empty()) {
        throw Error(kModule, Errc::InvalidInput, "annotator_id is required");
    }
    check_expression(r.label, r.expression);
    const auto it = index_.find(r.pair);
    if (it == index_.end()) {
        throw Error(kModule, Errc::NotAssigned, "pair " + r.pair.key() + " is not assigned to " + r.annotator_id);
    }
    const auto& st = pairs_[it->second];
    if (std::find(st.assignees.begin(), st.assignees.end(), r.annotator_id) == st.assignees.end()) {
        throw Error(kModule, Errc::NotAssigned, "pair " + r.pair.key() + " is not assigned to " + r.annotator_id);
    }
    for (const auto& existing : st.records) {
        if (existing.annotator_id == r.annotator_id) {
            throw Error(kModule, Errc::DuplicateRecord,
                        r.annotator_id + " already labeled pair " + r.pair.key());
        }
    }
}

void AnnotationStore::apply_label(const AnnotationRecord& r)
{
    const auto idx = index_.at(r.pair);
    auto& st = pairs_[idx];
    record_order_.emplace_back(idx, st.records.size());
    st.records.push_back(r);
}

AnnotationRecord AnnotationStore::record_label(AnnotationRecord record)
{
    std::unique_lock lock(mutex_);
    if (record.timestamp.empty()) {
        record.timestamp = now();
    }
    validate_label(record);
    auto row = to_json(record);
    row["record_type"] = "label";
    append(row);
    apply_label(record);
    return record;
}

std::vector<Disagreement> AnnotationStore::disagreements() const
{
    std::shared_lock lock(mutex_);
    std::vector<Disagreement> out;
    for (const auto& st : pairs_) {
        if (st.conflicting() && !st.adjudication) {
            out.push_back({st.id, st.records});
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.pair < b.pair; });
    return out;
}

std::vector<PairId> AnnotationStore::flagged() const
{
    std::shared_lock lock(mutex_);
    std::vector<PairId> out;
    for (const auto& st : pairs_) {
        if (st.has_flag() && !st.adjudication) {
            out.push_back(st.id);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void AnnotationStore::apply_adjudicate(const Adjudication& a)
{
    const auto it = index_.find(a.pair);
    if (it == index_.end()) {
        throw Error(kModule, Errc::NotInQueue, "pair " + a.pair.key() + " is not awaiting adjudication");
    }
    auto& st = pairs_[it->second];
    if (st.adjudication || !(st.conflicting() || st.has_flag())) {
        throw Error(kModule, Errc::NotInQueue, "pair " + a.pair.key() + " is not awaiting adjudication");
    }
    check_expression(a.final_label, a.final_expression);
    st.adjudication = a;
}

Adjudication AnnotationStore::adjudicate(const PairId& pair, Label final_label,
                                         std::optional<Complexity> final_expression, const std::string& resolver_id,
                                         const std::string& note)
{
    if (resolver_id.empty()) {
        throw Error(kModule, Errc::InvalidInput, "resolver_id is required");
    }
    std::unique_lock lock(mutex_);
    Adjudication a{pair, final_label, final_expression, resolver_id, note, now()};
    {
        // validate against the current state before logging
        const auto it = index_.find(pair);
        if (it == index_.end() || pairs_[it->second].adjudication
            || !(pairs_[it->second].conflicting() || pairs_[it->second].has_flag())) {
            throw Error(kModule, Errc::NotInQueue, "pair " + pair.key() + " is not awaiting adjudication");
        }
        check_expression(final_label, final_expression);
    }
    auto row = to_json(a);
    row["record_type"] = "adjudicate";
    append(row);
    apply_adjudicate(a);
    return a;
}

std::map<PairId, GoldLabel> AnnotationStore::gold_locked() const
{
    std::map<PairId, GoldLabel> out;
    for (const auto& st : pairs_) {
        if (st.adjudication) {
            out[st.id] = {st.adjudication->final_label, st.adjudication->final_expression};
        } else if (!st.records.empty() && !st.conflicting()) {
            out[st.id] = {st.records.front().label, st.records.front().expression};
        }
    }
    return out;
}

std::map<PairId, GoldLabel> AnnotationStore::gold() const
{
    std::shared_lock lock(mutex_);
    return gold_locked();
}

std::vector<metrics::LabeledPair> AnnotationStore::export_gold() const
{
    std::vector<metrics::LabeledPair> out;
    for (const auto& [pair, g] : gold()) {
        out.push_back({pair.motif_id, pair.sentence_id, g.label, g.expression});
    }
    return out;
}

namespace {
std::map<std::string, Complexity> derive_expressions(const Catalog& catalog,
                                                     const std::map<PairId, GoldLabel>& gold)
{
    std::map<std::string, Complexity> out;
    for (const auto& [id, m] : catalog.motifs) {
        if (m.expression) {
            out[id] = *m.expression;
        }
    }
    for (const auto& [pair, g] : gold) {
        if (g.label != Label::Positive || !g.expression || catalog.motifs.at(pair.motif_id).expression) {
            continue;
        }
        auto [it, inserted] = out.try_emplace(pair.motif_id, *g.expression);
        if (!inserted && *g.expression == Complexity::Complex) {
            it->second = Complexity::Complex;
        }
    }
    return out;
}
} // namespace

std::optional<Complexity> AnnotationStore::motif_expression_locked(const std::string& motif_id) const
{
    const auto all = derive_expressions(catalog_, gold_locked());
    const auto it = all.find(motif_id);
    if (it == all.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::optional<Complexity> AnnotationStore::motif_expression(const std::string& motif_id) const
{
    std::shared_lock lock(mutex_);
    return motif_expression_locked(motif_id);
}

Accounting AnnotationStore::accounting() const
{
    std::shared_lock lock(mutex_);
    Accounting a;
    std::set<std::string> sentences;
    for (const auto& st : pairs_) {
        if (st.assignees.empty()) {
            ++a.queued;
        }
        if (st.records.empty()) {
            continue;
        }
        ++a.annotated_pairs;
        sentences.insert(st.id.sentence_id);
        a.records += st.records.size();
        a.double_annotated += st.records.size() == 2 ? 1 : 0;
        a.adjudicated += st.adjudication ? 1 : 0;
        a.unresolved += st.conflicting() && !st.adjudication ? 1 : 0;
    }
    a.unique_sentences = sentences.size();
    for (const auto& [pair, g] : gold_locked()) {
        auto& m = a.per_motif[pair.motif_id];
        if (g.label == Label::Positive) {
            ++a.positives;
            ++m.positives;
        } else {
            ++a.negatives;
            ++m.negatives;
        }
    }
    return a;
}

AgreementGrid AnnotationStore::agreement() const
{
    std::shared_lock lock(mutex_);
    using metrics::Axis;
    const auto expressions = derive_expressions(catalog_, gold_locked());
    std::map<std::pair<Axis, Axis>, std::pair<std::vector<Label>, std::vector<Label>>> lists;
    for (const auto& st : pairs_) {
        if (st.records.size() != 2) {
            continue;
        }
        const auto conceptual = metrics::axis_of(catalog_.motifs.at(st.id.motif_id).conceptual);
        std::vector<Axis> e_axes{Axis::Overall};
        if (const auto it = expressions.find(st.id.motif_id); it != expressions.end()) {
            e_axes.push_back(metrics::axis_of(it->second));
        }
        for (auto c : {conceptual, Axis::Overall}) {
            for (auto e : e_axes) {
                auto& [a, b] = lists[{c, e}];
                a.push_back(st.records[0].label);
                b.push_back(st.records[1].label);
            }
        }
    }
    AgreementGrid grid;
    for (auto c : {Axis::Simple, Axis::Complex, Axis::Overall}) {
        for (auto e : {Axis::Simple, Axis::Complex, Axis::Overall}) {
            auto& cell = grid.cells[{c, e}];
            const auto it = lists.find({c, e});
            if (it == lists.end()) {
                continue;
            }
            cell.pairs = it->second.first.size();
            cell.kappa = metrics::cohens_kappa(it->second.first, it->second.second);
        }
    }
    return grid;
}

ContextView AnnotationStore::context(const PairId& pair, std::size_t radius) const
{
    validate_reference(pair);
    const auto idx = *catalog_.sentence_index(pair.sentence_id);
    const auto& s = catalog_.sentences;
    ContextView v;
    v.pair = pair;
    v.motif_description = catalog_.motifs.at(pair.motif_id).description;
    v.sentence = s[idx];
    for (std::size_t k = 1; k <= radius && k <= idx; ++k) {
        if (s[idx - k].volume_no != s[idx].volume_no) {
            break;
        }
        v.before.insert(v.before.begin(), s[idx - k]);
    }
    for (std::size_t k = 1; k <= radius && idx + k < s.size(); ++k) {
        if (s[idx + k].volume_no != s[idx].volume_no) {
            break;
        }
        v.after.push_back(s[idx + k]);
    }
    return v;
}

std::vector<PairId> AnnotationStore::pending(const std::string& annotator_id) const
{
    std::shared_lock lock(mutex_);
    std::vector<PairId> out;
    for (const auto& b : batches_) {
        if (b.annotator_id != annotator_id) {
            continue;
        }
        for (const auto& p : b.pairs) {
            const auto& st = pairs_[index_.at(p)];
            const bool done = std::any_of(st.records.begin(), st.records.end(),
                                          [&](const AnnotationRecord& r) { return r.annotator_id == annotator_id; });
            if (!done) {
                out.push_back(p);
            }
        }
    }
    return out;
}

std::vector<AnnotationRecord> AnnotationStore::records() const
{
    std::shared_lock lock(mutex_);
    std::vector<AnnotationRecord> out;
    out.reserve(record_order_.size());
    for (const auto& [idx, slot] : record_order_) {
        out.push_back(pairs_[idx].records[slot]);
    }
    return out;
}

std::vector<Batch> AnnotationStore::batches() const
{
    std::shared_lock lock(mutex_);
    return batches_;
}

nlohmann::json AnnotationStore::state_json() const
{
    std::shared_lock lock(mutex_);
    std::vector<const PairState*> sorted;
    sorted.reserve(pairs_.size());
    for (const auto& st : pairs_) {
        sorted.push_back(&st);
    }
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto* st : sorted) {
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : st->records) {
            recs.push_back(to_json(r));
        }
        pairs.push_back({{"pair", pair_json(st->id)},
                         {"priority", st->priority},
                         {"assignees", st->assignees},
                         {"records", recs},
                         {"adjudication", st->adjudication ? to_json(*st->adjudication) : nlohmann::json()}});
    }
    nlohmann::json batches = nlohmann::json::array();
    for (const auto& b : batches_) {
        batches.push_back(to_json(b));
    }
    return {{"pairs", pairs}, {"batches", batches}};
}

} // namespace motifidx::annotation
