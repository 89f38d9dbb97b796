#include "motifidx/project.hpp"

#include "motifidx/error.hpp"
#include "motifidx/util.hpp"

#include <cctype>
#include <cstdlib>
#include <numeric>

namespace motifidx::gateway {

namespace {

constexpr const char* kModule = "gateway";

Error config_error(const std::string& msg)
{
    return Error(kModule, Errc::InvalidConfig, msg);
}

std::filesystem::path existing(const std::filesystem::path& base, const nlohmann::json& value, const char* what)
{
    if (!value.is_string()) {
        throw config_error(std::string(what) + " must be a path string");
    }
    auto p = std::filesystem::path(value.get<std::string>());
    if (p.is_relative()) {
        p = base / p;
    }
    if (!std::filesystem::exists(p)) {
        throw config_error(std::string(what) + " not found: " + p.string());
    }
    return p;
}

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& out, const char* section)
{
    if (!obj.contains(key)) {
        return;
    }
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error(std::string(section) + "." + key + " has the wrong type");
    }
}

const nlohmann::json& section(const nlohmann::json& doc, const char* key)
{
    static const nlohmann::json empty = nlohmann::json::object();
    if (!doc.contains(key)) {
        return empty;
    }
    if (!doc.at(key).is_object()) {
        throw config_error(std::string(key) + " must be an object");
    }
    return doc.at(key);
}

std::string env_key(const std::string& provider_id)
{
    std::string out;
    for (char c : provider_id) {
        out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::toupper(static_cast<unsigned char>(c)))
                                                           : '_';
    }
    return out;
}

} // namespace

ProjectConfig ProjectConfig::from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir)
{
    if (!doc.is_object()) {
        throw config_error("config must be a JSON object");
    }
    ProjectConfig c;
    c.base_dir = base_dir;

    const auto& ed = section(doc, "editions");
    if (ed.contains("manifest")) {
        c.manifest = existing(base_dir, ed["manifest"], "editions.manifest");
    }
    read(ed, "source", c.source_edition, "editions");
    read(ed, "target", c.target_edition, "editions");
    read(ed, "corpus", c.corpus_edition, "editions");
    if (doc.contains("sentences")) {
        c.sentences = existing(base_dir, doc["sentences"], "sentences");
    }
    if (doc.contains("index")) {
        c.index = existing(base_dir, doc["index"], "index");
    }
    if (doc.contains("lexicon")) {
        c.lexicon = existing(base_dir, doc["lexicon"], "lexicon");
    }
    if (doc.contains("shots")) {
        c.shots = existing(base_dir, doc["shots"], "shots");
    }

    const auto& sc = section(doc, "scoring");
    read(sc, "match", c.scoring.match_score, "scoring");
    read(sc, "partial", c.scoring.partial_score, "scoring");
    read(sc, "mismatch", c.scoring.mismatch_score, "scoring");
    read(sc, "gap", c.scoring.gap_penalty, "scoring");
    c.scoring.validate();

    const auto& al = section(doc, "alignment");
    read(al, "window_words", c.alignment.window_words, "alignment");
    read(al, "stride", c.alignment.stride, "alignment");
    read(al, "horizon_pages", c.alignment.horizon_pages, "alignment");
    read(al, "window_bound", c.alignment.window_bound, "alignment");
    c.alignment.validate();

    const auto& bm = section(doc, "bm25");
    read(bm, "k1", c.bm25.k1, "bm25");
    read(bm, "b", c.bm25.b, "bm25");
    c.bm25.validate();

    const auto& rt = section(doc, "retrieval");
    read(rt, "lexical_cap", c.lexical_cap, "retrieval");
    read(rt, "semantic_cap", c.semantic_cap, "retrieval");
    read(rt, "semantic_provider", c.semantic_provider, "retrieval");
    if (c.lexical_cap < 1 || c.semantic_cap < 1) {
        throw config_error("retrieval caps must be >= 1");
    }

    c.thresholds = classify::published_thresholds();
    if (doc.contains("thresholds")) {
        if (!doc["thresholds"].is_array()) {
            throw config_error("thresholds must be an array");
        }
        for (const auto& t : doc["thresholds"]) {
            classify::ThresholdModel m;
            m.provenance = classify::ThresholdProvenance::Configured;
            std::string provenance;
            read(t, "provider_id", m.provider_id, "thresholds");
            read(t, "threshold", m.threshold, "thresholds");
            read(t, "fine_tuned", m.fine_tuned, "thresholds");
            read(t, "provenance", provenance, "thresholds");
            if (m.provider_id.empty() || !t.contains("threshold")) {
                throw config_error("each threshold needs provider_id and threshold");
            }
            if (!provenance.empty()) {
                const auto p = classify::parse_provenance(provenance);
                if (!p) {
                    throw config_error("unknown threshold provenance " + provenance);
                }
                m.provenance = *p;
            }
            std::erase_if(c.thresholds, [&](const auto& x) { return x.provider_id == m.provider_id; });
            c.thresholds.push_back(m);
        }
    }

    const auto& seeds = section(doc, "seeds");
    read(seeds, "resample", c.resample_seed, "seeds");
    read(seeds, "split", c.split_seed, "seeds");

    if (doc.contains("providers")) {
        if (!doc["providers"].is_array()) {
            throw config_error("providers must be an array");
        }
        for (const auto& p : doc["providers"]) {
            ProviderConfig pc;
            std::string kind;
            read(p, "kind", kind, "providers");
            const auto k = parse_provider_kind(kind);
            if (!k) {
                throw config_error("unknown provider kind '" + kind + "'");
            }
            pc.kind = *k;
            read(p, "provider_id", pc.provider_id, "providers");
            read(p, "base_url", pc.base_url, "providers");
            read(p, "timeout_ms", pc.timeout_ms, "providers");
            read(p, "max_in_flight", pc.max_in_flight, "providers");
            read(p, "max_retries", pc.max_retries, "providers");
            read(p, "bearer_token", pc.bearer_token, "providers");
            pc.validate();
            if (c.provider(pc.kind, pc.provider_id)) {
                throw config_error("provider " + pc.provider_id + " declared twice for kind "
                                   + std::string(to_string(pc.kind)));
            }
            c.providers.push_back(pc);
        }
    }
    read(section(doc, "mock"), "dim", c.mock_dim, "mock");
    if (c.mock_dim == 0) {
        throw config_error("mock.dim must be positive");
    }

    const auto& store = section(doc, "store");
    if (store.contains("log")) {
        if (!store["log"].is_string()) {
            throw config_error("store.log must be a path string");
        }
        auto p = std::filesystem::path(store["log"].get<std::string>());
        c.store_log = p.is_relative() ? base_dir / p : p;
    }

    const auto& svc = section(doc, "service");
    read(svc, "host", c.service_host, "service");
    read(svc, "port", c.service_port, "service");
    read(svc, "bearer_token", c.service_token, "service");

    apply_env_overrides(c);
    return c;
}

ProjectConfig ProjectConfig::load(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) {
        throw config_error("config not found: " + path.string());
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(util::read_file(path));
    } catch (const nlohmann::json::parse_error& ex) {
        throw config_error(path.string() + ": " + ex.what());
    }
    return from_json(doc, std::filesystem::absolute(path).parent_path());
}

void apply_env_overrides(ProjectConfig& config)
{
    for (auto& p : config.providers) {
        const auto key = "MOTIFIDX_PROVIDER_" + env_key(p.provider_id);
        if (const char* url = std::getenv((key + "_URL").c_str())) {
            p.base_url = url;
        }
        if (const char* token = std::getenv((key + "_TOKEN").c_str())) {
            p.bearer_token = token;
        }
    }
    if (const char* token = std::getenv("MOTIFIDX_SERVICE_TOKEN")) {
        config.service_token = token;
    }
}

nlohmann::json ProjectConfig::echo() const
{
    nlohmann::json thresholds_json = nlohmann::json::array();
    for (const auto& t : thresholds) {
        thresholds_json.push_back({{"provider_id", t.provider_id},
                                   {"threshold", t.threshold},
                                   {"provenance", classify::to_string(t.provenance)},
                                   {"fine_tuned", t.fine_tuned}});
    }
    return {{"bm25", {{"k1", bm25.k1}, {"b", bm25.b}}},
            {"retrieval", {{"lexical_cap", lexical_cap}, {"semantic_cap", semantic_cap}}},
            {"seeds", {{"resample", resample_seed}, {"split", split_seed}}},
            {"thresholds", thresholds_json}};
}

const ProviderConfig* ProjectConfig::provider(ProviderKind kind, const std::string& provider_id) const
{
    for (const auto& p : providers) {
        if (p.kind == kind && p.provider_id == provider_id) {
            return &p;
        }
    }
    return nullptr;
}

const classify::ThresholdModel& ProjectConfig::threshold_for(const std::string& provider_id) const
{
    for (const auto& t : thresholds) {
        if (t.provider_id == provider_id) {
            return t;
        }
    }
    throw config_error("no threshold configured for provider " + provider_id);
}

std::vector<classify::FewShotExample> load_shots(const std::filesystem::path& path)
{
    std::vector<classify::FewShotExample> out;
    try {
        const auto doc = nlohmann::json::parse(util::read_file(path));
        for (const auto& s : doc) {
            out.push_back({s.at("motif_description").get<std::string>(), s.at("positive_sentence").get<std::string>(),
                           s.at("negative_sentence").get<std::string>()});
        }
    } catch (const nlohmann::json::exception& ex) {
        throw config_error(path.string() + ": " + ex.what());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Project

Project::Project(ProjectConfig config) : config_(std::move(config)) {}

std::shared_ptr<const corpus::LexicalResource> Project::lexicon()
{
    std::lock_guard lock(mutex_);
    if (!lexicon_) {
        lexicon_ = std::make_shared<const corpus::LexicalResource>(
            config_.lexicon ? corpus::LexicalResource::load(*config_.lexicon) : corpus::LexicalResource{});
    }
    return lexicon_;
}

const std::vector<corpus::Edition>& Project::editions()
{
    std::lock_guard lock(mutex_);
    if (!editions_) {
        if (!config_.manifest) {
            throw config_error("no editions.manifest configured");
        }
        editions_ = corpus::load_manifest(*config_.manifest);
    }
    return *editions_;
}

const corpus::Edition& Project::edition(const std::string& edition_id)
{
    for (const auto& e : editions()) {
        if (e.edition_id == edition_id) {
            return e;
        }
    }
    throw config_error("edition '" + edition_id + "' is not in the manifest");
}

const std::vector<corpus::SentenceRecord>& Project::sentences()
{
    std::lock_guard lock(mutex_);
    if (!sentences_) {
        const auto lex = lexicon();
        if (config_.sentences) {
            sentences_ = corpus::load_sentences_jsonl(*config_.sentences, *lex);
        } else if (!config_.corpus_edition.empty()) {
            sentences_ = corpus::segment_edition(edition(config_.corpus_edition), *lex);
        } else {
            throw config_error("configure sentences or editions.corpus");
        }
        for (std::size_t i = 0; i < sentences_->size(); ++i) {
            sentence_by_id_[(*sentences_)[i].sentence_id] = i;
        }
    }
    return *sentences_;
}

const corpus::SentenceRecord& Project::sentence(const std::string& sentence_id)
{
    const auto& all = sentences();
    std::lock_guard lock(mutex_);
    const auto it = sentence_by_id_.find(sentence_id);
    if (it == sentence_by_id_.end()) {
        throw Error(kModule, Errc::UnknownReference, "unknown sentence " + sentence_id);
    }
    return all[it->second];
}

const motif::MotifIndex& Project::index()
{
    std::lock_guard lock(mutex_);
    if (!index_) {
        if (!config_.index) {
            throw config_error("no index configured");
        }
        index_ = motif::load_index(*config_.index);
    }
    return *index_;
}

const retrieval::InvertedIndex& Project::inverted_index()
{
    std::lock_guard lock(mutex_);
    if (!inverted_) {
        inverted_ = retrieval::InvertedIndex::build(sentences(), config_.bm25);
    }
    return *inverted_;
}

std::vector<classify::FewShotExample> Project::shots()
{
    if (config_.shots) {
        return load_shots(*config_.shots);
    }
    return classify::reference_shots();
}

const ProviderConfig& Project::require_provider(ProviderKind kind, const std::string& provider_id) const
{
    if (const auto* p = config_.provider(kind, provider_id)) {
        return *p;
    }
    throw config_error("no " + std::string(to_string(kind)) + " provider '" + provider_id + "' configured");
}

std::shared_ptr<EmbeddingProvider> Project::embedder(const std::string& provider_id)
{
    std::lock_guard lock(mutex_);
    auto& slot = embedders_[provider_id];
    if (!slot) {
        if (provider_id == kMockProvider && !config_.provider(ProviderKind::Embed, provider_id)) {
            slot = std::make_shared<BagOfLemmaEmbedder>(lexicon(), config_.mock_dim);
        } else {
            slot = std::make_shared<HttpEmbeddingProvider>(require_provider(ProviderKind::Embed, provider_id));
        }
    }
    return slot;
}

std::shared_ptr<PairScorerProvider> Project::scorer(const std::string& provider_id)
{
    std::lock_guard lock(mutex_);
    auto& slot = scorers_[provider_id];
    if (!slot) {
        if (provider_id == kMockProvider && !config_.provider(ProviderKind::PairScore, provider_id)) {
            slot = std::make_shared<LemmaOverlapScorer>(lexicon());
        } else {
            slot = std::make_shared<HttpPairScorer>(require_provider(ProviderKind::PairScore, provider_id));
        }
    }
    return slot;
}

std::shared_ptr<GenerationProvider> Project::generator(const std::string& provider_id)
{
    std::lock_guard lock(mutex_);
    auto& slot = generators_[provider_id];
    if (!slot) {
        if (provider_id == kMockProvider && !config_.provider(ProviderKind::Generate, provider_id)) {
            slot = std::make_shared<LemmaOverlapGenerator>(lexicon());
        } else {
            slot = std::make_shared<HttpGenerator>(require_provider(ProviderKind::Generate, provider_id));
        }
    }
    return slot;
}

retrieval::CandidateSet Project::retrieve(const std::string& motif_id, const std::string& semantic_provider)
{
    const auto* entry = index().find(motif_id);
    if (!entry) {
        throw Error(kModule, Errc::UnknownReference, "motif " + motif_id + " is not in the index");
    }
    retrieval::CandidateSet set;
    set.motif_id = entry->id.str();
    set.lexical = retrieval::lexical_retrieve(inverted_index(), entry->description, *lexicon(), config_.lexical_cap);
    if (!semantic_provider.empty()) {
        auto emb = embedder(semantic_provider);
        const std::vector<retrieval::SentenceVector>* vectors = nullptr;
        {
            std::lock_guard lock(mutex_);
            auto it = sentence_vectors_.find(semantic_provider);
            if (it == sentence_vectors_.end()) {
                it = sentence_vectors_.emplace(semantic_provider, retrieval::embed_sentences(sentences(), *emb)).first;
            }
            vectors = &it->second;
        }
        const std::vector<std::string> query{entry->description};
        const auto motif_vec = emb->embed(query);
        set.semantic = retrieval::semantic_retrieve(*vectors, motif_vec.at(0), config_.semantic_cap);
    }
    set.merged = retrieval::merge_candidates(set.lexical, set.semantic);
    return set;
}

classify::ClassificationPair Project::classification_pair(const PairId& pair)
{
    const auto* entry = index().find(pair.motif_id);
    if (!entry) {
        throw Error(kModule, Errc::UnknownReference, "motif " + pair.motif_id + " is not in the index");
    }
    return {pair.motif_id, pair.sentence_id, entry->description, sentence(pair.sentence_id).text};
}

annotation::Catalog Project::catalog()
{
    return annotation::Catalog::from(index(), sentences());
}

std::shared_ptr<annotation::AnnotationStore> Project::store()
{
    std::lock_guard lock(mutex_);
    if (!store_) {
        annotation::StoreOptions opts;
        opts.log_path = config_.store_log;
        store_ = std::make_shared<annotation::AnnotationStore>(catalog(), opts);
    }
    return store_;
}

// ---------------------------------------------------------------------------
// pipeline helpers

std::optional<ClassifyMethod> parse_classify_method(std::string_view s) noexcept
{
    if (s == "rerank") {
        return ClassifyMethod::Rerank;
    }
    if (s == "threshold") {
        return ClassifyMethod::Threshold;
    }
    if (s == "zero-shot") {
        return ClassifyMethod::ZeroShot;
    }
    if (s == "few-shot") {
        return ClassifyMethod::FewShot;
    }
    return std::nullopt;
}

std::string_view to_string(ClassifyMethod m) noexcept
{
    switch (m) {
    case ClassifyMethod::Rerank: return "rerank";
    case ClassifyMethod::Threshold: return "threshold";
    case ClassifyMethod::ZeroShot: return "zero-shot";
    case ClassifyMethod::FewShot: return "few-shot";
    }
    return "rerank";
}

ClassifyRun run_classification(Project& project, ClassifyMethod method, const std::string& provider_id,
                               std::span<const PairId> pairs, std::optional<classify::ThresholdModel> threshold)
{
    std::vector<classify::ClassificationPair> joined;
    joined.reserve(pairs.size());
    for (const auto& p : pairs) {
        joined.push_back(project.classification_pair(p));
    }
    const auto* pc = project.config().provider(method == ClassifyMethod::Rerank      ? ProviderKind::PairScore
                                               : method == ClassifyMethod::Threshold ? ProviderKind::Embed
                                                                                     : ProviderKind::Generate,
                                               provider_id);
    const std::size_t in_flight = pc ? static_cast<std::size_t>(pc->max_in_flight) : 8;

    ClassifyRun run;
    switch (method) {
    case ClassifyMethod::Rerank: {
        classify::BatchOptions opts;
        opts.max_in_flight = in_flight;
        run.verdicts = classify::rerank(joined, *project.scorer(provider_id), opts);
        break;
    }
    case ClassifyMethod::Threshold: {
        const auto model = threshold ? *threshold : project.config().threshold_for(provider_id);
        run.verdicts = classify::threshold_classify_pairs(joined, *project.embedder(provider_id), model);
        break;
    }
    case ClassifyMethod::ZeroShot:
    case ClassifyMethod::FewShot: {
        classify::PromptMode mode = classify::ZeroShot{};
        if (method == ClassifyMethod::FewShot) {
            mode = classify::FewShot{project.shots()};
        }
        auto gen = classify::generative_classify(joined, mode, *project.generator(provider_id), in_flight);
        run.verdicts = std::move(gen.verdicts);
        run.failures = std::move(gen.failures);
        break;
    }
    }
    return run;
}

nlohmann::json to_json(const classify::PairFailure& f)
{
    nlohmann::json j = {{"index", f.index},
                        {"motif_id", f.pair.motif_id},
                        {"sentence_id", f.pair.sentence_id},
                        {"code", f.code},
                        {"message", f.message}};
    j["raw"] = f.raw ? nlohmann::json(*f.raw) : nlohmann::json();
    return j;
}

nlohmann::json Calibration::to_json() const
{
    return {{"provider_id", model.provider_id},
            {"threshold", model.threshold},
            {"provenance", classify::to_string(model.provenance)},
            {"positives", positives},
            {"negatives", negatives},
            {"positive_mean", positive_mean},
            {"negative_mean", negative_mean}};
}

Calibration calibrate(Project& project, const std::string& provider_id, std::span<const metrics::LabeledPair> labeled,
                      const std::set<std::string>& motifs)
{
    std::vector<classify::ClassificationPair> joined;
    std::vector<Label> labels;
    for (const auto& l : labeled) {
        if (!motifs.empty() && !motifs.contains(l.motif_id)) {
            continue;
        }
        joined.push_back(project.classification_pair(l.pair()));
        labels.push_back(l.label);
    }
    const auto sims = classify::pair_similarities(joined, *project.embedder(provider_id));
    std::vector<double> pos;
    std::vector<double> neg;
    for (std::size_t i = 0; i < sims.size(); ++i) {
        (labels[i] == Label::Positive ? pos : neg).push_back(sims[i]);
    }
    Calibration c;
    c.model.provider_id = provider_id;
    c.model.threshold = classify::calibrate_threshold(pos, neg);
    c.model.provenance = classify::ThresholdProvenance::LocallyCalibrated;
    c.positives = pos.size();
    c.negatives = neg.size();
    c.positive_mean = std::accumulate(pos.begin(), pos.end(), 0.0) / static_cast<double>(pos.size());
    c.negative_mean = std::accumulate(neg.begin(), neg.end(), 0.0) / static_cast<double>(neg.size());
    return c;
}

} // namespace motifidx::gateway
