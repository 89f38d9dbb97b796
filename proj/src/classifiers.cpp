#include "motifidx/classifiers.hpp"

#include "motifidx/retrieval.hpp"
#include "motifidx/util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <mutex>
#include <numeric>

namespace motifidx::classify {

namespace {

constexpr const char* kModule = "classifiers";

constexpr std::string_view kTaskHeader = "Task: Decide if the motif is present in the sentence.\n"
                                         "Rules: Answer ONLY \"Yes\" or \"No\".\n"
                                         "Do not explain.\n";
constexpr std::string_view kQueryTemplate = "Motif:  <MOTIF>\nSentence:  <Sentence>";
constexpr std::string_view kAnswerCue = "\nAnswer:";

std::string upper(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

std::string query_block(std::string_view motif, std::string_view sentence)
{
    const std::pair<std::string, std::string> bindings[] = {{"<MOTIF>", std::string(motif)},
                                                            {"<Sentence>", std::string(sentence)}};
    return substitute(kQueryTemplate, bindings);
}

double mean(std::span<const double> xs)
{
    // compensated sum: calibration pools run to tens of thousands of values
    double sum = 0.0;
    double c = 0.0;
    for (double x : xs) {
        const double y = x - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    return sum / static_cast<double>(xs.size());
}

} // namespace

std::string_view to_string(Method m) noexcept
{
    switch (m) {
    case Method::Rerank: return "RERANK";
    case Method::Threshold: return "THRESHOLD";
    case Method::Generative: return "GENERATIVE";
    }
    return "RERANK";
}

std::optional<Method> parse_method(std::string_view s) noexcept
{
    const auto u = upper(s);
    if (u == "RERANK") {
        return Method::Rerank;
    }
    if (u == "THRESHOLD") {
        return Method::Threshold;
    }
    if (u == "GENERATIVE") {
        return Method::Generative;
    }
    return std::nullopt;
}

nlohmann::json to_json(const Verdict& v)
{
    return {{"motif_id", v.motif_id},
            {"sentence_id", v.sentence_id},
            {"method", to_string(v.method)},
            {"label", to_string(v.label)},
            {"score", v.score ? nlohmann::json(*v.score) : nlohmann::json()},
            {"raw", v.raw ? nlohmann::json(*v.raw) : nlohmann::json()}};
}

Verdict verdict_from_json(const nlohmann::json& j)
{
    try {
        Verdict v;
        v.motif_id = j.at("motif_id").get<std::string>();
        v.sentence_id = j.at("sentence_id").get<std::string>();
        const auto label = parse_label(j.at("label").get<std::string>());
        if (!label) {
            throw Error(kModule, Errc::InvalidInput, "verdict has an unknown label");
        }
        v.label = *label;
        if (j.contains("method") && !j["method"].is_null()) {
            const auto m = parse_method(j["method"].get<std::string>());
            if (!m) {
                throw Error(kModule, Errc::InvalidInput, "verdict has an unknown method");
            }
            v.method = *m;
        }
        if (j.contains("score") && !j["score"].is_null()) {
            v.score = j["score"].get<double>();
        }
        if (j.contains("raw") && !j["raw"].is_null()) {
            v.raw = j["raw"].get<std::string>();
        }
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw Error(kModule, Errc::InvalidInput, std::string("malformed verdict: ") + e.what());
    }
}

std::vector<Verdict> rerank(std::span<const ClassificationPair> pairs, PairScorerProvider& scorer,
                            const BatchOptions& options)
{
    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
    const std::size_t batches = (pairs.size() + batch - 1) / batch;
    std::vector<std::vector<PairScore>> scores(batches);
    const auto errors = util::parallel_for(batches, options.max_in_flight, [&](std::size_t b) {
        const auto begin = b * batch;
        const auto end = std::min(pairs.size(), begin + batch);
        std::vector<TextPair> texts;
        texts.reserve(end - begin);
        for (auto i = begin; i < end; ++i) {
            texts.emplace_back(pairs[i].motif_description, pairs[i].sentence_text);
        }
        scores[b] = scorer.score(texts);
        if (scores[b].size() != texts.size()) {
            throw Error(kModule, Errc::SchemaViolation, "scorer returned the wrong number of scores");
        }
    });
    for (std::size_t b = 0; b < batches; ++b) {
        if (!errors[b]) {
            continue;
        }
        try {
            std::rethrow_exception(errors[b]);
        } catch (const Error& e) {
            throw Error(kModule, Errc::ProviderError,
                        "rerank batch " + std::to_string(b) + " failed: " + e.qualified_code() + ": " + e.what());
        } catch (const std::exception& e) {
            throw Error(kModule, Errc::ProviderError, "rerank batch " + std::to_string(b) + " failed: " + e.what());
        }
    }
    std::vector<Verdict> out;
    out.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& s = scores[i / batch][i % batch];
        out.push_back({pairs[i].motif_id, pairs[i].sentence_id, s.label ? Label::Positive : Label::Negative,
                       Method::Rerank, s.score, std::nullopt});
    }
    return out;
}

// ---------------------------------------------------------------------------
// threshold classification

std::string_view to_string(ThresholdProvenance p) noexcept
{
    switch (p) {
    case ThresholdProvenance::Published: return "paper-published";
    case ThresholdProvenance::LocallyCalibrated: return "locally-calibrated";
    case ThresholdProvenance::Configured: return "configured";
    }
    return "configured";
}

std::optional<ThresholdProvenance> parse_provenance(std::string_view s) noexcept
{
    if (s == "paper-published") {
        return ThresholdProvenance::Published;
    }
    if (s == "locally-calibrated") {
        return ThresholdProvenance::LocallyCalibrated;
    }
    if (s == "configured") {
        return ThresholdProvenance::Configured;
    }
    return std::nullopt;
}

const std::vector<ThresholdModel>& published_thresholds()
{
    static const std::vector<ThresholdModel> models = {
        {"mistral-embed", 0.73, ThresholdProvenance::Published, false},
        {"text-embedding-004", 0.46, ThresholdProvenance::Published, false},
        {"NV-Embed-v2", 0.25, ThresholdProvenance::Published, false},
        {"jina-embeddings-v3", 0.32, ThresholdProvenance::Published, false},
        {"sentence-t5-base", 0.77, ThresholdProvenance::Published, false},
        {"SBERT-FT", 0.32, ThresholdProvenance::Published, true},
        {"sentence-t5-base-FT", 0.45, ThresholdProvenance::Published, true},
    };
    return models;
}

double calibrate_threshold(std::span<const double> pos_sims, std::span<const double> neg_sims)
{
    if (pos_sims.empty()) {
        throw Error(kModule, Errc::EmptyCalibrationSet, "no positive similarities to calibrate on");
    }
    if (neg_sims.empty()) {
        throw Error(kModule, Errc::EmptyCalibrationSet, "no negative similarities to calibrate on");
    }
    const double t = (mean(pos_sims) + mean(neg_sims)) / 2.0;
    if (!std::isfinite(t)) {
        throw Error(kModule, Errc::InvalidInput, "calibration produced a non-finite threshold");
    }
    return t;
}

Label threshold_classify(double similarity, const ThresholdModel& model) noexcept
{
    return similarity >= model.threshold ? Label::Positive : Label::Negative;
}

std::vector<double> pair_similarities(std::span<const ClassificationPair> pairs, EmbeddingProvider& embedder)
{
    std::vector<std::string> texts;
    texts.reserve(pairs.size() * 2);
    for (const auto& p : pairs) {
        texts.push_back(p.motif_description);
        texts.push_back(p.sentence_text);
    }
    const auto vectors = embedder.embed(texts);
    if (vectors.size() != texts.size()) {
        throw Error(kModule, Errc::SchemaViolation, "embedder returned the wrong number of vectors");
    }
    std::vector<double> sims;
    sims.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        sims.push_back(retrieval::cosine(vectors[2 * i], vectors[2 * i + 1]));
    }
    return sims;
}

std::vector<Verdict> threshold_classify_pairs(std::span<const ClassificationPair> pairs, EmbeddingProvider& embedder,
                                              const ThresholdModel& model)
{
    const auto sims = pair_similarities(pairs, embedder);
    std::vector<Verdict> out;
    out.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        out.push_back({pairs[i].motif_id, pairs[i].sentence_id, threshold_classify(sims[i], model),
                       Method::Threshold, sims[i], std::nullopt});
    }
    return out;
}

// ---------------------------------------------------------------------------
// prompts

const char* const kSystemPrompt = "You are a strict classifier. You must answer with ONLY one token: Yes or No.";

const std::vector<FewShotExample>& reference_shots()
{
    static const std::vector<FewShotExample> shots = {
        {"Mermaid",
         "While he was doing this the sea became disturbed and out from it came mermaids the sea’s daughters "
         "each carrying in her hand a jewel gleaming like a lamp.",
         "She can look as she stands and she will not be long."},
        {"Barber as know-all expert",
         "The attendant then started to shave Dau’ alMakan’s head after which he and the furnace man "
         "bathed.",
         "He is the expert in the field they said a very wealthy man and a skilled craftsman."},
        {"Blind promise of immunity from punishment. Person of authority (king, queen, father, etc.) grants "
         "request for safety for culprit before learning nature of offense",
         "My brother said ‘I want a guarantee of immunity’ at which the wali gave him the kerchief that "
         "was a sign of this.",
         "I am the shaikh of a monastery and under my control and authority are forty dervishes."},
        {"Adam created from clay (mud), mud foam (zabad), foam from sea, sea from darkness, darkness from bull, "
         "bull from whale, whale from rock, rock from ruby (gem), ruby from water, water from [God's] Omnipotence "
         "(al-Qudrah)",
         "The darkness itself was created from light, which was created from a fish, with the fish being created "
         "from a rock, the rock from a ruby, the ruby from water and the water from the power of God, as He said, "
         "Almighty is He: ‘When He wishes for something, He commands 'Be' and it is.",
         "These are water earth light darkness and fruits’ she answered."},
    };
    return shots;
}

std::string substitute(std::string_view tmpl, std::span<const std::pair<std::string, std::string>> bindings)
{
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        bool matched = false;
        for (const auto& [key, value] : bindings) {
            if (!key.empty() && tmpl.compare(i, key.size(), key) == 0) {
                out += value;
                i += key.size();
                matched = true;
                break;
            }
        }
        if (!matched) {
            out += tmpl[i++];
        }
    }
    return out;
}

PromptBundle build_zero_shot_prompt(std::string_view motif_description, std::string_view sentence_text)
{
    PromptBundle p;
    p.system = kSystemPrompt;
    p.user = std::string(kTaskHeader) + query_block(motif_description, sentence_text);
    return p;
}

PromptBundle build_few_shot_prompt(std::span<const FewShotExample> shots, std::string_view motif_description,
                                   std::string_view sentence_text)
{
    if (shots.empty()) {
        throw Error(kModule, Errc::EmptyShots, "few-shot prompt needs at least one example");
    }
    PromptBundle p;
    p.system = kSystemPrompt;
    std::string& u = p.user;
    u = "Examples:\n";
    for (const auto& s : shots) {
        u += "Motif: " + s.motif_description + "\nSentence: " + s.positive_sentence + "\nAnswer: Yes\n\n";
        u += "Motif: " + s.motif_description + "\nSentence: " + s.negative_sentence + "\nAnswer: No\n\n";
    }
    u += kTaskHeader;
    u += query_block(motif_description, sentence_text);
    u += kAnswerCue;
    return p;
}

std::optional<TextPair> extract_query(const PromptBundle& prompt)
{
    const std::string& u = prompt.user;
    const std::string anchor = std::string(kTaskHeader) + "Motif:  ";
    const auto at = u.rfind(anchor);
    if (at == std::string::npos) {
        return std::nullopt;
    }
    const auto motif_begin = at + anchor.size();
    constexpr std::string_view sep = "\nSentence:  ";
    const auto sep_at = u.find(sep, motif_begin);
    if (sep_at == std::string::npos) {
        return std::nullopt;
    }
    auto sentence = std::string_view(u).substr(sep_at + sep.size());
    if (sentence.ends_with(kAnswerCue)) {
        sentence.remove_suffix(kAnswerCue.size());
    }
    return TextPair{u.substr(motif_begin, sep_at - motif_begin), std::string(sentence)};
}

Label parse_verdict(std::string_view raw)
{
    const auto u = upper(util::trim(raw));
    if (u == "YES") {
        return Label::Positive;
    }
    if (u == "NO") {
        return Label::Negative;
    }
    throw Error(kModule, Errc::UnparseableVerdict, "unparseable verdict: " + nlohmann::json(std::string(raw)).dump());
}

std::string render_verdict(Label label)
{
    return label == Label::Positive ? "Yes" : "No";
}

GenerativeRun generative_classify(std::span<const ClassificationPair> pairs, const PromptMode& mode,
                                  GenerationProvider& generator, std::size_t max_in_flight)
{
    if (const auto* few = std::get_if<FewShot>(&mode); few && few->shots.empty()) {
        throw Error(kModule, Errc::EmptyShots, "few-shot mode needs at least one example");
    }
    struct Slot {
        std::optional<Verdict> verdict;
        std::optional<PairFailure> failure;
    };
    std::vector<Slot> slots(pairs.size());
    const auto errors = util::parallel_for(pairs.size(), max_in_flight, [&](std::size_t i) {
        const auto& p = pairs[i];
        const auto prompt = std::holds_alternative<ZeroShot>(mode)
                                ? build_zero_shot_prompt(p.motif_description, p.sentence_text)
                                : build_few_shot_prompt(std::get<FewShot>(mode).shots, p.motif_description,
                                                        p.sentence_text);
        std::optional<std::string> raw;
        try {
            raw = generator.generate(prompt);
            const auto label = parse_verdict(*raw);
            slots[i].verdict = Verdict{p.motif_id, p.sentence_id, label, Method::Generative, std::nullopt, raw};
        } catch (const Error& e) {
            slots[i].failure = PairFailure{i, {p.motif_id, p.sentence_id}, e.qualified_code(), e.what(), raw};
        } catch (const std::exception& e) {
            slots[i].failure = PairFailure{i, {p.motif_id, p.sentence_id}, "gateway.PROVIDER_ERROR", e.what(), raw};
        }
    });
    GenerativeRun run;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (errors[i]) {
            std::rethrow_exception(errors[i]);
        }
        if (slots[i].verdict) {
            run.verdicts.push_back(std::move(*slots[i].verdict));
        } else if (slots[i].failure) {
            run.failures.push_back(std::move(*slots[i].failure));
        }
    }
    return run;
}

} // namespace motifidx::classify
