#include "motifidx/providers.hpp"

#include "motifidx/error.hpp"

#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace motifidx {

namespace {

constexpr const char* kModule = "gateway";

using nlohmann::json;

json parse_body(const std::string& body, std::string_view what)
{
    try {
        return json::parse(body);
    } catch (const json::parse_error&) {
        throw Error(kModule, Errc::SchemaViolation, std::string(what) + " response is not JSON");
    }
}

} // namespace

bool EmbeddingVector::is_zero() const noexcept
{
    for (double v : values) {
        if (v != 0.0) {
            return false;
        }
    }
    return true;
}

std::string_view to_string(ProviderKind kind) noexcept
{
    switch (kind) {
    case ProviderKind::Embed: return "EMBED";
    case ProviderKind::PairScore: return "PAIR_SCORE";
    case ProviderKind::Generate: return "GENERATE";
    }
    return "EMBED";
}

std::optional<ProviderKind> parse_provider_kind(std::string_view s) noexcept
{
    if (s == "EMBED" || s == "embed") {
        return ProviderKind::Embed;
    }
    if (s == "PAIR_SCORE" || s == "pair_score" || s == "score") {
        return ProviderKind::PairScore;
    }
    if (s == "GENERATE" || s == "generate") {
        return ProviderKind::Generate;
    }
    return std::nullopt;
}

void ProviderConfig::validate() const
{
    if (provider_id.empty()) {
        throw Error(kModule, Errc::InvalidConfig, "provider_id must be non-empty");
    }
    if (timeout_ms <= 0) {
        throw Error(kModule, Errc::InvalidConfig, provider_id + ": timeout_ms must be positive");
    }
    if (max_in_flight < 1) {
        throw Error(kModule, Errc::InvalidConfig, provider_id + ": max_in_flight must be at least 1");
    }
    if (max_retries < 0) {
        throw Error(kModule, Errc::InvalidConfig, provider_id + ": max_retries must be non-negative");
    }
}

// ---------------------------------------------------------------------------
// wire formats

std::string embed_request_json(std::span<const std::string> texts)
{
    return json{{"texts", json(std::vector<std::string>(texts.begin(), texts.end()))}}.dump();
}

std::vector<EmbeddingVector> parse_embed_response(const std::string& body, std::size_t expected_count)
{
    const auto doc = parse_body(body, "embed");
    if (!doc.is_object() || !doc.contains("dim") || !doc["dim"].is_number_integer() || !doc.contains("vectors")
        || !doc["vectors"].is_array()) {
        throw Error(kModule, Errc::SchemaViolation, "embed response needs integer dim and vectors array");
    }
    const auto dim = doc["dim"].get<long long>();
    const auto& vectors = doc["vectors"];
    if (dim <= 0) {
        throw Error(kModule, Errc::SchemaViolation, "embed response dim must be positive");
    }
    if (vectors.size() != expected_count) {
        throw Error(kModule, Errc::SchemaViolation,
                    "embed response has " + std::to_string(vectors.size()) + " vectors for "
                        + std::to_string(expected_count) + " texts");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors) {
        if (!v.is_array() || static_cast<long long>(v.size()) != dim) {
            throw Error(kModule, Errc::SchemaViolation, "embed vector length differs from declared dim");
        }
        EmbeddingVector ev;
        ev.values.reserve(v.size());
        for (const auto& x : v) {
            if (!x.is_number()) {
                throw Error(kModule, Errc::SchemaViolation, "embed vector holds a non-number");
            }
            ev.values.push_back(x.get<double>());
        }
        out.push_back(std::move(ev));
    }
    return out;
}

std::string score_request_json(std::span<const TextPair> pairs)
{
    json arr = json::array();
    for (const auto& [motif, sentence] : pairs) {
        arr.push_back(json::array({motif, sentence}));
    }
    return json{{"pairs", arr}}.dump();
}

std::vector<PairScore> parse_score_response(const std::string& body, std::size_t expected_count)
{
    const auto doc = parse_body(body, "score");
    if (!doc.is_object() || !doc.contains("labels") || !doc["labels"].is_array()) {
        throw Error(kModule, Errc::SchemaViolation, "score response needs a labels array");
    }
    const auto& labels = doc["labels"];
    if (labels.size() != expected_count) {
        throw Error(kModule, Errc::SchemaViolation,
                    "score response has " + std::to_string(labels.size()) + " labels for "
                        + std::to_string(expected_count) + " pairs");
    }
    const json* scores = nullptr;
    if (doc.contains("scores") && !doc["scores"].is_null()) {
        scores = &doc["scores"];
        if (!scores->is_array() || scores->size() != expected_count) {
            throw Error(kModule, Errc::SchemaViolation, "score response scores length differs from labels");
        }
    }
    std::vector<PairScore> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!labels[i].is_boolean()) {
            throw Error(kModule, Errc::SchemaViolation, "score labels must be booleans");
        }
        PairScore ps;
        ps.label = labels[i].get<bool>();
        if (scores) {
            if (!(*scores)[i].is_number()) {
                throw Error(kModule, Errc::SchemaViolation, "scores must be numbers");
            }
            ps.score = (*scores)[i].get<double>();
        }
        out.push_back(ps);
    }
    return out;
}

std::string generate_request_json(const PromptBundle& prompt)
{
    return json{{"prompt", prompt.user},
                {"system", prompt.system},
                {"temperature", static_cast<int>(Decoding::temperature)},
                {"max_new_tokens", Decoding::max_new_tokens}}
        .dump();
}

std::string parse_generate_response(const std::string& body)
{
    const auto doc = parse_body(body, "generate");
    if (!doc.is_object() || !doc.contains("text") || !doc["text"].is_string()) {
        throw Error(kModule, Errc::SchemaViolation, "generate response needs a text string");
    }
    return doc["text"].get<std::string>();
}

// ---------------------------------------------------------------------------
// transport

HttpTransport::HttpTransport(ProviderConfig config) : config_(std::move(config))
{
    config_.validate();
    // split "http://host:port/prefix" into the client host and a route prefix
    const auto scheme = config_.base_url.find("://");
    if (scheme == std::string::npos) {
        throw Error(kModule, Errc::InvalidConfig, config_.provider_id + ": base_url needs a scheme");
    }
    const auto path = config_.base_url.find('/', scheme + 3);
    host_ = config_.base_url.substr(0, path);
    prefix_ = path == std::string::npos ? "" : config_.base_url.substr(path);
    while (!prefix_.empty() && prefix_.back() == '/') {
        prefix_.pop_back();
    }
}

HttpTransport::~HttpTransport() = default;

std::string HttpTransport::next_request_id()
{
    return config_.provider_id + "-" + std::to_string(counter_.fetch_add(1) + 1);
}

std::string HttpTransport::post_json(const std::string& route, const std::string& body, const std::string& request_id)
{
    httplib::Client client(host_);
    const auto secs = config_.timeout_ms / 1000;
    const auto usecs = (config_.timeout_ms % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers = {{"Idempotency-Key", request_id}};
    if (!config_.bearer_token.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.bearer_token);
    }

    httplib::Error last = httplib::Error::Unknown;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        auto res = client.Post(prefix_ + route, headers, body, "application/json");
        if (res) {
            if (res->status < 200 || res->status >= 300) {
                throw Error(kModule, Errc::ProviderError,
                            config_.provider_id + " request " + request_id + " failed with HTTP "
                                + std::to_string(res->status));
            }
            return res->body;
        }
        last = res.error();
        if (last == httplib::Error::ConnectionTimeout || last == httplib::Error::Read) {
            // reads time out as Read errors; a timed-out request is not retried
            // because the backend may still have acted on it
            break;
        }
        if (attempt < config_.max_retries) {
            std::this_thread::sleep_for(std::chrono::milliseconds(20 * (attempt + 1)));
        }
    }
    if (last == httplib::Error::ConnectionTimeout || last == httplib::Error::Read) {
        throw Error(kModule, Errc::ProviderTimeout,
                    config_.provider_id + " request " + request_id + " timed out (" + httplib::to_string(last) + ")");
    }
    throw Error(kModule, Errc::Transport,
                config_.provider_id + " request " + request_id + ": " + httplib::to_string(last));
}

// ---------------------------------------------------------------------------
// clients

HttpEmbeddingProvider::HttpEmbeddingProvider(ProviderConfig config) : transport_(std::move(config)) {}

std::vector<EmbeddingVector> HttpEmbeddingProvider::embed(std::span<const std::string> texts)
{
    if (texts.empty()) {
        return {};
    }
    const auto id = transport_.next_request_id();
    auto vectors = parse_embed_response(transport_.post_json("/v1/embed", embed_request_json(texts), id), texts.size());
    const auto dim = vectors.front().dim();
    std::lock_guard lock(dim_mutex_);
    if (session_dim_ && *session_dim_ != dim) {
        throw Error(kModule, Errc::SchemaViolation,
                    provider_id() + " request " + id + ": dim changed from " + std::to_string(*session_dim_) + " to "
                        + std::to_string(dim));
    }
    session_dim_ = dim;
    return vectors;
}

HttpPairScorer::HttpPairScorer(ProviderConfig config) : transport_(std::move(config)) {}

std::vector<PairScore> HttpPairScorer::score(std::span<const TextPair> pairs)
{
    if (pairs.empty()) {
        return {};
    }
    const auto id = transport_.next_request_id();
    return parse_score_response(transport_.post_json("/v1/score", score_request_json(pairs), id), pairs.size());
}

HttpGenerator::HttpGenerator(ProviderConfig config) : transport_(std::move(config)) {}

std::string HttpGenerator::generate(const PromptBundle& prompt)
{
    const auto id = transport_.next_request_id();
    return parse_generate_response(transport_.post_json("/v1/generate", generate_request_json(prompt), id));
}

} // namespace motifidx
