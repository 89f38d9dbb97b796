#include <doctest.h>

#include "motifidx/classifiers.hpp"
#include "motifidx/error.hpp"
#include "motifidx/providers.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <mutex>
#include <set>
#include <thread>

using namespace motifidx;
using nlohmann::json;

namespace {

/// In-process backend speaking the provider wire protocol.
class FakeBackend {
public:
    using Handler = std::function<void(const json& request, httplib::Response& res)>;

    explicit FakeBackend(Handler handler) : handler_(std::move(handler))
    {
        auto route = [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = json::parse(req.body);
            {
                std::lock_guard lock(mutex_);
                keys_.push_back(req.get_header_value("Idempotency-Key"));
                auth_.push_back(req.get_header_value("Authorization"));
                paths_.push_back(req.path);
                bodies_.push_back(body);
            }
            handler_(body, res);
        };
        server_.Post("/v1/embed", route);
        server_.Post("/v1/score", route);
        server_.Post("/v1/generate", route);
        server_.Post("/prefix/v1/score", route);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeBackend()
    {
        server_.stop();
        thread_.join();
    }

    ProviderConfig config(ProviderKind kind, const std::string& suffix = "") const
    {
        ProviderConfig c;
        c.kind = kind;
        c.provider_id = "fake";
        c.base_url = "http://127.0.0.1:" + std::to_string(port_) + suffix;
        c.timeout_ms = 2000;
        return c;
    }

    std::vector<std::string> keys() const
    {
        std::lock_guard lock(mutex_);
        return keys_;
    }
    std::vector<std::string> auth() const
    {
        std::lock_guard lock(mutex_);
        return auth_;
    }
    std::vector<std::string> paths() const
    {
        std::lock_guard lock(mutex_);
        return paths_;
    }
    std::vector<json> bodies() const
    {
        std::lock_guard lock(mutex_);
        return bodies_;
    }

private:
    Handler handler_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    mutable std::mutex mutex_;
    std::vector<std::string> keys_;
    std::vector<std::string> auth_;
    std::vector<std::string> paths_;
    std::vector<json> bodies_;
};

void reply(httplib::Response& res, const json& body)
{
    res.set_content(body.dump(), "application/json");
}

Errc code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::InvalidInput;
}

} // namespace

TEST_CASE("embed: one vector per text at the declared dim")
{
    FakeBackend backend([](const json& req, httplib::Response& res) {
        json vectors = json::array();
        for (std::size_t i = 0; i < req.at("texts").size(); ++i) {
            vectors.push_back({1.0 * static_cast<double>(i), 0.5, -1.0});
        }
        reply(res, {{"dim", 3}, {"vectors", vectors}});
    });
    auto cfg = backend.config(ProviderKind::Embed);
    cfg.bearer_token = "s3cret";
    HttpEmbeddingProvider p(cfg);
    const std::vector<std::string> texts{"a", "b", "c"};
    const auto v = p.embed(texts);
    REQUIRE(v.size() == 3);
    for (const auto& x : v) {
        CHECK(x.dim() == 3);
    }
    CHECK(v[2].values[0] == 2.0);
    CHECK(backend.bodies()[0] == json{{"texts", texts}});
    CHECK(backend.auth()[0] == "Bearer s3cret");
    CHECK(p.embed(std::vector<std::string>{}).empty());
}

TEST_CASE("embed: malformed responses are schema violations")
{
    std::atomic<int> mode{0};
    FakeBackend backend([&](const json&, httplib::Response& res) {
        switch (mode.load()) {
        case 0: reply(res, {{"dim", 3}, {"vectors", {{1, 2, 3}, {1, 2, 3}}}}); break; // 2 for 3
        case 1: reply(res, {{"dim", 3}, {"vectors", {{1, 2}, {1, 2, 3}, {1, 2, 3}}}}); break;
        case 2: res.set_content("not json", "text/plain"); break;
        case 3: reply(res, {{"dim", 3}, {"vectors", {{1, 2, 3}, {1, 2, 3}, {1, 2, 3}}}}); break;
        default: reply(res, {{"dim", 2}, {"vectors", {{1, 2}, {1, 2}, {1, 2}}}}); break;
        }
    });
    HttpEmbeddingProvider p(backend.config(ProviderKind::Embed));
    const std::vector<std::string> texts{"a", "b", "c"};
    for (int m : {0, 1, 2}) {
        mode = m;
        CHECK(code_of([&] { p.embed(texts); }) == Errc::SchemaViolation);
    }
    mode = 3;
    CHECK(p.embed(texts).size() == 3);
    mode = 4; // the dimension may not change within a session
    CHECK(code_of([&] { p.embed(texts); }) == Errc::SchemaViolation);
}

TEST_CASE("score: labels with optional scores; 2 labels for 3 pairs is rejected")
{
    std::atomic<bool> short_reply{false};
    FakeBackend backend([&](const json& req, httplib::Response& res) {
        const auto n = req.at("pairs").size() - (short_reply ? 1 : 0);
        json labels = json::array();
        json scores = json::array();
        for (std::size_t i = 0; i < n; ++i) {
            labels.push_back(req["pairs"][i][1].get<std::string>().find("serpent") != std::string::npos);
            scores.push_back(0.25 * static_cast<double>(i));
        }
        reply(res, {{"labels", labels}, {"scores", scores}});
    });
    HttpPairScorer p(backend.config(ProviderKind::PairScore, "/prefix/"));
    const std::vector<TextPair> pairs{{"Serpent", "a serpent"}, {"Serpent", "a stone"}, {"Serpent", "serpents"}};
    const auto s = p.score(pairs);
    REQUIRE(s.size() == 3);
    CHECK(s[0].label);
    CHECK_FALSE(s[1].label);
    CHECK(*s[2].score == 0.5);
    CHECK(backend.paths()[0] == "/prefix/v1/score");
    CHECK(backend.bodies()[0]["pairs"][1] == json::array({"Serpent", "a stone"}));
    short_reply = true;
    CHECK(code_of([&] { p.score(pairs); }) == Errc::SchemaViolation);

    CHECK(parse_score_response(R"({"labels":[true,false]})", 2)[1].score == std::nullopt);
    CHECK(code_of([] { parse_score_response(R"({"labels":[1,0]})", 2); }) == Errc::SchemaViolation);
}

TEST_CASE("generate: request carries the fixed decoding constants")
{
    FakeBackend backend([](const json& req, httplib::Response& res) {
        reply(res, {{"text", req.at("prompt").get<std::string>().find("Mermaid") != std::string::npos ? "Yes" : "No"}});
    });
    HttpGenerator g(backend.config(ProviderKind::Generate));
    const auto prompt = classify::build_zero_shot_prompt("Mermaid", "a mermaid sang");
    CHECK(g.generate(prompt) == "Yes");
    const auto body = backend.bodies().at(0);
    CHECK(body.at("temperature") == 0);
    CHECK(body.at("max_new_tokens") == 1);
    CHECK(body.at("system") == classify::kSystemPrompt);
    CHECK(body.at("prompt") == prompt.user);
    CHECK(body.size() == 4);
    CHECK(code_of([] { parse_generate_response(R"({"txt":"Yes"})"); }) == Errc::SchemaViolation);
}

TEST_CASE("each logical request gets its own idempotency key")
{
    FakeBackend backend([](const json&, httplib::Response& res) { reply(res, {{"text", "No"}}); });
    HttpGenerator g(backend.config(ProviderKind::Generate));
    const auto prompt = classify::build_zero_shot_prompt("m", "s");
    for (int i = 0; i < 5; ++i) {
        g.generate(prompt);
    }
    const auto keys = backend.keys();
    REQUIRE(keys.size() == 5);
    CHECK(std::set<std::string>(keys.begin(), keys.end()).size() == 5);
    for (const auto& k : keys) {
        CHECK_FALSE(k.empty());
    }
}

TEST_CASE("server errors are not retried; timeouts and transport failures are classified")
{
    std::atomic<int> delay_ms{0};
    std::atomic<int> status{500};
    FakeBackend backend([&](const json&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms.load()));
        res.status = status;
        reply(res, {{"text", "Yes"}});
    });
    auto cfg = backend.config(ProviderKind::Generate);
    cfg.max_retries = 3;
    HttpGenerator g(cfg);
    const auto prompt = classify::build_zero_shot_prompt("m", "s");
    CHECK(code_of([&] { g.generate(prompt); }) == Errc::ProviderError);
    CHECK(backend.keys().size() == 1);

    status = 200;
    delay_ms = 600;
    cfg.timeout_ms = 150;
    HttpGenerator slow(cfg);
    CHECK(code_of([&] { slow.generate(prompt); }) == Errc::ProviderTimeout);
    std::this_thread::sleep_for(std::chrono::milliseconds(700));
    // at most once: a timed-out request is not re-sent
    CHECK(backend.keys().size() == 2);

    ProviderConfig dead;
    dead.kind = ProviderKind::Generate;
    dead.provider_id = "dead";
    dead.base_url = "http://127.0.0.1:1";
    dead.timeout_ms = 200;
    dead.max_retries = 1;
    HttpGenerator unreachable(dead);
    CHECK(code_of([&] { unreachable.generate(prompt); }) == Errc::Transport);
}

TEST_CASE("provider config validation")
{
    ProviderConfig c;
    CHECK_THROWS_AS(c.validate(), Error);
    c.provider_id = "x";
    c.base_url = "127.0.0.1:80";
    CHECK_THROWS_AS(HttpGenerator{c}, Error);
    c.base_url = "http://127.0.0.1:80";
    c.timeout_ms = 0;
    CHECK_THROWS_AS(HttpGenerator{c}, Error);
    CHECK(parse_provider_kind("PAIR_SCORE") == ProviderKind::PairScore);
    CHECK_FALSE(parse_provider_kind("nope"));
}

TEST_CASE("mock providers honour the same contracts")
{
    auto res = std::make_shared<corpus::LexicalResource>();
    LemmaOverlapScorer scorer(res);
    const std::vector<TextPair> pairs{{"serpent face", "the serpent"}, {"serpent face", "a stone"}};
    const auto s = scorer.score(pairs);
    CHECK(s[0].label);
    CHECK(*s[0].score == 0.5);
    CHECK_FALSE(s[1].label);
    LemmaOverlapGenerator gen(res);
    CHECK(gen.generate(classify::build_zero_shot_prompt("serpent face", "the serpent")) == "Yes");
    CHECK(gen.generate(classify::build_few_shot_prompt(classify::reference_shots(), "serpent face", "a stone")) == "No");
    ScriptedGenerator strict({});
    CHECK(code_of([&] { strict.generate(classify::build_zero_shot_prompt("a", "b")); }) == Errc::ProviderError);
}
