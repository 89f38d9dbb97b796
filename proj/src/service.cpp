#include "motifidx/service.hpp"

#include "motifidx/metrics.hpp"
#include "motifidx/retrieval.hpp"

#include <condition_variable>
#include <cstdio>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>

namespace motifidx::gateway {

namespace {

constexpr const char* kModule = "gateway";

using json = nlohmann::json;

Error bad_request(const std::string& msg)
{
    return Error(kModule, Errc::InvalidInput, msg);
}

struct Reply {
    int status = 200;
    json body;
};

std::string query(const httplib::Request& req, const char* key, const std::string& fallback = {})
{
    return req.has_param(key) ? req.get_param_value(key) : fallback;
}

std::size_t query_size(const httplib::Request& req, const char* key, std::size_t fallback)
{
    if (!req.has_param(key)) {
        return fallback;
    }
    const auto v = req.get_param_value(key);
    try {
        std::size_t pos = 0;
        const auto n = std::stoull(v, &pos);
        if (pos == v.size()) {
            return static_cast<std::size_t>(n);
        }
    } catch (const std::exception&) {
    }
    throw bad_request(std::string(key) + " must be a non-negative integer");
}

double query_double(const httplib::Request& req, const char* key, double fallback)
{
    if (!req.has_param(key)) {
        return fallback;
    }
    const auto v = req.get_param_value(key);
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos == v.size()) {
            return d;
        }
    } catch (const std::exception&) {
    }
    throw bad_request(std::string(key) + " must be a number");
}

json parse_body(const httplib::Request& req)
{
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) {
            throw bad_request("request body must be a JSON object");
        }
        return j;
    } catch (const json::parse_error& ex) {
        throw bad_request(std::string("malformed JSON body: ") + ex.what());
    }
}

std::string body_string(const json& j, const char* key, bool required = true)
{
    if (!j.contains(key) || j[key].is_null()) {
        if (required) {
            throw bad_request(std::string(key) + " is required");
        }
        return {};
    }
    if (!j[key].is_string()) {
        throw bad_request(std::string(key) + " must be a string");
    }
    return j[key].get<std::string>();
}

json pair_json(const PairId& p)
{
    return {{"motif_id", p.motif_id}, {"sentence_id", p.sentence_id}, {"pair_id", p.key()}};
}

json threshold_json(const classify::ThresholdModel& t)
{
    return {{"provider_id", t.provider_id},
            {"threshold", t.threshold},
            {"provenance", classify::to_string(t.provenance)},
            {"fine_tuned", t.fine_tuned}};
}

} // namespace

int http_status(const Error& e) noexcept
{
    switch (e.code()) {
    case Errc::InvalidInput: return 400;
    case Errc::UnknownReference: return 404;
    case Errc::NotAssigned:
    case Errc::DuplicateRecord:
    case Errc::NotInQueue: return 409;
    case Errc::ProviderError:
    case Errc::ProviderTimeout:
    case Errc::Transport:
    case Errc::SchemaViolation: return 502;
    default: return 422;
    }
}

json error_json(const Error& e)
{
    return {{"error",
             {{"code", code_name(e.code())},
              {"module", e.module()},
              {"qualified", e.qualified_code()},
              {"message", e.what()}}}};
}

// ---------------------------------------------------------------------------

struct Service::Impl {
    struct Job {
        std::string id;
        std::string type;
        std::string status = "queued"; // queued | running | done | failed
        json request;
        json result;
        json error;
    };

    std::shared_ptr<annotation::AnnotationStore> store;
    ServiceOptions options;
    httplib::Server server;
    std::thread thread;

    mutable std::mutex threshold_mutex;
    std::vector<classify::ThresholdModel> threshold_table;

    std::mutex job_mutex;
    std::condition_variable job_cv;
    std::map<std::string, Job> jobs;
    std::deque<std::string> job_queue;
    std::size_t job_counter = 0;
    bool stopping = false;
    std::thread worker;

    Impl(std::shared_ptr<annotation::AnnotationStore> s, ServiceOptions o) : store(std::move(s)), options(std::move(o))
    {
        threshold_table = options.project ? options.project->config().thresholds : classify::published_thresholds();
        routes();
        worker = std::thread([this] { work(); });
    }

    ~Impl()
    {
        {
            std::lock_guard lock(job_mutex);
            stopping = true;
        }
        job_cv.notify_all();
        worker.join();
    }

    bool authorized(const httplib::Request& req) const
    {
        return options.bearer_token.empty()
            || req.get_header_value("Authorization") == "Bearer " + options.bearer_token;
    }

    httplib::Server::Handler guarded(bool mutation, std::function<Reply(const httplib::Request&)> fn)
    {
        return [this, mutation, fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
            auto send = [&](int status, const json& body) {
                res.status = status;
                res.set_content(body.dump(), "application/json");
            };
            if (!authorized(req)) {
                send(401, {{"error", {{"code", "UNAUTHORIZED"}, {"message", "missing or wrong bearer token"}}}});
                return;
            }
            if (mutation && req.get_header_value("Content-Type").rfind("application/json", 0) != 0) {
                send(415, {{"error", {{"code", "UNSUPPORTED_MEDIA_TYPE"}, {"message", "bodies must be application/json"}}}});
                return;
            }
            try {
                auto r = fn(req);
                send(r.status, r.body);
            } catch (const Error& e) {
                send(http_status(e), error_json(e));
            } catch (const json::exception& e) {
                send(400, error_json(bad_request(e.what())));
            } catch (const std::exception& e) {
                send(500, {{"error", {{"code", "INTERNAL"}, {"message", e.what()}}}});
            }
        };
    }

    Project& project() const
    {
        if (!options.project) {
            throw Error(kModule, Errc::InvalidConfig, "service started without a project; provider jobs unavailable");
        }
        return *options.project;
    }

    // -- jobs ---------------------------------------------------------------

    std::string submit(const std::string& type, json request)
    {
        std::lock_guard lock(job_mutex);
        char buf[32];
        std::snprintf(buf, sizeof buf, "j%06zu", ++job_counter);
        Job job;
        job.id = buf;
        job.type = type;
        job.request = std::move(request);
        jobs[job.id] = job;
        job_queue.push_back(job.id);
        job_cv.notify_one();
        return buf;
    }

    json job_json(const Job& j) const
    {
        json out = {{"job_id", j.id}, {"type", j.type}, {"status", j.status}};
        if (j.status == "done") {
            out["result"] = j.result;
        }
        if (j.status == "failed") {
            out["error"] = j.error;
        }
        return out;
    }

    void work()
    {
        for (;;) {
            std::string id;
            Job job;
            {
                std::unique_lock lock(job_mutex);
                job_cv.wait(lock, [this] { return stopping || !job_queue.empty(); });
                if (stopping) {
                    return;
                }
                id = job_queue.front();
                job_queue.pop_front();
                jobs[id].status = "running";
                job = jobs[id];
            }
            json result;
            json error;
            try {
                result = execute(job);
            } catch (const Error& e) {
                error = error_json(e)["error"];
            } catch (const std::exception& e) {
                error = {{"code", "INTERNAL"}, {"message", e.what()}};
            }
            std::lock_guard lock(job_mutex);
            auto& j = jobs[id];
            j.status = error.is_null() ? "done" : "failed";
            j.result = std::move(result);
            j.error = std::move(error);
        }
    }

    json execute(const Job& job)
    {
        const auto& req = job.request;
        if (job.type == "recalibrate") {
            const auto provider_id = body_string(req, "provider_id");
            std::set<std::string> motifs;
            if (req.contains("motifs")) {
                motifs = req["motifs"].get<std::set<std::string>>();
            }
            const auto gold = store->export_gold();
            const auto cal = calibrate(project(), provider_id, gold, motifs);
            {
                std::lock_guard lock(threshold_mutex);
                std::erase_if(threshold_table, [&](const auto& t) { return t.provider_id == provider_id; });
                threshold_table.push_back(cal.model);
            }
            return cal.to_json();
        }
        if (job.type == "retrieve") {
            const auto motif_id = body_string(req, "motif_id");
            auto semantic = body_string(req, "semantic_provider", false);
            if (!req.contains("semantic_provider")) {
                semantic = project().config().semantic_provider;
            }
            const auto set = project().retrieve(motif_id, semantic);
            return {{"rows", retrieval::export_rows(set)}};
        }
        if (job.type == "classify") {
            const auto method_name = body_string(req, "method");
            const auto method = parse_classify_method(method_name);
            if (!method) {
                throw bad_request("method must be rerank, threshold, zero-shot or few-shot");
            }
            const auto provider_id = body_string(req, "provider_id");
            std::vector<PairId> pairs;
            for (const auto& p : req.at("pairs")) {
                pairs.push_back(annotation::pair_from_json(p));
            }
            std::optional<classify::ThresholdModel> model;
            if (*method == ClassifyMethod::Threshold) {
                for (const auto& t : thresholds()) {
                    if (t.provider_id == provider_id) {
                        model = t;
                    }
                }
            }
            const auto run = run_classification(project(), *method, provider_id, pairs, model);
            json verdicts = json::array();
            json failures = json::array();
            for (const auto& v : run.verdicts) {
                verdicts.push_back(classify::to_json(v));
            }
            for (const auto& f : run.failures) {
                failures.push_back(to_json(f));
            }
            return {{"verdicts", verdicts}, {"failures", failures}};
        }
        throw bad_request("unknown job type " + job.type);
    }

    std::vector<classify::ThresholdModel> thresholds() const
    {
        std::lock_guard lock(threshold_mutex);
        return threshold_table;
    }

    // -- routes -------------------------------------------------------------

    void routes()
    {
        server.Get("/api/batches/next", guarded(false, [this](const auto& req) {
            const auto annotator = query(req, "annotator");
            if (annotator.empty()) {
                throw bad_request("annotator is required");
            }
            const auto size = query_size(req, "size", 1500);
            const double rate = query_double(req, "double_rate", 0.5);
            return Reply{200, annotation::to_json(store->next_batch(annotator, size, rate))};
        }));

        server.Post("/api/labels", guarded(true, [this](const auto& req) {
            const auto rec = store->record_label(annotation::record_from_json(parse_body(req)));
            return Reply{201, annotation::to_json(rec)};
        }));

        server.Get("/api/labels", guarded(false, [this](const auto& req) {
            const auto annotator = query(req, "annotator");
            json out = json::array();
            for (const auto& r : store->records()) {
                if (annotator.empty() || r.annotator_id == annotator) {
                    out.push_back(annotation::to_json(r));
                }
            }
            return Reply{200, out};
        }));

        server.Get("/api/pending", guarded(false, [this](const auto& req) {
            const auto annotator = query(req, "annotator");
            if (annotator.empty()) {
                throw bad_request("annotator is required");
            }
            json out = json::array();
            for (const auto& p : store->pending(annotator)) {
                out.push_back(pair_json(p));
            }
            return Reply{200, out};
        }));

        server.Get("/api/flagged", guarded(false, [this](const auto&) {
            json out = json::array();
            for (const auto& p : store->flagged()) {
                out.push_back(pair_json(p));
            }
            return Reply{200, out};
        }));

        server.Get("/api/disagreements", guarded(false, [this](const auto&) {
            json out = json::array();
            for (const auto& d : store->disagreements()) {
                auto j = pair_json(d.pair);
                j["records"] = json::array();
                for (const auto& r : d.records) {
                    j["records"].push_back(annotation::to_json(r));
                }
                out.push_back(j);
            }
            return Reply{200, out};
        }));

        server.Post("/api/adjudications", guarded(true, [this](const auto& req) {
            const auto a = annotation::adjudication_from_json(parse_body(req));
            const auto done = store->adjudicate(a.pair, a.final_label, a.final_expression, a.resolver_id, a.note);
            return Reply{201, annotation::to_json(done)};
        }));

        server.Get("/api/motifs", guarded(false, [this](const auto&) {
            json out = json::array();
            for (const auto& [id, m] : store->catalog().motifs) {
                out.push_back(motif_json(id, m));
            }
            return Reply{200, out};
        }));

        server.Get(R"(/api/motifs/([^/]+))", guarded(false, [this](const auto& req) {
            const std::string id = req.matches[1];
            const auto& motifs = store->catalog().motifs;
            const auto it = motifs.find(id);
            if (it == motifs.end()) {
                throw Error(kModule, Errc::UnknownReference, "unknown motif " + id);
            }
            auto j = motif_json(id, it->second);
            const auto acc = store->accounting();
            const auto counts = acc.per_motif.find(id);
            j["positives"] = counts == acc.per_motif.end() ? 0 : counts->second.positives;
            j["negatives"] = counts == acc.per_motif.end() ? 0 : counts->second.negatives;
            return Reply{200, j};
        }));

        server.Get(R"(/api/pairs/([^/]+)/context)", guarded(false, [this](const auto& req) {
            const auto pair = PairId::from_key(std::string(req.matches[1]));
            if (!pair) {
                throw bad_request("pair id must be motif_id:sentence_id");
            }
            const auto radius = query_size(req, "radius", 2);
            return Reply{200, store->context(*pair, radius).to_json()};
        }));

        server.Get("/api/agreement", guarded(false, [this](const auto&) {
            return Reply{200, store->agreement().to_json()};
        }));

        server.Get("/api/progress", guarded(false, [this](const auto&) {
            return Reply{200, store->accounting().to_json()};
        }));

        server.Post("/api/recalibrate", guarded(true, [this](const auto& req) {
            auto body = parse_body(req);
            body_string(body, "provider_id");
            project();
            const auto id = submit("recalibrate", std::move(body));
            return Reply{202, {{"job_id", id}, {"status", "queued"}}};
        }));

        server.Get("/api/thresholds", guarded(false, [this](const auto&) {
            json out = json::array();
            for (const auto& t : thresholds()) {
                out.push_back(threshold_json(t));
            }
            return Reply{200, out};
        }));

        server.Post("/api/jobs", guarded(true, [this](const auto& req) {
            auto body = parse_body(req);
            const auto type = body_string(body, "type");
            if (type != "retrieve" && type != "classify") {
                throw bad_request("job type must be retrieve or classify");
            }
            project();
            const auto id = submit(type, std::move(body));
            return Reply{202, {{"job_id", id}, {"status", "queued"}}};
        }));

        server.Get(R"(/api/jobs/([^/]+))", guarded(false, [this](const auto& req) {
            const std::string id = req.matches[1];
            std::lock_guard lock(job_mutex);
            const auto it = jobs.find(id);
            if (it == jobs.end()) {
                throw Error(kModule, Errc::UnknownReference, "unknown job " + id);
            }
            return Reply{200, job_json(it->second)};
        }));
    }

    json motif_json(const std::string& id, const annotation::Catalog::Motif& m) const
    {
        const auto expr = store->motif_expression(id);
        return {{"motif_id", id},
                {"description", m.description},
                {"conceptual", to_string(m.conceptual)},
                {"expression", expr ? json(to_string(*expr)) : json()}};
    }
};

Service::Service(std::shared_ptr<annotation::AnnotationStore> store, ServiceOptions options)
    : impl_(std::make_unique<Impl>(std::move(store), std::move(options)))
{}

Service::~Service()
{
    stop();
}

int Service::bind(const std::string& host, int port)
{
    if (port == 0) {
        const int p = impl_->server.bind_to_any_port(host);
        if (p < 0) {
            throw Error(kModule, Errc::Transport, "cannot bind " + host);
        }
        return p;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        throw Error(kModule, Errc::Transport, "cannot bind " + host + ":" + std::to_string(port));
    }
    return port;
}

void Service::run()
{
    impl_->server.listen_after_bind();
}

void Service::start()
{
    impl_->thread = std::thread([this] { run(); });
    impl_->server.wait_until_ready();
}

void Service::stop()
{
    if (!impl_) {
        return;
    }
    impl_->server.stop();
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

std::vector<classify::ThresholdModel> Service::thresholds() const
{
    return impl_->thresholds();
}

} // namespace motifidx::gateway
