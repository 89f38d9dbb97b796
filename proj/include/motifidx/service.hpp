#pragma once

// REST front end for the annotation workflow. Every mutation goes through the
// store's single writer; provider-bound work (recalibration, retrieval and
// classification jobs) runs on a background worker and is polled.
//
//   GET  /api/batches/next?annotator=&size=&double_rate=
//   POST /api/labels                 GET /api/labels?annotator=
//   GET  /api/pending?annotator=     GET /api/flagged
//   GET  /api/disagreements          POST /api/adjudications
//   GET  /api/motifs                 GET /api/motifs/{id}
//   GET  /api/pairs/{motif:sentence}/context?radius=
//   GET  /api/agreement              GET /api/progress
//   POST /api/recalibrate            GET /api/thresholds
//   POST /api/jobs                   GET /api/jobs/{id}
//
// Errors: {"error": {"code", "module", "qualified", "message"}} with 400 for
// schema violations, 401 bad token, 404 unknown references, 409 assignment
// and duplicate conflicts, 415 non-JSON bodies, 422 other domain errors,
// 502 provider failures.

#include "motifidx/annotation_store.hpp"
#include "motifidx/classifiers.hpp"
#include "motifidx/error.hpp"
#include "motifidx/project.hpp"

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace motifidx::gateway {

int http_status(const Error& e) noexcept;
nlohmann::json error_json(const Error& e);

struct ServiceOptions {
    /// Required as "Authorization: Bearer <token>" when non-empty.
    std::string bearer_token;
    /// Needed for recalibration and jobs; the annotation routes work without it.
    std::shared_ptr<Project> project;
};

class Service {
public:
    Service(std::shared_ptr<annotation::AnnotationStore> store, ServiceOptions options = {});
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and returns the port; port 0 picks a free one.
    int bind(const std::string& host, int port);
    /// Serves on the bound socket until stop().
    void run();
    /// run() on a background thread.
    void start();
    void stop();

    /// Published and configured operating points plus local calibrations.
    std::vector<classify::ThresholdModel> thresholds() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace motifidx::gateway
