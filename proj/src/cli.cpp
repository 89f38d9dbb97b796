#include "motifidx/cli.hpp"

#include "motifidx/align.hpp"
#include "motifidx/annotation_store.hpp"
#include "motifidx/error.hpp"
#include "motifidx/metrics.hpp"
#include "motifidx/project.hpp"
#include "motifidx/service.hpp"
#include "motifidx/util.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

namespace motifidx::gateway {

namespace {

constexpr const char* kModule = "gateway";

using json = nlohmann::json;

Error usage(const std::string& msg)
{
    return Error(kModule, Errc::InvalidInput, msg);
}

struct Sink {
    std::ostream& out;
    std::string path;

    void write(const std::string& text) const
    {
        if (path.empty()) {
            out << text;
        } else {
            util::write_file(path, text);
        }
    }
    void json_doc(const json& j) const { write(j.dump(2) + "\n"); }
    void jsonl(const std::vector<json>& rows) const
    {
        std::string text;
        for (const auto& r : rows) {
            text += r.dump();
            text += '\n';
        }
        write(text);
    }
};

std::vector<PairId> read_pairs(const std::string& path)
{
    std::vector<PairId> out;
    for (const auto& row : util::read_jsonl(path)) {
        out.push_back(annotation::pair_from_json(row));
    }
    return out;
}

/// JSONL {motif_id, sentence_id, label, expression?}.
std::vector<metrics::LabeledPair> read_gold(const std::string& path)
{
    std::vector<metrics::LabeledPair> out;
    for (const auto& row : util::read_jsonl(path)) {
        const auto pair = annotation::pair_from_json(row);
        metrics::LabeledPair lp;
        lp.motif_id = pair.motif_id;
        lp.sentence_id = pair.sentence_id;
        const auto label = row.contains("label") && row["label"].is_string()
                               ? parse_label(row["label"].get<std::string>())
                               : std::nullopt;
        if (!label) {
            throw usage(path + ": gold row " + pair.key() + " needs label POSITIVE or NEGATIVE");
        }
        lp.label = *label;
        if (row.contains("expression") && row["expression"].is_string()) {
            lp.expression = parse_complexity(row["expression"].get<std::string>());
        }
        out.push_back(std::move(lp));
    }
    return out;
}

json gold_row(const metrics::LabeledPair& p)
{
    json j = {{"motif_id", p.motif_id}, {"sentence_id", p.sentence_id}, {"label", to_string(p.label)}};
    j["expression"] = p.expression ? json(to_string(*p.expression)) : json();
    return j;
}

struct MotifCategories {
    std::map<std::string, Complexity> conceptual;
    std::map<std::string, Complexity> expression;
};

/// CSV with at least motif_id, conceptual, expression columns.
MotifCategories read_cells(const std::string& path)
{
    const auto rows = util::parse_csv(util::read_file(path));
    if (rows.empty()) {
        throw usage(path + " is empty");
    }
    const auto& header = rows.front();
    auto column = [&](const char* name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            throw usage(path + " lacks a " + std::string(name) + " column");
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto id_col = column("motif_id");
    const auto c_col = column("conceptual");
    const auto e_col = column("expression");
    MotifCategories out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != header.size()) {
            throw usage(path + ": row " + std::to_string(i) + " has the wrong width");
        }
        const auto c = parse_complexity(r[c_col]);
        const auto e = parse_complexity(r[e_col]);
        if (!c || !e) {
            throw usage(path + ": row " + std::to_string(i) + " needs SIMPLE/COMPLEX categories");
        }
        out.conceptual[r[id_col]] = *c;
        out.expression[r[id_col]] = *e;
    }
    return out;
}

/// Motif-level expression category: COMPLEX iff any gold positive is complex.
std::map<std::string, Complexity> derive_motif_expression(std::span<const metrics::LabeledPair> gold)
{
    std::map<std::string, Complexity> out;
    for (const auto& g : gold) {
        if (g.label != Label::Positive || !g.expression) {
            continue;
        }
        auto [it, fresh] = out.emplace(g.motif_id, *g.expression);
        if (!fresh && *g.expression == Complexity::Complex) {
            it->second = Complexity::Complex;
        }
    }
    return out;
}

std::map<std::string, Complexity> index_conceptual(const motif::MotifIndex& index)
{
    std::map<std::string, Complexity> out;
    for (const auto& e : index.entries()) {
        out[e.id.str()] = e.conceptual;
    }
    return out;
}

/// conceptual,expression,train,val,test
std::map<metrics::CellKey, metrics::SplitTargets> read_targets(const std::string& path)
{
    const auto rows = util::parse_csv(util::read_file(path));
    std::map<metrics::CellKey, metrics::SplitTargets> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const auto c = r.size() == 5 ? parse_complexity(r[0]) : std::nullopt;
        const auto e = r.size() == 5 ? parse_complexity(r[1]) : std::nullopt;
        if (!c || !e) {
            throw usage(path + ": row " + std::to_string(i) + " must be conceptual,expression,train,val,test");
        }
        out[{*c, *e}] = {std::stoul(r[2]), std::stoul(r[3]), std::stoul(r[4])};
    }
    return out;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"motif indexing toolkit", "motifidx"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_path;
    app.add_option("--config", config_path, "project config (JSON)");
    app.add_option("-o,--out", out_path, "write the export here instead of stdout");

    std::unique_ptr<Project> lazy_project;
    auto project = [&]() -> Project& {
        if (!lazy_project) {
            if (config_path.empty()) {
                throw Error(kModule, Errc::InvalidConfig, "this command needs --config");
            }
            lazy_project = std::make_unique<Project>(ProjectConfig::load(config_path));
        }
        return *lazy_project;
    };
    auto output = [&]() { return Sink{out, out_path}; };

    std::function<int()> action;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "segment an edition into sentences (JSONL)");
    std::string ingest_edition;
    ingest->add_option("--edition", ingest_edition, "edition id (default: editions.corpus)");
    ingest->callback([&] {
        action = [&] {
            auto& p = project();
            const auto id = ingest_edition.empty() ? p.config().corpus_edition : ingest_edition;
            if (id.empty()) {
                throw usage("ingest needs --edition or editions.corpus");
            }
            const auto sentences = corpus::segment_edition(p.edition(id), *p.lexicon());
            std::vector<json> rows;
            for (const auto& s : sentences) {
                rows.push_back({{"sentence_id", s.sentence_id},
                                {"volume_no", s.volume_no},
                                {"page_no", s.page_no},
                                {"char_start", s.char_start},
                                {"char_end", s.char_end},
                                {"text", s.text}});
            }
            output().jsonl(rows);
            return 0;
        };
    });

    // align
    auto* align_cmd = app.add_subcommand("align", "map source pages onto target character spans");
    std::string align_method = "nw";
    std::string align_provider = kMockProvider;
    std::string align_gold;
    std::size_t align_tolerance = 0;
    align_cmd->add_option("--method", align_method, "nw | embed")->check(CLI::IsMember({"nw", "embed"}));
    align_cmd->add_option("--provider", align_provider, "embedding provider for --method embed");
    align_cmd->add_option("--gold", align_gold, "gold page boundaries (JSONL) to audit against");
    align_cmd->add_option("--tolerance", align_tolerance, "audit tolerance in characters");
    align_cmd->callback([&] {
        action = [&] {
            auto& p = project();
            const auto& cfg = p.config();
            const auto& source = p.edition(cfg.source_edition);
            const auto& target = p.edition(cfg.target_edition);
            const auto map = align_method == "nw"
                                 ? align::align_pages_nw(source, target, *p.lexicon(), cfg.scoring, cfg.alignment)
                                 : align::align_pages_embed(source, target, *p.embedder(align_provider), cfg.alignment);
            json doc = {{"method", align_method}, {"entries", align::to_json(map)}, {"exhausted", map.exhausted}};
            if (map.exhausted) {
                doc["failure"] = map.failure;
            }
            if (!align_gold.empty()) {
                const auto gold = align::load_gold_jsonl(align_gold);
                doc["audit"] = {{"tolerance_chars", align_tolerance},
                                {"gold_pages", gold.size()},
                                {"accuracy", align::audit_alignment(map, gold, align_tolerance)}};
            }
            output().json_doc(doc);
            if (map.exhausted) {
                err << error_json(Error("align", Errc::CursorExhausted, map.failure)).dump() << "\n";
                return 1;
            }
            return 0;
        };
    });

    // index-load
    auto* index_cmd = app.add_subcommand("index-load", "validate the motif index and export it as JSON");
    index_cmd->callback([&] {
        action = [&] {
            const auto& index = project().index();
            json missing = json::array();
            for (const auto& id : index.missing_parents()) {
                missing.push_back(id.str());
            }
            output().json_doc({{"motifs", index.size()},
                               {"conceptual", {{"SIMPLE", index.count(Complexity::Simple)},
                                               {"COMPLEX", index.count(Complexity::Complex)}}},
                               {"missing_parents", missing},
                               {"entries", index.to_json()}});
            return 0;
        };
    });

    // retrieve
    auto* retrieve_cmd = app.add_subcommand("retrieve", "lexical + semantic candidates per motif (JSONL)");
    std::vector<std::string> retrieve_motifs;
    bool retrieve_all = false;
    std::optional<std::string> retrieve_semantic;
    bool retrieve_lexical_only = false;
    auto* motif_opt = retrieve_cmd->add_option("--motif", retrieve_motifs, "motif id (repeatable)");
    auto* all_opt = retrieve_cmd->add_flag("--all", retrieve_all, "every motif in the index");
    motif_opt->excludes(all_opt);
    retrieve_cmd->add_option("--semantic", retrieve_semantic, "embedding provider for the semantic stage");
    retrieve_cmd->add_flag("--lexical-only", retrieve_lexical_only, "skip the semantic stage");
    retrieve_cmd->callback([&] {
        action = [&] {
            auto& p = project();
            if (retrieve_motifs.empty() && !retrieve_all) {
                throw usage("retrieve needs --motif or --all");
            }
            std::vector<std::string> ids = retrieve_motifs;
            if (retrieve_all) {
                for (const auto& e : p.index().entries()) {
                    ids.push_back(e.id.str());
                }
            }
            const auto semantic =
                retrieve_lexical_only ? std::string() : retrieve_semantic.value_or(p.config().semantic_provider);
            std::vector<json> rows;
            for (const auto& id : ids) {
                for (auto& r : retrieval::export_rows(p.retrieve(id, semantic))) {
                    rows.push_back(std::move(r));
                }
            }
            output().jsonl(rows);
            return 0;
        };
    });

    // classify
    auto* classify_cmd = app.add_subcommand("classify", "verdicts for candidate pairs (JSONL)");
    std::string classify_method;
    std::string classify_provider = kMockProvider;
    std::string classify_pairs;
    std::optional<double> classify_threshold;
    classify_cmd->add_option("--method", classify_method, "rerank | threshold | zero-shot | few-shot")
        ->required()
        ->check(CLI::IsMember({"rerank", "threshold", "zero-shot", "few-shot"}));
    classify_cmd->add_option("--provider", classify_provider, "provider id");
    classify_cmd->add_option("--pairs", classify_pairs, "JSONL of {motif_id, sentence_id} (candidate rows work)")
        ->required();
    classify_cmd->add_option("--threshold", classify_threshold, "operating point for --method threshold");
    classify_cmd->callback([&] {
        action = [&] {
            auto& p = project();
            const auto method = *parse_classify_method(classify_method);
            std::optional<classify::ThresholdModel> model;
            if (classify_threshold) {
                model = classify::ThresholdModel{classify_provider, *classify_threshold,
                                                 classify::ThresholdProvenance::Configured, false};
            }
            const auto pairs = read_pairs(classify_pairs);
            const auto run = run_classification(p, method, classify_provider, pairs, model);
            std::vector<json> rows;
            for (const auto& v : run.verdicts) {
                rows.push_back(classify::to_json(v));
            }
            output().jsonl(rows);
            if (!run.failures.empty()) {
                json failures = json::array();
                for (const auto& f : run.failures) {
                    failures.push_back(to_json(f));
                }
                err << json{{"error",
                             {{"code", "PARTIAL_FAILURE"},
                              {"module", "classifiers"},
                              {"message", std::to_string(run.failures.size()) + " pairs failed"},
                              {"failures", failures}}}}
                           .dump()
                    << "\n";
                return 2;
            }
            return 0;
        };
    });

    // calibrate
    auto* calibrate_cmd = app.add_subcommand("calibrate", "midpoint threshold for an embedding provider");
    std::string calibrate_provider = kMockProvider;
    std::string calibrate_labeled;
    std::string calibrate_split;
    std::string calibrate_use = "train";
    calibrate_cmd->add_option("--provider", calibrate_provider, "embedding provider id");
    calibrate_cmd->add_option("--labeled", calibrate_labeled, "labeled pairs (JSONL)")->required();
    calibrate_cmd->add_option("--split", calibrate_split, "split spec JSON restricting the motifs used");
    calibrate_cmd->add_option("--use", calibrate_use, "split part to calibrate on")
        ->check(CLI::IsMember({"train", "val", "test"}));
    calibrate_cmd->callback([&] {
        action = [&] {
            const auto labeled = read_gold(calibrate_labeled);
            std::set<std::string> motifs;
            if (!calibrate_split.empty()) {
                const auto spec = json::parse(util::read_file(calibrate_split));
                motifs = spec.at(calibrate_use).get<std::set<std::string>>();
            }
            output().json_doc(calibrate(project(), calibrate_provider, labeled, motifs).to_json());
            return 0;
        };
    });

    // enqueue
    auto* enqueue_cmd = app.add_subcommand("enqueue", "queue candidate pairs for annotation");
    std::string enqueue_pairs;
    int enqueue_priority = 0;
    enqueue_cmd->add_option("--pairs", enqueue_pairs, "JSONL of {motif_id, sentence_id}")->required();
    enqueue_cmd->add_option("--priority", enqueue_priority, "higher is assigned first");
    enqueue_cmd->callback([&] {
        action = [&] {
            const auto pairs = read_pairs(enqueue_pairs);
            const auto added = project().store()->enqueue_candidates(pairs, enqueue_priority);
            output().json_doc({{"enqueued", added}, {"skipped", pairs.size() - added}});
            return 0;
        };
    });

    // batch
    auto* batch_cmd = app.add_subcommand("batch", "assign the next batch to an annotator");
    std::string batch_annotator;
    std::size_t batch_size = 1500;
    double batch_rate = 0.5;
    batch_cmd->add_option("--annotator", batch_annotator, "annotator id")->required();
    batch_cmd->add_option("--size", batch_size, "pairs per batch");
    batch_cmd->add_option("--double-rate", batch_rate, "share of the batch already held by one other annotator")
        ->check(CLI::Range(0.0, 1.0));
    batch_cmd->callback([&] {
        action = [&] {
            output().json_doc(annotation::to_json(project().store()->next_batch(batch_annotator, batch_size, batch_rate)));
            return 0;
        };
    });

    // label
    auto* label_cmd = app.add_subcommand("label", "record annotation labels from a JSONL file");
    std::string label_records;
    label_cmd->add_option("--records", label_records, "JSONL annotation records")->required();
    label_cmd->callback([&] {
        action = [&] {
            auto store = project().store();
            std::size_t n = 0;
            for (const auto& row : util::read_jsonl(label_records)) {
                store->record_label(annotation::record_from_json(row));
                ++n;
            }
            output().json_doc({{"recorded", n}});
            return 0;
        };
    });

    // gold
    auto* gold_cmd = app.add_subcommand("gold", "export gold labels from the store (JSONL)");
    gold_cmd->callback([&] {
        action = [&] {
            std::vector<json> rows;
            for (const auto& g : project().store()->export_gold()) {
                rows.push_back(gold_row(g));
            }
            output().jsonl(rows);
            return 0;
        };
    });

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "grid report for verdicts, or a published score table check");
    std::string eval_verdicts;
    std::string eval_gold;
    std::string eval_cells;
    std::string eval_fixture;
    std::string eval_method_id;
    bool eval_table = false;
    double eval_tolerance = 0.01;
    eval_cmd->add_option("--verdicts", eval_verdicts, "verdict JSONL");
    eval_cmd->add_option("--gold", eval_gold, "gold JSONL {motif_id, sentence_id, label, expression?}");
    eval_cmd->add_option("--cells", eval_cells, "CSV motif_id,conceptual,expression (else index + gold)");
    eval_cmd->add_option("--method-id", eval_method_id, "name for the report");
    eval_cmd->add_flag("--table", eval_table, "print the aligned text table instead of JSON");
    eval_cmd->add_option("--fixture", eval_fixture, "CSV method,conceptual,expression,precision,recall,f1");
    eval_cmd->add_option("--tolerance", eval_tolerance, "F1 tolerance for --fixture");
    eval_cmd->callback([&] {
        action = [&]() -> int {
            if (!eval_fixture.empty()) {
                const auto rows = metrics::parse_reported_rows(util::read_file(eval_fixture));
                const auto checks = metrics::check_reported_rows(rows);
                json out_rows = json::array();
                std::size_t checked = 0;
                std::size_t failed = 0;
                for (const auto& c : checks) {
                    json j = {{"method", c.row.method},
                              {"conceptual", c.row.conceptual},
                              {"expression", c.row.expression},
                              {"printed", {c.row.precision, c.row.recall, c.row.f1}}};
                    if (c.excluded_because.empty()) {
                        ++checked;
                        const bool ok = c.f1_error <= eval_tolerance;
                        failed += ok ? 0 : 1;
                        j["f1_recomputed"] = c.f1_recomputed;
                        j["ok"] = ok;
                    } else {
                        j["excluded"] = c.excluded_because;
                    }
                    out_rows.push_back(j);
                }
                output().json_doc({{"rows", out_rows},
                                   {"checked", checked},
                                   {"excluded", checks.size() - checked},
                                   {"failed", failed},
                                   {"tolerance", eval_tolerance}});
                return failed == 0 ? 0 : 1;
            }
            if (eval_verdicts.empty() || eval_gold.empty()) {
                throw usage("eval needs --verdicts and --gold, or --fixture");
            }
            std::vector<classify::Verdict> verdicts;
            for (const auto& row : util::read_jsonl(eval_verdicts)) {
                verdicts.push_back(classify::verdict_from_json(row));
            }
            const auto gold = read_gold(eval_gold);
            MotifCategories cats;
            if (!eval_cells.empty()) {
                cats = read_cells(eval_cells);
            } else {
                cats.conceptual = index_conceptual(project().index());
                cats.expression = derive_motif_expression(gold);
            }
            metrics::PairLabels labels;
            metrics::PairComplexity expression;
            for (const auto& g : gold) {
                labels[g.pair()] = g.label;
                if (g.label == Label::Positive && g.expression) {
                    expression[g.pair()] = *g.expression;
                } else if (const auto it = cats.expression.find(g.motif_id); it != cats.expression.end()) {
                    expression[g.pair()] = it->second;
                }
            }
            auto method_id = eval_method_id;
            if (method_id.empty() && !verdicts.empty()) {
                method_id = std::string(classify::to_string(verdicts.front().method));
            }
            const auto report = metrics::grid_report(method_id, verdicts, labels, expression, cats.conceptual);
            if (eval_table) {
                output().write(report.render_table());
            } else {
                auto doc = report.to_json();
                if (!config_path.empty()) {
                    doc["config"] = project().config().echo();
                }
                output().json_doc(doc);
            }
            return 0;
        };
    });

    // split
    auto* split_cmd = app.add_subcommand("split", "motif-disjoint train/val/test split");
    std::string split_cells;
    std::string split_gold;
    std::string split_targets;
    std::optional<std::uint64_t> split_seed;
    split_cmd->add_option("--cells", split_cells, "CSV motif_id,conceptual,expression");
    split_cmd->add_option("--gold", split_gold, "gold JSONL (with the index for conceptual categories)");
    split_cmd->add_option("--targets", split_targets, "CSV conceptual,expression,train,val,test");
    split_cmd->add_option("--seed", split_seed, "seed (default: seeds.split)");
    split_cmd->callback([&] {
        action = [&] {
            MotifCategories cats;
            if (!split_cells.empty()) {
                cats = read_cells(split_cells);
            } else if (!split_gold.empty()) {
                cats.conceptual = index_conceptual(project().index());
                cats.expression = derive_motif_expression(read_gold(split_gold));
            } else {
                throw usage("split needs --cells or --gold");
            }
            std::vector<metrics::MotifCell> motifs;
            for (const auto& [id, e] : cats.expression) {
                const auto c = cats.conceptual.find(id);
                if (c == cats.conceptual.end()) {
                    throw Error("metrics", Errc::MissingLabel, "no conceptual category for motif " + id);
                }
                motifs.push_back({id, c->second, e});
            }
            const auto targets = split_targets.empty() ? metrics::published_split_targets() : read_targets(split_targets);
            const auto seed = split_seed ? *split_seed : (config_path.empty() ? 0 : project().config().split_seed);
            output().json_doc(metrics::to_json(metrics::split_by_motif(motifs, targets, seed)));
            return 0;
        };
    });

    // resample
    auto* resample_cmd = app.add_subcommand("resample", "balance negatives to positives per motif (JSONL)");
    std::string resample_gold;
    std::optional<std::uint64_t> resample_seed;
    resample_cmd->add_option("--gold", resample_gold, "gold JSONL")->required();
    resample_cmd->add_option("--seed", resample_seed, "seed (default: seeds.resample)");
    resample_cmd->callback([&] {
        action = [&] {
            const auto seed =
                resample_seed ? *resample_seed : (config_path.empty() ? 0 : project().config().resample_seed);
            std::vector<json> rows;
            for (const auto& p : metrics::resample_balanced(read_gold(resample_gold), seed)) {
                rows.push_back(gold_row(p));
            }
            output().jsonl(rows);
            return 0;
        };
    });

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "run the REST service");
    std::optional<int> serve_port;
    std::optional<std::string> serve_host;
    serve_cmd->add_option("--port", serve_port, "port (default: service.port)");
    serve_cmd->add_option("--host", serve_host, "host (default: service.host)");
    serve_cmd->callback([&] {
        action = [&] {
            auto& p = project();
            auto shared = std::shared_ptr<Project>(std::move(lazy_project));
            ServiceOptions opts;
            opts.bearer_token = p.config().service_token;
            opts.project = shared;
            Service service(shared->store(), opts);
            const auto port = service.bind(serve_host.value_or(shared->config().service_host),
                                           serve_port.value_or(shared->config().service_port));
            err << json{{"listening", port}}.dump() << "\n";
            service.run();
            return 0;
        };
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << json{{"error", {{"code", "USAGE"}, {"module", kModule}, {"message", e.what()}}}}.dump() << "\n";
        return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
    }
    try {
        return action ? action() : 0;
    } catch (const Error& e) {
        err << error_json(e).dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << json{{"error", {{"code", "INTERNAL"}, {"module", kModule}, {"message", e.what()}}}}.dump() << "\n";
        return 1;
    }
}

} // namespace motifidx::gateway
