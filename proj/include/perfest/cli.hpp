#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "perfest/dataset.hpp"
#include "perfest/errors.hpp"
#include "perfest/estimators.hpp"
#include "perfest/evaluation.hpp"
#include "perfest/parallel.hpp"
#include "perfest/synthetic.hpp"

namespace perfest::cli {

inline constexpr const char* kVersion = "0.1.0";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int validation = 1;
inline constexpr int io = 2;
inline constexpr int internal = 3;
}  // namespace exit_code

struct RunConfig {
    std::string reference_path;
    std::string production_path;
    std::string schema_path;
    std::string spec_path;
    std::string out_dir;
    std::size_t chunk_size = 2000;
    std::size_t step = 0;  // 0 means "equal to chunk_size"
    std::vector<std::string> metrics = {"accuracy", "auroc", "f1"};
    std::vector<std::string> methods = {"pape", "cbpe", "iw", "atc", "doc", "rt_mod", "test_set"};
    std::uint64_t seed = 0;
    double weight_clip = 50.0;
    int doc_resamples = 50;
    int n_boot = 500;
    std::size_t workers = 0;  // 0 means "available parallelism"
    std::vector<std::size_t> sweep_sizes = {100, 200, 500, 1000, 2000, 5000};
    std::size_t sweep_step = 1000;

    std::size_t effective_step() const { return step == 0 ? chunk_size : step; }

    std::vector<MetricKind> metric_kinds() const {
        std::vector<MetricKind> out;
        for (const std::string& m : metrics) out.push_back(parse_metric_kind(m));
        if (out.empty()) throw ValidationError("at least one metric required");
        return out;
    }
    std::vector<Method> method_list() const {
        std::vector<Method> out;
        for (const std::string& m : methods) out.push_back(parse_method(m));
        if (out.empty()) throw ValidationError("at least one method required");
        return out;
    }
    EstimatorConfig estimator_config() const {
        EstimatorConfig cfg;
        cfg.seed = seed;
        cfg.weight_clip = weight_clip;
        cfg.chunk_size = chunk_size;
        cfg.doc_resamples = doc_resamples;
        cfg.doc_sample_size = chunk_size;
        return cfg;
    }
};

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("invalid JSON in " + path.string() + ": " + e.what());
    }
    return j;
}

inline DatasetSchema load_schema(const std::filesystem::path& path) {
    const nlohmann::json j = read_json_file(path);
    DatasetSchema schema;
    try {
        schema.feature_columns = j.at("feature_columns").get<std::vector<std::string>>();
        schema.score_column = j.at("score_column").get<std::string>();
        schema.prediction_column = j.at("prediction_column").get<std::string>();
        if (j.contains("label_column") && !j["label_column"].is_null())
            schema.label_column = j["label_column"].get<std::string>();
        else
            schema.label_column.reset();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("invalid schema file " + path.string() + ": " + e.what());
    }
    schema.validate();
    return schema;
}

inline void save_schema(const std::filesystem::path& path, const DatasetSchema& schema) {
    nlohmann::json j;
    j["feature_columns"] = schema.feature_columns;
    j["score_column"] = schema.score_column;
    j["prediction_column"] = schema.prediction_column;
    if (schema.label_column)
        j["label_column"] = *schema.label_column;
    else
        j["label_column"] = nullptr;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write file: " + path.string());
    out << j.dump(2) << "\n";
}

inline ShiftSpec load_shift_spec(const std::filesystem::path& path) {
    const nlohmann::json j = read_json_file(path);
    ShiftSpec spec;
    try {
        if (j.contains("n_features")) spec.n_features = j["n_features"].get<std::size_t>();
        auto opt_vec = [&](const char* key, std::vector<double>& out) {
            if (j.contains(key)) out = j[key].get<std::vector<double>>();
        };
        opt_vec("ref_mean", spec.ref_mean);
        opt_vec("ref_std", spec.ref_std);
        opt_vec("shift", spec.shift);
        opt_vec("scale", spec.scale);
        opt_vec("concept_coef", spec.concept_coef);
        opt_vec("model_coef", spec.model_coef);
        if (j.contains("concept_intercept"))
            spec.concept_intercept = j["concept_intercept"].get<double>();
        if (j.contains("model_intercept"))
            spec.model_intercept = j["model_intercept"].get<double>();
        if (j.contains("temperature")) spec.temperature = j["temperature"].get<double>();
        if (j.contains("n_ref")) spec.n_ref = j["n_ref"].get<std::size_t>();
        if (j.contains("n_prod")) spec.n_prod = j["n_prod"].get<std::size_t>();
        if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("invalid shift spec " + path.string() + ": " + e.what());
    }
    spec.validate();
    return spec;
}

inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    const nlohmann::json j = read_json_file(path);
    try {
        if (j.contains("reference")) cfg.reference_path = j["reference"].get<std::string>();
        if (j.contains("production")) cfg.production_path = j["production"].get<std::string>();
        if (j.contains("schema")) cfg.schema_path = j["schema"].get<std::string>();
        if (j.contains("spec")) cfg.spec_path = j["spec"].get<std::string>();
        if (j.contains("out")) cfg.out_dir = j["out"].get<std::string>();
        if (j.contains("chunk_size")) cfg.chunk_size = j["chunk_size"].get<std::size_t>();
        if (j.contains("step")) cfg.step = j["step"].get<std::size_t>();
        if (j.contains("metrics")) cfg.metrics = j["metrics"].get<std::vector<std::string>>();
        if (j.contains("methods")) cfg.methods = j["methods"].get<std::vector<std::string>>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("weight_clip")) cfg.weight_clip = j["weight_clip"].get<double>();
        if (j.contains("doc_resamples")) cfg.doc_resamples = j["doc_resamples"].get<int>();
        if (j.contains("n_boot")) cfg.n_boot = j["n_boot"].get<int>();
        if (j.contains("workers")) cfg.workers = j["workers"].get<std::size_t>();
        if (j.contains("sweep_sizes"))
            cfg.sweep_sizes = j["sweep_sizes"].get<std::vector<std::size_t>>();
        if (j.contains("sweep_step")) cfg.sweep_step = j["sweep_step"].get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("invalid config file " + path.string() + ": " + e.what());
    }
}

inline nlohmann::json config_echo(const RunConfig& cfg) {
    nlohmann::json j;
    j["reference"] = cfg.reference_path;
    j["production"] = cfg.production_path;
    j["schema"] = cfg.schema_path;
    j["spec"] = cfg.spec_path;
    j["out"] = cfg.out_dir;
    j["chunk_size"] = cfg.chunk_size;
    j["step"] = cfg.effective_step();
    j["metrics"] = cfg.metrics;
    j["methods"] = cfg.methods;
    j["seed"] = cfg.seed;
    j["weight_clip"] = cfg.weight_clip;
    j["doc_resamples"] = cfg.doc_resamples;
    j["n_boot"] = cfg.n_boot;
    j["workers"] = cfg.workers;
    j["sweep_sizes"] = cfg.sweep_sizes;
    j["sweep_step"] = cfg.sweep_step;
    return j;
}

inline void write_manifest(const RunConfig& cfg, const std::string& command) {
    nlohmann::json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["seed"] = cfg.seed;
    j["config"] = config_echo(cfg);
    std::ofstream out(std::filesystem::path(cfg.out_dir) / "manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write manifest in " + cfg.out_dir);
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Output tables
// ---------------------------------------------------------------------------

inline std::string csv_double(double v) {
    if (!std::isfinite(v)) return "";
    return detail::format_double(v);
}

class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
        : out_(path, std::ios::binary), path_(path.string()) {
        if (!out_) throw IoError("cannot write file: " + path_);
        write_row(header);
    }

    void write_row(const std::vector<std::string>& fields) {
        std::string line;
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) line += ',';
            line += fields[i];
        }
        out_ << line << "\n";
        if (!out_) throw IoError("write failed: " + path_);
    }

  private:
    std::ofstream out_;
    std::string path_;
};

// ---------------------------------------------------------------------------
// Dataset loading with optional production labels
// ---------------------------------------------------------------------------

inline bool file_has_column(const std::filesystem::path& path, const std::string& column) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty file: " + path.string());
    const std::vector<std::string> header = detail::split_csv_line(line);
    return std::find(header.begin(), header.end(), column) != header.end();
}

inline ScoredDataset load_production(const std::filesystem::path& path, DatasetSchema schema) {
    if (schema.label_column && !file_has_column(path, *schema.label_column))
        schema.label_column.reset();  // unlabeled production stream
    return load_dataset(path, schema, Role::production);
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline void ensure_out_dir(const RunConfig& cfg) {
    if (cfg.out_dir.empty()) throw ValidationError("--out is required for this command");
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out_dir);
}

inline int cmd_synth(const RunConfig& cfg, std::ostream& log) {
    if (cfg.spec_path.empty()) throw ValidationError("--spec is required for synth");
    ensure_out_dir(cfg);
    const ShiftSpec spec = load_shift_spec(cfg.spec_path);
    const SyntheticPair pair = generate(spec);
    const DatasetSchema schema = synthetic_schema(spec.n_features);
    const std::filesystem::path out(cfg.out_dir);

    save_dataset(out / "reference.csv", pair.reference, schema);
    save_dataset(out / "production.csv", pair.production, schema);
    save_schema(out / "schema.json", schema);
    for (const auto& [name, probs] :
         {std::pair{"oracle_reference.csv", &pair.oracle.reference_true_prob},
          std::pair{"oracle_production.csv", &pair.oracle.production_true_prob}}) {
        CsvWriter w(out / name, {"row", "true_prob"});
        for (std::size_t i = 0; i < probs->size(); ++i)
            w.write_row({std::to_string(i), csv_double((*probs)[i])});
    }
    write_manifest(cfg, "synth");
    log << "wrote " << pair.reference.n_rows() << " reference and " << pair.production.n_rows()
        << " production rows to " << cfg.out_dir << "\n";
    return exit_code::ok;
}

struct LoadedCase {
    EvaluationCase eval;
    DatasetSchema schema;
};

inline LoadedCase load_case(const RunConfig& cfg, bool compute_se) {
    if (cfg.reference_path.empty() || cfg.production_path.empty() || cfg.schema_path.empty())
        throw ValidationError("--reference, --production and --schema are required");
    LoadedCase lc;
    lc.schema = load_schema(cfg.schema_path);
    lc.eval.id = std::filesystem::path(cfg.production_path).stem().string();
    lc.eval.reference = load_dataset(cfg.reference_path, lc.schema, Role::reference);
    lc.eval.production = load_production(cfg.production_path, lc.schema);
    if (compute_se) {
        for (MetricKind kind : cfg.metric_kinds()) {
            lc.eval.se[kind] = bootstrap_se(lc.eval.reference, kind, cfg.chunk_size, cfg.n_boot,
                                            cfg.seed);
        }
    }
    lc.eval.chunk_count =
        split_chunks(lc.eval.production, cfg.chunk_size, cfg.effective_step()).size();
    return lc;
}

inline int cmd_validate(const RunConfig& cfg, std::ostream& log) {
    FilterDecision decision;
    try {
        const LoadedCase lc = load_case(cfg, /*compute_se=*/true);
        decision = filter_case(lc.eval, cfg.chunk_size);
    } catch (const SeUndefinedError& e) {
        decision = {false, e.what()};
    }
    if (!cfg.out_dir.empty()) {
        ensure_out_dir(cfg);
        CsvWriter w(std::filesystem::path(cfg.out_dir) / "filter_report.csv",
                    {"accepted", "reason"});
        w.write_row({decision.accepted ? "1" : "0", decision.reason});
        write_manifest(cfg, "validate");
    }
    if (decision.accepted) {
        log << "accept\n";
        return exit_code::ok;
    }
    log << "reject: " << decision.reason << "\n";
    return exit_code::validation;
}

// Shared by estimate and evaluate: per-chunk records in deterministic order.
struct EstimationRun {
    std::vector<Chunk> chunks;
    std::vector<std::vector<ChunkEstimate>> records;   // per chunk
    std::vector<std::map<MetricKind, double>> realized;  // per chunk; empty when unlabeled
    EstimatorSuite suite;
};

inline EstimationRun run_estimation(const RunConfig& cfg, const EvaluationCase& eval) {
    EstimationRun run{.chunks = {},
                      .records = {},
                      .realized = {},
                      .suite = EstimatorSuite::fit(eval.reference, cfg.metric_kinds(),
                                                   cfg.estimator_config(), cfg.method_list())};
    run.chunks = split_chunks(eval.production, cfg.chunk_size, cfg.effective_step());
    run.records.resize(run.chunks.size());
    run.realized.resize(run.chunks.size());
    const std::vector<Method> methods = cfg.method_list();
    const bool labeled = eval.production.has_labels();

    parallel_for(run.chunks.size(), cfg.workers, [&](std::size_t i) {
        const ChunkView view(eval.production, run.chunks[i]);
        run.records[i] = run.suite.estimate_chunk(view, methods);
        if (labeled) {
            for (MetricKind kind : run.suite.kinds()) {
                try {
                    run.realized[i][kind] = realized_metric(kind, view);
                } catch (const UndefinedMetricError&) {
                    // leave the realized cell empty for this chunk
                }
            }
        }
    });
    return run;
}

inline void write_estimates_csv(const std::filesystem::path& path, const EstimationRun& run,
                                bool labeled) {
    std::vector<std::string> header = {"chunk_index", "chunk_start", "metric", "method",
                                       "estimate"};
    if (labeled) header.push_back("realized");
    header.push_back("flags");
    CsvWriter w(path, header);
    for (std::size_t i = 0; i < run.chunks.size(); ++i) {
        for (const ChunkEstimate& rec : run.records[i]) {
            std::vector<std::string> row = {std::to_string(i), std::to_string(run.chunks[i].start),
                                            to_string(rec.kind), to_string(rec.method),
                                            csv_double(rec.estimate.value)};
            if (labeled) {
                const auto it = run.realized[i].find(rec.kind);
                row.push_back(it != run.realized[i].end() ? csv_double(it->second) : "");
            }
            row.push_back(flags_to_string(rec.estimate.flags));
            w.write_row(row);
        }
    }
}

inline int cmd_estimate(const RunConfig& cfg, std::ostream& log) {
    ensure_out_dir(cfg);
    const LoadedCase lc = load_case(cfg, /*compute_se=*/false);
    const EstimationRun run = run_estimation(cfg, lc.eval);
    write_estimates_csv(std::filesystem::path(cfg.out_dir) / "estimates.csv", run,
                        lc.eval.production.has_labels());
    write_manifest(cfg, "estimate");
    log << "estimated " << run.chunks.size() << " chunks\n";
    return exit_code::ok;
}

inline void write_audit(const RunConfig& cfg, const std::string& line) {
    std::ofstream out(std::filesystem::path(cfg.out_dir) / "audit.txt",
                      std::ios::binary | std::ios::app);
    out << line << "\n";
}

inline int cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
    ensure_out_dir(cfg);
    std::filesystem::remove(std::filesystem::path(cfg.out_dir) / "audit.txt");
    LoadedCase lc;
    try {
        lc = load_case(cfg, /*compute_se=*/true);
    } catch (const SeUndefinedError& e) {
        write_audit(cfg, std::string("case skipped: ") + e.what());
        log << "case skipped: " << e.what() << "\n";
        return exit_code::validation;
    }
    if (!lc.eval.production.has_labels())
        throw ValidationError("evaluate requires labeled production data");

    const FilterDecision decision = filter_case(lc.eval, cfg.chunk_size);
    if (!decision.accepted) {
        write_audit(cfg, "case rejected: " + decision.reason);
        log << "reject: " << decision.reason << "\n";
        return exit_code::validation;
    }

    const EstimationRun run = run_estimation(cfg, lc.eval);
    const std::filesystem::path out(cfg.out_dir);
    write_estimates_csv(out / "estimates.csv", run, true);

    // assemble estimation points
    std::vector<EstimationPoint> points;
    for (std::size_t i = 0; i < run.chunks.size(); ++i) {
        for (MetricKind kind : run.suite.kinds()) {
            const auto realized_it = run.realized[i].find(kind);
            if (realized_it == run.realized[i].end()) continue;
            EstimationPoint p;
            p.case_id = lc.eval.id;
            p.chunk_index = i;
            p.kind = kind;
            p.realized = realized_it->second;
            p.reference_value = run.suite.reference_metric(kind);
            p.se = lc.eval.se.at(kind);
            for (const ChunkEstimate& rec : run.records[i])
                if (rec.kind == kind && rec.error.empty() && std::isfinite(rec.estimate.value))
                    p.estimates[rec.method] = rec.estimate.value;
            points.push_back(std::move(p));
        }
    }

    const std::vector<Method> methods = cfg.method_list();
    const std::vector<MetricKind> kinds = cfg.metric_kinds();
    const EvaluationReport report = aggregate_report(points, methods, kinds);

    {
        CsvWriter w(out / "aggregate.csv", {"method", "metric", "maste", "rmsste", "n_points"});
        for (const MethodMetricScore& s : report.scores)
            w.write_row({to_string(s.method), to_string(s.kind), csv_double(s.maste),
                         csv_double(s.rmsste), std::to_string(s.n_points)});
    }
    {
        CsvWriter w(out / "buckets.csv", {"method", "metric", "center", "maste", "n_chunks"});
        for (const BucketRow& b : report.buckets)
            w.write_row({to_string(b.method), to_string(b.kind), csv_double(b.bucket.center),
                         csv_double(b.bucket.maste), std::to_string(b.bucket.count)});
    }
    {
        CsvWriter w(out / "se.csv", {"case", "metric", "se"});
        for (const auto& [kind, se] : lc.eval.se)
            w.write_row({lc.eval.id, to_string(kind), csv_double(se)});
    }
    write_manifest(cfg, "evaluate");
    log << "evaluated " << run.chunks.size() << " chunks, " << points.size() << " points\n";
    return exit_code::ok;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
    ensure_out_dir(cfg);
    const LoadedCase lc = load_case(cfg, /*compute_se=*/false);
    if (!lc.eval.production.has_labels())
        throw ValidationError("sweep requires labeled production data");

    const std::vector<Method> methods = cfg.method_list();
    const std::vector<MetricKind> kinds = cfg.metric_kinds();

    CsvWriter w(std::filesystem::path(cfg.out_dir) / "sweep.csv",
                {"metric", "size", "method", "mae", "n_chunks", "skipped", "reason"});
    for (MetricKind kind : kinds) {
        std::vector<SweepRow> rows = sample_size_sweep(lc.eval, kind, cfg.sweep_sizes,
                                                       cfg.sweep_step, methods, cfg.seed,
                                                       cfg.estimator_config());
        for (const SweepRow& row : rows) {
            if (row.skipped) {
                w.write_row({to_string(kind), std::to_string(row.size), "", "", "0", "1",
                             row.reason});
                continue;
            }
            for (Method m : methods) {
                const auto it = row.mae.find(m);
                w.write_row({to_string(kind), std::to_string(row.size), to_string(m),
                             it != row.mae.end() ? csv_double(it->second) : "",
                             std::to_string(row.n_chunks), "0", ""});
            }
        }
    }
    write_manifest(cfg, "sweep");
    log << "sweep complete\n";
    return exit_code::ok;
}

// ---------------------------------------------------------------------------
// Argument parsing and dispatch
// ---------------------------------------------------------------------------

inline void add_common_options(CLI::App* sub, RunConfig& cfg) {
    sub->add_option("--reference", cfg.reference_path, "Reference (labeled) CSV");
    sub->add_option("--production", cfg.production_path, "Production CSV");
    sub->add_option("--schema", cfg.schema_path, "Dataset schema JSON");
    sub->add_option("--out", cfg.out_dir, "Output directory");
    sub->add_option("--chunk-size", cfg.chunk_size, "Observations per chunk");
    sub->add_option("--step", cfg.step, "Chunk start spacing (default: chunk size)");
    sub->add_option("--metrics", cfg.metrics, "Metric kinds")->delimiter(',');
    sub->add_option("--methods", cfg.methods, "Estimation methods")->delimiter(',');
    sub->add_option("--seed", cfg.seed, "Random seed");
    sub->add_option("--weight-clip", cfg.weight_clip, "Density-ratio weight cap");
    sub->add_option("--doc-resamples", cfg.doc_resamples, "Resamples for the confidence fit");
    sub->add_option("--n-boot", cfg.n_boot, "Bootstrap resamples for standard errors");
    sub->add_option("--workers", cfg.workers, "Worker threads (0 = available parallelism)");
}

inline int run(const std::vector<std::string>& args, std::ostream& log = std::cout,
               std::ostream& err = std::cerr) {
    RunConfig cfg;

    // The config file provides defaults; command-line flags win.
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
        if (args[i] == "--config") {
            try {
                apply_config_file(cfg, args[i + 1]);
            } catch (const Error& e) {
                err << "error: " << e.what() << "\n";
                return dynamic_cast<const IoError*>(&e) ? exit_code::io : exit_code::validation;
            }
        }
    }

    CLI::App app{"Performance estimation for classifiers on unlabeled data under covariate shift"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file with defaults")->expected(1);

    CLI::App* validate = app.add_subcommand("validate", "Check a case against the admission filters");
    CLI::App* estimate = app.add_subcommand("estimate", "Estimate per-chunk performance");
    CLI::App* evaluate = app.add_subcommand("evaluate", "Compare estimates against realized performance");
    CLI::App* sweep = app.add_subcommand("sweep", "Mean absolute error across chunk sizes");
    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic reference/production pair");
    for (CLI::App* sub : {validate, estimate, evaluate, sweep, synth})
        sub->add_option("--config", config_path, "JSON config file with defaults")->expected(1);
    for (CLI::App* sub : {validate, estimate, evaluate, sweep}) add_common_options(sub, cfg);
    sweep->add_option("--sizes", cfg.sweep_sizes, "Chunk sizes to sweep")->delimiter(',');
    sweep->add_option("--sweep-step", cfg.sweep_step, "Chunk start spacing for the sweep");
    synth->add_option("--spec", cfg.spec_path, "Shift spec JSON");
    synth->add_option("--out", cfg.out_dir, "Output directory");

    // CLI11 consumes the argument vector back to front.
    std::vector<std::string> cli_args(args.rbegin(), args.rend());
    if (cli_args.empty()) cli_args = {"--help"};
    try {
        app.parse(cli_args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, log, err);
        return code == 0 ? exit_code::ok : exit_code::validation;
    }

    try {
        if (synth->parsed()) return cmd_synth(cfg, log);
        if (validate->parsed()) return cmd_validate(cfg, log);
        if (estimate->parsed()) return cmd_estimate(cfg, log);
        if (evaluate->parsed()) return cmd_evaluate(cfg, log);
        if (sweep->parsed()) return cmd_sweep(cfg, log);
        err << "error: no subcommand\n";
        return exit_code::validation;
    } catch (const IoError& e) {
        err << "io error: " << e.what() << "\n";
        return exit_code::io;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::validation;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return exit_code::internal;
    }
}

inline int run(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args);
}

}  // namespace perfest::cli
