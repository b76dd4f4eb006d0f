#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "perfest/cli.hpp"

using namespace perfest;
namespace fs = std::filesystem;
using Catch::Approx;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    std::string str(const std::string& rel = "") const { return (path / rel).string(); }
};

int run_cli(const std::vector<std::string>& args, std::string* out = nullptr) {
    std::ostringstream log, err;
    const int code = cli::run(args, log, err);
    if (out) *out = log.str() + err.str();
    return code;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

std::string shift_spec_json(std::uint64_t seed, double temperature, double shift,
                            std::size_t n_ref, std::size_t n_prod) {
    std::ostringstream ss;
    ss << "{\n"
       << "  \"n_features\": 2,\n"
       << "  \"concept_coef\": [1.5, -1.0],\n"
       << "  \"shift\": [" << shift << ", 0.0],\n"
       << "  \"temperature\": " << temperature << ",\n"
       << "  \"n_ref\": " << n_ref << ",\n"
       << "  \"n_prod\": " << n_prod << ",\n"
       << "  \"seed\": " << seed << "\n"
       << "}\n";
    return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) rows.push_back(detail::split_csv_line(line));
    return rows;
}

}  // namespace

TEST_CASE("synth writes a reproducible dataset pair") {
    const TempDir dir("perfest_cli_synth");
    write_file(dir.path / "spec.json", shift_spec_json(3, 2.0, 0.0, 400, 300));

    REQUIRE(run_cli({"synth", "--spec", dir.str("spec.json"), "--out", dir.str("a")}) == 0);
    for (const char* f : {"reference.csv", "production.csv", "schema.json",
                          "oracle_reference.csv", "oracle_production.csv", "manifest.json"})
        REQUIRE(fs::exists(dir.path / "a" / f));

    REQUIRE(run_cli({"synth", "--spec", dir.str("spec.json"), "--out", dir.str("b")}) == 0);
    CHECK(read_file(dir.path / "a/reference.csv") == read_file(dir.path / "b/reference.csv"));
    CHECK(read_file(dir.path / "a/production.csv") == read_file(dir.path / "b/production.csv"));

    SECTION("the generated pair loads back under its own schema") {
        const DatasetSchema schema = cli::load_schema(dir.path / "a/schema.json");
        const ScoredDataset ref =
            load_dataset(dir.path / "a/reference.csv", schema, Role::reference);
        CHECK(ref.n_rows() == 400);
        CHECK(ref.has_labels());
    }
    SECTION("temperature detaches oracle probabilities from scores") {
        const auto oracle = parse_csv(read_file(dir.path / "a/oracle_reference.csv"));
        const auto data = parse_csv(read_file(dir.path / "a/reference.csv"));
        REQUIRE(oracle.size() == 401);
        bool differ = false;
        for (std::size_t i = 1; i < 20; ++i)
            if (oracle[i][1] != data[i][2]) differ = true;  // column 2 is the score
        CHECK(differ);
    }
}

TEST_CASE("synth input validation") {
    const TempDir dir("perfest_cli_synth_bad");
    SECTION("missing spec file") {
        CHECK(run_cli({"synth", "--spec", dir.str("none.json"), "--out", dir.str("out")}) ==
              cli::exit_code::io);
    }
    SECTION("invalid spec") {
        write_file(dir.path / "spec.json", "{\"temperature\": -1}");
        CHECK(run_cli({"synth", "--spec", dir.str("spec.json"), "--out", dir.str("out")}) ==
              cli::exit_code::validation);
    }
    SECTION("unknown subcommand") {
        CHECK(run_cli({"frobnicate"}) == cli::exit_code::validation);
    }
}

TEST_CASE("validate applies the admission filters") {
    const TempDir dir("perfest_cli_validate");

    SECTION("healthy case is accepted") {
        write_file(dir.path / "spec.json", shift_spec_json(5, 1.0, 0.0, 2000, 1500));
        REQUIRE(run_cli({"synth", "--spec", dir.str("spec.json"), "--out", dir.str("d")}) == 0);
        std::string out;
        const int code = run_cli({"validate", "--reference", dir.str("d/reference.csv"),
                                  "--production", dir.str("d/production.csv"), "--schema",
                                  dir.str("d/schema.json"), "--chunk-size", "500", "--n-boot",
                                  "50"},
                                 &out);
        CHECK(code == 0);
        CHECK(out.find("accept") != std::string::npos);
    }
    SECTION("short reference is rejected with the chunk-count reason") {
        write_file(dir.path / "spec.json", shift_spec_json(5, 1.0, 0.0, 5000, 2000));
        REQUIRE(run_cli({"synth", "--spec", dir.str("spec.json"), "--out", dir.str("d")}) == 0);
        std::string out;
        const int code = run_cli({"validate", "--reference", dir.str("d/reference.csv"),
                                  "--production", dir.str("d/production.csv"), "--schema",
                                  dir.str("d/schema.json"), "--chunk-size", "2000", "--n-boot",
                                  "50"},
                                 &out);
        CHECK(code == cli::exit_code::validation);
        CHECK(out.find("fewer than 3 chunks") != std::string::npos);
    }
    SECTION("malformed csv fails with a nonzero exit") {
        write_file(dir.path / "bad.csv", "f1,f2,score,prediction,label\n1.0,2.0,not_a_number\n");
        write_file(dir.path / "schema.json",
                   R"({"feature_columns":["f1","f2"],"score_column":"score",)"
                   R"("prediction_column":"prediction","label_column":"label"})");
        const int code = run_cli({"validate", "--reference", dir.str("bad.csv"), "--production",
                                  dir.str("bad.csv"), "--schema", dir.str("schema.json")});
        CHECK(code == cli::exit_code::validation);
    }
    SECTION("missing file maps to the io exit code") {
        write_file(dir.path / "schema.json",
                   R"({"feature_columns":["f1"],"score_column":"score",)"
                   R"("prediction_column":"prediction","label_column":"label"})");
        const int code = run_cli({"validate", "--reference", dir.str("none.csv"), "--production",
                                  dir.str("none.csv"), "--schema", dir.str("schema.json")});
        CHECK(code == cli::exit_code::io);
    }
}

TEST_CASE("estimate emits per-chunk records") {
    const TempDir dir("perfest_cli_estimate");
    write_file(dir.path / "spec.json", shift_spec_json(7, 1.5, 0.6, 2000, 1600));
    REQUIRE(run_cli({"synth", "--spec", dir.str("spec.json"), "--out", dir.str("d")}) == 0);

    const std::vector<std::string> base = {
        "estimate",      "--reference", dir.str("d/reference.csv"),
        "--production",  dir.str("d/production.csv"),
        "--schema",      dir.str("d/schema.json"),
        "--chunk-size",  "400",
        "--seed",        "11",
        "--doc-resamples", "20",
        "--metrics",     "accuracy,auroc"};

    SECTION("labeled production includes the realized column") {
        auto args = base;
        args.insert(args.end(), {"--out", dir.str("out1")});
        REQUIRE(run_cli(args) == 0);
        const auto rows = parse_csv(read_file(dir.path / "out1/estimates.csv"));
        REQUIRE(rows.size() > 1);
        const std::vector<std::string> header = {"chunk_index", "chunk_start", "metric",
                                                 "method",      "estimate",    "realized",
                                                 "flags"};
        CHECK(rows[0] == header);
        // 4 chunks x 2 metrics x 7 methods
        CHECK(rows.size() == 1 + 4 * 2 * 7);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            REQUIRE(!rows[i][4].empty());
            REQUIRE(!rows[i][5].empty());
        }
    }
    SECTION("unlabeled production omits the realized column") {
        // rewrite the production file without its label column
        const DatasetSchema schema = cli::load_schema(dir.path / "d/schema.json");
        const ScoredDataset prod =
            load_dataset(dir.path / "d/production.csv", schema, Role::production);
        DatasetSchema unlabeled = schema;
        unlabeled.label_column.reset();
        save_dataset(dir.path / "d/production_unlabeled.csv", prod, unlabeled);

        auto args = base;
        args[4] = dir.str("d/production_unlabeled.csv");
        args.insert(args.end(), {"--out", dir.str("out2")});
        REQUIRE(run_cli(args) == 0);
        const auto rows = parse_csv(read_file(dir.path / "out2/estimates.csv"));
        const std::vector<std::string> header = {"chunk_index", "chunk_start", "metric",
                                                 "method",      "estimate",    "flags"};
        CHECK(rows[0] == header);
        for (std::size_t i = 1; i < rows.size(); ++i) REQUIRE(!rows[i][4].empty());
    }
    SECTION("same seed gives byte-identical output, independent of worker count") {
        auto a = base;
        a.insert(a.end(), {"--out", dir.str("outA"), "--workers", "1"});
        auto b = base;
        b.insert(b.end(), {"--out", dir.str("outB"), "--workers", "3"});
        auto c = base;
        c.insert(c.end(), {"--out", dir.str("outC"), "--workers", "3"});
        REQUIRE(run_cli(a) == 0);
        REQUIRE(run_cli(b) == 0);
        REQUIRE(run_cli(c) == 0);
        const std::string ea = read_file(dir.path / "outA/estimates.csv");
        CHECK(ea == read_file(dir.path / "outB/estimates.csv"));
        CHECK(read_file(dir.path / "outB/estimates.csv") ==
              read_file(dir.path / "outC/estimates.csv"));
        CHECK(!ea.empty());
    }
}

TEST_CASE("evaluate aggregates scaled errors") {
    const TempDir dir("perfest_cli_evaluate");
    write_file(dir.path / "spec.json", shift_spec_json(13, 1.4, 0.5, 2500, 2000));
    REQUIRE(run_cli({"synth", "--spec", dir.str("spec.json"), "--out", dir.str("d")}) == 0);

    const std::vector<std::string> common = {
        "--reference",  dir.str("d/reference.csv"),
        "--production", dir.str("d/production.csv"),
        "--schema",     dir.str("d/schema.json"),
        "--chunk-size", "500",
        "--seed",       "3",
        "--n-boot",     "60",
        "--doc-resamples", "20",
        "--metrics",    "accuracy,auroc",
        "--methods",    "pape,cbpe,test_set"};

    std::vector<std::string> eval_args = {"evaluate"};
    eval_args.insert(eval_args.end(), common.begin(), common.end());
    eval_args.insert(eval_args.end(), {"--out", dir.str("eval")});
    REQUIRE(run_cli(eval_args) == 0);

    const auto agg = parse_csv(read_file(dir.path / "eval/aggregate.csv"));
    const std::vector<std::string> header = {"method", "metric", "maste", "rmsste", "n_points"};
    REQUIRE(agg[0] == header);
    REQUIRE(agg.size() == 1 + 3 * 2);  // 3 methods x 2 metrics

    SECTION("rmsste dominates maste in every row") {
        for (std::size_t i = 1; i < agg.size(); ++i) {
            const double m = std::stod(agg[i][2]);
            const double r = std::stod(agg[i][3]);
            CHECK(r >= m);
            CHECK(std::stoul(agg[i][4]) == 4);  // 4 production chunks
        }
    }
    SECTION("bucket counts sum to the points") {
        const auto buckets = parse_csv(read_file(dir.path / "eval/buckets.csv"));
        std::map<std::string, std::size_t> by_key;
        for (std::size_t i = 1; i < buckets.size(); ++i)
            by_key[buckets[i][0] + "/" + buckets[i][1]] += std::stoul(buckets[i][4]);
        for (const auto& [key, total] : by_key) CHECK(total == 4);
    }
    SECTION("aggregates match a hand recomputation from the emitted records") {
        std::vector<std::string> est_args = {"estimate"};
        est_args.insert(est_args.end(), common.begin(), common.end());
        est_args.insert(est_args.end(), {"--out", dir.str("est")});
        REQUIRE(run_cli(est_args) == 0);

        // identical estimation records from both commands
        CHECK(read_file(dir.path / "est/estimates.csv") ==
              read_file(dir.path / "eval/estimates.csv"));

        // recompute MASTE for pape/accuracy from the records plus the SE table
        const auto se_rows = parse_csv(read_file(dir.path / "eval/se.csv"));
        double se_acc = 0.0;
        for (std::size_t i = 1; i < se_rows.size(); ++i)
            if (se_rows[i][1] == "accuracy") se_acc = std::stod(se_rows[i][2]);
        REQUIRE(se_acc > 0.0);

        const auto est_rows = parse_csv(read_file(dir.path / "est/estimates.csv"));
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 1; i < est_rows.size(); ++i) {
            if (est_rows[i][2] != "accuracy" || est_rows[i][3] != "pape") continue;
            sum += std::abs(std::stod(est_rows[i][5]) - std::stod(est_rows[i][4])) / se_acc;
            ++n;
        }
        const double maste_by_hand = sum / static_cast<double>(n);
        for (std::size_t i = 1; i < agg.size(); ++i)
            if (agg[i][0] == "pape" && agg[i][1] == "accuracy")
                CHECK(std::stod(agg[i][2]) == Approx(maste_by_hand).margin(1e-12));
    }
    SECTION("evaluate refuses unlabeled production") {
        const DatasetSchema schema = cli::load_schema(dir.path / "d/schema.json");
        const ScoredDataset prod =
            load_dataset(dir.path / "d/production.csv", schema, Role::production);
        DatasetSchema unlabeled = schema;
        unlabeled.label_column.reset();
        save_dataset(dir.path / "d/production_unlabeled.csv", prod, unlabeled);
        auto args = eval_args;
        args[2] = dir.str("d/production_unlabeled.csv");
        args[args.size() - 1] = dir.str("eval2");
        CHECK(run_cli(args) == cli::exit_code::validation);
    }
}

TEST_CASE("evaluate skips a case whose standard error is undefined") {
    const TempDir dir("perfest_cli_se_undef");
    // single-class labels: AUROC is undefined on every bootstrap resample
    std::string csv = "f1,score,prediction,label\n";
    for (int i = 0; i < 800; ++i)
        csv += std::to_string(i % 10) + ",0." + std::to_string(1 + i % 8) + "," +
               std::to_string(i % 2) + ",1\n";
    write_file(dir.path / "data.csv", csv);
    write_file(dir.path / "schema.json",
               R"({"feature_columns":["f1"],"score_column":"score",)"
               R"("prediction_column":"prediction","label_column":"label"})");

    std::string out;
    const int code = run_cli({"evaluate", "--reference", dir.str("data.csv"), "--production",
                              dir.str("data.csv"), "--schema", dir.str("schema.json"),
                              "--chunk-size", "200", "--n-boot", "50", "--metrics", "auroc",
                              "--out", dir.str("out")},
                             &out);
    CHECK(code == cli::exit_code::validation);
    CHECK(read_file(dir.path / "out/audit.txt").find("skipped") != std::string::npos);
}

TEST_CASE("sweep emits one row per size and method") {
    const TempDir dir("perfest_cli_sweep");
    write_file(dir.path / "spec.json", shift_spec_json(17, 1.0, 0.0, 1500, 2500));
    REQUIRE(run_cli({"synth", "--spec", dir.str("spec.json"), "--out", dir.str("d")}) == 0);

    REQUIRE(run_cli({"sweep", "--reference", dir.str("d/reference.csv"), "--production",
                     dir.str("d/production.csv"), "--schema", dir.str("d/schema.json"),
                     "--metrics", "accuracy", "--methods", "test_set,atc", "--sizes",
                     "200,500,5000", "--sweep-step", "250", "--seed", "9", "--out",
                     dir.str("out")}) == 0);

    const auto rows = parse_csv(read_file(dir.path / "out/sweep.csv"));
    const std::vector<std::string> header = {"metric", "size",    "method", "mae",
                                             "n_chunks", "skipped", "reason"};
    REQUIRE(rows[0] == header);
    std::size_t skipped = 0, data_rows = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i][5] == "1") {
            ++skipped;
            CHECK(rows[i][1] == "5000");  // the production stream has 2500 rows
        } else {
            ++data_rows;
            CHECK(!rows[i][3].empty());
        }
    }
    CHECK(skipped == 1);
    CHECK(data_rows == 2 * 2);  // two usable sizes x two methods
}

TEST_CASE("config file provides defaults and flags override") {
    const TempDir dir("perfest_cli_config");
    write_file(dir.path / "spec.json", shift_spec_json(23, 1.0, 0.0, 1200, 900));
    REQUIRE(run_cli({"synth", "--spec", dir.str("spec.json"), "--out", dir.str("d")}) == 0);

    std::ostringstream config;
    config << "{\n"
           << "  \"reference\": \"" << dir.str("d/reference.csv") << "\",\n"
           << "  \"production\": \"" << dir.str("d/production.csv") << "\",\n"
           << "  \"schema\": \"" << dir.str("d/schema.json") << "\",\n"
           << "  \"chunk_size\": 300,\n"
           << "  \"metrics\": [\"accuracy\"],\n"
           << "  \"methods\": [\"test_set\"],\n"
           << "  \"seed\": 4,\n"
           << "  \"out\": \"" << dir.str("from_config") << "\"\n"
           << "}\n";
    write_file(dir.path / "config.json", config.str());

    REQUIRE(run_cli({"--config", dir.str("config.json"), "estimate"}) == 0);
    const auto rows1 = parse_csv(read_file(dir.path / "from_config/estimates.csv"));
    CHECK(rows1.size() == 1 + 3 * 1 * 1);  // 3 chunks of 300 in 900 production rows

    // a flag overrides the config value
    REQUIRE(run_cli({"--config", dir.str("config.json"), "estimate", "--chunk-size", "450",
                     "--out", dir.str("flag_wins")}) == 0);
    const auto rows2 = parse_csv(read_file(dir.path / "flag_wins/estimates.csv"));
    CHECK(rows2.size() == 1 + 2 * 1 * 1);  // 2 chunks of 450

    // the config flag is accepted after the subcommand as well
    REQUIRE(run_cli({"estimate", "--config", dir.str("config.json"), "--out",
                     dir.str("after_sub")}) == 0);
    CHECK(read_file(dir.path / "after_sub/estimates.csv") ==
          read_file(dir.path / "from_config/estimates.csv"));
}
