#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "perfest/dataset.hpp"
#include "perfest/rng.hpp"

using namespace perfest;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

DatasetSchema simple_schema() {
    DatasetSchema s;
    s.feature_columns = {"f1"};
    s.score_column = "score";
    s.prediction_column = "pred";
    s.label_column = "label";
    return s;
}

ScoredDataset make_rows(std::size_t n, std::uint64_t seed = 5) {
    Rng rng(seed);
    ScoredDataset ds;
    ds.features = Matrix(n, 2);
    ds.scores.resize(n);
    ds.predictions.resize(n);
    ds.labels = std::vector<int>(n);
    for (std::size_t i = 0; i < n; ++i) {
        ds.features(i, 0) = rng.normal();
        ds.features(i, 1) = rng.normal();
        ds.scores[i] = rng.uniform();
        ds.predictions[i] = rng.bernoulli(0.5) ? 1 : 0;
        (*ds.labels)[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    ds.role = Role::production;
    return ds;
}

}  // namespace

TEST_CASE("load_dataset parses a small labeled file") {
    const auto path = write_temp("ds_basic.csv",
                                 "f1,score,pred,label\n"
                                 "1.5,0.9,1,1\n"
                                 "-0.25,0.1,0,0\n"
                                 "3.0,0.5,1,0\n");
    const ScoredDataset ds = load_dataset(path, simple_schema(), Role::reference);
    REQUIRE(ds.n_rows() == 3);
    CHECK(ds.features(0, 0) == 1.5);
    CHECK(ds.scores[1] == 0.1);
    CHECK(ds.predictions[2] == 1);
    CHECK((*ds.labels)[2] == 0);
    CHECK(ds.role == Role::reference);
}

TEST_CASE("load_dataset rejects out-of-range scores with the row index") {
    const auto path = write_temp("ds_badscore.csv",
                                 "f1,score,pred,label\n"
                                 "1.0,0.5,1,1\n"
                                 "2.0,1.2,0,0\n");
    try {
        load_dataset(path, simple_schema(), Role::reference);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("row 1") != std::string::npos);
    }
}

TEST_CASE("load_dataset reports missing schema columns") {
    const auto path = write_temp("ds_nopred.csv",
                                 "f1,score,label\n"
                                 "1.0,0.5,1\n");
    REQUIRE_THROWS_AS(load_dataset(path, simple_schema(), Role::reference), SchemaError);
    try {
        load_dataset(path, simple_schema(), Role::reference);
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("pred") != std::string::npos);
    }
}

TEST_CASE("load_dataset edge cases") {
    SECTION("empty file") {
        const auto path = write_temp("ds_empty.csv", "");
        REQUIRE_THROWS_AS(load_dataset(path, simple_schema(), Role::reference), ValidationError);
    }
    SECTION("header only") {
        const auto path = write_temp("ds_header.csv", "f1,score,pred,label\n");
        REQUIRE_THROWS_AS(load_dataset(path, simple_schema(), Role::reference), ValidationError);
    }
    SECTION("missing file") {
        REQUIRE_THROWS_AS(load_dataset("/nonexistent/x.csv", simple_schema(), Role::reference),
                          IoError);
    }
    SECTION("non-binary prediction") {
        const auto path = write_temp("ds_badpred.csv", "f1,score,pred,label\n1.0,0.5,2,1\n");
        REQUIRE_THROWS_AS(load_dataset(path, simple_schema(), Role::reference), ValidationError);
    }
    SECTION("reference requires a label column in the schema") {
        DatasetSchema s = simple_schema();
        s.label_column.reset();
        const auto path = write_temp("ds_nolabel.csv", "f1,score,pred\n1.0,0.5,1\n");
        REQUIRE_THROWS_AS(load_dataset(path, s, Role::reference), SchemaError);
        CHECK(load_dataset(path, s, Role::production).n_rows() == 1);
    }
}

TEST_CASE("split_chunks follows the windowing rules") {
    SECTION("disjoint chunks") {
        const ScoredDataset ds = make_rows(6000);
        const auto chunks = split_chunks(ds, 2000, 2000);
        REQUIRE(chunks.size() == 3);
        CHECK(chunks[0].start == 0);
        CHECK(chunks[1].start == 2000);
        CHECK(chunks[2].start == 4000);
        for (const Chunk& c : chunks) CHECK(c.size == 2000);
    }
    SECTION("overlapping windows") {
        const ScoredDataset ds = make_rows(5000);
        const auto chunks = split_chunks(ds, 2000, 1000);
        REQUIRE(chunks.size() == 4);
        CHECK(chunks[0].start == 0);
        CHECK(chunks[1].start == 1000);
        CHECK(chunks[2].start == 2000);
        CHECK(chunks[3].start == 3000);
    }
    SECTION("stream shorter than one chunk") {
        const ScoredDataset ds = make_rows(100);
        CHECK(split_chunks(ds, 2000, 1000).empty());
    }
    SECTION("invalid parameters") {
        const ScoredDataset ds = make_rows(10);
        REQUIRE_THROWS_AS(split_chunks(ds, 0, 1), ValidationError);
        REQUIRE_THROWS_AS(split_chunks(ds, 1, 0), ValidationError);
    }
}

TEST_CASE("disjoint chunks reproduce a prefix of the stream") {
    const ScoredDataset ds = make_rows(4321);
    const auto chunks = split_chunks(ds, 1000, 1000);
    REQUIRE(chunks.size() == 4);
    std::size_t row = 0;
    for (const Chunk& c : chunks) {
        const ChunkView view(ds, c);
        for (std::size_t i = 0; i < view.size(); ++i, ++row) {
            REQUIRE(view.scores()[i] == ds.scores[row]);
            REQUIRE(view.predictions()[i] == ds.predictions[row]);
            REQUIRE(view.features()(i, 0) == ds.features(row, 0));
        }
    }
    CHECK(row == 4000);
}

TEST_CASE("save then load round-trips every value exactly") {
    const ScoredDataset ds = make_rows(257, 99);
    DatasetSchema schema;
    schema.feature_columns = {"a", "b"};
    schema.score_column = "score";
    schema.prediction_column = "pred";
    schema.label_column = "label";

    const auto path = std::filesystem::temp_directory_path() / "ds_roundtrip.csv";
    save_dataset(path, ds, schema);
    const ScoredDataset back = load_dataset(path, schema, Role::production);

    REQUIRE(back.n_rows() == ds.n_rows());
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        REQUIRE(back.scores[i] == ds.scores[i]);
        REQUIRE(back.features(i, 0) == ds.features(i, 0));
        REQUIRE(back.features(i, 1) == ds.features(i, 1));
        REQUIRE(back.predictions[i] == ds.predictions[i]);
        REQUIRE((*back.labels)[i] == (*ds.labels)[i]);
    }
}
