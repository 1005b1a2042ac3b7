#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "dbn/csv.hpp"
#include "dbn/errors.hpp"
#include "dbn/model_io.hpp"
#include "dbn/sampling.hpp"
#include "dbn/report.hpp"
#include "dbn/rng.hpp"
#include "testutil.hpp"

using namespace dbn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("dbn_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const {
        return (path / name).string();
    }
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("csv ingestion splits sequences on blank lines") {
    TempDir dir;
    const std::string p = dir.file("d.csv");
    write_file(p, "A,B,C\nx,0,p\ny,1,q\n\nx,0,q\nx,1,p\ny,0,p\n");
    auto [data, dict] = ingest_csv(p, {});
    REQUIRE(data.sequences.size() == 2);
    CHECK(data.sequences[0].size() == 2);
    CHECK(data.sequences[1].size() == 3);
    CHECK(dict.columns[0].kind == ColumnDict::Kind::Symbol);
    CHECK(dict.columns[1].kind == ColumnDict::Kind::Index);
    // symbols are sorted: x -> 0, y -> 1
    CHECK(data.sequences[0][0][0] == 0);
    CHECK(data.sequences[0][1][0] == 1);
}

TEST_CASE("equal-frequency binning balances bucket occupancy") {
    TempDir dir;
    const std::string p = dir.file("cont.csv");
    std::string text = "V\n";
    Rng rng(91);
    std::vector<double> values;
    for (int i = 0; i < 700; ++i) values.push_back(rng.uniform(-5.0, 5.0));
    for (double v : values) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.6f\n", v);
        text += buf;
    }
    write_file(p, text);
    auto [data, dict] = ingest_csv(p, {7, {}});
    CHECK(dict.columns[0].kind == ColumnDict::Kind::Binned);
    CHECK(dict.columns[0].cardinality == 7);
    std::vector<int> occupancy(7, 0);
    for (const auto& slice : data.sequences[0]) ++occupancy[slice[0]];
    for (int b = 0; b < 7; ++b)
        CHECK(std::abs(occupancy[b] - 100) <= 1);
}

TEST_CASE("question marks become missing cells") {
    TempDir dir;
    const std::string p = dir.file("m.csv");
    write_file(p, "A,B\n0,1\n?,0\n1,?\n");
    auto [data, dict] = ingest_csv(p, {});
    CHECK(data.sequences[0][1][0] == kMissing);
    CHECK(data.sequences[0][1][1] == 0);
    CHECK(data.sequences[0][2][1] == kMissing);
}

TEST_CASE("mixed numeric and symbolic columns are rejected") {
    TempDir dir;
    const std::string p = dir.file("bad.csv");
    write_file(p, "A\n1\nx\n");
    CHECK_THROWS_AS(ingest_csv(p, {}), DataError);
}

TEST_CASE("parse errors carry the line number") {
    TempDir dir;
    const std::string p = dir.file("ragged.csv");
    write_file(p, "A,B\n0,1\n0\n");
    try {
        ingest_csv(p, {});
        FAIL("expected a parse error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
}

TEST_CASE("test data reuses the training dictionary") {
    TempDir dir;
    const std::string train = dir.file("train.csv");
    const std::string test = dir.file("test.csv");
    write_file(train, "A\nx\ny\nz\n");
    write_file(test, "A\nz\nx\n");
    auto [tr, dict] = ingest_csv(train, {});
    const Dataset te = ingest_csv_with(test, dict);
    CHECK(te.sequences[0][0][0] == 2);
    CHECK(te.sequences[0][1][0] == 0);

    const std::string bad = dir.file("bad.csv");
    write_file(bad, "A\nw\nx\n");
    CHECK_THROWS_AS(ingest_csv_with(bad, dict), DataError);
}

TEST_CASE("dataset csv round-trips through write and ingest") {
    Rng rng(92);
    const Dbn m = test::random_model(rng, 3, 2);
    Dataset d = sample_trajectories(m, 3, 20, 93);
    d.sequences[1][4][2] = kMissing;
    TempDir dir;
    const std::string p = dir.file("round.csv");
    write_csv(p, d);
    auto [back, dict] = ingest_csv(p, {});
    CHECK(back.sequences == d.sequences);
    CHECK(back.names == d.names);
}

TEST_CASE("dictionary json round-trips") {
    DataDict dict;
    dict.columns.push_back({"A", ColumnDict::Kind::Symbol, 3,
                            {"a", "b", "c"}, {}});
    dict.columns.push_back({"V", ColumnDict::Kind::Binned, 4,
                            {}, {-1.0, 0.0, 2.5}});
    dict.columns.push_back({"N", ColumnDict::Kind::Index, 5, {}, {}});
    const DataDict back = dict_from_json(dict_to_json(dict));
    REQUIRE(back.columns.size() == 3);
    CHECK(back.columns[0].symbols == dict.columns[0].symbols);
    CHECK(back.columns[1].edges == dict.columns[1].edges);
    CHECK(back.columns[2].cardinality == 5);
}

TEST_CASE("model files round-trip structurally and byte-identically") {
    Rng rng(94);
    Dbn m = test::random_model(rng, 4, 2, 1);
    m.variables[2].name = "weird \"name\"\t";
    TempDir dir;
    const std::string p = dir.file("model.json");
    save_model(p, m);
    const Dbn back = load_model(p);
    CHECK(back.num_vars() == m.num_vars());
    CHECK(back.window == m.window);
    CHECK(back.structure.parents == m.structure.parents);
    for (int c = 0; c < m.num_vars(); ++c)
        CHECK(back.cpts[c].table == m.cpts[c].table);
    CHECK(back.prior == m.prior);
    CHECK(back.variables[2].name == m.variables[2].name);

    // canonical re-save is byte-identical
    const std::string again = dir.file("model2.json");
    save_model(again, back);
    CHECK(read_file(p) == read_file(again));
}

TEST_CASE("corrupt CPT lengths name the offending child") {
    Rng rng(95);
    const Dbn m = test::random_model(rng, 3, 2);
    std::string text = model_to_json(m);
    // drop one number from the first cpt array
    const auto open = text.find("\"cpts\":[[");
    const auto comma = text.find(',', open);
    text.erase(open + 9, comma - (open + 9) + 1);
    try {
        model_from_json(text);
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("cpts[0]") != std::string::npos);
    }
}

TEST_CASE("invalid models are rejected at load with validation detail") {
    Rng rng(96);
    Dbn m = test::random_model(rng, 2, 1);
    m.cpts[0].table[0] += 0.2; // break normalization
    CHECK_THROWS_AS(model_from_json(model_to_json(m)), SchemaError);
}

TEST_CASE("report renders a single run as one row") {
    const Report r = emit_report({{"synth", {{"iteration 0", 1.2345}}}});
    CHECK(r.table.find("iteration 0") != std::string::npos);
    CHECK(r.table.find("1.234") != std::string::npos);
    CHECK(r.table.find("synth") != std::string::npos);
}

TEST_CASE("report shapes like the held-out comparison table") {
    RunTrace a{"bach", {{"FHMM 2 hid vars", 8.486},
                        {"fully observable only", 4.538},
                        {"iteration 0", 4.503}}};
    RunTrace b{"apnea", {{"FHMM 2 hid vars", 3.635},
                         {"fully observable only", 1.892},
                         {"iteration 0", 1.704}}};
    const Report r = emit_report({a, b});
    // row labels once, dataset columns across
    CHECK(r.table.find("FHMM 2 hid vars") != std::string::npos);
    CHECK(r.table.find("bach") != std::string::npos);
    CHECK(r.table.find("apnea") != std::string::npos);
    CHECK(r.table.find("1.704") != std::string::npos);

    // the JSON twin holds exactly the rendered numbers
    const auto j = nlohmann::json::parse(r.json);
    for (const auto& row : j.at("rows")) {
        const std::string label = row.at("label").get<std::string>();
        for (const auto& [dataset, value] :
             row.at("bits_per_slice").items()) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.3f", value.get<double>());
            CHECK(r.table.find(buf) != std::string::npos);
        }
    }
}
