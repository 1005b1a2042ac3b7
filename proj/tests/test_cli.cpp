#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "dbn/cli.hpp"
#include "dbn/csv.hpp"
#include "dbn/em.hpp"
#include "dbn/model_io.hpp"
#include "dbn/rng.hpp"
#include "dbn/sampling.hpp"
#include "testutil.hpp"

using namespace dbn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("dbn_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const {
        return (path / name).string();
    }
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Dbn hidden_driver_model() {
    Dbn m;
    m.variables = {{0, "H", 2, VarKind::Hidden},
                   {1, "A", 2, VarKind::Observable},
                   {2, "B", 2, VarKind::Observable}};
    m.structure.parents = {{{0, 1}}, {{0, 0}}, {{0, 0}}};
    m.structure.max_indegree = 3;
    Cpt h = Cpt::uniform(0, 2, {{0, 1}}, {2});
    h.table = {0.9, 0.1, 0.1, 0.9};
    Cpt a = Cpt::uniform(1, 2, {{0, 0}}, {2});
    a.table = {0.9, 0.1, 0.1, 0.9};
    Cpt b = a;
    b.child = 2;
    m.cpts = {h, a, b};
    m.prior = {{{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}};
    return m;
}

} // namespace

TEST_CASE("generate writes identical bytes for identical seeds") {
    TempDir dir;
    Rng rng(101);
    const Dbn m = test::random_model(rng, 3, 2);
    save_model(dir.file("model.json"), m);

    RunConfig cfg;
    cfg.command = "generate";
    cfg.model_path = dir.file("model.json");
    cfg.sequences = 2;
    cfg.length = 50;
    cfg.seed = 7;
    cfg.out_path = dir.file("a.csv");
    REQUIRE(run_command(cfg) == kOk);
    cfg.out_path = dir.file("b.csv");
    REQUIRE(run_command(cfg) == kOk);
    CHECK(read_file(dir.file("a.csv")) == read_file(dir.file("b.csv")));
    CHECK(read_file(dir.file("a.csv")).find("?") == std::string::npos);
}

TEST_CASE("learn-params fits a model and writes a trace") {
    TempDir dir;
    const Dbn gold = hidden_driver_model();
    save_model(dir.file("gold.json"), gold);

    RunConfig gen;
    gen.command = "generate";
    gen.model_path = dir.file("gold.json");
    gen.out_path = dir.file("train.csv");
    gen.sequences = 1;
    gen.length = 800;
    gen.seed = 3;
    REQUIRE(run_command(gen) == kOk);

    Dbn init = gold;
    randomize_parameters(init, 11, 0.8);
    save_model(dir.file("init.json"), init);

    RunConfig learn;
    learn.command = "learn-params";
    learn.model_path = dir.file("init.json");
    learn.data_path = dir.file("train.csv");
    learn.out_path = dir.file("fit.json");
    learn.em_max_iters = 10;
    REQUIRE(run_command(learn) == kOk);
    CHECK(fs::exists(dir.file("fit.json")));
    CHECK(fs::exists(dir.file("fit.vocab.json")));
    const std::string trace = read_file(dir.file("fit.json.trace.jsonl"));
    CHECK(trace.find("\"phase\":\"em\"") != std::string::npos);
    const Dbn fit = load_model(dir.file("fit.json"));
    CHECK(validate_dbn(fit).empty());
}

TEST_CASE("eval prints bits for a model against data") {
    TempDir dir;
    Dbn m;
    m.variables = {{0, "X", 2, VarKind::Observable}};
    m.structure.parents = {{}};
    m.structure.max_indegree = 1;
    m.cpts = {Cpt::uniform(0, 2, {}, {})};
    m.prior = {{{0.5, 0.5}}};
    save_model(dir.file("uniform.json"), m);

    RunConfig gen;
    gen.command = "generate";
    gen.model_path = dir.file("uniform.json");
    gen.out_path = dir.file("data.csv");
    gen.sequences = 2;
    gen.length = 30;
    REQUIRE(run_command(gen) == kOk);

    RunConfig eval;
    eval.command = "eval";
    eval.model_path = dir.file("uniform.json");
    eval.data_path = dir.file("data.csv");
    CHECK(run_command(eval) == kOk);
}

TEST_CASE("exit codes map error classes") {
    TempDir dir;
    RunConfig cfg;
    cfg.command = "eval";
    cfg.model_path = dir.file("missing.json");
    cfg.data_path = dir.file("missing.csv");
    CHECK(run_command(cfg) == kDataError);

    cfg.command = "no-such-command";
    CHECK(run_command(cfg) == kUsage);

    // deterministic model contradicted by data -> numeric error
    Dbn m;
    m.variables = {{0, "X", 2, VarKind::Observable}};
    m.structure.parents = {{{0, 1}}};
    m.structure.max_indegree = 1;
    Cpt c = Cpt::uniform(0, 2, {{0, 1}}, {2});
    c.table = {1.0, 0.0, 0.0, 1.0};
    m.cpts = {c};
    m.prior = {{{0.5, 0.5}}};
    save_model(dir.file("det.json"), m);
    std::ofstream(dir.file("bad.csv")) << "X\n0\n1\n";
    RunConfig eval;
    eval.command = "eval";
    eval.model_path = dir.file("det.json");
    eval.data_path = dir.file("bad.csv");
    CHECK(run_command(eval) == kNumericError);
}

TEST_CASE("infer writes smoothed marginals as json") {
    TempDir dir;
    const Dbn gold = hidden_driver_model();
    save_model(dir.file("gold.json"), gold);
    RunConfig gen;
    gen.command = "generate";
    gen.model_path = dir.file("gold.json");
    gen.out_path = dir.file("obs.csv");
    gen.sequences = 1;
    gen.length = 20;
    REQUIRE(run_command(gen) == kOk);

    RunConfig infer;
    infer.command = "infer";
    infer.model_path = dir.file("gold.json");
    infer.data_path = dir.file("obs.csv");
    infer.out_path = dir.file("post.json");
    REQUIRE(run_command(infer) == kOk);
    const std::string out = read_file(dir.file("post.json"));
    CHECK(out.find("\"H\"") != std::string::npos);
    CHECK(out.find("marginals") != std::string::npos);
}

TEST_CASE("discover runs are byte-reproducible") {
    TempDir dir;
    const Dbn gold = hidden_driver_model();
    save_model(dir.file("gold.json"), gold);
    RunConfig gen;
    gen.command = "generate";
    gen.model_path = dir.file("gold.json");
    gen.out_path = dir.file("train.csv");
    gen.sequences = 1;
    gen.length = 2500;
    gen.seed = 5;
    REQUIRE(run_command(gen) == kOk);

    auto run_into = [&](const std::string& out) {
        RunConfig d;
        d.command = "discover";
        d.data_path = dir.file("train.csv");
        d.out_path = dir.file(out);
        d.max_lag = 2;
        d.iterations = 1;
        d.em_max_iters = 8;
        d.seed = 9;
        REQUIRE(run_command(d) == kOk);
    };
    run_into("run1");
    run_into("run2");

    for (const auto& entry : fs::directory_iterator(dir.file("run1"))) {
        const std::string name = entry.path().filename().string();
        CAPTURE(name);
        CHECK(read_file(entry.path().string()) ==
              read_file((fs::path(dir.file("run2")) / name).string()));
    }
    CHECK(fs::exists(dir.file("run1/report.json")));
    CHECK(fs::exists(dir.file("run1/report.txt")));
}

TEST_CASE("ingest-save-load-eval keeps bits unchanged") {
    TempDir dir;
    Rng rng(103);
    const Dbn m = test::random_model(rng, 3, 2);
    const Dataset d = sample_trajectories(m, 2, 200, 104);
    write_csv(dir.file("d.csv"), d);
    auto [ingested, dict] = ingest_csv(dir.file("d.csv"), {});
    write_csv(dir.file("d2.csv"), ingested);
    const Dataset again = ingest_csv_with(dir.file("d2.csv"), dict);

    const auto part = ClusterPartition::singletons(3);
    CHECK(holdout_bits_per_slice(m, d, part) ==
          holdout_bits_per_slice(m, again, part));
}
