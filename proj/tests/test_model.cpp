#include <doctest.h>

#include <cmath>

#include "dbn/errors.hpp"
#include "dbn/model.hpp"
#include "dbn/rng.hpp"
#include "testutil.hpp"

using namespace dbn;

namespace {

// Two binary variables, B' depends on A'.
Dbn chain_model() {
    Dbn m;
    m.variables = {{0, "A", 2, VarKind::Observable},
                   {1, "B", 2, VarKind::Observable}};
    m.structure.parents = {{{0, 1}}, {{0, 0}}};
    m.structure.max_indegree = 2;
    m.cpts.push_back(Cpt::uniform(0, 2, {{0, 1}}, {2}));
    m.cpts.push_back(Cpt::uniform(1, 2, {{0, 0}}, {2}));
    m.prior = {{{0.5, 0.5}, {0.5, 0.5}}};
    return m;
}

} // namespace

TEST_CASE("validate_dbn accepts a well-formed chain model") {
    CHECK(validate_dbn(chain_model()).empty());
}

TEST_CASE("validate_dbn reports a non-normalized CPT row") {
    Dbn m = chain_model();
    m.cpts[1].at(0, 0) = 0.4; // row sums to 0.9
    const auto issues = validate_dbn(m);
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].find("B") != std::string::npos);
    CHECK(issues[0].find("row 0") != std::string::npos);
}

TEST_CASE("validate_dbn reports a lag-0 cycle") {
    Dbn m = chain_model();
    m.structure.parents[0] = {{1, 0}};
    m.cpts[0] = Cpt::uniform(0, 2, {{1, 0}}, {2});
    const auto issues = validate_dbn(m);
    REQUIRE(!issues.empty());
    bool found = false;
    for (const auto& s : issues)
        found = found || s.find("cycle") != std::string::npos;
    CHECK(found);
}

TEST_CASE("dimension counts free parameters per family") {
    std::vector<int> cards = {2, 2, 2};
    TransitionStructure s;
    s.parents = {{}, {}, {}};
    CHECK(dimension(s, cards) == 3);

    s.parents = {{}, {}, {}};
    std::vector<int> one = {2};
    TransitionStructure lone;
    lone.parents = {{}};
    CHECK(dimension(lone, one) == 1);

    TransitionStructure two_parents;
    two_parents.parents = {{{1, 1}, {2, 1}}, {}, {}};
    CHECK(dimension(two_parents, cards) == 4 + 1 + 1);

    TransitionStructure chain3;
    chain3.parents = {{{0, 1}}, {{1, 1}}, {{2, 1}}};
    CHECK(dimension(chain3, cards) == 6);
}

TEST_CASE("dimension is additive over families") {
    Rng rng(77);
    Dbn m = test::random_model(rng, 4, 2);
    const auto cards = m.cardinalities();
    std::int64_t per_family = 0;
    for (int c = 0; c < m.num_vars(); ++c) {
        std::int64_t rows = 1;
        for (const auto& p : m.structure.parents[c]) rows *= cards[p.variable];
        per_family += rows * (cards[c] - 1);
    }
    CHECK(dimension(m.structure, cards) == per_family);
}

TEST_CASE("joint_log_prob on deterministic persistence") {
    Dbn m;
    m.variables = {{0, "X", 2, VarKind::Observable}};
    m.structure.parents = {{{0, 1}}};
    m.structure.max_indegree = 1;
    Cpt c = Cpt::uniform(0, 2, {{0, 1}}, {2});
    c.table = {1.0, 0.0, 0.0, 1.0}; // X' = X
    m.cpts = {c};
    m.prior = {{{0.5, 0.5}}};
    CHECK(joint_log_prob(m, {{1}, {1}, {1}}) ==
          doctest::Approx(std::log(0.5)).epsilon(1e-15));
    CHECK(joint_log_prob(m, {{1}, {0}, {1}}) ==
          -std::numeric_limits<double>::infinity());
}

TEST_CASE("joint_log_prob of a uniform model is slice-counting") {
    Dbn m;
    m.variables = {{0, "A", 2, VarKind::Observable},
                   {1, "B", 2, VarKind::Observable}};
    m.structure.parents = {{}, {}};
    m.structure.max_indegree = 2;
    m.cpts = {Cpt::uniform(0, 2, {}, {}), Cpt::uniform(1, 2, {}, {})};
    m.prior = {{{0.5, 0.5}, {0.5, 0.5}}};
    CHECK(joint_log_prob(m, {{0, 1}, {1, 1}, {0, 0}}) ==
          doctest::Approx(6 * std::log(0.5)).epsilon(1e-15));
}

TEST_CASE("joint_log_prob matches direct CPT lookups on a random model") {
    Rng rng(123);
    const Dbn m = test::random_model(rng, 3, 2);
    const std::vector<std::vector<int>> seq = {
        {0, 1, 0}, {1, 1, 0}, {0, 0, 1}, {1, 0, 1}};

    double expected = 0.0;
    for (int v = 0; v < 3; ++v) expected += std::log(m.prior[0][v][seq[0][v]]);
    for (int t = 1; t < 4; ++t)
        for (int c = 0; c < 3; ++c) {
            const Cpt& cpt = m.cpts[c];
            std::vector<int> pv;
            for (const auto& p : cpt.parents)
                pv.push_back(seq[t - p.lag][p.variable]);
            expected += std::log(cpt.at(cpt.row_index(pv), seq[t][c]));
        }
    CHECK(joint_log_prob(m, seq) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("joint_log_prob rejects missing cells and short sequences") {
    const Dbn m = chain_model();
    CHECK_THROWS_AS(joint_log_prob(m, {{0, kMissing}, {0, 0}}), DataError);
    CHECK_THROWS_AS(joint_log_prob(m, {{0, 0}}), DataError);
}

TEST_CASE("fhmm_structure wires hidden chains and dense emissions") {
    const Dbn m = fhmm_structure(2, 2, {{"O1", 3}, {"O2", 2}, {"O3", 2}}, 4, 9);
    CHECK(validate_dbn(m).empty());
    REQUIRE(m.num_vars() == 5);
    for (int h = 0; h < 2; ++h) {
        REQUIRE(m.structure.parents[h].size() == 1);
        CHECK(m.structure.parents[h][0] == ParentRef{h, 1});
        CHECK(m.is_hidden(h));
    }
    for (int o = 2; o < 5; ++o) {
        REQUIRE(m.structure.parents[o].size() == 2);
        for (const auto& p : m.structure.parents[o]) CHECK(p.lag == 0);
    }
    // near-uniform initialization with broken symmetry
    bool all_equal = true;
    for (const auto& x : m.cpts[2].table) {
        CHECK(x > 0.3);
        CHECK(x < 0.37);
        all_equal = all_equal && x == m.cpts[2].table[0];
    }
    CHECK(!all_equal);
}

TEST_CASE("fhmm_structure with one chain is an HMM") {
    const Dbn m = fhmm_structure(1, 3, {{"O", 2}}, 3, 1);
    CHECK(m.num_vars() == 2);
    CHECK(m.structure.parents[1] == std::vector<ParentRef>{{0, 0}});
}

TEST_CASE("fhmm_structure enforces the indegree bound") {
    CHECK_THROWS_AS(fhmm_structure(6, 2, {{"O", 2}}, 4, 1), DataError);
}

TEST_CASE("fhmm initialization is seed-deterministic") {
    const Dbn a = fhmm_structure(2, 2, {{"O", 2}}, 4, 42);
    const Dbn b = fhmm_structure(2, 2, {{"O", 2}}, 4, 42);
    CHECK(a.cpts[2].table == b.cpts[2].table);
}

TEST_CASE("align_dataset maps by name and hides absent variables") {
    Dbn m = chain_model();
    m.variables.push_back({2, "H", 2, VarKind::Hidden});
    m.structure.parents.push_back({});
    m.cpts.push_back(Cpt::uniform(2, 2, {}, {}));
    m.prior[0].push_back({0.5, 0.5});

    Dataset d;
    d.names = {"B", "A"};
    d.cardinalities = {2, 2};
    d.sequences = {{{1, 0}, {0, 1}}};
    const auto aligned = align_dataset(m, d);
    CHECK(aligned[0][0] == std::vector<int>{0, 1, kMissing});
    CHECK(aligned[0][1] == std::vector<int>{1, 0, kMissing});

    d.names = {"B", "Z"};
    CHECK_THROWS_AS(align_dataset(m, d), DataError);
}
