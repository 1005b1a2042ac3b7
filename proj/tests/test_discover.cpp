#include <doctest.h>

#include <cmath>

#include "dbn/discover.hpp"
#include "dbn/errors.hpp"
#include "dbn/exact.hpp"
#include "dbn/rng.hpp"
#include "dbn/sampling.hpp"
#include "testutil.hpp"

using namespace dbn;

namespace {

// X depends on its value two slices back; Y is independent noise.
Dbn order2_generator() {
    Dbn m;
    m.window = 3;
    m.variables = {{0, "X", 2, VarKind::Observable},
                   {1, "Y", 2, VarKind::Observable}};
    m.structure.parents = {{{0, 2}}, {}};
    m.structure.max_indegree = 2;
    Cpt x = Cpt::uniform(0, 2, {{0, 2}}, {2});
    x.table = {0.9, 0.1, 0.15, 0.85};
    m.cpts = {x, Cpt::uniform(1, 2, {}, {})};
    m.prior = {{{0.5, 0.5}, {0.5, 0.5}}, {{0.5, 0.5}, {0.5, 0.5}}};
    return m;
}

Dbn markovian_generator() {
    Dbn m;
    m.variables = {{0, "X", 2, VarKind::Observable},
                   {1, "Y", 2, VarKind::Observable}};
    m.structure.parents = {{{0, 1}}, {{0, 1}, {1, 1}}};
    m.structure.max_indegree = 2;
    Cpt x = Cpt::uniform(0, 2, {{0, 1}}, {2});
    x.table = {0.8, 0.2, 0.25, 0.75};
    Cpt y = Cpt::uniform(1, 2, {{0, 1}, {1, 1}}, {2, 2});
    y.table = {0.7, 0.3, 0.4, 0.6, 0.55, 0.45, 0.2, 0.8};
    m.cpts = {x, y};
    m.prior = {{{0.5, 0.5}, {0.5, 0.5}}};
    return m;
}

} // namespace

TEST_CASE("learn_ktbn with k=2 is plain Markovian structure learning") {
    const Dbn gold = markovian_generator();
    const Dataset d = sample_trajectories(gold, 1, 4001, 81);
    Dbn init = make_empty_model(d, 2);
    set_empirical_prior(init, d);
    SearchConfig cfg;
    cfg.max_indegree = 2;
    const KtbnResult result = learn_ktbn(
        init, d, ClusterPartition::singletons(2), 2, cfg);
    CHECK(result.model.window == 2);
    CHECK(result.search.structure.max_lag() <= 1);
    CHECK(find_non_markov_arcs(result.search).empty());
}

TEST_CASE("an order-2 dependence shows up as a lag-2 arc") {
    const Dbn gold = order2_generator();
    const Dataset d = sample_trajectories(gold, 1, 6001, 82);
    Dbn init = make_empty_model(d, 2);
    set_empirical_prior(init, d);
    SearchConfig cfg;
    cfg.max_indegree = 2;
    const KtbnResult result = learn_ktbn(
        init, d, ClusterPartition::singletons(2), 3, cfg);
    const auto arcs = find_non_markov_arcs(result.search);
    REQUIRE(!arcs.empty());
    CHECK(arcs[0].child == 0);
    CHECK(arcs[0].source == 0);
    CHECK(arcs[0].lag == 2);
    CHECK(arcs[0].gain > 0.0);
}

TEST_CASE("a Markovian process grows no deep arcs under a wide window") {
    const Dbn gold = markovian_generator();
    const Dataset d = sample_trajectories(gold, 1, 8001, 83);
    Dbn init = make_empty_model(d, 2);
    set_empirical_prior(init, d);
    SearchConfig cfg;
    cfg.max_indegree = 3;
    const KtbnResult result = learn_ktbn(
        init, d, ClusterPartition::singletons(2), 4, cfg);
    CHECK(find_non_markov_arcs(result.search).empty());
}

TEST_CASE("find_non_markov_arcs filters and orders by gain") {
    SearchResult res;
    res.structure.parents = {{{1, 2}}, {{0, 3}, {1, 1}}};
    res.structure.max_indegree = 3;
    res.add_gains[{0, {1, 2}}] = 0.5;
    res.add_gains[{1, {0, 3}}] = 2.0;
    const auto arcs = find_non_markov_arcs(res);
    REQUIRE(arcs.size() == 2);
    CHECK(arcs[0].gain == 2.0);
    CHECK(arcs[0].lag == 3);
    CHECK(arcs[1].gain == 0.5);
    CHECK(arcs[1].lag == 2);
}

TEST_CASE("memory names encode their depth") {
    CHECK(memory_depth("X") == 0);
    CHECK(memory_depth("X@-1") == 1);
    CHECK(memory_depth("X@-3") == 3);
    CHECK(memory_depth("Y@-2@-1") == 3);
    CHECK(memory_depth("odd@name") == 0);
}

TEST_CASE("memory CPD is the stated persistence mixture") {
    const Dbn gold = order2_generator();
    NonMarkovArc arc{0, 2, 0, 1.0};
    const Dbn aug = introduce_memory_variables(gold, {&arc, 1}, 0.3, 0.5);
    const auto mem = aug.find_variable("X@-1");
    REQUIRE(mem.has_value());
    const Cpt& cpt = aug.cpts[*mem];
    // copy source y != self p: (1-eps) + eps*(1-rho)/2 = 0.7 + 0.3*0.25
    // with y the observed copy value and h = y
    std::vector<int> vals = {1, 0}; // parents sorted: (X lag1, X@-1 lag1)
    CHECK(cpt.at(cpt.row_index(vals), 1) == doctest::Approx(0.775));
    CHECK(cpt.at(cpt.row_index(vals), 0) == doctest::Approx(0.225));
    for (std::size_t r = 0; r < cpt.num_rows(); ++r)
        CHECK(cpt.at(r, 0) + cpt.at(r, 1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("memory rows stay normalized across the parameter grid") {
    const Dbn gold = order2_generator();
    NonMarkovArc arc{0, 2, 0, 1.0};
    for (double eps : {0.0, 0.1, 0.5, 0.9, 1.0})
        for (double rho : {0.0, 0.3, 1.0}) {
            const Dbn aug =
                introduce_memory_variables(gold, {&arc, 1}, eps, rho);
            for (const auto& cpt : aug.cpts)
                for (std::size_t r = 0; r < cpt.num_rows(); ++r) {
                    double sum = 0.0;
                    for (int v = 0; v < cpt.child_card; ++v)
                        sum += cpt.at(r, v);
                    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
                }
        }
}

TEST_CASE("a lag-4 arc produces a three-variable chain") {
    Dbn m = order2_generator();
    m.window = 5;
    m.structure.parents[0] = {{0, 4}};
    Cpt x = Cpt::uniform(0, 2, {{0, 4}}, {2});
    x.table = {0.9, 0.1, 0.2, 0.8};
    m.cpts[0] = x;
    m.prior.assign(4, m.prior[0]);

    NonMarkovArc arc{0, 4, 0, 1.0};
    const Dbn aug = introduce_memory_variables(m, {&arc, 1}, 0.2, 0.5);
    CHECK(aug.num_vars() == 5);
    CHECK(aug.find_variable("X@-1").has_value());
    CHECK(aug.find_variable("X@-2").has_value());
    CHECK(aug.find_variable("X@-3").has_value());
    CHECK(aug.window == 2);
    CHECK(validate_dbn(aug).empty());
    // the offending arc now points at the deepest memory variable
    CHECK(aug.structure.has_arc(0, {*aug.find_variable("X@-3"), 1}));
}

TEST_CASE("augmentation output is Markovian and valid") {
    const Dbn gold = order2_generator();
    NonMarkovArc arc{0, 2, 0, 1.0};
    for (double eps : {0.0, 0.3}) {
        const Dbn aug = introduce_memory_variables(gold, {&arc, 1}, eps, 0.5);
        CHECK(aug.window == 2);
        CHECK(aug.structure.max_lag() <= 1);
        CHECK(validate_dbn(aug).empty());
        for (const auto& v : aug.variables)
            if (memory_depth(v.name) > 0) CHECK(v.kind == VarKind::Hidden);
    }
}

TEST_CASE("noiseless memory reproduces the deep likelihood exactly") {
    const Dbn ktbn = order2_generator(); // window 3, lag-2 arc
    NonMarkovArc arc{0, 2, 0, 1.0};
    const Dbn aug = introduce_memory_variables(ktbn, {&arc, 1}, 0.0, 0.5);
    REQUIRE(validate_dbn(aug).empty());

    const Dataset d = sample_trajectories(ktbn, 3, 12, 84);
    const FlatEngine flat(aug);
    for (const auto& seq : d.sequences) {
        // deep model: conditional likelihood of slices >= 2 given the first
        // two, a plain product of CPT lookups
        std::vector<std::vector<int>> full(seq.size());
        for (std::size_t t = 0; t < seq.size(); ++t) full[t] = seq[t];
        double deep = joint_log_prob(ktbn, full);
        for (int s = 0; s < 2; ++s)
            for (int v = 0; v < 2; ++v)
                deep -= std::log(ktbn.prior[s][v][seq[s][v]]);

        // augmented model: same conditional via exact marginalization of
        // the memory variable
        auto aligned = align_dataset(aug, {d.names, d.cardinalities, {seq}});
        const auto [full_ll, s0] = flat.loglik(aligned[0]);
        std::vector<std::vector<int>> prefix(aligned[0].begin(),
                                             aligned[0].begin() + 2);
        const auto [prefix_ll, p0] = flat.loglik(prefix);
        CHECK(full_ll - prefix_ll == doctest::Approx(deep).epsilon(1e-9));
    }
}

TEST_CASE("subsampling keeps every k-th slice") {
    Dataset d;
    d.names = {"A"};
    d.cardinalities = {10};
    d.sequences = {{{0}, {1}, {2}, {3}, {4}, {5}, {6}, {7}, {8}, {9}}};
    CHECK(subsample_dataset(d, 1).sequences == d.sequences);
    const Dataset s3 = subsample_dataset(d, 3);
    CHECK(s3.sequences[0] ==
          std::vector<std::vector<int>>{{0}, {3}, {6}, {9}});
    // too-short remainders are dropped
    Dataset tiny;
    tiny.names = {"A"};
    tiny.cardinalities = {2};
    tiny.sequences = {{{0}, {1}, {0}}};
    CHECK(subsample_dataset(tiny, 3).sequences.empty());
}

TEST_CASE("subsampling exposes a slow hidden process") {
    // H flips with period ~10; O is a noisy copy of H with no direct
    // self-dependence. At the raw rate the previous observation carries
    // almost everything; subsampled by 5, the two-back observation becomes
    // informative enough to flag a Markov violation.
    Dbn gen;
    gen.variables = {{0, "H", 2, VarKind::Hidden},
                     {1, "O", 2, VarKind::Observable}};
    gen.structure.parents = {{{0, 1}}, {{0, 0}}};
    gen.structure.max_indegree = 2;
    Cpt h = Cpt::uniform(0, 2, {{0, 1}}, {2});
    h.table = {0.95, 0.05, 0.05, 0.95};
    Cpt o = Cpt::uniform(1, 2, {{0, 0}}, {2});
    o.table = {0.95, 0.05, 0.05, 0.95};
    gen.cpts = {h, o};
    gen.prior = {{{0.5, 0.5}, {0.5, 0.5}}};

    const Dataset full = sample_trajectories(gen, 1, 6001, 85);
    SearchConfig cfg;
    cfg.max_indegree = 2;

    auto deep_arcs = [&](const Dataset& d) {
        Dbn init = make_empty_model(d, 2);
        set_empirical_prior(init, d);
        const KtbnResult r = learn_ktbn(
            init, d, ClusterPartition::singletons(1), 3, cfg);
        return find_non_markov_arcs(r.search);
    };
    const Dataset sub = subsample_dataset(full, 5);
    CHECK(!deep_arcs(sub).empty());
}

TEST_CASE("discovery stops at the baseline on Markovian data") {
    const Dbn gold = markovian_generator();
    const Dataset train = sample_trajectories(gold, 1, 4001, 86);
    const Dataset test = sample_trajectories(gold, 1, 2001, 87);
    DiscoveryConfig cfg;
    cfg.search.max_indegree = 2;
    cfg.search.max_lag = 2;
    const auto records = discovery_pipeline(train, test, cfg);
    REQUIRE(records.size() == 1);
    CHECK(records[0].label == "fully observable only");
    CHECK(records[0].num_hidden == 0);
}

TEST_CASE("discovery introduces memory for a hidden driver and helps") {
    // hidden persistent H drives two observables
    Dbn gold;
    gold.variables = {{0, "H", 2, VarKind::Hidden},
                      {1, "A", 2, VarKind::Observable},
                      {2, "B", 2, VarKind::Observable}};
    gold.structure.parents = {{{0, 1}}, {{0, 0}}, {{0, 0}}};
    gold.structure.max_indegree = 3;
    Cpt h = Cpt::uniform(0, 2, {{0, 1}}, {2});
    h.table = {0.9, 0.1, 0.1, 0.9};
    Cpt a = Cpt::uniform(1, 2, {{0, 0}}, {2});
    a.table = {0.9, 0.1, 0.1, 0.9};
    Cpt b = a;
    b.child = 2;
    gold.cpts = {h, a, b};
    gold.prior = {{{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}};

    const Dataset train = sample_trajectories(gold, 1, 8001, 88);
    const Dataset test = sample_trajectories(gold, 1, 4001, 89);
    DiscoveryConfig cfg;
    cfg.search.max_indegree = 3;
    cfg.search.max_lag = 2; // k = 3
    cfg.em.max_iters = 25;
    cfg.max_iterations = 1;
    const auto records = discovery_pipeline(train, test, cfg);
    REQUIRE(records.size() >= 2);
    CHECK(records[1].num_hidden >= 1);
    CHECK(records[1].test_bits < records[0].test_bits - 0.02);
}

TEST_CASE("depth cap rejects over-deep chains") {
    Dbn m = order2_generator();
    m.window = 5;
    m.structure.parents[0] = {{0, 4}};
    Cpt x = Cpt::uniform(0, 2, {{0, 4}}, {2});
    m.cpts[0] = x;
    m.prior.assign(4, m.prior[0]);
    NonMarkovArc arc{0, 4, 0, 1.0};
    CHECK_THROWS_AS(
        introduce_memory_variables(m, {&arc, 1}, 0.3, 0.5, /*depth_cap=*/2),
        DataError);
}
