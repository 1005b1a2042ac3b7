#include <doctest.h>

#include "dbn/potential.hpp"

using namespace dbn;

TEST_CASE("multiply respects scopes and strides") {
    // nodes 1 (card 2) and 3 (card 3), last node fastest
    Potential big({1, 3}, {2, 3}, 1.0);
    Potential small({3}, {3}, 0.0);
    small.table() = {1.0, 2.0, 3.0};
    big.multiply(small);
    CHECK(big.table() == std::vector<double>{1, 2, 3, 1, 2, 3});

    Potential other({1}, {2}, 0.0);
    other.table() = {10.0, 100.0};
    big.multiply(other);
    CHECK(big.table() == std::vector<double>{10, 20, 30, 100, 200, 300});
}

TEST_CASE("marginal_onto sums out the complement") {
    Potential p({0, 2}, {2, 2}, 0.0);
    p.table() = {1, 2, 3, 4}; // (0,2) with node 2 fastest
    const int keep0[1] = {0};
    CHECK(p.marginal_onto(keep0).table() == std::vector<double>{3, 7});
    const int keep2[1] = {2};
    CHECK(p.marginal_onto(keep2).table() == std::vector<double>{4, 6});
}

TEST_CASE("marginal_in_order permutes axes") {
    Potential p({0, 1}, {2, 3}, 0.0);
    // p(a, b) = 10a + b with b fastest
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 3; ++b) p.table()[a * 3 + b] = 10 * a + b;
    const int rev[2] = {1, 0};
    const auto out = p.marginal_in_order(rev); // (b, a) with a fastest
    for (int b = 0; b < 3; ++b)
        for (int a = 0; a < 2; ++a) CHECK(out[b * 2 + a] == 10 * a + b);
}

TEST_CASE("condition zeroes mismatching cells") {
    Potential p({0, 1}, {2, 2}, 1.0);
    p.condition(1, 0);
    CHECK(p.table() == std::vector<double>{1, 0, 1, 0});
    p.condition(0, 1);
    CHECK(p.table() == std::vector<double>{0, 0, 1, 0});
    CHECK(p.normalize() == 1.0);
    CHECK(p.table()[2] == 1.0);
}

TEST_CASE("project_map matches manual index arithmetic") {
    const int from_nodes[3] = {0, 1, 2};
    const int from_cards[3] = {2, 2, 2};
    const int to[2] = {0, 2};
    const auto map = project_map(from_nodes, from_cards, to);
    REQUIRE(map.size() == 8);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c)
                CHECK(map[a * 4 + b * 2 + c] == a * 2 + c);
}

TEST_CASE("ordered_project_map handles unsorted queries") {
    const int from_nodes[3] = {0, 1, 2};
    const int from_cards[3] = {2, 3, 2};
    const int query[2] = {2, 0}; // node 0 fastest in the output
    const auto map = ordered_project_map(from_nodes, from_cards, query);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 2; ++c)
                CHECK(map[a * 6 + b * 2 + c] == c * 2 + a);
}

TEST_CASE("value_map reads node digits") {
    const int nodes[2] = {4, 7};
    const int cards[2] = {3, 2};
    const auto map = value_map(nodes, cards, 4);
    CHECK(std::vector<std::int32_t>(map.begin(), map.end()) ==
          std::vector<std::int32_t>{0, 0, 1, 1, 2, 2});
}
