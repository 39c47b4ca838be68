#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sparse_logic/canonical.hpp"
#include "sparse_logic/forest.hpp"
#include "sparse_logic/graph.hpp"
#include "sparse_logic/json_io.hpp"
#include "sparse_logic/structure.hpp"

using namespace sparse_logic;

namespace {

RelStructure abc_structure() {
    RelStructure a;
    a.universe = {0, 1, 2};
    return a;
}

ColoredGraph path_graph(int n) {
    ColoredGraph g;
    for (int i = 0; i < n; ++i) g.add_vertex(i);
    for (int i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
    return g;
}

ColoredGraph random_graph(int n, double p, std::mt19937& rng) {
    ColoredGraph g;
    for (int i = 0; i < n; ++i) g.add_vertex(i);
    std::bernoulli_distribution coin(p);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (coin(rng)) g.add_edge(i, j);
    return g;
}

} // namespace

TEST_CASE("gaifman graph of empty-signature structure is edgeless") {
    RelStructure a = abc_structure();
    auto g = gaifman_graph(a);
    CHECK(g.vertices == std::set<ElementId>{0, 1, 2});
    CHECK(g.edges.empty());
}

TEST_CASE("gaifman graph from a ternary tuple with a repeat") {
    RelStructure a = abc_structure();
    a.add_relation("R", 3);
    a.add_tuple("R", {0, 1, 1}); // (a,b,b): single edge ab, loop dropped
    auto g = gaifman_graph(a);
    CHECK(g.edges == std::set<Edge>{{0, 1}});
}

TEST_CASE("gaifman edges from function pairs form a path") {
    RelStructure a = abc_structure();
    a.add_function("f");
    a.set_function("f", 0, 1);
    a.set_function("f", 1, 2);
    auto g = gaifman_graph(a);
    // oracle: enumerate all pairs against the definition
    std::set<Edge> expect;
    for (ElementId u : a.universe)
        for (ElementId v : a.universe) {
            if (u >= v) continue;
            auto fu = a.apply_function("f", u);
            auto fv = a.apply_function("f", v);
            if ((fu && *fu == v) || (fv && *fv == u)) expect.insert({u, v});
        }
    CHECK(g.edges == expect);
    CHECK(g.edges == std::set<Edge>{{0, 1}, {1, 2}});
}

TEST_CASE("induced substructure on the full universe is the identity") {
    RelStructure a = abc_structure();
    a.add_relation("E", 2);
    a.add_tuple("E", {0, 1});
    a.add_function("f");
    a.set_function("f", 0, 1);
    CHECK(induced_substructure(a, a.universe) == a);
}

TEST_CASE("induced substructure truncates functions leaving X") {
    RelStructure a = abc_structure();
    a.add_function("f");
    a.set_function("f", 0, 1);
    auto sub = induced_substructure(a, {0});
    CHECK_FALSE(sub.apply_function("f", 0).has_value());
}

TEST_CASE("induced substructure drops crossing tuples") {
    RelStructure a = abc_structure();
    a.add_relation("E", 2);
    a.add_tuple("E", {0, 1});
    a.add_tuple("E", {1, 2});
    auto sub = induced_substructure(a, {0, 2});
    CHECK(sub.relations.at("E").tuples.empty());
}

TEST_CASE("induced substructure rejects bad subsets") {
    RelStructure a = abc_structure();
    CHECK_THROWS_AS(induced_substructure(a, {7}), validation_error);
}

TEST_CASE("gaifman of induced substructure is a subgraph of induced gaifman") {
    std::mt19937 rng(7);
    for (int round = 0; round < 30; ++round) {
        RelStructure a;
        for (int i = 0; i < 5; ++i) a.universe.insert(i);
        a.add_relation("R", 2);
        a.add_function("f");
        std::uniform_int_distribution<int> pick(0, 4);
        for (int k = 0; k < 4; ++k) a.add_tuple("R", {pick(rng), pick(rng)});
        for (int k = 0; k < 3; ++k) a.functions["f"][pick(rng)] = pick(rng);
        std::set<ElementId> x;
        for (int i = 0; i < 5; ++i)
            if (rng() % 2) x.insert(i);
        auto lhs = gaifman_graph(induced_substructure(a, x));
        auto rhs = gaifman_graph(a).induced(x);
        for (const auto& e : lhs.edges) CHECK(rhs.edges.count(e));
    }
}

TEST_CASE("flip_within empty set is the identity") {
    auto g = path_graph(4);
    CHECK(flip_within(g, {}) == g);
}

TEST_CASE("flipping the leaves of a star yields a clique") {
    ColoredGraph star;
    for (int i = 0; i < 4; ++i) star.add_vertex(i);
    for (int i = 1; i < 4; ++i) star.add_edge(0, i);
    auto flipped = flip_within(star, {1, 2, 3});
    CHECK(flipped.edges.size() == 6);
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) CHECK(flipped.adjacent(i, j));
}

TEST_CASE("flip_within is an involution") {
    std::mt19937 rng(11);
    for (int round = 0; round < 50; ++round) {
        auto g = random_graph(6, 0.4, rng);
        std::set<ElementId> w;
        for (int i = 0; i < 6; ++i)
            if (rng() % 2) w.insert(i);
        CHECK(flip_within(flip_within(g, w), w) == g);
    }
}

TEST_CASE("connected components, canonical order") {
    ColoredGraph g;
    g.add_vertex(0);
    g.add_vertex(1);
    CHECK(connected_components(g) == std::vector<std::set<ElementId>>{{0}, {1}});

    auto p = path_graph(3);
    CHECK(connected_components(p) == std::vector<std::set<ElementId>>{{0, 1, 2}});

    ColoredGraph two;
    for (int i = 0; i < 4; ++i) two.add_vertex(i);
    two.add_edge(0, 2);
    two.add_edge(1, 3);
    auto comps = connected_components(two);
    REQUIRE(comps.size() == 2);
    CHECK(comps[0] == std::set<ElementId>{0, 2});
    CHECK(comps[1] == std::set<ElementId>{1, 3});
}

TEST_CASE("forest utils: depth, lca, conversions") {
    RootedForest f = RootedForest::from_parent_map({0}, {});
    CHECK(f.depths().at(0) == 0);
    CHECK(f.lca(0, 0) == 0);

    RootedForest t = RootedForest::from_parent_map({0, 1, 2}, {{1, 0}, {2, 1}});
    CHECK(t.depths().at(2) == 2);
    CHECK(t.lca(1, 2) == 1);
    CHECK(t.depth() == 2);
}

TEST_CASE("forest encoding conversions are mutually inverse") {
    std::mt19937 rng(3);
    for (int round = 0; round < 40; ++round) {
        // random forest on n nodes: each node picks a parent among smaller ids or none
        int n = 1 + (int)(rng() % 7);
        std::set<ElementId> nodes;
        std::map<ElementId, ElementId> parent;
        for (int i = 0; i < n; ++i) {
            nodes.insert(i);
            if (i > 0 && rng() % 4 != 0) parent[i] = (ElementId)(rng() % i);
        }
        auto f = RootedForest::from_parent_map(nodes, parent);
        f.labels["L"].insert(0);
        auto round_trip = f.to_root_encoding().to_parent_encoding();
        CHECK(round_trip.nodes == f.nodes);
        CHECK(round_trip.parent == f.parent);
        CHECK(round_trip.labels == f.labels);
    }
}

TEST_CASE("malformed forests are rejected") {
    CHECK_THROWS_AS(RootedForest::from_parent_map({0, 1}, {{0, 1}, {1, 0}}), validation_error);
    RootedForest g;
    g.encoding = RootedForest::Encoding::RootPredicate;
    g.nodes = {0, 1, 2};
    g.tree_edges = {make_edge(0, 1), make_edge(1, 2), make_edge(0, 2)};
    g.roots = {0};
    CHECK_THROWS_AS(g.validate(), validation_error);
}

TEST_CASE("structure json round-trip is bit-exact") {
    RelStructure a = abc_structure();
    a.add_relation("E", 2);
    a.add_tuple("E", {0, 1});
    a.add_tuple("E", {1, 0});
    a.add_function("f");
    a.set_function("f", 2, 0);
    a.add_relation("red", 1);
    a.colors.insert("red");
    a.add_tuple("red", {1});

    auto j = structure_to_json(a);
    auto text = j.dump();
    auto back = structure_from_json(json::parse(text));
    CHECK(back == a);
    CHECK(structure_to_json(back).dump() == text);
}

TEST_CASE("graph canonical codes respect isomorphism") {
    auto p4 = path_graph(4);
    ColoredGraph q4; // same path with scrambled ids
    for (int v : {10, 20, 30, 40}) q4.add_vertex(v);
    q4.add_edge(20, 40);
    q4.add_edge(40, 10);
    q4.add_edge(10, 30);
    CHECK(graphs_isomorphic(p4, q4));

    ColoredGraph star;
    for (int i = 0; i < 4; ++i) star.add_vertex(i);
    for (int i = 1; i < 4; ++i) star.add_edge(0, i);
    CHECK_FALSE(graphs_isomorphic(p4, star));

    // colors can break symmetry
    ColoredGraph c1 = p4, c2 = p4;
    c1.colors["red"] = {0};
    c2.colors["red"] = {1};
    CHECK_FALSE(graphs_isomorphic(c1, c2));
    ColoredGraph c3 = p4;
    c3.colors["red"] = {3}; // other end of the path: isomorphic to {0}
    CHECK(graphs_isomorphic(c1, c3));
}

TEST_CASE("canonical codes distinguish C6 from two triangles") {
    ColoredGraph c6;
    for (int i = 0; i < 6; ++i) c6.add_vertex(i);
    for (int i = 0; i < 6; ++i) c6.add_edge(i, (i + 1) % 6);
    ColoredGraph tt;
    for (int i = 0; i < 6; ++i) tt.add_vertex(i);
    tt.add_edge(0, 1);
    tt.add_edge(1, 2);
    tt.add_edge(2, 0);
    tt.add_edge(3, 4);
    tt.add_edge(4, 5);
    tt.add_edge(5, 3);
    CHECK_FALSE(graphs_isomorphic(c6, tt));

    // scrambled union of triangles stays isomorphic
    ColoredGraph tt2;
    for (int v : {7, 9, 11, 13, 15, 17}) tt2.add_vertex(v);
    tt2.add_edge(7, 13);
    tt2.add_edge(13, 17);
    tt2.add_edge(17, 7);
    tt2.add_edge(9, 11);
    tt2.add_edge(11, 15);
    tt2.add_edge(15, 9);
    CHECK(graphs_isomorphic(tt, tt2));
}

TEST_CASE("structure isomorphism via permutation search") {
    RelStructure a = abc_structure();
    a.add_function("f");
    a.set_function("f", 0, 1);
    RelStructure b = abc_structure();
    b.add_function("f");
    b.set_function("f", 2, 0);
    CHECK(structures_isomorphic(a, b));
    b.set_function("f", 1, 1);
    CHECK_FALSE(structures_isomorphic(a, b));
}
