#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "sparse_logic/enumerate.hpp"
#include "sparse_logic/treedepth.hpp"

using namespace sparse_logic;

namespace {

// independent oracle: plain recursion without memoization or witnesses
int td_brute(const ColoredGraph& g) {
    if (g.vertices.empty()) return 0;
    auto comps = connected_components(g);
    if (comps.size() > 1) {
        int m = 0;
        for (const auto& c : comps) m = std::max(m, td_brute(g.induced(c)));
        return m;
    }
    if (g.vertices.size() == 1) return 1;
    int best = (int)g.vertices.size();
    for (ElementId v : g.vertices) {
        std::set<ElementId> rest = g.vertices;
        rest.erase(v);
        best = std::min(best, 1 + td_brute(g.induced(rest)));
    }
    return best;
}

RelStructure random_colored_structure(std::mt19937& rng, int n, double p) {
    RelStructure a;
    for (int i = 0; i < n; ++i) a.universe.insert(i);
    a.add_relation("E", 2);
    a.add_relation("red", 1);
    a.colors.insert("red");
    a.add_function("f");
    std::bernoulli_distribution coin(p);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (coin(rng)) {
                a.add_tuple("E", {i, j});
                a.add_tuple("E", {j, i});
            }
    for (int i = 0; i < n; ++i)
        if (rng() % 2) a.add_tuple("red", {i});
    return a;
}

} // namespace

TEST_CASE("treedepth of tiny graphs") {
    ColoredGraph one;
    one.add_vertex(0);
    CHECK(treedepth_exact(one).depth == 1);

    CHECK(treedepth_exact(complete_bipartite(2, 2)).depth == 3); // K_{s,s}: s+1 at s=2
    CHECK(treedepth_exact(path_graph(7)).depth == 3);
    CHECK(treedepth_exact(path_graph(7)).depth == td_brute(path_graph(7)));
}

TEST_CASE("treedepth witness forests are valid decompositions") {
    std::mt19937 rng(3);
    for (int round = 0; round < 40; ++round) {
        auto g = random_graph(7, 0.35, rng);
        auto res = treedepth_exact(g);
        CHECK(res.depth == td_brute(g));
        CHECK(validate_td_decomposition(g, res.forest, res.depth));
    }
}

TEST_CASE("treedepth respects the path lower bound") {
    // any G with a simple path on k vertices has td >= ceil(log2(k+1))
    for (int k = 1; k <= 8; ++k) {
        int td = treedepth_exact(path_graph(k)).depth;
        CHECK(td >= (int)std::ceil(std::log2(k + 1)));
    }
}

TEST_CASE("treedepth_exact over budget raises capacity error") {
    Budget tight;
    tight.max_universe_exact = 4;
    CHECK_THROWS_AS(treedepth_exact(path_graph(6), tight), capacity_error);
}

TEST_CASE("dfs forest basics") {
    ColoredGraph edgeless;
    for (int i = 0; i < 3; ++i) edgeless.add_vertex(i);
    auto f = dfs_forest(edgeless);
    CHECK(f.root_set() == std::set<ElementId>{0, 1, 2});

    auto tri = cycle_graph(3);
    auto tf = dfs_forest(tri);
    CHECK(tf.depth() == 2); // path of 3 nodes in node count
}

TEST_CASE("dfs forest: every edge joins comparable nodes") {
    std::mt19937 rng(5);
    for (int round = 0; round < 40; ++round) {
        auto g = random_graph(8, 0.3, rng);
        auto f = dfs_forest(g);
        for (const auto& [u, v] : g.edges) {
            auto l = f.lca(u, v);
            REQUIRE(l.has_value());
            REQUIRE((*l == u || *l == v));
        }
    }
}

TEST_CASE("dfs forest depth bound 2^td") {
    std::mt19937 rng(7);
    for (int round = 0; round < 30; ++round) {
        auto g = random_graph(7, 0.3, rng);
        int td = treedepth_exact(g).depth;
        auto f = dfs_forest(g);
        CHECK(f.depth() + 1 <= (1 << td));
    }
}

TEST_CASE("encode/decode btd forest: single element") {
    RelStructure a;
    a.universe = {0};
    a.add_relation("red", 1);
    a.colors.insert("red");
    a.add_tuple("red", {0});
    auto f = encode_btd_forest(a, 1);
    CHECK(f.nodes == std::set<ElementId>{0});
    CHECK(decode_btd_forest(f) == a);
}

TEST_CASE("encode/decode btd forest roundtrip on a colored path") {
    RelStructure a;
    a.universe = {0, 1, 2};
    a.add_relation("E", 2);
    a.add_tuple("E", {0, 1});
    a.add_tuple("E", {1, 0});
    a.add_tuple("E", {1, 2});
    a.add_tuple("E", {2, 1});
    a.add_relation("red", 1);
    a.colors.insert("red");
    a.add_tuple("red", {0});
    auto f = encode_btd_forest(a, 2);
    CHECK(decode_btd_forest(f) == a);
}

TEST_CASE("encode/decode roundtrip on random structures of treedepth <= 3") {
    std::mt19937 rng(11);
    int accepted = 0;
    std::set<std::string> labels_seen;
    while (accepted < 30) {
        auto a = random_colored_structure(rng, 6, 0.25);
        // sparse random function edges
        for (int i = 0; i < 6; ++i)
            if (rng() % 3 == 0) a.functions["f"][i] = (ElementId)(rng() % 6);
        auto g = gaifman_graph(a);
        if (treedepth_exact(g).depth > 3) continue;
        ++accepted;
        auto f = encode_btd_forest(a, 3);
        REQUIRE(decode_btd_forest(f) == a);
        for (const auto& [name, set] : f.labels) labels_seen.insert(name);
    }
    // label alphabet is finite for the fixed signature and depth bound
    CHECK(labels_seen.size() <= 4096);
}

TEST_CASE("encode rejects forests deeper than 2^d") {
    auto a = graph_to_structure(path_graph(6));
    CHECK_THROWS_AS(encode_btd_forest(a, 1), contract_error);
}

TEST_CASE("cover for p=1: single color classes are edge-free") {
    auto g = path_graph(6);
    auto cover = low_treedepth_cover(g, 1);
    CHECK(cover.certified);
    CHECK(cover.p_subset_check(g));
    for (std::size_t i = 0; i < cover.members.size(); ++i)
        CHECK(cover.certificates[i].depth <= 1);
}

TEST_CASE("depth-residue cover of a tree has forest members") {
    // U_i = vertices of depth not congruent to i mod p+1 gives a p-cover of
    // height-p forests; cross-check our cover against that classic bound
    std::mt19937 rng(13);
    for (int round = 0; round < 10; ++round) {
        // random tree on 9 nodes
        std::map<ElementId, ElementId> parent;
        std::set<ElementId> nodes{0};
        for (int i = 1; i < 9; ++i) {
            nodes.insert(i);
            parent[i] = (ElementId)(rng() % i);
        }
        auto forest = RootedForest::from_parent_map(nodes, parent);
        ColoredGraph g;
        g.vertices = nodes;
        for (const auto& [c, p] : parent) g.add_edge(c, p);
        const int p = 2;
        auto depths = forest.depths();
        std::vector<std::set<ElementId>> residues;
        for (int i = 0; i <= p; ++i) {
            std::set<ElementId> u;
            for (ElementId v : nodes)
                if (depths.at(v) % (p + 1) != i) u.insert(v);
            residues.push_back(u);
        }
        for (const auto& u : residues) {
            if (u.empty()) continue;
            auto sub = g.induced(u);
            CHECK(treedepth_exact(sub).depth <= p + 1);
        }
        // and the residue family is a 2-cover: any pair avoids some residue class
        Cover c;
        c.p = p;
        c.members = residues;
        CHECK(c.p_subset_check(g, 2));
    }
}

TEST_CASE("low_treedepth_cover on random graphs, p=2") {
    std::mt19937 rng(17);
    for (int round = 0; round < 8; ++round) {
        auto g = random_graph(10, 0.18, rng);
        auto cover = low_treedepth_cover(g, 2);
        CHECK(cover.p_subset_check(g));
        for (std::size_t i = 0; i < cover.members.size(); ++i) {
            if ((int)cover.members[i].size() > default_budget().max_universe_exact) continue;
            auto sub = g.induced(cover.members[i]);
            ColoredGraph plain;
            plain.vertices = sub.vertices;
            plain.edges = sub.edges;
            CHECK(treedepth_exact(plain).depth <= 2);
        }
    }
}

TEST_CASE("cover members pass the p-subset property up to 3") {
    std::mt19937 rng(19);
    auto g = random_graph(8, 0.25, rng);
    auto cover = low_treedepth_cover(g, 3);
    CHECK(cover.p_subset_check(g, 1));
    CHECK(cover.p_subset_check(g, 2));
    CHECK(cover.p_subset_check(g, 3));
}

TEST_CASE("refinement coloring: any i <= p classes induce treedepth <= i") {
    std::mt19937 rng(23);
    for (int round = 0; round < 6; ++round) {
        auto g = random_graph(8, 0.2, rng);
        const int p = 2;
        auto cover = low_treedepth_cover(g, p);
        std::map<int, std::set<ElementId>> classes;
        for (const auto& [v, c] : cover.refinement) classes[c].insert(v);
        std::vector<int> ids;
        for (const auto& [c, s] : classes) ids.push_back(c);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            auto sub = g.induced(classes[ids[i]]);
            CHECK(treedepth_exact(sub).depth <= 1);
            for (std::size_t j = i + 1; j < ids.size(); ++j) {
                std::set<ElementId> u = classes[ids[i]];
                u.insert(classes[ids[j]].begin(), classes[ids[j]].end());
                CHECK(treedepth_exact(g.induced(u)).depth <= 2);
            }
        }
    }
}
