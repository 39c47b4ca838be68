#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sparse_logic/enumerate.hpp"
#include "sparse_logic/shrubdepth.hpp"
#include "sparse_logic/treedepth.hpp"

using namespace sparse_logic;

namespace {

// bi-complement of a matching of order n: a_i ~ b_j iff i != j, via the
// connection model from the paper's example (root connector {(a,b)},
// children with empty connectors pairing a_i with b_i)
ConnectionModel bicomplement_model(int n) {
    ConnectionModel m;
    ElementId next = 0;
    ElementId root = next++;
    m.nodes.insert(root);
    m.connector[root] = {{"a", "b"}, {"b", "a"}};
    for (int i = 0; i < n; ++i) {
        ElementId v = next++;
        m.nodes.insert(v);
        m.parent[v] = root;
        m.connector[v] = {};
        ElementId ai = next++, bi = next++;
        m.nodes.insert(ai);
        m.nodes.insert(bi);
        m.parent[ai] = v;
        m.parent[bi] = v;
        m.leaf_label[ai] = "a";
        m.leaf_label[bi] = "b";
    }
    return m;
}

// independent oracle for quasi-path legality
bool is_quasi_path(const ColoredGraph& g, const std::vector<ElementId>& seq) {
    for (std::size_t i = 0; i + 1 < seq.size(); ++i)
        if (!g.adjacent(seq[i], seq[i + 1])) return false;
    for (std::size_t i = 1; i <= seq.size(); i += 2)          // odd positions
        for (std::size_t j = i + 2; j <= seq.size(); ++j)     // later positions
            if (j % 2 == 0 && g.adjacent(seq[i - 1], seq[j - 1])) return false;
    return true;
}

ConnectionModel random_model(std::mt19937& rng, int height, int m_labels, int max_leaves) {
    ConnectionModel m;
    std::vector<std::string> labels;
    for (int i = 0; i < m_labels; ++i) labels.push_back(std::string(1, (char)('a' + i)));
    ElementId next = 0;
    std::function<ElementId(int)> grow = [&](int h) {
        ElementId me = next++;
        m.nodes.insert(me);
        if (h == 0) {
            m.leaf_label[me] = labels[rng() % labels.size()];
            return me;
        }
        auto& conn = m.connector[me];
        for (int i = 0; i < m_labels; ++i)
            for (int j = i; j < m_labels; ++j)
                if (rng() % 2) {
                    conn.insert({labels[i], labels[j]});
                    conn.insert({labels[j], labels[i]});
                }
        int kids = 1 + (int)(rng() % 3);
        for (int k = 0; k < kids && (int)m.leaf_label.size() < max_leaves; ++k) {
            ElementId c = grow(h - 1 == 0 ? 0 : (int)(rng() % h));
            m.parent[c] = me;
        }
        return me;
    };
    grow(height);
    // a node with no children at positive height is a leaf; label it
    for (ElementId v : m.nodes) {
        bool has_child = false;
        for (const auto& [c, p] : m.parent)
            if (p == v) has_child = true;
        if (!has_child && !m.leaf_label.count(v)) {
            m.leaf_label[v] = labels[rng() % labels.size()];
            m.connector.erase(v);
        }
    }
    return m;
}

} // namespace

TEST_CASE("connection model with empty connectors is edgeless") {
    auto m = bicomplement_model(3);
    for (auto& [v, c] : m.connector) c.clear();
    CHECK(eval_connection_model(m).edges.empty());
}

TEST_CASE("bi-complement of a matching from its connection model") {
    auto m = bicomplement_model(3);
    auto g = eval_connection_model(m);
    // leaves come in (a_i, b_i) sibling pairs: a_i ~ b_j iff i != j
    std::vector<std::pair<ElementId, ElementId>> pairs;
    for (int i = 0; i < 3; ++i) pairs.push_back({2 + 3 * i, 3 + 3 * i});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            bool adj = g.adjacent(pairs[i].first, pairs[j].second);
            CHECK(adj == (i != j));
        }
}

TEST_CASE("depth-1 model with full connector joins distinct-label pairs per the connector") {
    ConnectionModel m;
    m.nodes = {0, 1, 2, 3};
    m.parent = {{1, 0}, {2, 0}, {3, 0}};
    m.leaf_label = {{1, "a"}, {2, "a"}, {3, "b"}};
    m.connector[0] = {{"a", "a"}, {"a", "b"}, {"b", "a"}, {"b", "b"}};
    auto g = eval_connection_model(m);
    // oracle: enumerate leaf pairs
    for (ElementId x : {1, 2, 3})
        for (ElementId y : {1, 2, 3})
            if (x < y) CHECK(g.adjacent(x, y));
}

TEST_CASE("SC-depth of tiny graphs matches the paper's examples") {
    ColoredGraph one;
    one.add_vertex(0);
    CHECK(sc_depth_exact(one).depth == 0);
    CHECK(sc_depth_exact(complete_graph(4)).depth == 1);
    CHECK(sc_depth_exact(star_graph(3)).depth == 2);
}

TEST_CASE("SC-depth of P4 via brute force oracle") {
    auto res = sc_depth_exact(path_graph(4));
    // brute-force check: depth is minimal by re-running the solver at depth-1
    SCDepthSolver solver;
    CHECK_FALSE(solver.sc_leq(path_graph(4), res.depth - 1));
    CHECK(solver.sc_leq(path_graph(4), res.depth));
    CHECK(validate_sc_decomposition(res.decomposition, path_graph(4)));
}

TEST_CASE("disconnected graphs still consume a flip level") {
    ColoredGraph two_triangles;
    for (int i = 0; i < 6; ++i) two_triangles.add_vertex(i);
    for (int t = 0; t < 2; ++t)
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) two_triangles.add_edge(3 * t + i, 3 * t + j);
    CHECK(sc_depth_exact(complete_graph(3)).depth == 1);
    CHECK(sc_depth_exact(two_triangles).depth == 2);
}

TEST_CASE("witness decompositions reapply to the original graph") {
    std::mt19937 rng(7);
    for (int round = 0; round < 20; ++round) {
        auto g = random_graph(6, 0.4, rng);
        if (g.vertices.empty()) continue;
        auto res = sc_depth_exact(g);
        auto back = apply_sc_decomposition(res.decomposition);
        CHECK(back.vertices == g.vertices);
        CHECK(back.edges == g.edges);
        CHECK(validate_sc_decomposition(res.decomposition, g));
    }
}

TEST_CASE("validate flags mutated flip predicates") {
    auto g = star_graph(3);
    auto res = sc_depth_exact(g);
    int flips_checked = 0;
    for (std::size_t level = 0; level < res.decomposition.flip_sets.size(); ++level) {
        for (ElementId v : g.vertices) {
            SCDecomposition mutated = res.decomposition;
            if (mutated.flip_sets[level].count(v))
                mutated.flip_sets[level].erase(v);
            else
                mutated.flip_sets[level].insert(v);
            auto rebuilt = apply_sc_decomposition(mutated);
            bool same_graph = rebuilt.edges == g.edges;
            bool valid = validate_sc_decomposition(mutated, g);
            if (!same_graph) CHECK_FALSE(valid);
            ++flips_checked;
        }
    }
    CHECK(flips_checked > 0);
}

TEST_CASE("SC-depth is at most treedepth on a small corpus") {
    std::mt19937 rng(11);
    for (int round = 0; round < 25; ++round) {
        auto g = random_graph(6, 0.35, rng);
        CHECK(sc_depth_exact(g).depth <= treedepth_exact(g).depth);
    }
    for (auto& g : {path_graph(5), star_graph(4), complete_graph(5), cycle_graph(5)})
        CHECK(sc_depth_exact(g).depth <= treedepth_exact(g).depth);
}

TEST_CASE("quasi-path basics") {
    CHECK(longest_quasi_path(path_graph(4)).length >= 4); // induced path is a quasi-path
    ColoredGraph edge;
    edge.add_vertex(0);
    edge.add_vertex(1);
    edge.add_edge(0, 1);
    CHECK(longest_quasi_path(edge).length == 2);
}

TEST_CASE("quasi-path on C5 agrees with sequence enumeration") {
    auto g = cycle_graph(5);
    auto res = longest_quasi_path(g);
    CHECK(is_quasi_path(g, res.witness));
    // oracle: enumerate all distinct-vertex sequences
    std::vector<ElementId> vs(g.vertices.begin(), g.vertices.end());
    int best = 0;
    std::vector<ElementId> seq;
    std::set<ElementId> used;
    std::function<void()> rec = [&]() {
        if (is_quasi_path(g, seq)) best = std::max(best, (int)seq.size());
        for (ElementId v : vs) {
            if (used.count(v)) continue;
            used.insert(v);
            seq.push_back(v);
            rec();
            seq.pop_back();
            used.erase(v);
        }
    };
    rec();
    CHECK(res.length == best);
}

TEST_CASE("shrub bounds match the recurrences") {
    CHECK(shrub_path_bound(0, 1, 2) == 1);
    CHECK(quasi_path_bound(0, 1) == 1);
    CHECK(shrub_path_bound(1, 1, 2) == 5);
    CHECK(quasi_path_bound(1, 1) == 26);
    // recurrences symbol for symbol
    for (int h = 1; h <= 3; ++h)
        for (int m = 1; m <= 2; ++m) {
            CHECK(shrub_path_bound(h, m, 2) == (4 * 1 * m * m + 1) * shrub_path_bound(h - 1, m, 2));
            CHECK(quasi_path_bound(h, m) == (quasi_path_bound(h - 1, m) + 1) * (12 * m * m + 1));
        }
}

TEST_CASE("biclique exclusion ceilings hold on random connection models") {
    std::mt19937 rng(2024);
    int tested = 0;
    for (int round = 0; round < 300 && tested < 120; ++round) {
        auto m = random_model(rng, 1 + (int)(rng() % 3), 2, 9);
        ConnectionModel checked = m;
        try {
            checked.validate();
        } catch (const validation_error&) {
            continue;
        }
        auto g = eval_connection_model(checked);
        if (g.vertices.size() < 2) continue;
        if (has_biclique_subgraph(g, 2)) continue;
        int h = checked.height();
        int labels = (int)checked.labels().size();
        CHECK(longest_simple_path(g) <= shrub_path_bound(h, labels, 2));
        CHECK(longest_quasi_path(g).length <= quasi_path_bound(h, labels));
        ++tested;
    }
    CHECK(tested >= 100);
}

TEST_CASE("sc decomposition converts to a connection model of the same graph") {
    std::mt19937 rng(13);
    for (int round = 0; round < 15; ++round) {
        auto g = random_graph(5, 0.4, rng);
        auto res = sc_depth_exact(g);
        auto m = sc_to_connection_model(res.decomposition);
        auto back = eval_connection_model(m);
        CHECK(back.vertices == g.vertices);
        CHECK(back.edges == g.edges);
    }
}
