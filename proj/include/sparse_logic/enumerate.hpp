#pragma once

#include <random>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/canonical.hpp"
#include "sparse_logic/graph.hpp"
#include "sparse_logic/structure.hpp"

namespace sparse_logic {

// Signature spec for small-structure enumeration and random sweeps.
struct SignatureSpec {
    std::vector<std::pair<std::string, int>> relations; // name, arity
    std::vector<std::string> colors;                    // unary, serialized as colors
    std::vector<std::string> functions;
};

inline RelStructure empty_structure(const SignatureSpec& spec, int n) {
    RelStructure a;
    for (int i = 0; i < n; ++i) a.universe.insert(i);
    for (const auto& [name, arity] : spec.relations) a.add_relation(name, arity);
    for (const auto& name : spec.colors) {
        a.add_relation(name, 1);
        a.colors.insert(name);
    }
    for (const auto& name : spec.functions) a.add_function(name);
    return a;
}

// Every structure over the spec with universe {0..n-1}, n <= max_n.
inline std::vector<RelStructure> all_structures(const SignatureSpec& spec, int max_n) {
    std::vector<RelStructure> out;
    for (int n = 0; n <= max_n; ++n) {
        std::vector<RelStructure> partial{empty_structure(spec, n)};
        auto expand_relation = [&](const std::string& name, int arity) {
            std::vector<Tuple> tuples;
            std::vector<ElementId> idx(arity, 0);
            long count = 1;
            for (int i = 0; i < arity; ++i) count *= n;
            for (long code = 0; code < count; ++code) {
                long c = code;
                Tuple t(arity);
                for (int i = 0; i < arity; ++i) {
                    t[i] = (ElementId)(c % n);
                    c /= n;
                }
                tuples.push_back(std::move(t));
            }
            if (arity == 0) tuples.push_back({});
            std::vector<RelStructure> next;
            for (const auto& base : partial)
                for (std::size_t mask = 0; mask < (1u << tuples.size()); ++mask) {
                    RelStructure s = base;
                    for (std::size_t i = 0; i < tuples.size(); ++i)
                        if (mask & (1u << i)) s.relations[name].tuples.insert(tuples[i]);
                    next.push_back(std::move(s));
                }
            partial = std::move(next);
        };
        for (const auto& [name, arity] : spec.relations) expand_relation(name, arity);
        for (const auto& name : spec.colors) expand_relation(name, 1);
        for (const auto& name : spec.functions) {
            std::vector<RelStructure> next;
            for (const auto& base : partial) {
                // each element independently: undefined or one of n values
                std::vector<RelStructure> grow{base};
                for (int x = 0; x < n; ++x) {
                    std::vector<RelStructure> g2;
                    for (const auto& s : grow)
                        for (int y = -1; y < n; ++y) {
                            RelStructure s2 = s;
                            if (y >= 0) s2.set_function(name, x, y);
                            g2.push_back(std::move(s2));
                        }
                    grow = std::move(g2);
                }
                for (auto& s : grow) next.push_back(std::move(s));
            }
            partial = std::move(next);
        }
        for (auto& s : partial) out.push_back(std::move(s));
    }
    return out;
}

// All simple graphs on vertex set {0..n-1} (labeled enumeration).
inline std::vector<ColoredGraph> all_graphs(int n) {
    std::vector<Edge> slots;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) slots.push_back({i, j});
    std::vector<ColoredGraph> out;
    for (std::size_t mask = 0; mask < (1u << slots.size()); ++mask) {
        ColoredGraph g;
        for (int i = 0; i < n; ++i) g.add_vertex(i);
        for (std::size_t k = 0; k < slots.size(); ++k)
            if (mask & (1u << k)) g.add_edge(slots[k].first, slots[k].second);
        out.push_back(std::move(g));
    }
    return out;
}

// All simple graphs on <= max_n vertices up to isomorphism.
inline std::vector<ColoredGraph> all_graphs_up_to_iso(int max_n) {
    std::vector<ColoredGraph> out;
    std::set<std::string> seen;
    for (int n = 0; n <= max_n; ++n)
        for (auto& g : all_graphs(n))
            if (seen.insert(canonical_graph_code(g)).second) out.push_back(std::move(g));
    return out;
}

inline ColoredGraph random_graph(int n, double edge_prob, std::mt19937& rng) {
    ColoredGraph g;
    for (int i = 0; i < n; ++i) g.add_vertex(i);
    std::bernoulli_distribution coin(edge_prob);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (coin(rng)) g.add_edge(i, j);
    return g;
}

inline ColoredGraph path_graph(int n) {
    ColoredGraph g;
    for (int i = 0; i < n; ++i) g.add_vertex(i);
    for (int i = 0; i + 1 < n; ++i) g.add_edge(i, i + 1);
    return g;
}

inline ColoredGraph cycle_graph(int n) {
    ColoredGraph g = path_graph(n);
    if (n >= 3) g.add_edge(n - 1, 0);
    return g;
}

inline ColoredGraph star_graph(int leaves) {
    ColoredGraph g;
    g.add_vertex(0);
    for (int i = 1; i <= leaves; ++i) {
        g.add_vertex(i);
        g.add_edge(0, i);
    }
    return g;
}

inline ColoredGraph complete_graph(int n) {
    ColoredGraph g;
    for (int i = 0; i < n; ++i) g.add_vertex(i);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) g.add_edge(i, j);
    return g;
}

inline ColoredGraph complete_bipartite(int a, int b) {
    ColoredGraph g;
    for (int i = 0; i < a + b; ++i) g.add_vertex(i);
    for (int i = 0; i < a; ++i)
        for (int j = a; j < a + b; ++j) g.add_edge(i, j);
    return g;
}

} // namespace sparse_logic
