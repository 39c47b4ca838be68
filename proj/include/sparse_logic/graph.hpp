#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sparse_logic/structure.hpp"

namespace sparse_logic {

using Edge = std::pair<ElementId, ElementId>;

inline Edge make_edge(ElementId u, ElementId v) {
    return u < v ? Edge{u, v} : Edge{v, u};
}

// A simple colored graph: symmetric irreflexive edge relation plus unary
// color predicates.  Normalization (dropping loops, symmetrizing) happens
// here at construction, never inside operations.
struct ColoredGraph {
    std::set<ElementId> vertices;
    std::set<Edge> edges; // stored with u < v
    std::map<std::string, std::set<ElementId>> colors;

    bool operator==(const ColoredGraph&) const = default;

    void add_vertex(ElementId v) { vertices.insert(v); }

    void add_edge(ElementId u, ElementId v) {
        if (u == v) return; // loops dropped
        if (!vertices.count(u) || !vertices.count(v))
            throw validation_error("edge endpoint outside vertex set");
        edges.insert(make_edge(u, v));
    }

    bool adjacent(ElementId u, ElementId v) const {
        if (u == v) return false;
        return edges.count(make_edge(u, v)) != 0;
    }

    std::set<ElementId> neighbors(ElementId v) const {
        std::set<ElementId> out;
        for (const auto& [a, b] : edges) {
            if (a == v) out.insert(b);
            if (b == v) out.insert(a);
        }
        return out;
    }

    std::size_t size() const { return vertices.size(); }

    ColoredGraph induced(const std::set<ElementId>& x) const {
        ColoredGraph g;
        for (ElementId v : x) {
            if (!vertices.count(v)) throw validation_error("induced: X not a subset of V(G)");
            g.vertices.insert(v);
        }
        for (const auto& e : edges)
            if (x.count(e.first) && x.count(e.second)) g.edges.insert(e);
        for (const auto& [name, set] : colors) {
            auto& c = g.colors[name];
            for (ElementId v : set)
                if (x.count(v)) c.insert(v);
        }
        return g;
    }
};

// Structure view of a colored graph: one symmetric binary relation E plus a
// unary predicate per color.
inline RelStructure graph_to_structure(const ColoredGraph& g, const std::string& edge_symbol = "E") {
    RelStructure a;
    a.universe = g.vertices;
    a.add_relation(edge_symbol, 2);
    for (const auto& [u, v] : g.edges) {
        a.add_tuple(edge_symbol, {u, v});
        a.add_tuple(edge_symbol, {v, u});
    }
    for (const auto& [name, set] : g.colors) {
        a.add_relation(name, 1);
        a.colors.insert(name);
        for (ElementId v : set) a.add_tuple(name, {v});
    }
    return a;
}

inline ColoredGraph structure_to_graph(const RelStructure& a, const std::string& edge_symbol = "E") {
    ColoredGraph g;
    g.vertices = a.universe;
    auto it = a.relations.find(edge_symbol);
    if (it != a.relations.end()) {
        if (it->second.arity != 2) throw validation_error("edge relation must be binary");
        for (const auto& t : it->second.tuples) g.add_edge(t[0], t[1]);
    }
    for (const auto& [name, rel] : a.relations) {
        if (name == edge_symbol || rel.arity != 1) continue;
        auto& c = g.colors[name];
        for (const auto& t : rel.tuples) c.insert(t[0]);
    }
    return g;
}

// Gaifman graph: u ~ v iff they appear together in some relation tuple or
// f(u) = v or f(v) = u for some partial function f.  Unary predicates are
// carried over as colors.
inline ColoredGraph gaifman_graph(const RelStructure& a) {
    ColoredGraph g;
    g.vertices = a.universe;
    for (const auto& [name, rel] : a.relations) {
        if (rel.arity == 1) {
            auto& c = g.colors[name];
            for (const auto& t : rel.tuples) c.insert(t[0]);
            continue;
        }
        for (const auto& t : rel.tuples)
            for (std::size_t i = 0; i < t.size(); ++i)
                for (std::size_t j = i + 1; j < t.size(); ++j)
                    if (t[i] != t[j]) g.add_edge(t[i], t[j]);
    }
    for (const auto& [name, fn] : a.functions)
        for (const auto& [u, v] : fn)
            if (u != v) g.add_edge(u, v);
    return g;
}

// Flip adjacency within W: symmetric difference with the clique on W.
inline ColoredGraph flip_within(const ColoredGraph& g, const std::set<ElementId>& w) {
    for (ElementId v : w)
        if (!g.vertices.count(v)) throw validation_error("flip_within: W not a subset of V(G)");
    ColoredGraph out = g;
    std::vector<ElementId> ws(w.begin(), w.end());
    for (std::size_t i = 0; i < ws.size(); ++i)
        for (std::size_t j = i + 1; j < ws.size(); ++j) {
            Edge e = make_edge(ws[i], ws[j]);
            auto it = out.edges.find(e);
            if (it != out.edges.end())
                out.edges.erase(it);
            else
                out.edges.insert(e);
        }
    return out;
}

// Connected components in canonical order (each block sorted, blocks ordered
// by minimum element id).
inline std::vector<std::set<ElementId>> connected_components(const ColoredGraph& g) {
    std::map<ElementId, ElementId> rep; // union-find by map
    std::function<ElementId(ElementId)> find = [&](ElementId v) {
        while (rep[v] != v) {
            rep[v] = rep[rep[v]];
            v = rep[v];
        }
        return v;
    };
    for (ElementId v : g.vertices) rep[v] = v;
    for (const auto& [u, v] : g.edges) {
        ElementId ru = find(u), rv = find(v);
        if (ru != rv) rep[std::max(ru, rv)] = std::min(ru, rv);
    }
    std::map<ElementId, std::set<ElementId>> blocks;
    for (ElementId v : g.vertices) blocks[find(v)].insert(v);
    std::vector<std::set<ElementId>> out;
    for (auto& [r, b] : blocks) out.push_back(std::move(b));
    return out;
}

inline std::set<ElementId> component_of(const ColoredGraph& g, ElementId v) {
    for (auto& c : connected_components(g))
        if (c.count(v)) return c;
    throw validation_error("component_of: vertex not in graph");
}

} // namespace sparse_logic
