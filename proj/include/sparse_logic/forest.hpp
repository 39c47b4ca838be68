#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/graph.hpp"
#include "sparse_logic/structure.hpp"

namespace sparse_logic {

// A rooted forest in one of two encodings: an acyclic graph with a root
// predicate, or a node set with a partial parent map.  Node labels are named
// unary predicates either way.
struct RootedForest {
    enum class Encoding { RootPredicate, ParentMap };

    Encoding encoding = Encoding::ParentMap;
    std::set<ElementId> nodes;
    std::map<ElementId, ElementId> parent; // ParentMap: roots are outside the domain
    std::set<Edge> tree_edges;             // RootPredicate
    std::set<ElementId> roots;             // RootPredicate
    std::map<std::string, std::set<ElementId>> labels;

    bool operator==(const RootedForest&) const = default;

    static RootedForest from_parent_map(const std::set<ElementId>& nodes,
                                        const std::map<ElementId, ElementId>& parent) {
        RootedForest f;
        f.encoding = Encoding::ParentMap;
        f.nodes = nodes;
        f.parent = parent;
        f.validate();
        return f;
    }

    void validate() const {
        if (encoding == Encoding::ParentMap) {
            for (const auto& [c, p] : parent) {
                if (!nodes.count(c) || !nodes.count(p))
                    throw validation_error("parent map endpoint outside node set");
                if (c == p) throw validation_error("self-parent");
            }
            // acyclicity: walking up must terminate
            for (ElementId v : nodes) {
                std::set<ElementId> seen;
                ElementId cur = v;
                while (parent.count(cur)) {
                    if (!seen.insert(cur).second) throw validation_error("cycle in parent map");
                    cur = parent.at(cur);
                }
            }
        } else {
            ColoredGraph g;
            g.vertices = nodes;
            for (const auto& [u, v] : tree_edges) g.add_edge(u, v);
            auto comps = connected_components(g);
            if (g.edges.size() + comps.size() != nodes.size())
                throw validation_error("forest graph contains a cycle");
            for (ElementId r : roots)
                if (!nodes.count(r)) throw validation_error("root outside node set");
            for (const auto& c : comps) {
                int nroots = 0;
                for (ElementId v : c) nroots += roots.count(v);
                if (nroots != 1) throw validation_error("component must have exactly one root");
            }
        }
    }

    RootedForest to_parent_encoding() const {
        if (encoding == Encoding::ParentMap) return *this;
        RootedForest f;
        f.encoding = Encoding::ParentMap;
        f.nodes = nodes;
        f.labels = labels;
        // BFS down from the roots
        std::set<ElementId> visited(roots.begin(), roots.end());
        std::vector<ElementId> frontier(roots.begin(), roots.end());
        ColoredGraph g;
        g.vertices = nodes;
        for (const auto& [u, v] : tree_edges) g.add_edge(u, v);
        while (!frontier.empty()) {
            std::vector<ElementId> next;
            for (ElementId u : frontier)
                for (ElementId w : g.neighbors(u))
                    if (visited.insert(w).second) {
                        f.parent[w] = u;
                        next.push_back(w);
                    }
            frontier = std::move(next);
        }
        if (visited.size() != nodes.size()) throw validation_error("forest not covered by roots");
        return f;
    }

    RootedForest to_root_encoding() const {
        if (encoding == Encoding::RootPredicate) return *this;
        RootedForest f;
        f.encoding = Encoding::RootPredicate;
        f.nodes = nodes;
        f.labels = labels;
        for (const auto& [c, p] : parent) f.tree_edges.insert(make_edge(c, p));
        for (ElementId v : nodes)
            if (!parent.count(v)) f.roots.insert(v);
        return f;
    }

    std::set<ElementId> root_set() const {
        if (encoding == Encoding::RootPredicate) return roots;
        std::set<ElementId> out;
        for (ElementId v : nodes)
            if (!parent.count(v)) out.insert(v);
        return out;
    }

    // depth(root) = 0
    std::map<ElementId, int> depths() const {
        RootedForest f = to_parent_encoding();
        std::map<ElementId, int> d;
        std::function<int(ElementId)> depth_of = [&](ElementId v) -> int {
            auto it = d.find(v);
            if (it != d.end()) return it->second;
            int val = f.parent.count(v) ? depth_of(f.parent.at(v)) + 1 : 0;
            d[v] = val;
            return val;
        };
        for (ElementId v : nodes) depth_of(v);
        return d;
    }

    int depth() const {
        int m = 0;
        for (const auto& [v, d] : depths()) m = std::max(m, d);
        return m;
    }

    std::vector<ElementId> path_to_root(ElementId v) const {
        RootedForest f = to_parent_encoding();
        std::vector<ElementId> path{v};
        while (f.parent.count(v)) {
            v = f.parent.at(v);
            path.push_back(v);
        }
        return path; // v first, root last
    }

    // deepest common ancestor, or nullopt for nodes in different trees
    std::optional<ElementId> lca(ElementId x, ElementId y) const {
        auto px = path_to_root(x);
        auto py = path_to_root(y);
        std::set<ElementId> ax(px.begin(), px.end());
        for (ElementId v : py)
            if (ax.count(v)) return v;
        return std::nullopt;
    }

    std::set<ElementId> children(ElementId v) const {
        RootedForest f = to_parent_encoding();
        std::set<ElementId> out;
        for (const auto& [c, p] : f.parent)
            if (p == v) out.insert(c);
        return out;
    }
};

} // namespace sparse_logic
