#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/budget.hpp"
#include "sparse_logic/canonical.hpp"
#include "sparse_logic/forest.hpp"
#include "sparse_logic/graph.hpp"
#include "sparse_logic/json_io.hpp"
#include "sparse_logic/structure.hpp"

namespace sparse_logic {

// Treedepth uses the node-count convention: a single vertex has treedepth 1
// and td = max vertices on a root-to-leaf path of the witness forest.  Forest
// depth elsewhere stays edge-count; the two are reconciled by td = depth + 1.
struct TreedepthResult {
    int depth = 0;        // node-count treedepth
    RootedForest forest;  // witness: every edge joins comparable nodes
};

inline bool validate_td_decomposition(const ColoredGraph& g, const RootedForest& f, int claimed) {
    if (f.nodes != g.vertices) return false;
    auto depths = f.depths();
    for (const auto& [u, v] : g.edges) {
        auto l = f.lca(u, v);
        if (!l || (*l != u && *l != v)) return false; // not ancestor-related
    }
    int max_nodes = 0;
    for (const auto& [v, d] : depths) max_nodes = std::max(max_nodes, d + 1);
    return max_nodes <= claimed;
}

namespace detail {

struct TdSolver {
    std::vector<ElementId> verts;
    std::vector<uint32_t> adj; // adjacency bitmasks
    std::map<uint32_t, int> memo;
    std::map<uint32_t, ElementId> chosen_root;

    uint32_t component_of(uint32_t mask, int start) const {
        uint32_t comp = 0, frontier = 1u << start;
        while (frontier) {
            comp |= frontier;
            uint32_t next = 0;
            for (int i = 0; i < (int)verts.size(); ++i)
                if (frontier & (1u << i)) next |= adj[i] & mask & ~comp;
            frontier = next;
        }
        return comp;
    }

    int solve(uint32_t mask) {
        if (mask == 0) return 0;
        auto it = memo.find(mask);
        if (it != memo.end()) return it->second;
        // split into components
        int first = -1;
        for (int i = 0; i < (int)verts.size(); ++i)
            if (mask & (1u << i)) {
                first = i;
                break;
            }
        uint32_t comp = component_of(mask, first);
        int result;
        if (comp != mask) {
            result = std::max(solve(comp), solve(mask & ~comp));
        } else if ((mask & (mask - 1)) == 0) {
            result = 1; // single vertex
        } else {
            result = (int)verts.size() + 1;
            ElementId best = -1;
            for (int i = 0; i < (int)verts.size(); ++i) {
                if (!(mask & (1u << i))) continue;
                int cand = 1 + solve(mask & ~(1u << i));
                if (cand < result) {
                    result = cand;
                    best = verts[i];
                }
            }
            chosen_root[mask] = best;
        }
        memo[mask] = result;
        return result;
    }

    void build_forest(uint32_t mask, std::map<ElementId, ElementId>& parent,
                      std::set<ElementId>& roots, ElementId attach) {
        if (mask == 0) return;
        int first = -1;
        for (int i = 0; i < (int)verts.size(); ++i)
            if (mask & (1u << i)) {
                first = i;
                break;
            }
        uint32_t comp = component_of(mask, first);
        if (comp != mask) {
            build_forest(comp, parent, roots, attach);
            build_forest(mask & ~comp, parent, roots, attach);
            return;
        }
        ElementId root;
        if ((mask & (mask - 1)) == 0) {
            root = verts[first];
        } else {
            solve(mask);
            root = chosen_root.at(mask);
        }
        if (attach >= 0)
            parent[root] = attach;
        else
            roots.insert(root);
        int root_idx = (int)(std::find(verts.begin(), verts.end(), root) - verts.begin());
        build_forest(mask & ~(1u << root_idx), parent, roots, root);
    }
};

} // namespace detail

inline TreedepthResult treedepth_exact(const ColoredGraph& g,
                                       const Budget& budget = default_budget()) {
    if ((int)g.vertices.size() > budget.max_universe_exact)
        throw capacity_error("treedepth_exact universe budget exceeded");
    detail::TdSolver solver;
    solver.verts.assign(g.vertices.begin(), g.vertices.end());
    solver.adj.assign(solver.verts.size(), 0);
    std::map<ElementId, int> idx;
    for (int i = 0; i < (int)solver.verts.size(); ++i) idx[solver.verts[i]] = i;
    for (const auto& [u, v] : g.edges) {
        solver.adj[idx.at(u)] |= 1u << idx.at(v);
        solver.adj[idx.at(v)] |= 1u << idx.at(u);
    }
    uint32_t full = solver.verts.empty() ? 0 : (uint32_t)((1ull << solver.verts.size()) - 1);
    TreedepthResult res;
    res.depth = solver.solve(full);
    std::map<ElementId, ElementId> parent;
    std::set<ElementId> roots;
    solver.build_forest(full, parent, roots, -1);
    res.forest = RootedForest::from_parent_map(g.vertices, parent);
    return res;
}

// DFS forest: starts from the smallest unvisited id, visits neighbors in
// ascending id order.  Every edge of G joins an ancestor-descendant pair.
inline RootedForest dfs_forest(const ColoredGraph& g) {
    std::map<ElementId, ElementId> parent;
    std::set<ElementId> visited;
    for (ElementId root : g.vertices) {
        if (visited.count(root)) continue;
        std::vector<ElementId> stack{root};
        visited.insert(root);
        std::function<void(ElementId)> visit = [&](ElementId v) {
            for (ElementId w : g.neighbors(v)) {
                if (visited.count(w)) continue;
                visited.insert(w);
                parent[w] = v;
                visit(w);
            }
        };
        visit(root);
    }
    return RootedForest::from_parent_map(g.vertices, parent);
}

// ---------------------------------------------------------------------------
// Forest encoding of bounded-treedepth structures: label every node of a DFS
// forest of the Gaifman graph by the full induced substructure on its
// ancestor path, with the ancestor at depth i renamed to element i.
// ---------------------------------------------------------------------------

inline std::string ancestor_type_label(const RelStructure& a, const std::vector<ElementId>& path) {
    std::map<ElementId, ElementId> rename;
    for (std::size_t i = 0; i < path.size(); ++i) rename[path[i]] = (ElementId)i;
    std::set<ElementId> keep(path.begin(), path.end());
    RelStructure sub = induced_substructure(a, keep);
    RelStructure renamed;
    for (std::size_t i = 0; i < path.size(); ++i) renamed.universe.insert((ElementId)i);
    renamed.colors = sub.colors;
    for (const auto& [name, rel] : sub.relations) {
        renamed.relations[name].arity = rel.arity;
        for (const auto& t : rel.tuples) {
            Tuple m;
            for (ElementId v : t) m.push_back(rename.at(v));
            renamed.relations[name].tuples.insert(m);
        }
    }
    for (const auto& [name, fn] : sub.functions) {
        renamed.functions[name];
        for (const auto& [x, y] : fn) renamed.functions[name][rename.at(x)] = rename.at(y);
    }
    return structure_to_json(renamed).dump();
}

inline RootedForest encode_btd_forest(const RelStructure& a, int d) {
    ColoredGraph g = gaifman_graph(a);
    RootedForest f = dfs_forest(g);
    auto depths = f.depths();
    long limit = 1;
    for (int i = 0; i < d; ++i) limit *= 2;
    for (const auto& [v, dep] : depths)
        if (dep + 1 > limit)
            throw contract_error("DFS forest deeper than 2^d: treedepth bound violated");
    RootedForest out = f;
    for (ElementId v : f.nodes) {
        auto path = f.path_to_root(v); // v first, root last
        std::reverse(path.begin(), path.end());
        out.labels["B" + ancestor_type_label(a, path)].insert(v);
    }
    return out;
}

inline RelStructure decode_btd_forest(const RootedForest& f) {
    RelStructure out;
    out.universe = f.nodes;
    auto depths = f.depths();
    for (ElementId v : f.nodes) {
        std::string label;
        for (const auto& [name, set] : f.labels)
            if (name.rfind("B", 0) == 0 && set.count(v)) {
                if (!label.empty()) throw validation_error("node carries two type labels");
                label = name.substr(1);
            }
        if (label.empty()) throw validation_error("node missing its type label");
        RelStructure b = structure_from_json(json::parse(label));
        auto path = f.path_to_root(v);
        std::reverse(path.begin(), path.end()); // root first; path[i] at depth i
        const int k = depths.at(v);
        if ((int)b.universe.size() != k + 1) throw validation_error("type label has wrong depth");
        for (const auto& [name, rel] : b.relations) {
            if (!out.relations.count(name)) out.relations[name].arity = rel.arity;
            if (b.colors.count(name)) out.colors.insert(name);
            for (const auto& t : rel.tuples) {
                int mx = t.empty() ? 0 : *std::max_element(t.begin(), t.end());
                if (!t.empty() && mx != k) continue; // recorded at the deeper node
                if (t.empty() && k != 0) continue;   // 0-ary facts recorded at roots
                Tuple mapped;
                for (ElementId i : t) mapped.push_back(path[i]);
                out.relations[name].tuples.insert(mapped);
            }
        }
        for (const auto& [name, fn] : b.functions) {
            out.functions[name];
            for (const auto& [x, y] : fn) {
                if (std::max(x, y) != k) continue;
                out.functions[name][path[x]] = path[y];
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// p-treedepth colorings and low treedepth covers
// ---------------------------------------------------------------------------

struct TreedepthCertificate {
    RootedForest forest;
    int depth = 0; // node-count bound certified by the forest
};

struct Cover {
    int p = 1;
    std::vector<std::set<ElementId>> members;
    std::vector<TreedepthCertificate> certificates; // parallel to members
    std::map<ElementId, int> coloring;              // the p-treedepth coloring used
    std::map<ElementId, int> refinement;            // Appendix-C style refinement xi
    bool certified = true;

    // every <= p vertices inside one member (exhaustive check)
    bool p_subset_check(const ColoredGraph& g, int check_p = -1) const {
        if (check_p < 0) check_p = p;
        std::vector<ElementId> vs(g.vertices.begin(), g.vertices.end());
        std::vector<int> pick;
        std::function<bool(std::size_t)> rec = [&](std::size_t start) {
            if ((int)pick.size() == check_p) {
                for (const auto& m : members) {
                    bool inside = true;
                    for (int i : pick)
                        if (!m.count(vs[i])) {
                            inside = false;
                            break;
                        }
                    if (inside) return true;
                }
                return false;
            }
            for (std::size_t i = start; i < vs.size(); ++i) {
                pick.push_back((int)i);
                if (!rec(i + 1)) return false;
                pick.pop_back();
            }
            return true;
        };
        if (vs.empty()) return true;
        return rec(0);
    }
};

// Cached treedepth value keyed by canonical code; the coloring searches ask
// for the same small unions over and over.
inline int treedepth_cached(const ColoredGraph& g, const Budget& budget = default_budget()) {
    if (g.vertices.size() <= 1) return (int)g.vertices.size();
    if (g.edges.empty()) return 1;
    ColoredGraph plain;
    plain.vertices = g.vertices;
    plain.edges = g.edges;
    static std::map<std::string, int> cache;
    auto code = canonical_graph_code(plain);
    auto it = cache.find(code);
    if (it != cache.end()) return it->second;
    int depth = treedepth_exact(plain, budget).depth;
    cache.emplace(std::move(code), depth);
    return depth;
}

namespace detail {

// td certificate for a vertex set, exact when small enough, DFS witness
// otherwise (a DFS forest is itself a treedepth decomposition).
inline TreedepthCertificate certify_treedepth(const ColoredGraph& g, const std::set<ElementId>& u,
                                              const Budget& budget) {
    ColoredGraph sub = g.induced(u);
    ColoredGraph plain; // certificates ignore colors
    plain.vertices = sub.vertices;
    plain.edges = sub.edges;
    TreedepthCertificate cert;
    if ((int)u.size() <= budget.max_universe_exact) {
        auto res = treedepth_exact(plain, budget);
        cert.forest = res.forest;
        cert.depth = res.depth;
    } else {
        cert.forest = dfs_forest(plain);
        cert.depth = cert.forest.depth() + 1;
    }
    return cert;
}

// checks whether every union of i <= p classes among `classes` induces
// treedepth <= i; restricted to unions containing `must_include` when >= 0
inline bool p_treedepth_property(const ColoredGraph& g, const std::map<ElementId, int>& coloring,
                                 int p, int must_include, const Budget& budget) {
    std::map<int, std::set<ElementId>> classes;
    for (const auto& [v, c] : coloring) classes[c].insert(v);
    std::vector<int> ids;
    for (const auto& [c, set] : classes) ids.push_back(c);
    std::vector<int> pick;
    bool ok = true;
    std::function<void(std::size_t, int)> rec = [&](std::size_t start, int depth_left) {
        if (!ok) return;
        if (!pick.empty()) {
            if (must_include >= 0 &&
                std::find(pick.begin(), pick.end(), must_include) == pick.end() &&
                depth_left == 0)
                return;
            bool has_must = must_include < 0 ||
                            std::find(pick.begin(), pick.end(), must_include) != pick.end();
            if (has_must) {
                std::set<ElementId> u;
                for (int c : pick) u.insert(classes[c].begin(), classes[c].end());
                ColoredGraph sub;
                sub.vertices = u;
                for (const auto& e : g.edges)
                    if (u.count(e.first) && u.count(e.second)) sub.edges.insert(e);
                if (pick.size() == 1) {
                    if (!sub.edges.empty()) { // td <= 1 means edgeless
                        ok = false;
                        return;
                    }
                } else if ((int)u.size() <= budget.max_universe_exact) {
                    if (treedepth_cached(sub, budget) > (int)pick.size()) {
                        ok = false;
                        return;
                    }
                } else {
                    ok = false; // cannot certify
                    return;
                }
            }
        }
        if (depth_left == 0) return;
        for (std::size_t i = start; i < ids.size() && ok; ++i) {
            pick.push_back(ids[i]);
            rec(i + 1, depth_left - 1);
            pick.pop_back();
        }
    };
    rec(0, p);
    return ok;
}

// exact search for a p-treedepth coloring with at most max_colors colors
inline bool exact_coloring_search(const ColoredGraph& g, int p, int max_colors,
                                  std::map<ElementId, int>& coloring, const Budget& budget) {
    std::vector<ElementId> vs(g.vertices.begin(), g.vertices.end());
    std::function<bool(std::size_t, int)> rec = [&](std::size_t i, int used) {
        if (i == vs.size()) return true;
        for (int c = 0; c < std::min(used + 1, max_colors); ++c) {
            coloring[vs[i]] = c;
            if (p_treedepth_property(g, coloring, p, c, budget) &&
                rec(i + 1, std::max(used, c + 1)))
                return true;
            coloring.erase(vs[i]);
        }
        return false;
    };
    return rec(0, 0);
}

// greedy coloring on a degeneracy order; no optimality guarantee
inline std::map<ElementId, int> greedy_coloring(const ColoredGraph& g, int p, const Budget& budget) {
    // degeneracy order: repeatedly remove a minimum-degree vertex
    std::map<ElementId, std::set<ElementId>> adj;
    for (ElementId v : g.vertices) adj[v] = g.neighbors(v);
    std::vector<ElementId> order;
    std::set<ElementId> removed;
    while (order.size() < g.vertices.size()) {
        ElementId best = -1;
        std::size_t best_deg = SIZE_MAX;
        for (const auto& [v, nb] : adj) {
            if (removed.count(v)) continue;
            std::size_t deg = 0;
            for (ElementId w : nb)
                if (!removed.count(w)) ++deg;
            if (deg < best_deg || (deg == best_deg && v < best)) {
                best_deg = deg;
                best = v;
            }
        }
        order.push_back(best);
        removed.insert(best);
    }
    std::reverse(order.begin(), order.end());
    std::map<ElementId, int> coloring;
    int next_fresh = 0;
    for (ElementId v : order) {
        bool placed = false;
        for (int c = 0; c < next_fresh && !placed; ++c) {
            coloring[v] = c;
            if (p_treedepth_property(g, coloring, p, c, budget))
                placed = true;
            else
                coloring.erase(v);
        }
        if (!placed) coloring[v] = next_fresh++;
    }
    return coloring;
}

} // namespace detail

// A p-treedepth coloring converted to a p-cover whose members carry
// treedepth certificates.  Exact coloring search on tiny graphs, greedy on a
// degeneracy order otherwise; singleton colors are always a valid fallback.
inline Cover low_treedepth_cover(const ColoredGraph& g, int p,
                                 const Budget& budget = default_budget()) {
    if (p < 1) throw contract_error("cover parameter p must be at least 1");
    Cover cover;
    cover.p = p;
    std::map<ElementId, int> coloring;
    bool found = false;
    if ((int)g.vertices.size() <= 8) {
        for (int n_colors = 1; n_colors <= 4 && !found; ++n_colors)
            found = detail::exact_coloring_search(g, p, n_colors, coloring, budget);
    }
    if (!found) {
        coloring = detail::greedy_coloring(g, p, budget);
        if (!detail::p_treedepth_property(g, coloring, p, -1, budget)) {
            // certified fallback: one color per vertex
            coloring.clear();
            int c = 0;
            for (ElementId v : g.vertices) coloring[v] = c++;
        }
    }
    cover.coloring = coloring;
    int n_colors = 0;
    for (const auto& [v, c] : coloring) n_colors = std::max(n_colors, c + 1);

    // members: unions of exactly p color classes (all classes if fewer)
    std::vector<int> ids(n_colors);
    for (int i = 0; i < n_colors; ++i) ids[i] = i;
    std::vector<int> pick;
    std::function<void(std::size_t)> emit = [&](std::size_t start) {
        if ((int)pick.size() == std::min(p, n_colors)) {
            std::set<ElementId> u;
            for (const auto& [v, c] : coloring)
                if (std::find(pick.begin(), pick.end(), c) != pick.end()) u.insert(v);
            cover.members.push_back(std::move(u));
            return;
        }
        for (std::size_t i = start; i < ids.size(); ++i) {
            pick.push_back(ids[i]);
            emit(i + 1);
            pick.pop_back();
        }
    };
    if (n_colors > 0) emit(0);
    if (cover.members.empty()) cover.members.push_back({});
    std::sort(cover.members.begin(), cover.members.end());
    for (const auto& m : cover.members) {
        auto cert = detail::certify_treedepth(g, m, budget);
        if (cert.depth > p && (int)m.size() <= budget.max_universe_exact) cover.certified = false;
        cover.certificates.push_back(std::move(cert));
    }

    // Appendix-C refinement: color = set of (p-class-set, depth in its
    // decomposition) pairs, canonicalized to dense ints
    std::map<std::string, int> dense;
    for (ElementId v : g.vertices) {
        std::string signature;
        for (std::size_t mi = 0; mi < cover.members.size(); ++mi) {
            if (!cover.members[mi].count(v)) continue;
            auto depths = cover.certificates[mi].forest.depths();
            signature += std::to_string(mi) + ":" + std::to_string(depths.at(v)) + ";";
        }
        auto [it, fresh] = dense.emplace(signature, (int)dense.size());
        cover.refinement[v] = it->second;
    }
    return cover;
}

} // namespace sparse_logic
