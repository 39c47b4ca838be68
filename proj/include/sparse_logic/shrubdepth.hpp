#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/budget.hpp"
#include "sparse_logic/canonical.hpp"
#include "sparse_logic/forest.hpp"
#include "sparse_logic/graph.hpp"

namespace sparse_logic {

// ---------------------------------------------------------------------------
// Connection models: rooted labeled trees whose leaves are vertices; two
// leaves are adjacent iff their label pair sits in the connector of their
// least common ancestor.
// ---------------------------------------------------------------------------

struct ConnectionModel {
    std::set<ElementId> nodes;
    std::map<ElementId, ElementId> parent; // root outside the domain
    std::map<ElementId, std::string> leaf_label;
    std::map<ElementId, std::set<std::pair<std::string, std::string>>> connector;

    RootedForest tree() const { return RootedForest::from_parent_map(nodes, parent); }

    std::set<ElementId> leaves() const {
        std::set<ElementId> internal;
        for (const auto& [c, p] : parent) internal.insert(p);
        std::set<ElementId> out;
        for (ElementId v : nodes)
            if (!internal.count(v)) out.insert(v);
        return out;
    }

    int height() const {
        auto t = tree();
        auto depths = t.depths();
        int h = 0;
        for (ElementId v : leaves()) h = std::max(h, depths.at(v));
        return h;
    }

    std::set<std::string> labels() const {
        std::set<std::string> out;
        for (const auto& [v, l] : leaf_label) out.insert(l);
        return out;
    }

    void validate() const {
        auto t = tree();
        t.validate();
        if (t.root_set().size() != 1) throw validation_error("connection model must be a tree");
        auto ls = leaves();
        for (ElementId v : ls)
            if (!leaf_label.count(v)) throw validation_error("leaf without label");
        for (const auto& [v, l] : leaf_label)
            if (!ls.count(v)) throw validation_error("internal node carries a leaf label");
        for (const auto& [v, c] : connector) {
            if (ls.count(v) && !c.empty())
                throw validation_error("leaf carries a connector");
            for (const auto& [a, b] : c)
                if (!c.count({b, a})) throw validation_error("connector must be symmetric");
        }
    }
};

// Leaves become vertices; adjacency is decided by the connector at the lca.
inline ColoredGraph eval_connection_model(const ConnectionModel& m) {
    m.validate();
    auto t = m.tree();
    ColoredGraph g;
    auto ls = m.leaves();
    for (ElementId v : ls) g.add_vertex(v);
    for (ElementId x : ls)
        for (ElementId y : ls) {
            if (x >= y) continue;
            auto v = t.lca(x, y);
            if (!v) continue;
            auto it = m.connector.find(*v);
            if (it == m.connector.end()) continue;
            if (it->second.count({m.leaf_label.at(x), m.leaf_label.at(y)})) g.add_edge(x, y);
        }
    return g;
}

// ---------------------------------------------------------------------------
// SC-depth: recursive subset-complementation depth, with witnessing
// decompositions (rooted tree of depth d, leaves = V(G), flip predicates
// W_0..W_{d-1} used at levels 0..d-1).
// ---------------------------------------------------------------------------

struct SCDecomposition {
    std::set<ElementId> nodes;
    std::map<ElementId, ElementId> parent;
    int depth = 0;
    std::vector<std::set<ElementId>> flip_sets; // W_ell for ell = 0..depth-1

    RootedForest tree() const { return RootedForest::from_parent_map(nodes, parent); }

    std::set<ElementId> leaves() const {
        std::set<ElementId> internal;
        for (const auto& [c, p] : parent) internal.insert(p);
        std::set<ElementId> out;
        for (ElementId v : nodes)
            if (!internal.count(v)) out.insert(v);
        return out;
    }

    void validate_shape() const {
        auto t = tree();
        t.validate();
        if ((int)flip_sets.size() != depth)
            throw validation_error("decomposition of depth d needs d flip sets");
        if (t.root_set().size() != 1 && !(depth == 0 && nodes.size() == 1))
            throw validation_error("SC-decomposition must be a tree");
        auto depths = t.depths();
        auto ls = leaves();
        for (ElementId v : ls)
            if (depths.at(v) != depth)
                throw validation_error("every leaf must sit at depth d");
        for (const auto& w : flip_sets)
            for (ElementId v : w)
                if (!ls.count(v)) throw validation_error("flip predicates select leaves only");
    }
};

namespace detail {

inline ColoredGraph apply_sc_node(const SCDecomposition& d, const RootedForest& t, ElementId node,
                                  int level) {
    // leaves of the subtree rooted at `node`
    std::function<void(ElementId, std::set<ElementId>&)> collect = [&](ElementId u,
                                                                       std::set<ElementId>& out) {
        auto kids = t.children(u);
        if (kids.empty()) {
            out.insert(u);
            return;
        }
        for (ElementId k : kids) collect(k, out);
    };
    auto kids = t.children(node);
    if (kids.empty()) {
        ColoredGraph g;
        g.add_vertex(node);
        return g;
    }
    ColoredGraph merged;
    for (ElementId k : kids) {
        auto sub = apply_sc_node(d, t, k, level + 1);
        for (ElementId v : sub.vertices) merged.add_vertex(v);
        for (const auto& e : sub.edges) merged.edges.insert(e);
    }
    std::set<ElementId> w;
    for (ElementId v : merged.vertices)
        if (level < (int)d.flip_sets.size() && d.flip_sets[level].count(v)) w.insert(v);
    return flip_within(merged, w);
}

} // namespace detail

// Reconstruct the unique graph an SC-decomposition decomposes.
inline ColoredGraph apply_sc_decomposition(const SCDecomposition& d) {
    d.validate_shape();
    auto t = d.tree();
    auto roots = t.root_set();
    if (roots.size() != 1) {
        if (d.nodes.size() == 1) {
            ColoredGraph g;
            g.add_vertex(*d.nodes.begin());
            return g;
        }
        throw validation_error("SC-decomposition must be a tree");
    }
    return detail::apply_sc_node(d, t, *roots.begin(), 0);
}

// Full validity: shape, the component condition at every level, and
// agreement with G.
inline bool validate_sc_decomposition(const SCDecomposition& d, const ColoredGraph& g,
                                      std::string* why = nullptr) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    try {
        d.validate_shape();
    } catch (const validation_error& e) {
        return fail(e.what());
    }
    if (d.leaves() != g.vertices) return fail("leaf set differs from V(G)");
    auto t = d.tree();
    std::function<bool(ElementId, const ColoredGraph&, int)> check =
        [&](ElementId node, const ColoredGraph& cur, int level) -> bool {
        auto kids = t.children(node);
        if (kids.empty())
            return cur.vertices.size() == 1 && cur.vertices.count(node) != 0;
        std::set<ElementId> w;
        for (ElementId v : cur.vertices)
            if (level < (int)d.flip_sets.size() && d.flip_sets[level].count(v)) w.insert(v);
        auto flipped = flip_within(cur, w);
        auto comps = connected_components(flipped);
        // children must correspond exactly to the components
        std::map<ElementId, std::set<ElementId>> child_leaves;
        for (ElementId k : kids) {
            std::function<void(ElementId)> collect = [&](ElementId u) {
                auto ks = t.children(u);
                if (ks.empty()) {
                    child_leaves[k].insert(u);
                    return;
                }
                for (ElementId x : ks) collect(x);
            };
            collect(k);
        }
        std::set<std::set<ElementId>> comp_set(comps.begin(), comps.end());
        std::set<std::set<ElementId>> child_set;
        for (const auto& [k, s] : child_leaves) child_set.insert(s);
        if (comp_set != child_set) return false;
        for (const auto& [k, s] : child_leaves)
            if (!check(k, flipped.induced(s), level + 1)) return false;
        return true;
    };
    auto roots = t.root_set();
    if (roots.size() != 1) return d.nodes.size() == 1 && g.vertices.size() == 1;
    ColoredGraph plain;
    plain.vertices = g.vertices;
    plain.edges = g.edges;
    if (!check(*roots.begin(), plain, 0)) return fail("component structure mismatch");
    return true;
}

// ---------------------------------------------------------------------------
// Exact SC-depth by exhaustive flip-set search with memoization on canonical
// graph codes.
// ---------------------------------------------------------------------------

class SCDepthSolver {
public:
    explicit SCDepthSolver(Budget budget = default_budget()) : budget_(budget) {}

    bool sc_leq(const ColoredGraph& g, int d) {
        ColoredGraph plain;
        plain.vertices = g.vertices;
        plain.edges = g.edges;
        return leq(plain, d);
    }

    int sc_depth(const ColoredGraph& g) {
        if ((int)g.vertices.size() > budget_.max_universe_sc)
            throw capacity_error("sc_depth_exact universe budget exceeded");
        if (g.vertices.empty()) throw contract_error("SC-depth of the empty graph is undefined");
        for (int d = 0;; ++d)
            if (sc_leq(g, d)) return d;
    }

    // witnessing decomposition of the exact depth (or any depth >= it)
    SCDecomposition witness(const ColoredGraph& g, int d) {
        if (!sc_leq(g, d)) throw contract_error("graph does not have SC-depth <= d");
        SCDecomposition out;
        out.depth = d;
        out.flip_sets.assign(d, {});
        ElementId next_internal = 0;
        for (ElementId v : g.vertices) next_internal = std::max(next_internal, v + 1);
        ColoredGraph plain;
        plain.vertices = g.vertices;
        plain.edges = g.edges;
        build(plain, d, 0, -1, out, next_internal);
        for (ElementId v : g.vertices) out.nodes.insert(v);
        return out;
    }

private:
    Budget budget_;
    std::map<std::pair<std::string, int>, bool> memo_;

    bool leq(const ColoredGraph& g, int d) {
        if (g.vertices.size() == 1) return true;
        if (d <= 0) return false;
        auto key = std::make_pair(canonical_graph_code(g), d);
        auto it = memo_.find(key);
        if (it != memo_.end()) return it->second;
        bool ok = find_flip(g, d).has_value();
        memo_[key] = ok;
        return ok;
    }

    // smallest flip set (by size then lexicographic) making all components
    // of the flipped graph SC-depth <= d-1
    std::optional<std::set<ElementId>> find_flip(const ColoredGraph& g, int d) {
        std::vector<ElementId> vs(g.vertices.begin(), g.vertices.end());
        const std::size_t n = vs.size();
        std::vector<std::vector<uint32_t>> masks_by_size(n + 1);
        for (uint32_t mask = 0; mask < (1u << n); ++mask)
            masks_by_size[__builtin_popcount(mask)].push_back(mask);
        for (std::size_t size = 0; size <= n; ++size)
            for (uint32_t mask : masks_by_size[size]) {
                std::set<ElementId> w;
                for (std::size_t i = 0; i < n; ++i)
                    if (mask & (1u << i)) w.insert(vs[i]);
                auto flipped = flip_within(g, w);
                auto comps = connected_components(flipped);
                bool ok = true;
                for (const auto& c : comps)
                    if (!leq(flipped.induced(c), d - 1)) {
                        ok = false;
                        break;
                    }
                if (ok) return w;
            }
        return std::nullopt;
    }

    void build(const ColoredGraph& g, int d, int level, ElementId parent_node, SCDecomposition& out,
               ElementId& next_internal) {
        if (d == 0) {
            ElementId leaf = *g.vertices.begin();
            if (parent_node >= 0) out.parent[leaf] = parent_node;
            return;
        }
        auto flip = find_flip_for(g, d);
        for (ElementId v : flip) out.flip_sets[level].insert(v);
        auto flipped = flip_within(g, flip);
        ElementId me = next_internal++;
        out.nodes.insert(me);
        if (parent_node >= 0) out.parent[me] = parent_node;
        for (const auto& c : connected_components(flipped))
            build(flipped.induced(c), d - 1, level + 1, me, out, next_internal);
    }

    std::set<ElementId> find_flip_for(const ColoredGraph& g, int d) {
        auto w = find_flip(g, d);
        if (!w) throw contract_error("internal: no flip set despite sc_leq");
        return *w;
    }
};

struct SCDepthResult {
    int depth = 0;
    SCDecomposition decomposition;
};

inline SCDepthResult sc_depth_exact(const ColoredGraph& g, const Budget& budget = default_budget()) {
    SCDepthSolver solver(budget);
    SCDepthResult res;
    res.depth = solver.sc_depth(g);
    res.decomposition = solver.witness(g, res.depth);
    return res;
}

// ---------------------------------------------------------------------------
// Quasi-paths: consecutive edges, and no chord from an odd position to a
// later even position.  Vertices are distinct.
// ---------------------------------------------------------------------------

struct QuasiPathResult {
    int length = 0;
    std::vector<ElementId> witness;
};

inline QuasiPathResult longest_quasi_path(const ColoredGraph& g,
                                          const Budget& budget = default_budget()) {
    if ((int)g.vertices.size() > budget.max_universe_sc)
        throw capacity_error("longest_quasi_path universe budget exceeded");
    QuasiPathResult best;
    std::vector<ElementId> cur;
    std::set<ElementId> used;
    std::function<void()> extend = [&]() {
        if ((int)cur.size() > best.length) {
            best.length = (int)cur.size();
            best.witness = cur;
        }
        for (ElementId v : g.vertices) {
            if (used.count(v)) continue;
            if (!cur.empty() && !g.adjacent(cur.back(), v)) continue;
            // chord conditions for the new position j (1-based)
            int j = (int)cur.size() + 1;
            bool ok = true;
            if (j % 2 == 0) {
                for (int i = 1; i + 1 < j && ok; i += 2)
                    if (g.adjacent(cur[i - 1], v)) ok = false;
            } else {
                // new odd position: check earlier even positions j' > i+1
                // is vacuous (i is the new last index); nothing to do
            }
            if (!ok) continue;
            cur.push_back(v);
            used.insert(v);
            extend();
            used.erase(v);
            cur.pop_back();
        }
    };
    extend();
    return best;
}

// ---------------------------------------------------------------------------
// The Appendix bounds: path ceiling g(h,m,s) for K_{s,s}-free graphs with
// connection models of height h over m labels, and the quasi-path ceiling
// f(h,m).
// ---------------------------------------------------------------------------

inline long long shrub_path_bound(int h, int m, int s) {
    if (h < 0 || m < 0 || s < 1) throw contract_error("shrub_path_bound: bad arguments");
    long long g = 1; // g(0,m,s) = 1
    for (int i = 1; i <= h; ++i) g = (4LL * (s - 1) * m * m + 1) * g;
    return g;
}

inline long long quasi_path_bound(int h, int m) {
    if (h < 0 || m < 0) throw contract_error("quasi_path_bound: bad arguments");
    long long f = 1; // f(0,m) = 1
    for (int i = 1; i <= h; ++i) f = (f + 1) * (12LL * m * m + 1);
    return f;
}

// Longest simple path (vertex count), exhaustive; used to test the ceilings.
inline int longest_simple_path(const ColoredGraph& g, const Budget& budget = default_budget()) {
    if ((int)g.vertices.size() > budget.max_universe_exact)
        throw capacity_error("longest_simple_path universe budget exceeded");
    int best = 0;
    std::vector<ElementId> cur;
    std::set<ElementId> used;
    std::function<void()> extend = [&]() {
        best = std::max(best, (int)cur.size());
        for (ElementId v : g.vertices) {
            if (used.count(v)) continue;
            if (!cur.empty() && !g.adjacent(cur.back(), v)) continue;
            cur.push_back(v);
            used.insert(v);
            extend();
            used.erase(v);
            cur.pop_back();
        }
    };
    extend();
    return best;
}

// K_{s,s} as a subgraph (not induced): two disjoint s-sets with all cross
// edges present.
inline bool has_biclique_subgraph(const ColoredGraph& g, int s,
                                  const Budget& budget = default_budget()) {
    std::vector<ElementId> vs(g.vertices.begin(), g.vertices.end());
    const std::size_t n = vs.size();
    if ((int)n > budget.max_universe_exact + 2)
        throw capacity_error("biclique search universe budget exceeded");
    std::vector<int> left, right;
    std::function<bool(std::size_t, bool)> rec = [&](std::size_t start, bool filling_left) -> bool {
        if (filling_left) {
            if ((int)left.size() == s) return rec(0, false);
            for (std::size_t i = start; i < n; ++i) {
                left.push_back((int)i);
                if (rec(i + 1, true)) return true;
                left.pop_back();
            }
            return false;
        }
        if ((int)right.size() == s) return true;
        for (std::size_t i = start; i < n; ++i) {
            if (std::find(left.begin(), left.end(), (int)i) != left.end()) continue;
            bool ok = true;
            for (int l : left)
                if (!g.adjacent(vs[l], vs[i])) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            right.push_back((int)i);
            if (rec(i + 1, false)) return true;
            right.pop_back();
        }
        return false;
    };
    return rec(0, true);
}

// SC-decomposition to connection model: label a leaf by its flip-set
// membership pattern; the connector at depth j wires label pairs whose flip
// parity up to level j is odd.
inline ConnectionModel sc_to_connection_model(const SCDecomposition& d) {
    d.validate_shape();
    ConnectionModel m;
    m.nodes = d.nodes;
    m.parent = d.parent;
    auto label_of = [&](ElementId v) {
        std::string l = "w";
        for (int i = 0; i < d.depth; ++i) l += d.flip_sets[i].count(v) ? '1' : '0';
        return l;
    };
    std::set<std::string> labels;
    for (ElementId v : d.leaves()) {
        m.leaf_label[v] = label_of(v);
        labels.insert(label_of(v));
    }
    auto t = d.tree();
    auto depths = t.depths();
    for (ElementId v : m.nodes) {
        if (m.leaf_label.count(v)) continue;
        int j = depths.at(v);
        auto& conn = m.connector[v];
        for (const auto& a : labels)
            for (const auto& b : labels) {
                int parity = 0;
                for (int l = 0; l <= std::min(j, d.depth - 1); ++l)
                    if (a[1 + l] == '1' && b[1 + l] == '1') parity ^= 1;
                if (parity) conn.insert({a, b});
            }
    }
    return m;
}

} // namespace sparse_logic
