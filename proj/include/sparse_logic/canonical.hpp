#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/budget.hpp"
#include "sparse_logic/graph.hpp"
#include "sparse_logic/structure.hpp"

namespace sparse_logic {

// Canonical forms for isomorphism checks and memo keys.
//
// Colored graphs are canonized by a lexicographic branch-and-bound over
// vertex orders: the code of an order is the concatenation, per vertex, of
// its color bits and its adjacency bits towards earlier vertices.  At every
// step only vertices realizing the minimal next chunk are branched on, which
// keeps the search shallow on the small graphs we handle.  General
// structures use plain permutation minimization on small universes, which is
// all the transduction equivalence checker needs.

namespace detail {

struct CanonCtx {
    std::vector<ElementId> verts;
    std::vector<std::string> color_names;
    std::vector<std::vector<char>> color_bit; // [color][vertex index]
    std::vector<std::vector<char>> adj;       // [i][j]
    long steps = 0;

    std::string chunk(int v_idx, const std::vector<int>& placed) const {
        std::string c;
        c.reserve(color_names.size() + placed.size());
        for (std::size_t ci = 0; ci < color_names.size(); ++ci) c += color_bit[ci][v_idx];
        for (int p : placed) c += adj[p][v_idx];
        return c;
    }
};

inline void canon_order_search(CanonCtx& ctx, std::vector<int>& placed, std::vector<char>& used,
                               std::string& acc, std::string& best) {
    const int n = (int)ctx.verts.size();
    if ((int)placed.size() == n) {
        if (best.empty() || acc < best) best = acc;
        return;
    }
    if (++ctx.steps > default_budget().max_steps)
        throw capacity_error("graph canonization budget exceeded");
    // find the minimal next chunk and all vertices realizing it
    std::string min_chunk;
    std::vector<int> ties;
    for (int v = 0; v < n; ++v) {
        if (used[v]) continue;
        std::string c = ctx.chunk(v, placed);
        if (ties.empty() || c < min_chunk) {
            min_chunk = std::move(c);
            ties.assign(1, v);
        } else if (c == min_chunk) {
            ties.push_back(v);
        }
    }
    // drop ties that are plainly interchangeable (transposition is an
    // automorphism: equal color bits and equal rows off the pair)
    {
        std::vector<int> kept;
        for (int v : ties) {
            bool dup = false;
            for (int u : kept) {
                bool same = true;
                for (std::size_t ci = 0; ci < ctx.color_names.size() && same; ++ci)
                    same = ctx.color_bit[ci][u] == ctx.color_bit[ci][v];
                for (int w = 0; w < n && same; ++w)
                    if (w != u && w != v) same = ctx.adj[u][w] == ctx.adj[v][w];
                if (same) { dup = true; break; }
            }
            if (!dup) kept.push_back(v);
        }
        ties = std::move(kept);
    }
    // prune: if the accumulated prefix already exceeds best, stop
    std::size_t pos = acc.size();
    acc += min_chunk;
    if (best.empty() || std::string_view(acc).substr(0, best.size()) <= std::string_view(best).substr(0, acc.size())) {
        for (int v : ties) {
            used[v] = 1;
            placed.push_back(v);
            canon_order_search(ctx, placed, used, acc, best);
            placed.pop_back();
            used[v] = 0;
        }
    }
    acc.resize(pos);
}

} // namespace detail

// Canonical string code of a colored graph, equal iff graphs are isomorphic
// (respecting colors).
inline std::string canonical_graph_code(const ColoredGraph& g) {
    const int n = (int)g.vertices.size();
    std::string header = std::to_string(n) + ";";
    for (const auto& [name, set] : g.colors) header += name + ",";
    header += ";";
    if (n == 0) return header;
    detail::CanonCtx ctx;
    ctx.verts.assign(g.vertices.begin(), g.vertices.end());
    std::map<ElementId, int> idx;
    for (int i = 0; i < n; ++i) idx[ctx.verts[i]] = i;
    for (const auto& [name, set] : g.colors) {
        ctx.color_names.push_back(name);
        std::vector<char> bits(n, '0');
        for (ElementId v : set) bits[idx.at(v)] = '1';
        ctx.color_bit.push_back(std::move(bits));
    }
    ctx.adj.assign(n, std::vector<char>(n, '0'));
    for (const auto& [u, v] : g.edges) {
        ctx.adj[idx.at(u)][idx.at(v)] = '1';
        ctx.adj[idx.at(v)][idx.at(u)] = '1';
    }
    std::vector<int> placed;
    std::vector<char> used(n, 0);
    std::string acc, best;
    detail::canon_order_search(ctx, placed, used, acc, best);
    return header + best;
}

inline bool graphs_isomorphic(const ColoredGraph& a, const ColoredGraph& b) {
    if (a.vertices.size() != b.vertices.size() || a.edges.size() != b.edges.size()) return false;
    return canonical_graph_code(a) == canonical_graph_code(b);
}

namespace detail {

inline std::string structure_code_under(const RelStructure& a, const std::map<ElementId, int>& pos) {
    std::string code;
    for (const auto& [name, rel] : a.relations) {
        code += name + "/" + std::to_string(rel.arity) + "{";
        std::set<Tuple> mapped;
        for (const auto& t : rel.tuples) {
            Tuple m;
            for (ElementId v : t) m.push_back(pos.at(v));
            mapped.insert(std::move(m));
        }
        for (const auto& t : mapped) {
            for (ElementId v : t) code += std::to_string(v) + ",";
            code += ";";
        }
        code += "}";
    }
    for (const auto& [name, fn] : a.functions) {
        code += name + "(){";
        std::set<std::pair<int, int>> mapped;
        for (const auto& [x, y] : fn) mapped.emplace(pos.at(x), pos.at(y));
        for (const auto& [x, y] : mapped) code += std::to_string(x) + ">" + std::to_string(y) + ";";
        code += "}";
    }
    return code;
}

} // namespace detail

// Canonical code of a structure by minimizing over universe permutations.
// Only sensible for small universes; guarded by the exhaustive budget.
inline std::string canonical_structure_code(const RelStructure& a) {
    if (a.is_bot) return "bot";
    const int n = (int)a.universe.size();
    if (n > default_budget().max_universe_exhaustive)
        throw capacity_error("structure canonization limited to small universes");
    std::vector<ElementId> elems(a.universe.begin(), a.universe.end());
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::string best;
    do {
        std::map<ElementId, int> pos;
        for (int i = 0; i < n; ++i) pos[elems[i]] = perm[i];
        std::string code = detail::structure_code_under(a, pos);
        if (best.empty() || code < best) best = std::move(code);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return std::to_string(n) + ";" + best;
}

inline bool structures_isomorphic(const RelStructure& a, const RelStructure& b) {
    if (a.is_bot || b.is_bot) return a.is_bot == b.is_bot;
    if (a.universe.size() != b.universe.size()) return false;
    if (a.colors != b.colors) return false;
    return canonical_structure_code(a) == canonical_structure_code(b);
}

} // namespace sparse_logic
