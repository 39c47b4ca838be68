#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/graph.hpp"
#include "sparse_logic/shrubdepth.hpp"
#include "sparse_logic/transduction.hpp"
#include "sparse_logic/treedepth.hpp"

namespace sparse_logic {

using PartialFn = std::map<ElementId, ElementId>;

struct GuidanceSystem {
    std::vector<std::set<ElementId>> sets;

    std::size_t size() const { return sets.size(); }
};

struct GuidedFunction {
    PartialFn map;
    GuidanceSystem system;
    bool guarded = false;
};

struct GuidanceCheck {
    bool ok = true;
    ElementId violator = -1;
};

// f is guided by U if every x with f(x) defined and != x has f(x) as the
// unique neighbor of x in some member of U.
inline GuidanceCheck check_guided(const ColoredGraph& g, const PartialFn& f,
                                  const GuidanceSystem& u) {
    for (const auto& [x, y] : f) {
        if (x == y) continue;
        bool witnessed = false;
        for (const auto& set : u.sets) {
            if (!set.count(y)) continue;
            int neighbors_in_set = 0;
            for (ElementId w : set)
                if (g.adjacent(x, w)) ++neighbors_in_set;
            if (neighbors_in_set == 1 && g.adjacent(x, y)) {
                witnessed = true;
                break;
            }
        }
        if (!witnessed) return {false, x};
    }
    return {};
}

// each point maps to itself or to a neighbor
inline bool check_guarded(const ColoredGraph& g, const PartialFn& f) {
    for (const auto& [x, y] : f)
        if (x != y && !g.adjacent(x, y)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Gluing lemmas
// ---------------------------------------------------------------------------

// Componentwise gluing: the restriction of g to each component is guided by
// an ell-set system inside that component; the union stays ell-guidable.
inline GuidedFunction glue_components(const ColoredGraph& g,
                                      const std::vector<std::pair<std::set<ElementId>, GuidedFunction>>& parts) {
    std::size_t ell = 0;
    for (const auto& [comp, f] : parts) ell = std::max(ell, f.system.size());
    GuidedFunction out;
    out.system.sets.assign(ell, {});
    out.guarded = true;
    for (const auto& [comp, f] : parts) {
        if (f.system.size() > ell) throw contract_error("glue: inconsistent system sizes");
        for (const auto& [x, y] : f.map) {
            if (!comp.count(x)) throw contract_error("glue: function leaves its component");
            out.map[x] = y;
        }
        if (!f.guarded) out.guarded = false;
        for (std::size_t i = 0; i < f.system.sets.size(); ++i)
            for (ElementId v : f.system.sets[i])
                if (comp.count(v)) out.system.sets[i].insert(v);
    }
    return out;
}

// Selection gluing: g picks pointwise among g_1..g_s; systems concatenate.
inline GuidedFunction glue_selection(const ColoredGraph& g, const std::vector<GuidedFunction>& fs,
                                     const PartialFn& selector) {
    GuidedFunction out;
    out.map = selector;
    out.guarded = true;
    for (const auto& [x, y] : selector) {
        bool matched = false;
        for (const auto& f : fs) {
            auto it = f.map.find(x);
            if (it != f.map.end() && it->second == y) matched = true;
        }
        if (!matched) throw contract_error("selector value not provided by any input function");
        if (x != y && !g.adjacent(x, y)) out.guarded = false;
    }
    for (const auto& f : fs)
        for (const auto& set : f.system.sets) out.system.sets.push_back(set);
    return out;
}

// ---------------------------------------------------------------------------
// go_right: a guidable choice function from A into B when every A-vertex has
// a B-neighbor.  Greedy private-neighbor strategy, plus the bi-cograph
// recursion when a connection model is available.
// ---------------------------------------------------------------------------

enum class GoRightStrategy { Greedy, Bicograph };

struct GoRightResult {
    GuidedFunction fn;
    int rounds = 0; // greedy only
};

namespace detail {

inline void go_right_preconditions(const ColoredGraph& g, const std::set<ElementId>& a,
                                   const std::set<ElementId>& b) {
    for (ElementId v : a)
        if (b.count(v)) throw contract_error("go_right: A and B must be disjoint");
    for (ElementId v : a) {
        bool ok = false;
        for (ElementId w : b)
            if (g.adjacent(v, w)) {
                ok = true;
                break;
            }
        if (!ok) throw contract_error("go_right: some A-vertex has no B-neighbor");
    }
}

inline GoRightResult go_right_greedy(const ColoredGraph& g, std::set<ElementId> a,
                                     std::set<ElementId> b) {
    GoRightResult res;
    GuidedFunction out;
    out.guarded = true;
    while (!a.empty()) {
        ++res.rounds;
        // B-reduction: drop vertices that are nobody's private neighbor,
        // ascending id, re-checking after each removal
        for (;;) {
            std::optional<ElementId> removable;
            for (ElementId u : b) {
                bool priv = false;
                for (ElementId v : a) {
                    if (!g.adjacent(v, u)) continue;
                    int nb = 0;
                    for (ElementId w : b)
                        if (g.adjacent(v, w)) ++nb;
                    if (nb == 1) {
                        priv = true;
                        break;
                    }
                }
                if (!priv) {
                    removable = u;
                    break;
                }
            }
            if (!removable) break;
            b.erase(*removable);
        }
        // invariant: every remaining A-vertex keeps a B-neighbor
        for (ElementId v : a) {
            bool ok = false;
            for (ElementId w : b)
                if (g.adjacent(v, w)) ok = true;
            if (!ok) throw contract_error("greedy invariant broken: A-vertex lost its B-neighbors");
        }
        // A-reduction: vertices with exactly one neighbor in the reduced B
        std::set<ElementId> removed;
        for (ElementId v : a) {
            std::vector<ElementId> nbs;
            for (ElementId w : b)
                if (g.adjacent(v, w)) nbs.push_back(w);
            if (nbs.size() == 1) {
                out.map[v] = nbs[0];
                removed.insert(v);
            }
        }
        if (removed.empty()) throw contract_error("greedy round made no progress");
        for (ElementId v : removed) a.erase(v);
        out.system.sets.push_back(b);
    }
    res.fn = std::move(out);
    return res;
}

// Restrict a connection model to a subset of its leaves (ancestors kept).
inline ConnectionModel restrict_model(const ConnectionModel& m, const std::set<ElementId>& keep) {
    ConnectionModel out;
    auto t = m.tree();
    std::set<ElementId> nodes;
    for (ElementId v : keep)
        for (ElementId u : t.path_to_root(v)) nodes.insert(u);
    out.nodes = nodes;
    for (const auto& [c, p] : m.parent)
        if (nodes.count(c) && nodes.count(p)) out.parent[c] = p;
    for (const auto& [v, l] : m.leaf_label)
        if (keep.count(v)) out.leaf_label[v] = l;
    for (const auto& [v, c] : m.connector)
        if (nodes.count(v) && !keep.count(v)) out.connector[v] = c;
    return out;
}

// Bipartite restriction of the model: side A relabeled "a", side B "b",
// connectors keep only the (alpha, beta) cross pair.
inline ConnectionModel bipartite_model(const ConnectionModel& m, const std::set<ElementId>& a,
                                       const std::string& alpha, const std::set<ElementId>& b,
                                       const std::string& beta) {
    std::set<ElementId> keep;
    for (ElementId v : a) keep.insert(v);
    for (ElementId v : b) keep.insert(v);
    ConnectionModel out = restrict_model(m, keep);
    for (auto& [v, l] : out.leaf_label) l = a.count(v) ? "a" : "b";
    for (auto& [v, c] : out.connector) {
        bool cross = c.count({alpha, beta}) != 0;
        c.clear();
        if (cross) {
            c.insert({"a", "b"});
            c.insert({"b", "a"});
        }
    }
    return out;
}

// Recursion of the bi-cograph lemma on a connected bipartite model.
inline GuidedFunction bico_connected(const ConnectionModel& m, const std::set<ElementId>& a,
                                     const std::set<ElementId>& b, const ColoredGraph& bg) {
    GuidedFunction out;
    out.guarded = true;
    if (a.empty()) return out;
    auto t = m.tree();
    auto roots = t.root_set();
    if (roots.size() != 1) throw contract_error("bico recursion expects a tree");
    ElementId r = *roots.begin();
    auto kids = t.children(r);
    if (kids.empty()) return out; // single leaf, A empty handled above
    if (kids.size() == 1) {
        // descend: the child subtree is a model of the same graph
        ConnectionModel sub = m;
        sub.nodes.erase(r);
        sub.parent.erase(*kids.begin());
        sub.connector.erase(r);
        return bico_connected(sub, a, b, bg);
    }
    bool cross = m.connector.count(r) && m.connector.at(r).count({"a", "b"});
    if (!cross)
        throw contract_error("bico recursion: disconnected despite component split");
    // children holding B-leaves
    std::map<ElementId, std::set<ElementId>> leaves_below;
    for (ElementId k : kids) {
        std::function<void(ElementId)> collect = [&](ElementId u) {
            auto ks = t.children(u);
            if (ks.empty()) {
                leaves_below[k].insert(u);
                return;
            }
            for (ElementId x : ks) collect(x);
        };
        collect(k);
    }
    std::vector<ElementId> b_children;
    for (ElementId k : kids) {
        bool has_b = false;
        for (ElementId v : leaves_below[k])
            if (b.count(v)) has_b = true;
        if (has_b) b_children.push_back(k);
    }
    if (b_children.empty()) throw contract_error("bico recursion: no B-leaves in a connected part");
    if (b_children.size() >= 2) {
        auto min_b_leaf = [&](ElementId k) {
            ElementId best = -1;
            for (ElementId v : leaves_below[k])
                if (b.count(v) && (best < 0 || v < best)) best = v;
            return best;
        };
        ElementId w1 = min_b_leaf(b_children[0]);
        ElementId w2 = min_b_leaf(b_children[1]);
        for (ElementId v : a) out.map[v] = bg.adjacent(v, w1) ? w1 : w2;
        out.system.sets.push_back({w1});
        out.system.sets.push_back({w2});
        return out;
    }
    // exactly one child with B-leaves
    ElementId h = b_children[0];
    ElementId w = -1;
    for (ElementId v : leaves_below[h])
        if (b.count(v) && (w < 0 || v < w)) w = v;
    std::set<ElementId> a_in;
    for (ElementId v : leaves_below[h])
        if (a.count(v)) a_in.insert(v);
    std::set<ElementId> b_in;
    for (ElementId v : leaves_below[h])
        if (b.count(v)) b_in.insert(v);
    ConnectionModel sub = restrict_model(m, leaves_below[h]);
    GuidedFunction inner = bico_connected(sub, a_in, b_in, bg);
    out = inner;
    for (ElementId v : a)
        if (!leaves_below[h].count(v)) out.map[v] = w;
    out.system.sets.push_back({w});
    return out;
}

inline GoRightResult go_right_bicograph(const ColoredGraph& g, const std::set<ElementId>& a,
                                        const std::set<ElementId>& b, const ConnectionModel& model) {
    // mu-labeling: (own label, smallest label of a B-neighbor)
    std::map<std::pair<std::string, std::string>, std::set<ElementId>> mu_classes;
    for (ElementId v : a) {
        std::optional<std::string> beta;
        for (ElementId w : b) {
            if (!g.adjacent(v, w)) continue;
            const std::string& l = model.leaf_label.at(w);
            if (!beta || l < *beta) beta = l;
        }
        mu_classes[{model.leaf_label.at(v), *beta}].insert(v);
    }
    std::vector<GuidedFunction> parts;
    PartialFn selector;
    for (const auto& [ab, a_class] : mu_classes) {
        const auto& [alpha, beta] = ab;
        std::set<ElementId> b_side;
        for (ElementId w : b)
            if (model.leaf_label.at(w) == beta) b_side.insert(w);
        auto bip_model = bipartite_model(model, a_class, alpha, b_side, beta);
        ColoredGraph bg = eval_connection_model(bip_model);
        // glue the recursion over the components of the bipartite graph
        std::vector<std::pair<std::set<ElementId>, GuidedFunction>> comps;
        for (const auto& comp : connected_components(bg)) {
            std::set<ElementId> ac, bc;
            for (ElementId v : comp) (a_class.count(v) ? ac : bc).insert(v);
            auto sub = restrict_model(bip_model, comp);
            comps.push_back({comp, bico_connected(sub, ac, bc, bg)});
        }
        GuidedFunction part = glue_components(bg, comps);
        // guidance sets restricted to the B side transfer to G
        for (auto& set : part.system.sets) {
            std::set<ElementId> trimmed;
            for (ElementId v : set)
                if (b_side.count(v)) trimmed.insert(v);
            set = std::move(trimmed);
        }
        for (const auto& [x, y] : part.map) selector[x] = y;
        parts.push_back(std::move(part));
    }
    GoRightResult res;
    res.fn = glue_selection(g, parts, selector);
    return res;
}

} // namespace detail

inline GoRightResult go_right(const ColoredGraph& g, const std::set<ElementId>& a,
                              const std::set<ElementId>& b, GoRightStrategy strategy,
                              const ConnectionModel* model = nullptr) {
    detail::go_right_preconditions(g, a, b);
    if (strategy == GoRightStrategy::Bicograph) {
        if (model == nullptr) throw contract_error("bicograph strategy requires a connection model");
        return detail::go_right_bicograph(g, a, b, *model);
    }
    return detail::go_right_greedy(g, a, b);
}

// ---------------------------------------------------------------------------
// Spanning forests of bounded depth and component identifiers
// ---------------------------------------------------------------------------

struct SpanningForestResult {
    GuidedFunction fn; // total: fixes one root per component, else maps a layer down
    int radius = 0;    // number of BFS layers
};

inline SpanningForestResult spanning_forest_fn(const ColoredGraph& g,
                                               const ConnectionModel* model = nullptr,
                                               std::optional<int> radius_bound = std::nullopt,
                                               GoRightStrategy strategy = GoRightStrategy::Greedy) {
    // roots: minimum id per component
    std::set<ElementId> r0;
    for (const auto& comp : connected_components(g)) r0.insert(*comp.begin());
    // BFS layers
    std::vector<std::set<ElementId>> layers{r0};
    std::set<ElementId> seen = r0;
    for (;;) {
        std::set<ElementId> next;
        for (ElementId v : layers.back())
            for (ElementId w : g.neighbors(v))
                if (!seen.count(w)) next.insert(w);
        if (next.empty()) break;
        seen.insert(next.begin(), next.end());
        layers.push_back(std::move(next));
    }
    int r = (int)layers.size() - 1;
    std::optional<long long> ceiling;
    if (radius_bound) ceiling = *radius_bound;
    else if (model) ceiling = quasi_path_bound(model->height(), (int)model->labels().size());
    if (ceiling && r > *ceiling)
        throw contract_error("BFS layering deeper than the induced-path ceiling");

    std::vector<GuidedFunction> parts;
    PartialFn selector;
    GuidedFunction f0;
    for (ElementId v : r0) {
        f0.map[v] = v;
        selector[v] = v;
    }
    f0.system.sets.push_back(r0);
    f0.guarded = true;
    parts.push_back(f0);
    for (int i = 1; i <= r; ++i) {
        auto res = go_right(g, layers[i], layers[i - 1], strategy, model);
        for (const auto& [x, y] : res.fn.map) selector[x] = y;
        parts.push_back(res.fn);
    }
    SpanningForestResult out;
    out.fn = glue_selection(g, parts, selector);
    out.fn.guarded = true;
    out.radius = r;
    return out;
}

inline PartialFn iterate_fn(const PartialFn& f, int times) {
    PartialFn out;
    for (const auto& [x, y] : f) {
        ElementId cur = x;
        bool defined = true;
        for (int i = 0; i < times; ++i) {
            auto it = f.find(cur);
            if (it == f.end()) {
                defined = false;
                break;
            }
            cur = it->second;
        }
        if (defined) out[x] = cur;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Emission as almost quantifier-free transductions (Lemma "local")
// ---------------------------------------------------------------------------

// Build the transduction that, applied to G (as a structure with edge
// relation `edge`), outputs exactly G enriched with f under `fn_name`.
// All auxiliary symbols are reducted away.
inline Transduction guided_fn_transduction(const ColoredGraph& g, const GuidedFunction& f,
                                           const std::string& fn_name = "f",
                                           const std::string& edge = "E",
                                           const std::string& tag = "") {
    auto check = check_guided(g, f.map, f.system);
    if (!check.ok)
        throw contract_error("function is not guided by the supplied system (vertex " +
                             std::to_string(check.violator) + ")");
    Transduction t;
    const auto& sets = f.system.sets;
    // choice of guiding set per vertex: first set where f(x) is the unique neighbor
    std::vector<std::set<ElementId>> chooser(sets.size());
    std::set<ElementId> null_set, self_set;
    for (ElementId v : g.vertices) {
        auto it = f.map.find(v);
        if (it == f.map.end()) {
            null_set.insert(v);
            continue;
        }
        if (it->second == v) {
            self_set.insert(v);
            continue;
        }
        for (std::size_t i = 0; i < sets.size(); ++i) {
            if (!sets[i].count(it->second)) continue;
            int nb = 0;
            for (ElementId w : sets[i])
                if (g.adjacent(v, w)) ++nb;
            if (nb == 1) {
                chooser[i].insert(v);
                break;
            }
        }
    }
    auto name = [&](const std::string& base, std::size_t i) {
        return base + tag + std::to_string(i);
    };
    for (std::size_t i = 0; i < sets.size(); ++i)
        t.append(op_unary_lift(name("U", i), LiftAdvice::explicit_set(sets[i], "guidance-set")));
    t.append(op_unary_lift("Null" + tag, LiftAdvice::explicit_set(null_set, "null-set")));
    t.append(op_unary_lift("Self" + tag, LiftAdvice::explicit_set(self_set, "self-set")));
    for (std::size_t i = 0; i < sets.size(); ++i)
        t.append(op_unary_lift(name("GV", i), LiftAdvice::explicit_set(chooser[i], "chooser-set")));
    Term x = Term::variable("x");
    Term y = Term::variable("y");
    for (std::size_t i = 0; i < sets.size(); ++i)
        t.append(op_function_extension(name("d", i), "x", "y",
                                       f_and({f_rel(edge, {x, y}), f_rel(name("U", i), {y})})));
    std::vector<FormulaPtr> cases;
    cases.push_back(f_and({f_rel("Self" + tag, {x}), f_eq(y, x)}));
    for (std::size_t i = 0; i < sets.size(); ++i)
        cases.push_back(f_and({f_rel(name("GV", i), {x}), f_eq(x.applied(name("d", i)), y)}));
    t.append(op_function_extension(fn_name, "x", "y",
                                   f_and({f_not(f_rel("Null" + tag, {x})), f_or(std::move(cases))})));
    for (std::size_t i = 0; i < sets.size(); ++i) t.append(op_reduct(name("U", i)));
    t.append(op_reduct("Null" + tag));
    t.append(op_reduct("Self" + tag));
    for (std::size_t i = 0; i < sets.size(); ++i) t.append(op_reduct(name("GV", i)));
    for (std::size_t i = 0; i < sets.size(); ++i) t.append(op_reduct(name("d", i)));
    return t;
}

// Component identifiers: g = f_G^r from the spanning forest, emitted on top
// of the guided-function transduction by a single function extension.
struct ComponentIdResult {
    PartialFn id_fn;
    Transduction transduction;
    SpanningForestResult forest;
};

inline ComponentIdResult component_id_fn(const ColoredGraph& g,
                                         const ConnectionModel* model = nullptr,
                                         GoRightStrategy strategy = GoRightStrategy::Greedy,
                                         const std::string& edge = "E") {
    ComponentIdResult out;
    out.forest = spanning_forest_fn(g, model, std::nullopt, strategy);
    const int r = out.forest.radius;
    out.id_fn = iterate_fn(out.forest.fn.map, std::max(r, 1));
    out.transduction = guided_fn_transduction(g, out.forest.fn, "step", edge);
    Term chain = Term::variable("x");
    for (int i = 0; i < std::max(r, 1); ++i) chain = chain.applied("step");
    out.transduction.append(op_function_extension("cid", "x", "y", f_eq(chain, Term::variable("y"))));
    return out;
}

// ---------------------------------------------------------------------------
// Guidance for guarded functions via 2-covers of bounded treedepth
// (Lemma "star").  Levels guide ancestor hops; (i,j) image sets guide
// descendant hops.
// ---------------------------------------------------------------------------

inline GuidedFunction guidance_for_guarded(const ColoredGraph& g, const PartialFn& f,
                                           const Cover& cover) {
    if (!check_guarded(g, f)) throw contract_error("function is not guarded by the graph");
    if (cover.p < 2) throw contract_error("guided emission needs a 2-cover");
    GuidedFunction out;
    out.map = f;
    out.guarded = true;
    for (std::size_t k = 0; k < cover.members.size(); ++k) {
        const auto& u = cover.members[k];
        const auto& forest = cover.certificates[k].forest;
        auto depths = forest.depths();
        int h = 0;
        for (const auto& [v, d] : depths) h = std::max(h, d);
        // assign pairs to the first member containing both endpoints
        std::map<int, std::set<ElementId>> level_sets;            // ancestor moves
        std::map<std::pair<int, int>, std::set<ElementId>> pair_sets; // descendant moves
        for (const auto& [x, y] : f) {
            if (x == y) continue;
            if (!u.count(x) || !u.count(y)) continue;
            bool first = true;
            for (std::size_t k2 = 0; k2 < k; ++k2)
                if (cover.members[k2].count(x) && cover.members[k2].count(y)) first = false;
            if (!first) continue;
            auto l = forest.lca(x, y);
            if (!l) throw contract_error("guarded edge not comparable inside its member");
            if (*l == y) {
                level_sets[depths.at(y)].insert(y);
            } else if (*l == x) {
                pair_sets[{depths.at(x), depths.at(y)}].insert(y);
            } else {
                throw contract_error("member edge joins incomparable forest nodes");
            }
        }
        for (auto& [lvl, set] : level_sets) {
            // the whole level of the member keeps uniqueness and is
            // independent of f
            std::set<ElementId> full;
            for (ElementId v : u)
                if (depths.at(v) == lvl) full.insert(v);
            out.system.sets.push_back(full);
        }
        for (auto& [ij, set] : pair_sets) out.system.sets.push_back(set);
    }
    auto check = check_guided(g, out.map, out.system);
    if (!check.ok)
        throw contract_error("guarded-function guidance failed at vertex " +
                             std::to_string(check.violator));
    return out;
}

} // namespace sparse_logic
