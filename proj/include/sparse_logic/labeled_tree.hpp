#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/structure.hpp"

namespace sparse_logic {

// Unordered rooted trees with exactly one label per node, modeled as
// structures via the parent function plus one unary predicate per label.
struct LabeledTree {
    std::set<ElementId> nodes;
    std::map<ElementId, ElementId> parent;
    std::map<ElementId, std::string> label;

    bool operator==(const LabeledTree&) const = default;

    static LabeledTree single(ElementId id, std::string l) {
        LabeledTree t;
        t.nodes.insert(id);
        t.label[id] = std::move(l);
        return t;
    }

    ElementId root() const {
        for (ElementId v : nodes)
            if (!parent.count(v)) return v;
        throw validation_error("tree without a root");
    }

    std::set<ElementId> children(ElementId v) const {
        std::set<ElementId> out;
        for (const auto& [c, p] : parent)
            if (p == v) out.insert(c);
        return out;
    }

    int depth_of(ElementId v) const {
        int d = 0;
        while (parent.count(v)) {
            v = parent.at(v);
            ++d;
        }
        return d;
    }

    int height() const {
        int h = 0;
        for (ElementId v : nodes) h = std::max(h, depth_of(v));
        return h;
    }

    void validate() const {
        int roots = 0;
        for (ElementId v : nodes) {
            if (!label.count(v)) throw validation_error("node without label");
            if (!parent.count(v)) ++roots;
        }
        if (roots != 1) throw validation_error("labeled tree needs exactly one root");
        for (const auto& [c, p] : parent)
            if (!nodes.count(c) || !nodes.count(p))
                throw validation_error("parent edge outside node set");
        // acyclic by the root count plus reachability
        for (ElementId v : nodes) {
            std::set<ElementId> seen;
            ElementId cur = v;
            while (parent.count(cur)) {
                if (!seen.insert(cur).second) throw validation_error("cycle in tree");
                cur = parent.at(cur);
            }
        }
    }

    std::string code_at(ElementId v) const {
        std::vector<std::string> kids;
        for (ElementId c : children(v)) kids.push_back(code_at(c));
        std::sort(kids.begin(), kids.end());
        std::string out = "(" + label.at(v);
        for (const auto& k : kids) out += k;
        out += ")";
        return out;
    }

    // canonical code: equal iff trees are isomorphic as unordered labeled trees
    std::string canonical_code() const { return code_at(root()); }

    // structure view: unary predicate "L"+label per alphabet letter, partial
    // function "parent"
    RelStructure to_structure(const std::vector<std::string>& alphabet) const {
        RelStructure a;
        a.universe = nodes;
        for (const auto& l : alphabet) {
            a.add_relation("L" + l, 1);
            a.colors.insert("L" + l);
        }
        a.add_function("parent");
        for (const auto& [v, l] : label) {
            if (!a.relations.count("L" + l)) throw validation_error("label outside alphabet: " + l);
            a.add_tuple("L" + l, {v});
        }
        for (const auto& [c, p] : parent) a.set_function("parent", c, p);
        return a;
    }

    static LabeledTree from_structure(const RelStructure& a) {
        LabeledTree t;
        t.nodes = a.universe;
        auto it = a.functions.find("parent");
        if (it == a.functions.end()) throw validation_error("structure has no parent function");
        t.parent = it->second;
        for (const auto& [name, rel] : a.relations) {
            if (name.rfind("L", 0) != 0 || rel.arity != 1) continue;
            for (const auto& tup : rel.tuples) {
                if (t.label.count(tup[0])) throw validation_error("node with two labels");
                t.label[tup[0]] = name.substr(1);
            }
        }
        t.validate();
        return t;
    }

    // renumber nodes 0..n-1 in a canonical (code-ordered) fashion
    LabeledTree canonical_form() const {
        LabeledTree out;
        ElementId next = 0;
        std::function<ElementId(ElementId)> build = [&](ElementId v) {
            ElementId me = next++;
            out.nodes.insert(me);
            out.label[me] = label.at(v);
            std::vector<std::pair<std::string, ElementId>> kids;
            for (ElementId c : children(v)) kids.push_back({code_at(c), c});
            std::sort(kids.begin(), kids.end());
            for (const auto& [code, c] : kids) {
                ElementId kid = build(c);
                out.parent[kid] = me;
            }
            return me;
        };
        build(root());
        return out;
    }
};

// A rooted forest of labeled trees (used by the forest-level QE): the same
// node/parent/label data with any number of roots.
struct LabeledForest {
    std::set<ElementId> nodes;
    std::map<ElementId, ElementId> parent;
    std::map<ElementId, std::string> label;

    std::vector<ElementId> roots() const {
        std::vector<ElementId> out;
        for (ElementId v : nodes)
            if (!parent.count(v)) out.push_back(v);
        return out;
    }

    int height() const {
        int h = 0;
        for (ElementId v : nodes) {
            int d = 0;
            ElementId cur = v;
            while (parent.count(cur)) {
                cur = parent.at(cur);
                ++d;
            }
            h = std::max(h, d);
        }
        return h;
    }

    RelStructure to_structure(const std::vector<std::string>& alphabet) const {
        LabeledTree t;
        t.nodes = nodes;
        t.parent = parent;
        t.label = label;
        // reuse the tree serialization but allow many roots
        RelStructure a;
        a.universe = nodes;
        for (const auto& l : alphabet) {
            a.add_relation("L" + l, 1);
            a.colors.insert("L" + l);
        }
        a.add_function("parent");
        for (const auto& [v, l] : label) a.add_tuple("L" + l, {v});
        for (const auto& [c, p] : parent) a.set_function("parent", c, p);
        return a;
    }

    // prepend a fresh root adopting every tree root
    LabeledTree with_prepended_root(ElementId root_id, const std::string& root_label) const {
        LabeledTree t;
        if (nodes.count(root_id)) throw validation_error("prepended root id collides");
        t.nodes = nodes;
        t.parent = parent;
        t.label = label;
        t.nodes.insert(root_id);
        t.label[root_id] = root_label;
        for (ElementId r : roots())
            if (r != root_id) t.parent[r] = root_id;
        return t;
    }
};

// ---------------------------------------------------------------------------
// Enumeration of small labeled trees up to isomorphism, and random sampling.
// ---------------------------------------------------------------------------

// all unordered labeled trees with exactly n nodes over the alphabet, up to
// isomorphism, with canonical node numbering
inline std::vector<LabeledTree> labeled_trees_with(int n, const std::vector<std::string>& alphabet) {
    static std::map<std::pair<int, std::string>, std::vector<LabeledTree>> cache;
    std::string alpha_key;
    for (const auto& a : alphabet) alpha_key += a + ",";
    auto key = std::make_pair(n, alpha_key);
    auto hit = cache.find(key);
    if (hit != cache.end()) return hit->second;
    std::vector<LabeledTree> out;
    if (n <= 0) return out;
    if (n == 1) {
        for (const auto& a : alphabet) out.push_back(LabeledTree::single(0, a));
    } else {
        // choose a multiset of child subtrees with sizes summing to n-1
        struct Choice {
            std::vector<LabeledTree> kids;
        };
        std::vector<std::vector<LabeledTree>> by_size(n);
        for (int k = 1; k < n; ++k) by_size[k] = labeled_trees_with(k, alphabet);
        // index child candidates globally, ordered by (size, position);
        // non-decreasing index sequences make each multiset appear once
        struct Cand {
            int size;
            const LabeledTree* tree;
        };
        std::vector<Cand> cands;
        for (int k = 1; k < n; ++k)
            for (const auto& t : by_size[k]) cands.push_back({k, &t});
        std::vector<int> pick;
        std::function<void(int, int)> rec = [&](int start, int remaining) {
            if (remaining == 0) {
                for (const auto& a : alphabet) {
                    LabeledTree t = LabeledTree::single(0, a);
                    ElementId next = 1;
                    for (int idx : pick) {
                        const LabeledTree& kid = *cands[idx].tree;
                        std::map<ElementId, ElementId> rename;
                        for (ElementId v : kid.nodes) rename[v] = next++;
                        for (ElementId v : kid.nodes) {
                            t.nodes.insert(rename[v]);
                            t.label[rename[v]] = kid.label.at(v);
                        }
                        for (const auto& [c, p] : kid.parent) t.parent[rename[c]] = rename[p];
                        t.parent[rename[kid.root()]] = 0;
                    }
                    out.push_back(t.canonical_form());
                }
                return;
            }
            for (int i = start; i < (int)cands.size(); ++i) {
                if (cands[i].size > remaining) continue;
                pick.push_back(i);
                rec(i, remaining - cands[i].size);
                pick.pop_back();
            }
        };
        rec(0, n - 1);
    }
    // dedupe by canonical codes
    std::set<std::string> seen;
    std::vector<LabeledTree> unique;
    for (auto& t : out)
        if (seen.insert(t.canonical_code()).second) unique.push_back(std::move(t));
    cache[key] = unique;
    return unique;
}

inline std::vector<LabeledTree> labeled_trees_up_to(int max_nodes,
                                                    const std::vector<std::string>& alphabet,
                                                    int max_height = -1) {
    std::vector<LabeledTree> out;
    for (int n = 1; n <= max_nodes; ++n)
        for (auto& t : labeled_trees_with(n, alphabet))
            if (max_height < 0 || t.height() <= max_height) out.push_back(std::move(t));
    return out;
}

// forests = multisets of trees, enumerated up to isomorphism by total size
inline std::vector<LabeledForest> labeled_forests_up_to(int max_total,
                                                        const std::vector<std::string>& alphabet,
                                                        int max_height = -1) {
    std::vector<LabeledForest> out;
    struct Cand {
        int size;
        LabeledTree tree;
    };
    std::vector<Cand> cands;
    for (int n = 1; n <= max_total; ++n)
        for (auto& t : labeled_trees_with(n, alphabet))
            if (max_height < 0 || t.height() <= max_height) cands.push_back({n, t});
    std::vector<int> pick;
    std::function<void(int, int)> rec = [&](int start, int remaining) {
        if (!pick.empty()) {
            LabeledForest f;
            ElementId next = 0;
            for (int idx : pick) {
                const LabeledTree& t = cands[idx].tree;
                std::map<ElementId, ElementId> rename;
                for (ElementId v : t.nodes) rename[v] = next++;
                for (ElementId v : t.nodes) {
                    f.nodes.insert(rename[v]);
                    f.label[rename[v]] = t.label.at(v);
                }
                for (const auto& [c, p] : t.parent) f.parent[rename[c]] = rename[p];
            }
            out.push_back(std::move(f));
        }
        for (int i = start; i < (int)cands.size(); ++i) {
            if (cands[i].size > remaining) continue;
            pick.push_back(i);
            rec(i, remaining - cands[i].size);
            pick.pop_back();
        }
    };
    rec(0, max_total);
    return out;
}

inline LabeledForest forest_of(const LabeledTree& t) {
    LabeledForest f;
    f.nodes = t.nodes;
    f.parent = t.parent;
    f.label = t.label;
    return f;
}

inline LabeledTree random_labeled_tree(int n, const std::vector<std::string>& alphabet,
                                       int max_height, std::mt19937& rng) {
    LabeledTree t = LabeledTree::single(0, alphabet[rng() % alphabet.size()]);
    for (ElementId v = 1; v < n; ++v) {
        // attach to a random node of depth < max_height
        std::vector<ElementId> spots;
        for (ElementId u : t.nodes)
            if (t.depth_of(u) < max_height) spots.push_back(u);
        if (spots.empty()) break;
        ElementId p = spots[rng() % spots.size()];
        t.nodes.insert(v);
        t.parent[v] = p;
        t.label[v] = alphabet[rng() % alphabet.size()];
    }
    return t;
}

} // namespace sparse_logic
