#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/automaton.hpp"
#include "sparse_logic/budget.hpp"
#include "sparse_logic/eval.hpp"
#include "sparse_logic/labeled_tree.hpp"

namespace sparse_logic {

// Quantifier elimination on Sigma-labeled forests of bounded height.
//
// The input formula phi (free variables X) is compiled to a deterministic
// threshold automaton over Sigma x 2^X trees.  Each node u of the input gets
// relabeled with (own label, M-capped multiset of the children's empty-run
// states, root label), where M = K + |X|.  A quantifier-free formula over
// the relabeling then decides phi: it is a disjunction over the finitely
// many accepted "shapes" (ancestor closures of valuation images), each shape
// recognized by depth, label, and least-common-ancestor constraints through
// the parent function.

namespace qe_detail {

inline const std::string kRootLabel = "_root";

inline std::string sigma_x_label(const std::string& a, const std::set<std::string>& marks) {
    std::string out = a + "|";
    bool first = true;
    for (const auto& m : marks) {
        if (!first) out += ",";
        out += m;
        first = false;
    }
    return out;
}

// all subsets of vars, as sorted vectors
inline std::vector<std::set<std::string>> all_mark_sets(const std::vector<std::string>& vars) {
    std::vector<std::set<std::string>> out{{}};
    for (const auto& v : vars) {
        std::size_t n = out.size();
        for (std::size_t i = 0; i < n; ++i) {
            auto s = out[i];
            s.insert(v);
            out.push_back(std::move(s));
        }
    }
    return out;
}

// Rewrite a forest-vocabulary formula (labels L<a>, parent function) into the
// prepended-root tree vocabulary over Sigma' = Sigma + _root:
//  - quantifiers relativize to non-root nodes
//  - equalities guard against both sides degenerating to the tree root
//  - dom_parent additionally requires the parent to be a non-root node
inline FormulaPtr forest_to_tree(const FormulaPtr& phi, const std::vector<std::string>& sigma) {
    auto root_atom = [&](const Term& t) { return f_rel("L" + kRootLabel, {t}); };
    std::function<FormulaPtr(const FormulaPtr&)> walk = [&](const FormulaPtr& f) -> FormulaPtr {
        switch (f->kind) {
            case FormulaKind::True:
            case FormulaKind::False:
            case FormulaKind::Rel:
                return f; // label atoms: the root label differs from every L<a>
            case FormulaKind::Eq:
                return f_and({f, f_not(root_atom(f->terms[0]))});
            case FormulaKind::Dom:
                if (f->symbol != "parent") return f;
                return f_and({f, f_not(root_atom(f->terms[0].applied("parent")))});
            case FormulaKind::Not:
                return f_not(walk(f->kids[0]));
            case FormulaKind::And:
            case FormulaKind::Or: {
                std::vector<FormulaPtr> ks;
                for (const auto& k : f->kids) ks.push_back(walk(k));
                return f->kind == FormulaKind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
            }
            case FormulaKind::Exists:
                return f_exists(f->symbol,
                                f_and({f_not(root_atom(Term::variable(f->symbol))), walk(f->kids[0])}));
            case FormulaKind::Forall:
                return f_forall(f->symbol,
                                f_or({root_atom(Term::variable(f->symbol)), walk(f->kids[0])}));
        }
        return f;
    };
    (void)sigma;
    return walk(phi);
}

// Expand L<a> atoms over the product alphabet Sigma' x 2^X and close the
// free variables under existential "marked" quantification, yielding the
// sentence the automaton is compiled from.
inline FormulaPtr close_over_marks(const FormulaPtr& phi, const std::vector<std::string>& sigma_prime,
                                   const std::vector<std::string>& vars) {
    auto marksets = all_mark_sets(vars);
    std::function<FormulaPtr(const FormulaPtr&)> expand = [&](const FormulaPtr& f) -> FormulaPtr {
        switch (f->kind) {
            case FormulaKind::Rel: {
                if (f->symbol.rfind("L", 0) != 0) return f;
                std::string a = f->symbol.substr(1);
                std::vector<FormulaPtr> cases;
                for (const auto& y : marksets)
                    cases.push_back(f_rel("L" + sigma_x_label(a, y), {f->terms[0]}));
                return f_or(std::move(cases));
            }
            case FormulaKind::Not:
                return f_not(expand(f->kids[0]));
            case FormulaKind::And:
            case FormulaKind::Or: {
                std::vector<FormulaPtr> ks;
                for (const auto& k : f->kids) ks.push_back(expand(k));
                return f->kind == FormulaKind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
            }
            case FormulaKind::Exists:
                return f_exists(f->symbol, expand(f->kids[0]));
            case FormulaKind::Forall:
                return f_forall(f->symbol, expand(f->kids[0]));
            default:
                return f;
        }
    };
    FormulaPtr body = expand(phi);
    // marked_x(z): some label whose mark set contains x holds at z
    for (auto it = vars.rbegin(); it != vars.rend(); ++it) {
        std::vector<FormulaPtr> cases;
        for (const auto& a : sigma_prime)
            for (const auto& y : marksets)
                if (y.count(*it))
                    cases.push_back(f_rel("L" + sigma_x_label(a, y), {Term::variable(*it)}));
        body = f_exists(*it, f_and({f_or(std::move(cases)), body}));
    }
    return body;
}

inline CappedMultiset parse_multiset(const std::string& code) {
    CappedMultiset ms;
    std::size_t i = 0;
    while (i < code.size()) {
        std::size_t x = code.find('x', i);
        std::size_t s = code.find(';', x);
        ms.entries.push_back(
            {std::stoi(code.substr(i, x - i)), std::stoi(code.substr(x + 1, s - x - 1))});
        i = s + 1;
    }
    return ms;
}

struct GammaLabel {
    std::string letter;   // Sigma' letter
    std::string ms_code;  // M-capped multiset of empty-run child states

    std::string str() const { return letter + "#" + ms_code; }

    static GammaLabel parse(const std::string& s) {
        auto pos = s.find('#');
        return {s.substr(0, pos), s.substr(pos + 1)};
    }
};

} // namespace qe_detail

// A shape: the ancestor closure of a valuation image inside a relabeled
// tree, stored with variable placements baked into the node labels.
struct QEShape {
    LabeledTree tree; // labels: "<gamma>@<vars>"
    bool accepted = false;

    std::string code() const { return tree.canonical_code(); }

    static std::string augment(const std::string& gamma, const std::set<std::string>& vars) {
        std::string out = gamma + "@";
        bool first = true;
        for (const auto& v : vars) {
            if (!first) out += ",";
            out += v;
            first = false;
        }
        return out;
    }

    static std::pair<std::string, std::set<std::string>> split(const std::string& label) {
        auto pos = label.rfind('@');
        std::set<std::string> vars;
        std::string rest = label.substr(pos + 1);
        std::size_t i = 0;
        while (i < rest.size()) {
            auto j = rest.find(',', i);
            if (j == std::string::npos) j = rest.size();
            if (j > i) vars.insert(rest.substr(i, j - i));
            i = j + 1;
        }
        return {label.substr(0, pos), vars};
    }
};

class QEForestResult {
public:
    std::vector<std::string> sigma;        // input alphabet
    std::vector<std::string> vars;         // free variables X (sorted)
    int height_bound = 0;                  // forest height bound
    int cap_m = 0;                         // M = K + |X|
    std::shared_ptr<PrunedTreeAutomaton> automaton; // over Sigma' x 2^X
    std::vector<QEShape> shapes;           // enumerated candidates (R among them)
    FormulaPtr hat_phi;                    // quantifier-free over the relabeling
    std::vector<std::string> gamma_pairs;  // realized (gamma, root-gamma) labels

    // ---- relabeling -------------------------------------------------------

    // run states of the empty valuation over the prepended tree
    std::map<ElementId, StateId> empty_run(const LabeledTree& tree_with_root) const {
        LabeledTree tagged = tree_with_root;
        for (auto& [v, l] : tagged.label) l = qe_detail::sigma_x_label(l, {});
        auto run = run_automaton(*automaton, tagged);
        return run.state;
    }

    LabeledTree prepend(const LabeledForest& f, ElementId root_id) const {
        return f.with_prepended_root(root_id, qe_detail::kRootLabel);
    }

    // Gamma label of each node of the prepended tree
    std::map<ElementId, std::string> gamma_labels(const LabeledTree& t) const {
        auto states = empty_run(t);
        std::map<ElementId, std::string> out;
        for (ElementId v : t.nodes) {
            std::vector<StateId> kid_states;
            for (ElementId c : t.children(v)) kid_states.push_back(states.at(c));
            auto capped = CappedMultiset::from_states(std::move(kid_states), cap_m);
            out[v] = qe_detail::GammaLabel{t.label.at(v), capped.code()}.str();
        }
        return out;
    }

    // the relabeled forest: every node carries (own gamma, root gamma)
    LabeledForest relabel(const LabeledForest& f) const {
        ElementId root_id = 0;
        for (ElementId v : f.nodes) root_id = std::max(root_id, v + 1);
        auto t = prepend(f, root_id);
        auto gammas = gamma_labels(t);
        LabeledForest out;
        out.nodes = f.nodes;
        out.parent = f.parent;
        for (ElementId v : f.nodes) out.label[v] = gammas.at(v) + "&" + gammas.at(root_id);
        return out;
    }

    RelStructure relabeled_structure(const LabeledForest& f) const {
        auto hat = relabel(f);
        return hat.to_structure(gamma_pairs);
    }

    // ---- shape membership (the rho recursion) -----------------------------

    bool shape_accepted(const LabeledTree& shape) const {
        // bottom-up over the shape; every shape node is "nonempty"
        std::map<ElementId, StateId> rho_empty, rho_nu;
        std::function<bool(ElementId)> visit = [&](ElementId u) -> bool {
            std::vector<StateId> n_empty, n_nu;
            for (ElementId c : shape.children(u)) {
                if (!visit(c)) return false;
                n_empty.push_back(rho_empty.at(c));
                n_nu.push_back(rho_nu.at(c));
            }
            auto [gamma_str, marks] = QEShape::split(shape.label.at(u));
            auto gamma = qe_detail::GammaLabel::parse(gamma_str);
            auto d = qe_detail::parse_multiset(gamma.ms_code);
            const int k_cap = automaton->threshold();
            // rho_empty(u) = delta((a, {}), K-cap(D))
            {
                std::vector<StateId> flat;
                for (const auto& [q, c] : d.entries)
                    for (int i = 0; i < c; ++i) flat.push_back(q);
                rho_empty[u] = automaton->transition(qe_detail::sigma_x_label(gamma.letter, {}),
                                                     CappedMultiset::from_states(flat, k_cap));
            }
            // rho_nu(u) = delta((a, Y), K-cap((D - N_empty) + N_nu))
            {
                std::map<StateId, int> counts;
                for (const auto& [q, c] : d.entries) counts[q] = c;
                for (StateId q : n_empty) {
                    if (--counts[q] < 0) return false; // unrealizable candidate
                }
                std::vector<StateId> flat;
                for (const auto& [q, c] : counts)
                    for (int i = 0; i < c; ++i) flat.push_back(q);
                for (StateId q : n_nu) flat.push_back(q);
                rho_nu[u] = automaton->transition(qe_detail::sigma_x_label(gamma.letter, marks),
                                                  CappedMultiset::from_states(flat, k_cap));
            }
            return true;
        };
        ElementId root = shape.root();
        if (!visit(root)) return false;
        return automaton->accepting(rho_nu.at(root));
    }

    // ---- recognizing formulas --------------------------------------------

    // depth / ancestor-label / lca constraints recognizing this shape in the
    // relabeled forest vocabulary
    FormulaPtr shape_formula(const LabeledTree& shape) const {
        std::vector<FormulaPtr> conj;
        ElementId root = shape.root();
        auto root_gamma = QEShape::split(shape.label.at(root)).first;
        std::map<std::string, ElementId> var_node;
        for (ElementId v : shape.nodes)
            for (const auto& x : QEShape::split(shape.label.at(v)).second) var_node[x] = v;
        auto chain = [&](const std::string& var, int k) {
            Term t = Term::variable(var);
            for (int i = 0; i < k; ++i) t = t.applied("parent");
            return t;
        };
        // per-variable constraints
        for (const auto& [x, node] : var_node) {
            int tree_depth = shape.depth_of(node);
            int forest_depth = tree_depth - 1; // the prepended root is not a forest node
            // depth pinning
            if (forest_depth > 0) conj.push_back(f_dom("parent", chain(x, forest_depth - 1)));
            conj.push_back(f_not(f_dom("parent", chain(x, forest_depth))));
            // ancestor labels (forest nodes only), each paired with the root gamma
            ElementId anc = node;
            for (int e = tree_depth; e >= 1; --e) {
                auto gamma = QEShape::split(shape.label.at(anc)).first;
                conj.push_back(f_rel("L" + gamma + "&" + root_gamma, {chain(x, tree_depth - e)}));
                anc = shape.parent.count(anc) ? shape.parent.at(anc) : anc;
            }
        }
        // pairwise lca constraints
        for (auto it1 = var_node.begin(); it1 != var_node.end(); ++it1)
            for (auto it2 = std::next(it1); it2 != var_node.end(); ++it2) {
                const auto& [x, ux] = *it1;
                const auto& [y, uy] = *it2;
                if (ux == uy) {
                    conj.push_back(f_eq(Term::variable(x), Term::variable(y)));
                    continue;
                }
                // lca in the shape tree
                std::vector<ElementId> px{ux};
                for (ElementId v = ux; shape.parent.count(v);) {
                    v = shape.parent.at(v);
                    px.push_back(v);
                }
                std::set<ElementId> anc_x(px.begin(), px.end());
                ElementId l = uy;
                while (!anc_x.count(l)) l = shape.parent.at(l);
                int dl = shape.depth_of(l);
                int dx = shape.depth_of(ux), dy = shape.depth_of(uy);
                if (dl == 0) {
                    // different trees of the forest: root nodes differ
                    conj.push_back(f_not(f_eq(chain(x, dx - 1 - 0), chain(y, dy - 1 - 0))));
                } else {
                    conj.push_back(f_eq(chain(x, dx - dl), chain(y, dy - dl)));
                    if (dl < std::min(dx, dy))
                        conj.push_back(f_not(f_eq(chain(x, dx - dl - 1), chain(y, dy - dl - 1))));
                }
            }
        return f_and(std::move(conj));
    }

    // ---- the equivalence the caller relies on ------------------------------

    bool eval_input(const LabeledForest& f, const FormulaPtr& phi, const Valuation& nu) const {
        return eval_naive(f.to_structure(sigma), phi, nu);
    }

    bool eval_relabeled(const LabeledForest& f, const Valuation& nu) const {
        return eval_qf(relabeled_structure(f), hat_phi, nu);
    }
};

// Build the QE data for `phi` over Sigma-labeled forests of height <= h.
// The finite family fixes which relabelings are realized; hat_phi is exact
// on every forest whose realized labels stay inside the family's.
inline QEForestResult qe_forest(const FormulaPtr& phi, const std::vector<std::string>& sigma, int h,
                                const std::vector<LabeledForest>& family,
                                const Budget& budget = default_budget()) {
    QEForestResult r;
    r.sigma = sigma;
    auto fv = free_vars(phi);
    r.vars.assign(fv.begin(), fv.end());
    if (r.vars.empty()) throw contract_error("qe_forest expects at least one free variable");
    r.height_bound = h;

    std::vector<std::string> sigma_prime = sigma;
    sigma_prime.push_back(qe_detail::kRootLabel);

    // the sentence over Sigma' x 2^X trees
    auto tree_phi = qe_detail::forest_to_tree(eliminate_forall(phi), sigma);
    auto psi = qe_detail::close_over_marks(tree_phi, sigma_prime, r.vars);

    std::vector<std::string> sigma_x;
    for (const auto& a : sigma_prime)
        for (const auto& y : qe_detail::all_mark_sets(r.vars))
            sigma_x.push_back(qe_detail::sigma_x_label(a, y));
    r.automaton = fo_to_automaton(psi, sigma_x, h + 1, budget);
    r.cap_m = r.automaton->threshold() + (int)r.vars.size();

    // realized shapes and label pairs over the family
    std::set<std::string> pair_labels;
    std::set<std::string> shape_codes;
    for (const auto& f : family) {
        if (f.height() > h) throw contract_error("family member exceeds the height bound");
        ElementId root_id = 0;
        for (ElementId v : f.nodes) root_id = std::max(root_id, v + 1);
        auto t = r.prepend(f, root_id);
        auto gammas = r.gamma_labels(t);
        for (ElementId v : f.nodes) pair_labels.insert(gammas.at(v) + "&" + gammas.at(root_id));
        // every valuation of X in f
        std::vector<ElementId> universe(f.nodes.begin(), f.nodes.end());
        std::vector<Valuation> nus{Valuation{}};
        for (const auto& x : r.vars) {
            std::vector<Valuation> next;
            for (const auto& nu : nus)
                for (ElementId v : universe) {
                    auto nu2 = nu;
                    nu2[x] = v;
                    next.push_back(std::move(nu2));
                }
            nus = std::move(next);
        }
        for (const auto& nu : nus) {
            // ancestor closure of the image inside the prepended tree
            std::set<ElementId> keep;
            for (const auto& [x, v] : nu) {
                ElementId cur = v;
                keep.insert(cur);
                while (t.parent.count(cur)) {
                    cur = t.parent.at(cur);
                    keep.insert(cur);
                }
            }
            LabeledTree s;
            s.nodes = keep;
            for (ElementId v : keep) {
                std::set<std::string> marks;
                for (const auto& [x, img] : nu)
                    if (img == v) marks.insert(x);
                s.label[v] = QEShape::augment(gammas.at(v), marks);
                if (t.parent.count(v) && keep.count(t.parent.at(v))) s.parent[v] = t.parent.at(v);
            }
            auto canon = s.canonical_form();
            if ((long)shape_codes.size() >= budget.max_shapes)
                throw capacity_error("shape enumeration budget exceeded");
            if (shape_codes.insert(canon.canonical_code()).second) {
                QEShape shape;
                shape.tree = std::move(canon);
                r.shapes.push_back(std::move(shape));
            }
        }
    }

    // a few systematically generated variants (label swaps at the deepest
    // node) keep unrealizable candidates in the pool; they are retained but
    // never fire
    {
        std::vector<QEShape> variants;
        for (const auto& shape : r.shapes) {
            if ((long)(r.shapes.size() + variants.size()) * 2 > budget.max_shapes) break;
            for (const auto& other : r.shapes) {
                if (&other == &shape) continue;
                LabeledTree mutated = shape.tree;
                // swap the root gamma with another realized root gamma
                ElementId root = mutated.root();
                auto [g1, m1] = QEShape::split(mutated.label.at(root));
                auto [g2, m2] = QEShape::split(other.tree.label.at(other.tree.root()));
                if (g1 == g2) continue;
                mutated.label[root] = QEShape::augment(g2, m1);
                auto canon = mutated.canonical_form();
                if (shape_codes.insert(canon.canonical_code()).second) {
                    QEShape v2;
                    v2.tree = std::move(canon);
                    variants.push_back(std::move(v2));
                }
                break;
            }
        }
        for (auto& v : variants) r.shapes.push_back(std::move(v));
    }

    // decide membership via the rho recursion and assemble hat_phi
    std::vector<FormulaPtr> disjuncts;
    for (auto& shape : r.shapes) {
        shape.accepted = r.shape_accepted(shape.tree);
        if (!shape.accepted) continue;
        // every referenced pair label must live in the output signature
        auto root_gamma = QEShape::split(shape.tree.label.at(shape.tree.root())).first;
        for (ElementId v : shape.tree.nodes) {
            if (v == shape.tree.root()) continue;
            pair_labels.insert(QEShape::split(shape.tree.label.at(v)).first + "&" + root_gamma);
        }
        disjuncts.push_back(r.shape_formula(shape.tree));
    }
    r.gamma_pairs.assign(pair_labels.begin(), pair_labels.end());
    r.hat_phi = f_or(std::move(disjuncts));
    return r;
}

} // namespace sparse_logic
