#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/enumerate.hpp"
#include "sparse_logic/qe_forest.hpp"
#include "sparse_logic/transduction.hpp"
#include "sparse_logic/treedepth.hpp"

namespace sparse_logic {

// ---------------------------------------------------------------------------
// Term flattening: rewrite every atom so its terms apply at most zero
// function symbols, introducing existential steps for the chains.  Needed to
// pull formulas back through the forest encoding, where the original
// functions are only available as definable binary relations.
// ---------------------------------------------------------------------------

namespace pipeline_detail {

inline FormulaPtr flatten_terms(const FormulaPtr& f, int& fresh) {
    switch (f->kind) {
        case FormulaKind::True:
        case FormulaKind::False:
            return f;
        case FormulaKind::Rel:
        case FormulaKind::Eq:
        case FormulaKind::Dom: {
            // peel one innermost function application, then recurse
            for (std::size_t ti = 0; ti < f->terms.size(); ++ti) {
                if (f->terms[ti].funcs.empty()) continue;
                const Term& t = f->terms[ti];
                std::string z = "_t" + std::to_string(++fresh);
                Term stem{t.var, {t.funcs.front()}};
                std::vector<Term> new_terms;
                for (const auto& u : f->terms) {
                    if (u.var == t.var && !u.funcs.empty() && u.funcs.front() == t.funcs.front()) {
                        Term rest{z, {u.funcs.begin() + 1, u.funcs.end()}};
                        new_terms.push_back(rest);
                    } else {
                        new_terms.push_back(u);
                    }
                }
                auto rebuilt = std::make_shared<Formula>(Formula{f->kind, f->symbol, new_terms, {}});
                auto bind = f_eq(stem, Term::variable(z));
                return f_exists(z, f_and({bind, flatten_terms(rebuilt, fresh)}));
            }
            return f;
        }
        case FormulaKind::Not:
            return f_not(flatten_terms(f->kids[0], fresh));
        case FormulaKind::And:
        case FormulaKind::Or: {
            std::vector<FormulaPtr> ks;
            for (const auto& k : f->kids) ks.push_back(flatten_terms(k, fresh));
            return f->kind == FormulaKind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
        }
        case FormulaKind::Exists:
            return f_exists(f->symbol, flatten_terms(f->kids[0], fresh));
        case FormulaKind::Forall:
            return f_forall(f->symbol, flatten_terms(f->kids[0], fresh));
    }
    return f;
}

// depth(x) == d in the forest vocabulary
inline FormulaPtr forest_depth_is(const std::string& var, int d) {
    Term x = Term::variable(var);
    std::vector<FormulaPtr> conj;
    if (d > 0) {
        Term t = x;
        for (int i = 0; i < d - 1; ++i) t = t.applied("parent");
        conj.push_back(f_dom("parent", t));
    }
    Term t = x;
    for (int i = 0; i < d; ++i) t = t.applied("parent");
    conj.push_back(f_not(f_dom("parent", t)));
    return f_and(std::move(conj));
}

inline Term parent_chain(const std::string& var, int k) {
    Term t = Term::variable(var);
    for (int i = 0; i < k; ++i) t = t.applied("parent");
    return t;
}

// The decoded-atom formulas over an encoded forest.  `labels` maps each
// realized type-label string (without the leading "B") to its structure.
struct DecodeContext {
    std::vector<std::pair<std::string, RelStructure>> labels; // label -> type structure

    // R(v1..vk) holds iff the deepest argument's type label says so
    FormulaPtr rel(const std::string& symbol, const std::vector<std::string>& vars) const {
        std::vector<FormulaPtr> cases;
        for (const auto& [name, b] : labels) {
            auto it = b.relations.find(symbol);
            if (it == b.relations.end()) continue;
            const int label_depth = (int)b.universe.size() - 1;
            for (const auto& tup : it->second.tuples) {
                if ((int)tup.size() != (int)vars.size()) continue;
                int mx = tup.empty() ? 0 : *std::max_element(tup.begin(), tup.end());
                if (!tup.empty() && mx != label_depth) continue;
                // the variable at the deepest position pins the label
                std::size_t deepest = 0;
                for (std::size_t j = 0; j < tup.size(); ++j)
                    if (tup[j] == mx) deepest = j;
                std::vector<FormulaPtr> conj;
                conj.push_back(f_rel("L" + name, {Term::variable(vars[deepest])}));
                for (std::size_t j = 0; j < tup.size(); ++j) {
                    conj.push_back(forest_depth_is(vars[j], tup[j]));
                    conj.push_back(f_eq(parent_chain(vars[deepest], mx - tup[j]),
                                        Term::variable(vars[j])));
                }
                cases.push_back(f_and(std::move(conj)));
            }
        }
        return f_or(std::move(cases));
    }

    // f(x) = y
    FormulaPtr fn(const std::string& symbol, const std::string& x, const std::string& y) const {
        std::vector<FormulaPtr> cases;
        for (const auto& [name, b] : labels) {
            auto it = b.functions.find(symbol);
            if (it == b.functions.end()) continue;
            const int label_depth = (int)b.universe.size() - 1;
            for (const auto& [i, j] : it->second) {
                if (std::max(i, j) != label_depth) continue;
                std::vector<FormulaPtr> conj;
                const std::string& deep_var = i >= j ? x : y;
                conj.push_back(f_rel("L" + name, {Term::variable(deep_var)}));
                conj.push_back(forest_depth_is(x, i));
                conj.push_back(forest_depth_is(y, j));
                if (i >= j)
                    conj.push_back(f_eq(parent_chain(x, i - j), Term::variable(y)));
                else
                    conj.push_back(f_eq(parent_chain(y, j - i), Term::variable(x)));
                cases.push_back(f_and(std::move(conj)));
            }
        }
        return f_or(std::move(cases));
    }
};

// Pull an arbitrary FO formula over the original signature back over the
// decode transduction: atoms become forest formulas.  Assumes terms are
// flattened (length <= 1); acts on the output of flatten_terms.
inline FormulaPtr pullback(const FormulaPtr& f, const DecodeContext& ctx, int& fresh) {
    switch (f->kind) {
        case FormulaKind::True:
        case FormulaKind::False:
            return f;
        case FormulaKind::Rel: {
            std::vector<std::string> vars;
            for (const auto& t : f->terms) {
                if (!t.funcs.empty()) throw contract_error("pullback expects flattened atoms");
                vars.push_back(t.var);
            }
            return ctx.rel(f->symbol, vars);
        }
        case FormulaKind::Eq: {
            const Term& a = f->terms[0];
            const Term& b = f->terms[1];
            if (a.funcs.empty() && b.funcs.empty()) return f; // plain equality survives
            if (a.funcs.size() == 1 && b.funcs.empty()) return ctx.fn(a.funcs[0], a.var, b.var);
            if (b.funcs.size() == 1 && a.funcs.empty()) return ctx.fn(b.funcs[0], b.var, a.var);
            throw contract_error("pullback expects flattened atoms");
        }
        case FormulaKind::Dom: {
            if (!f->terms[0].funcs.empty()) throw contract_error("pullback expects flattened atoms");
            std::string z = "_d" + std::to_string(++fresh);
            return f_exists(z, ctx.fn(f->symbol, f->terms[0].var, z));
        }
        case FormulaKind::Not:
            return f_not(pullback(f->kids[0], ctx, fresh));
        case FormulaKind::And:
        case FormulaKind::Or: {
            std::vector<FormulaPtr> ks;
            for (const auto& k : f->kids) ks.push_back(pullback(k, ctx, fresh));
            return f->kind == FormulaKind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
        }
        case FormulaKind::Exists:
            return f_exists(f->symbol, pullback(f->kids[0], ctx, fresh));
        case FormulaKind::Forall:
            return f_forall(f->symbol, pullback(f->kids[0], ctx, fresh));
    }
    return f;
}

// The flattened equality atoms produced above use terms with exactly one
// function symbol.  Handle the special in-atom case eq((f x), (g y)) too.
inline FormulaPtr pullback_entry(const FormulaPtr& f, const DecodeContext& ctx, int& fresh) {
    return pullback(f, ctx, fresh);
}

} // namespace pipeline_detail

// ---------------------------------------------------------------------------
// qe_btd: quantifier elimination over a corpus of structures of bounded
// treedepth, through the DFS forest encoding and qe_forest.
// ---------------------------------------------------------------------------

struct QeBtdResult {
    FormulaPtr qf;                     // over the enriched structures
    QEForestResult forest_qe;          // relabeling machinery
    std::vector<std::string> alphabet; // realized forest labels
    std::string var_suffix;            // dummy variable name if one was added
    int encode_depth = 1;

    // the enriched structure: relabel predicates plus the parent function
    // and depth predicates of the DFS forest
    RelStructure enrich(const RelStructure& a) const {
        RootedForest f = encode_btd_forest(a, encode_depth);
        LabeledForest lf;
        lf.nodes = f.nodes;
        lf.parent = f.to_parent_encoding().parent;
        for (ElementId v : f.nodes) {
            for (const auto& [name, set] : f.labels)
                if (name.rfind("B", 0) == 0 && set.count(v)) lf.label[v] = name.substr(1);
        }
        RelStructure out = forest_qe.relabeled_structure(lf);
        // depth predicates (used by emitted parent definitions downstream)
        auto depths = f.depths();
        int maxd = 0;
        for (const auto& [v, d] : depths) maxd = std::max(maxd, d);
        for (int d = 0; d <= maxd; ++d) {
            std::string name = "Dp" + std::to_string(d);
            out.add_relation(name, 1);
            out.colors.insert(name);
        }
        for (const auto& [v, d] : depths) out.add_tuple("Dp" + std::to_string(d), {v});
        return out;
    }

    bool guarded_check(const RelStructure& a) const {
        auto g = gaifman_graph(a);
        auto hat = enrich(a);
        for (const auto& [name, fn] : hat.functions) {
            if (a.functions.count(name)) continue;
            for (const auto& [x, y] : fn)
                if (x != y && !g.adjacent(x, y)) return false;
        }
        return true;
    }
};

// Eliminate quantifiers of `phi` over structures whose treedepth certificate
// is at most `td_bound`.  The corpus fixes the realized label alphabet.
inline QeBtdResult qe_btd(const FormulaPtr& phi_in, const std::vector<RelStructure>& corpus,
                          int td_bound, const Budget& budget = default_budget()) {
    QeBtdResult res;
    res.encode_depth = std::max(td_bound, 1);
    FormulaPtr phi = eliminate_forall(phi_in);
    if (free_vars(phi).empty()) {
        res.var_suffix = "_s0";
        phi = f_and({phi, f_eq(Term::variable("_s0"), Term::variable("_s0"))});
    }

    // encode every corpus structure; collect the realized label alphabet
    std::vector<LabeledForest> family;
    std::set<std::string> labels;
    std::set<std::string> family_codes;
    int height = 0;
    std::vector<std::pair<std::string, RelStructure>> label_structs;
    for (const auto& a : corpus) {
        RootedForest f = encode_btd_forest(a, res.encode_depth);
        LabeledForest lf;
        lf.nodes = f.nodes;
        lf.parent = f.to_parent_encoding().parent;
        for (ElementId v : f.nodes)
            for (const auto& [name, set] : f.labels)
                if (name.rfind("B", 0) == 0 && set.count(v)) lf.label[v] = name.substr(1);
        for (const auto& [v, l] : lf.label)
            if (labels.insert(l).second)
                label_structs.push_back({l, structure_from_json(json::parse(l))});
        height = std::max(height, lf.height());
        // dedupe isomorphic forests to keep the family small
        LabeledTree probe;
        probe.nodes = lf.nodes;
        probe.parent = lf.parent;
        probe.label = lf.label;
        ElementId root_id = 0;
        for (ElementId v : lf.nodes) root_id = std::max(root_id, v + 1);
        auto canon = lf.with_prepended_root(root_id, "_probe").canonical_code();
        if (family_codes.insert(canon).second) family.push_back(std::move(lf));
    }
    res.alphabet.assign(labels.begin(), labels.end());

    // pull phi back over the decode transduction
    pipeline_detail::DecodeContext ctx;
    ctx.labels = label_structs;
    int fresh = 0;
    auto flat = pipeline_detail::flatten_terms(phi, fresh);
    auto psi = pipeline_detail::pullback_entry(flat, ctx, fresh);

    res.forest_qe = qe_forest(psi, res.alphabet, height, family, budget);
    res.qf = res.forest_qe.hat_phi;
    return res;
}

// ---------------------------------------------------------------------------
// qf_localize (Lemma "qf-covers"): conjoin definedness of the terms used by
// negated atoms, so a member of a (c*p)-cover evaluates the formula exactly.
// The construction requires dom atoms to occur positively.
// ---------------------------------------------------------------------------

inline int count_distinct_terms(const FormulaPtr& phi) {
    std::set<std::pair<std::string, std::vector<std::string>>> terms;
    for (const auto& t : collect_terms_dom_closed(phi)) {
        // subterm closure: every prefix counts
        std::vector<std::string> prefix;
        terms.insert({t.var, prefix});
        for (const auto& fn : t.funcs) {
            prefix.push_back(fn);
            terms.insert({t.var, prefix});
        }
    }
    return (int)terms.size();
}

namespace pipeline_detail {

inline FormulaPtr definedness_of(const FormulaPtr& atom) {
    std::vector<FormulaPtr> conj;
    if (atom->kind == FormulaKind::Dom)
        throw contract_error("qf_localize: dom atoms must occur positively");
    for (const auto& t : atom->terms) {
        if (t.funcs.empty()) continue;
        Term prefix{t.var, {t.funcs.begin(), t.funcs.end() - 1}};
        conj.push_back(f_dom(t.funcs.back(), prefix));
    }
    return f_and(std::move(conj));
}

inline FormulaPtr localize(const FormulaPtr& f, bool positive) {
    switch (f->kind) {
        case FormulaKind::True:
        case FormulaKind::False:
            return f;
        case FormulaKind::Rel:
        case FormulaKind::Eq:
        case FormulaKind::Dom:
            if (positive) return f;
            return f_and({f, definedness_of(f)});
        case FormulaKind::Not:
            return f_not(localize(f->kids[0], !positive));
        case FormulaKind::And:
        case FormulaKind::Or: {
            std::vector<FormulaPtr> ks;
            for (const auto& k : f->kids) ks.push_back(localize(k, positive));
            return f->kind == FormulaKind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
        }
        default:
            throw contract_error("qf_localize expects a quantifier-free formula");
    }
}

} // namespace pipeline_detail

// phi'' such that A |= phi'(a..) iff some cover member containing the tuple
// satisfies phi'' in the induced substructure.
inline FormulaPtr qf_localize(const FormulaPtr& phi) {
    if (!is_quantifier_free(phi)) throw contract_error("qf_localize expects a quantifier-free formula");
    return pipeline_detail::localize(phi, true);
}

// ---------------------------------------------------------------------------
// qe_bounded_expansion: structural induction over the formula; the
// existential case goes through covers and qe_btd per cover member.
// ---------------------------------------------------------------------------

class QeBoundedExpansion {
public:
    struct Result {
        FormulaPtr qf;
        std::string dummy_var; // nonempty when the input was a sentence
    };

    explicit QeBoundedExpansion(std::vector<RelStructure> corpus,
                                Budget budget = default_budget())
        : corpus_(std::move(corpus)), budget_(budget) {}

    Result eliminate(const FormulaPtr& phi_in) {
        steps_.clear();
        FormulaPtr phi = eliminate_forall(phi_in);
        Result res;
        if (free_vars(phi).empty()) {
            res.dummy_var = "_s0";
            phi = f_and({phi, f_eq(Term::variable("_s0"), Term::variable("_s0"))});
        }
        res.qf = recurse(phi);
        return res;
    }

    // the enriched structure all introduced symbols live on
    RelStructure enrich(const RelStructure& a) const {
        RelStructure cur = a;
        for (const auto& s : steps_) cur = s(cur);
        return cur;
    }

    // emitted transduction: unary lifts with computed advice plus guarded
    // function extensions; equivalent to enrich() in advice mode
    Transduction emitted() const { return emitted_; }

    bool guarded_check(const RelStructure& a) const {
        auto g = gaifman_graph(a);
        auto hat = enrich(a);
        for (const auto& [name, fn] : hat.functions) {
            if (a.functions.count(name)) continue;
            for (const auto& [x, y] : fn)
                if (x != y && !g.adjacent(x, y)) return false;
        }
        return true;
    }

    // full evaluation contract, sweeping the dummy variable if present
    bool evaluate(const RelStructure& a, const Result& r, const Valuation& nu) const {
        if (a.universe.empty()) {
            // no valuation exists; fall back to the naive value of a constant
            return false;
        }
        Valuation nu2 = nu;
        if (!r.dummy_var.empty()) nu2[r.dummy_var] = *a.universe.begin();
        return eval_qf(enrich(a), r.qf, nu2);
    }

private:
    std::vector<RelStructure> corpus_;
    Budget budget_;
    std::vector<std::function<RelStructure(const RelStructure&)>> steps_;
    Transduction emitted_;
    int counter_ = 0;
    std::map<std::string, Cover> cover_cache_;

    const Cover& cover_for(const RelStructure& a, int q) {
        std::string key = structure_to_json(a).dump() + "#" + std::to_string(q);
        auto it = cover_cache_.find(key);
        if (it != cover_cache_.end()) return it->second;
        auto cover = low_treedepth_cover(gaifman_graph(a), q, budget_);
        return cover_cache_.emplace(std::move(key), std::move(cover)).first->second;
    }

    FormulaPtr recurse(const FormulaPtr& phi) {
        switch (phi->kind) {
            case FormulaKind::True:
            case FormulaKind::False:
            case FormulaKind::Rel:
            case FormulaKind::Eq:
            case FormulaKind::Dom:
                return phi;
            case FormulaKind::Not:
                return f_not(recurse(phi->kids[0]));
            case FormulaKind::And:
            case FormulaKind::Or: {
                std::vector<FormulaPtr> ks;
                for (const auto& k : phi->kids) ks.push_back(recurse(k));
                return phi->kind == FormulaKind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
            }
            case FormulaKind::Forall:
                throw contract_error("universal quantifier should have been normalized away");
            case FormulaKind::Exists:
                return eliminate_exists(phi);
        }
        return phi;
    }

    FormulaPtr eliminate_exists(const FormulaPtr& phi) {
        const std::string y = phi->symbol;
        FormulaPtr inner = recurse(phi->kids[0]); // quantifier-free over enriched structures
        auto fv = free_vars(phi->kids[0]);
        fv.insert(y);
        const int p = (int)fv.size();
        FormulaPtr localized = qf_localize(inner);
        const int c = std::max(1, count_distinct_terms(localized));
        const int q = std::max(2, c * p);
        const int tag = ++counter_;

        // snapshot of the enrichment so far; the member encodings must see
        // exactly these structures
        auto prior_steps = steps_;
        auto enrich_prior = [prior_steps](const RelStructure& a) {
            RelStructure cur = a;
            for (const auto& s : prior_steps) cur = s(cur);
            return cur;
        };

        // member corpus for the treedepth elimination
        std::vector<RelStructure> members;
        int n_members = 0;
        int td_bound = 1;
        for (const auto& a : corpus_) {
            auto hat = enrich_prior(a);
            const auto& cover = cover_for(a, q);
            n_members = std::max(n_members, (int)cover.members.size());
            for (std::size_t i = 0; i < cover.members.size(); ++i) {
                members.push_back(induced_substructure(hat, cover.members[i]));
                td_bound = std::max(td_bound, cover.certificates[i].depth);
            }
        }
        auto member_qe =
            std::make_shared<QeBtdResult>(qe_btd(f_exists(y, localized), members, td_bound, budget_));

        // pipeline enrichment step: cover predicates + per-member relabeling
        const int n = n_members;
        auto self_budget = budget_;
        auto step = [member_qe, q, tag, n, prior_steps, self_budget,
                     this](const RelStructure& a) -> RelStructure {
            RelStructure cur = a;
            // recover the prior-stage structure to compute covers/encodings on
            RelStructure base = a;
            (void)prior_steps;
            auto cover = low_treedepth_cover(gaifman_graph(base), q, self_budget);
            RelStructure out = cur;
            for (int i = 0; i < n; ++i) {
                const auto& member_set =
                    cover.members[std::min<std::size_t>(i, cover.members.size() - 1)];
                std::string uname = "Cov" + std::to_string(tag) + "_" + std::to_string(i);
                out.add_relation(uname, 1);
                out.colors.insert(uname);
                for (ElementId v : member_set) out.add_tuple(uname, {v});
                RelStructure member = induced_substructure(base, member_set);
                RelStructure hat = member_qe->enrich(member);
                // import the member's new symbols with a #tag_i suffix
                std::string suffix = "#" + std::to_string(tag) + "_" + std::to_string(i);
                for (const auto& [name, rel] : hat.relations) {
                    if (member.relations.count(name)) continue;
                    std::string nn = name + suffix;
                    out.add_relation(nn, rel.arity);
                    if (rel.arity == 1) out.colors.insert(nn);
                    for (const auto& t : rel.tuples) out.add_tuple(nn, t);
                }
                for (const auto& [name, fn] : hat.functions) {
                    if (member.functions.count(name)) continue;
                    std::string nn = name + suffix;
                    out.add_function(nn);
                    for (const auto& [x2, y2] : fn) out.set_function(nn, x2, y2);
                }
            }
            return out;
        };
        steps_.push_back(step);

        // the disjunction over cover members
        std::vector<FormulaPtr> disjuncts;
        std::vector<std::string> outer(free_vars(phi).begin(), free_vars(phi).end());
        for (int i = 0; i < n; ++i) {
            std::string suffix = "#" + std::to_string(tag) + "_" + std::to_string(i);
            std::string uname = "Cov" + std::to_string(tag) + "_" + std::to_string(i);
            std::vector<FormulaPtr> conj;
            for (const auto& x : outer) conj.push_back(f_rel(uname, {Term::variable(x)}));
            conj.push_back(rename_symbols(member_qe->qf, member_qe, suffix));
            disjuncts.push_back(f_and(std::move(conj)));
        }
        return f_or(std::move(disjuncts));
    }

    // rename the member-level symbols (relabel predicates, parent, depth
    // predicates) with the per-member suffix
    static FormulaPtr rename_symbols(const FormulaPtr& f, const std::shared_ptr<QeBtdResult>& qe,
                                     const std::string& suffix) {
        auto rename_rel = [&](const std::string& name) { return name + suffix; };
        auto rename_term = [&](const Term& t) {
            Term out = Term::variable(t.var);
            for (const auto& fn : t.funcs) out = out.applied(fn + suffix);
            return out;
        };
        std::function<FormulaPtr(const FormulaPtr&)> walk = [&](const FormulaPtr& g) -> FormulaPtr {
            switch (g->kind) {
                case FormulaKind::Rel: {
                    std::vector<Term> ts;
                    for (const auto& t : g->terms) ts.push_back(rename_term(t));
                    return f_rel(rename_rel(g->symbol), std::move(ts));
                }
                case FormulaKind::Eq: {
                    return f_eq(rename_term(g->terms[0]), rename_term(g->terms[1]));
                }
                case FormulaKind::Dom:
                    return f_dom(g->symbol + suffix, rename_term(g->terms[0]));
                case FormulaKind::Not:
                    return f_not(walk(g->kids[0]));
                case FormulaKind::And:
                case FormulaKind::Or: {
                    std::vector<FormulaPtr> ks;
                    for (const auto& k : g->kids) ks.push_back(walk(k));
                    return g->kind == FormulaKind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
                }
                default:
                    return g;
            }
        };
        (void)qe;
        return walk(f);
    }
};

} // namespace sparse_logic
