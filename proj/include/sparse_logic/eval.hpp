#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/formula.hpp"
#include "sparse_logic/structure.hpp"

namespace sparse_logic {

using Valuation = std::map<std::string, ElementId>;

// Term evaluation is tri-state: a defined element or nullopt.  The collapse
// to false happens at atoms only.
inline std::optional<ElementId> eval_term(const RelStructure& a, const Term& t, ElementId base) {
    ElementId cur = base;
    for (const auto& f : t.funcs) {
        auto next = a.apply_function(f, cur);
        if (!next) return std::nullopt;
        cur = *next;
    }
    return cur;
}

inline std::optional<ElementId> eval_term(const RelStructure& a, const Term& t, const Valuation& nu) {
    auto it = nu.find(t.var);
    if (it == nu.end()) throw contract_error("unbound free variable: " + t.var);
    if (!a.contains(it->second)) throw contract_error("valuation image outside universe");
    return eval_term(a, t, it->second);
}

// Tarski semantics with quantifiers ranging over the universe; an atomic
// formula is false if any of its terms is undefined.  Exponential in
// quantifier depth -- this is the correctness oracle, not a fast path.
inline bool eval_naive(const RelStructure& a, const FormulaPtr& f, const Valuation& nu) {
    switch (f->kind) {
        case FormulaKind::True: return true;
        case FormulaKind::False: return false;
        case FormulaKind::Rel: {
            auto it = a.relations.find(f->symbol);
            if (it == a.relations.end()) throw contract_error("unknown relation: " + f->symbol);
            if ((int)f->terms.size() != it->second.arity)
                throw contract_error("arity mismatch in atom: " + f->symbol);
            Tuple vals;
            for (const auto& t : f->terms) {
                auto v = eval_term(a, t, nu);
                if (!v) return false;
                vals.push_back(*v);
            }
            return it->second.tuples.count(vals) != 0;
        }
        case FormulaKind::Eq: {
            auto v1 = eval_term(a, f->terms[0], nu);
            auto v2 = eval_term(a, f->terms[1], nu);
            if (!v1 || !v2) return false;
            return *v1 == *v2;
        }
        case FormulaKind::Dom: {
            auto v = eval_term(a, f->terms[0], nu);
            if (!v) return false; // dom of an undefined inner term is false
            if (!a.functions.count(f->symbol)) throw contract_error("unknown function: " + f->symbol);
            return a.apply_function(f->symbol, *v).has_value();
        }
        case FormulaKind::Not: return !eval_naive(a, f->kids[0], nu);
        case FormulaKind::And:
            for (const auto& k : f->kids)
                if (!eval_naive(a, k, nu)) return false;
            return true;
        case FormulaKind::Or:
            for (const auto& k : f->kids)
                if (eval_naive(a, k, nu)) return true;
            return false;
        case FormulaKind::Exists: {
            Valuation nu2 = nu;
            for (ElementId v : a.universe) {
                nu2[f->symbol] = v;
                if (eval_naive(a, f->kids[0], nu2)) return true;
            }
            return false;
        }
        case FormulaKind::Forall: {
            Valuation nu2 = nu;
            for (ElementId v : a.universe) {
                nu2[f->symbol] = v;
                if (!eval_naive(a, f->kids[0], nu2)) return false;
            }
            return true;
        }
    }
    return false;
}

// Quantifier-free evaluation; agrees with eval_naive on quantifier-free input.
inline bool eval_qf(const RelStructure& a, const FormulaPtr& f, const Valuation& nu) {
    if (!is_quantifier_free(f)) throw contract_error("eval_qf: formula has quantifiers");
    return eval_naive(a, f, nu);
}

// Terms appearing in phi, where dom_f(t) contributes f o t as well, since
// checking the dom atom inspects one step beyond the displayed term.
inline std::vector<Term> collect_terms_dom_closed(const FormulaPtr& phi) {
    std::vector<Term> out;
    std::function<void(const FormulaPtr&)> walk = [&](const FormulaPtr& f) {
        switch (f->kind) {
            case FormulaKind::Rel:
            case FormulaKind::Eq:
                for (const auto& t : f->terms) out.push_back(t);
                return;
            case FormulaKind::Dom:
                out.push_back(f->terms[0]);
                out.push_back(f->terms[0].applied(f->symbol));
                return;
            default:
                for (const auto& k : f->kids) walk(k);
                return;
        }
    };
    walk(phi);
    return out;
}

// cl_phi(v): v itself plus every intermediate value of evaluating the
// function chain of any term of phi starting at v.  These are exactly the
// elements inspected when phi's terms are evaluated at v.
inline std::set<ElementId> dependency_set(const RelStructure& a, const FormulaPtr& phi, ElementId v) {
    if (!a.contains(v)) throw contract_error("dependency_set: element outside universe");
    std::set<ElementId> out{v};
    for (const auto& t : collect_terms_dom_closed(phi)) {
        ElementId cur = v;
        for (const auto& fn : t.funcs) {
            auto next = a.apply_function(fn, cur);
            if (!next) break;
            cur = *next;
            out.insert(cur);
        }
    }
    return out;
}

// Enumerate all total valuations of `vars` over the universe of `a`.
inline std::vector<Valuation> all_valuations(const RelStructure& a, const std::set<std::string>& vars) {
    std::vector<Valuation> out{Valuation{}};
    for (const auto& x : vars) {
        std::vector<Valuation> next;
        for (const auto& nu : out)
            for (ElementId v : a.universe) {
                Valuation nu2 = nu;
                nu2[x] = v;
                next.push_back(std::move(nu2));
            }
        out = std::move(next);
    }
    return out;
}

} // namespace sparse_logic
