#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/transduction.hpp"

namespace sparse_logic {

namespace detail {

struct FreshVars {
    int counter = 0;
    std::string next(const std::string& base) { return "_" + base + std::to_string(++counter); }
};

// Rename every bound variable to a fresh name so substitutions cannot capture.
inline FormulaPtr freshen_bound(const FormulaPtr& f, FreshVars& fresh,
                                std::map<std::string, std::string> renaming = {}) {
    auto rename_term = [&](const Term& t) {
        auto it = renaming.find(t.var);
        return it == renaming.end() ? t : Term{it->second, t.funcs};
    };
    switch (f->kind) {
        case FormulaKind::True:
        case FormulaKind::False:
            return f;
        case FormulaKind::Rel:
        case FormulaKind::Eq:
        case FormulaKind::Dom: {
            std::vector<Term> ts;
            for (const auto& t : f->terms) ts.push_back(rename_term(t));
            return std::make_shared<Formula>(Formula{f->kind, f->symbol, std::move(ts), {}});
        }
        case FormulaKind::Not:
            return f_not(freshen_bound(f->kids[0], fresh, renaming));
        case FormulaKind::And:
        case FormulaKind::Or: {
            std::vector<FormulaPtr> ks;
            for (const auto& k : f->kids) ks.push_back(freshen_bound(k, fresh, renaming));
            return f->kind == FormulaKind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
        }
        case FormulaKind::Exists:
        case FormulaKind::Forall: {
            std::string nv = fresh.next("b");
            auto r2 = renaming;
            r2[f->symbol] = nv;
            auto body = freshen_bound(f->kids[0], fresh, r2);
            return f->kind == FormulaKind::Exists ? f_exists(nv, body) : f_forall(nv, body);
        }
    }
    return f;
}

// Substitute variable -> term in every atom (terms compose).
inline FormulaPtr subst_var(const FormulaPtr& f, const std::string& var, const Term& replacement) {
    auto on_term = [&](const Term& t) { return t.var == var ? Term{replacement.var, [&] {
                                            auto fs = replacement.funcs;
                                            fs.insert(fs.end(), t.funcs.begin(), t.funcs.end());
                                            return fs;
                                        }()} : t; };
    switch (f->kind) {
        case FormulaKind::True:
        case FormulaKind::False:
            return f;
        case FormulaKind::Rel:
        case FormulaKind::Eq:
        case FormulaKind::Dom: {
            std::vector<Term> ts;
            for (const auto& t : f->terms) ts.push_back(on_term(t));
            return std::make_shared<Formula>(Formula{f->kind, f->symbol, std::move(ts), {}});
        }
        case FormulaKind::Not:
            return f_not(subst_var(f->kids[0], var, replacement));
        case FormulaKind::And:
        case FormulaKind::Or: {
            std::vector<FormulaPtr> ks;
            for (const auto& k : f->kids) ks.push_back(subst_var(k, var, replacement));
            return f->kind == FormulaKind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
        }
        case FormulaKind::Exists:
        case FormulaKind::Forall: {
            if (f->symbol == var) return f; // shadowed
            auto body = subst_var(f->kids[0], var, replacement);
            return f->kind == FormulaKind::Exists ? f_exists(f->symbol, body) : f_forall(f->symbol, body);
        }
    }
    return f;
}

// "t is defined": dom of the last function applied to the prefix term.
inline FormulaPtr term_defined(const Term& t) {
    if (t.funcs.empty()) return f_true();
    Term prefix{t.var, {t.funcs.begin(), t.funcs.end() - 1}};
    return f_dom(t.funcs.back(), prefix);
}

// Relativize phi to the elements satisfying psi (one free variable `var` in
// psi): quantifiers are guarded with psi and every term evaluation is forced
// to stay inside psi-elements, including the image checked by dom atoms.
// This makes phi-evaluated-before-restriction match phi-evaluated-after.
inline FormulaPtr relativize_to(const FormulaPtr& phi, const FormulaPtr& psi,
                                const std::string& psi_var, FreshVars& fresh) {
    auto guard_at = [&](const Term& t) {
        return subst_var(freshen_bound(psi, fresh), psi_var, t);
    };
    auto term_guards = [&](const Term& t) {
        std::vector<FormulaPtr> gs;
        Term prefix = Term::variable(t.var);
        for (const auto& fn : t.funcs) {
            prefix = prefix.applied(fn);
            gs.push_back(guard_at(prefix));
        }
        return gs;
    };
    switch (phi->kind) {
        case FormulaKind::True:
        case FormulaKind::False:
            return phi;
        case FormulaKind::Rel:
        case FormulaKind::Eq: {
            std::vector<FormulaPtr> conj{phi};
            for (const auto& t : phi->terms)
                for (auto& g : term_guards(t)) conj.push_back(g);
            return f_and(std::move(conj));
        }
        case FormulaKind::Dom: {
            std::vector<FormulaPtr> conj{phi};
            for (auto& g : term_guards(phi->terms[0])) conj.push_back(g);
            conj.push_back(guard_at(phi->terms[0].applied(phi->symbol)));
            return f_and(std::move(conj));
        }
        case FormulaKind::Not:
            return f_not(relativize_to(phi->kids[0], psi, psi_var, fresh));
        case FormulaKind::And:
        case FormulaKind::Or: {
            std::vector<FormulaPtr> ks;
            for (const auto& k : phi->kids) ks.push_back(relativize_to(k, psi, psi_var, fresh));
            return phi->kind == FormulaKind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
        }
        case FormulaKind::Exists: {
            auto body = relativize_to(phi->kids[0], psi, psi_var, fresh);
            return f_exists(phi->symbol,
                            f_and({guard_at(Term::variable(phi->symbol)), body}));
        }
        case FormulaKind::Forall: {
            auto body = relativize_to(phi->kids[0], psi, psi_var, fresh);
            return f_forall(phi->symbol,
                            f_or({f_not(guard_at(Term::variable(phi->symbol))), body}));
        }
    }
    return phi;
}

// Relativize phi so quantifiers range over one copy side only and all tuple
// variables are forced to the same side.  `anchor` names a free variable
// whose side is used; empty anchor pins the original side.
inline FormulaPtr relativize_to_side(const FormulaPtr& phi, const std::string& copy1,
                                     const std::string& anchor) {
    auto side_of = [&](const std::string& v) { return f_rel(copy1, {Term::variable(v)}); };
    auto same_side = [&](const std::string& a, const std::string& b) {
        return f_or({f_and({side_of(a), side_of(b)}),
                     f_and({f_not(side_of(a)), f_not(side_of(b))})});
    };
    std::function<FormulaPtr(const FormulaPtr&)> walk = [&](const FormulaPtr& f) -> FormulaPtr {
        switch (f->kind) {
            case FormulaKind::Exists: {
                auto guard = anchor.empty() ? f_not(side_of(f->symbol)) : same_side(f->symbol, anchor);
                return f_exists(f->symbol, f_and({guard, walk(f->kids[0])}));
            }
            case FormulaKind::Forall: {
                auto guard = anchor.empty() ? f_not(side_of(f->symbol)) : same_side(f->symbol, anchor);
                return f_forall(f->symbol, f_or({f_not(guard), walk(f->kids[0])}));
            }
            case FormulaKind::Not:
                return f_not(walk(f->kids[0]));
            case FormulaKind::And:
            case FormulaKind::Or: {
                std::vector<FormulaPtr> ks;
                for (const auto& k : f->kids) ks.push_back(walk(k));
                return f->kind == FormulaKind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
            }
            default:
                return f;
        }
    };
    return walk(phi);
}

inline RelStructure without_relation(RelStructure a, const std::string& name) {
    a.relations.erase(name);
    a.colors.erase(name);
    return a;
}

// sigma'(A) = sigma(op(A)) for a deterministic non-copy op.
inline LiftAdvice advice_after_op(const LiftAdvice& advice, const AtomicOp& op) {
    LiftAdvice out;
    out.name = advice.name + "<-" + std::to_string((int)op.kind);
    auto advance = [op](const RelStructure& a) -> std::optional<RelStructure> {
        ApplyState st;
        for (ElementId v : a.universe) st.base_band = std::max(st.base_band, band_of(v));
        return apply_op(op, a, st);
    };
    auto advise = advice.advise;
    out.advise = [advance, advise](const RelStructure& a) -> std::set<ElementId> {
        auto next = advance(a);
        if (!next) return {};
        return advise(*next);
    };
    if (advice.enumerate) {
        auto enumerate = advice.enumerate;
        out.enumerate = [advance, enumerate](const RelStructure& a) -> std::vector<std::set<ElementId>> {
            auto next = advance(a);
            if (!next) return {std::set<ElementId>{}};
            return enumerate(*next);
        };
    }
    return out;
}

inline std::set<ElementId> original_part(const std::set<ElementId>& u, const RelStructure& pre_copy) {
    std::set<ElementId> out;
    for (ElementId v : u)
        if (pre_copy.contains(v)) out.insert(v);
    return out;
}

inline std::set<ElementId> copy_preimage(const std::set<ElementId>& u, const RelStructure& pre_copy,
                                         ElementId shift) {
    std::set<ElementId> out;
    for (ElementId v : pre_copy.universe)
        if (u.count(v + shift)) out.insert(v);
    return out;
}

struct CopySplitAdvice {
    AtomicOp copy_op;
    LiftAdvice sigma;
    std::string x1_name;

    RelStructure copied(const RelStructure& a, ElementId& shift) const {
        ApplyState st;
        for (ElementId v : a.universe) st.base_band = std::max(st.base_band, band_of(v));
        shift = (st.base_band + 1) * kIdBand;
        auto out = apply_op(copy_op, a, st);
        if (!out) throw contract_error("copy-lift swap applied to incompatible structure");
        return *out;
    }

    LiftAdvice first() const {
        CopySplitAdvice self = *this;
        LiftAdvice out;
        out.name = sigma.name + ".orig";
        out.advise = [self](const RelStructure& a) {
            ElementId shift;
            auto doubled = self.copied(a, shift);
            return original_part(self.sigma.advise(doubled), a);
        };
        if (sigma.enumerate)
            out.enumerate = [self](const RelStructure& a) {
                ElementId shift;
                auto doubled = self.copied(a, shift);
                std::set<std::set<ElementId>> seen;
                std::vector<std::set<ElementId>> fam;
                for (const auto& u : self.sigma.enumerate(doubled)) {
                    auto part = original_part(u, a);
                    if (seen.insert(part).second) fam.push_back(part);
                }
                return fam;
            };
        return out;
    }

    // The second lift sees X1 in its input and must stay consistent with it.
    LiftAdvice second() const {
        CopySplitAdvice self = *this;
        LiftAdvice out;
        out.name = sigma.name + ".copy";
        out.advise = [self](const RelStructure& a_with_x1) {
            RelStructure a = without_relation(a_with_x1, self.x1_name);
            ElementId shift;
            auto doubled = self.copied(a, shift);
            return copy_preimage(self.sigma.advise(doubled), a, shift);
        };
        if (sigma.enumerate)
            out.enumerate = [self](const RelStructure& a_with_x1) {
                RelStructure a = without_relation(a_with_x1, self.x1_name);
                std::set<ElementId> x1_value;
                auto it = a_with_x1.relations.find(self.x1_name);
                if (it != a_with_x1.relations.end())
                    for (const auto& t : it->second.tuples) x1_value.insert(t[0]);
                ElementId shift;
                auto doubled = self.copied(a, shift);
                std::set<std::set<ElementId>> seen;
                std::vector<std::set<ElementId>> fam;
                for (const auto& u : self.sigma.enumerate(doubled)) {
                    if (original_part(u, a) != x1_value) continue;
                    auto part = copy_preimage(u, a, shift);
                    if (seen.insert(part).second) fam.push_back(part);
                }
                if (fam.empty()) fam.push_back({});
                return fam;
            };
        return out;
    }
};

} // namespace detail

// ---------------------------------------------------------------------------
// Lemma "normal-qf" shape: a sequence of unary lifts followed by a
// deterministic almost quantifier-free transduction.
// ---------------------------------------------------------------------------

namespace detail {

// Move every unary lift to the front, preserving output sets exactly.
inline std::vector<AtomicOp> lifts_to_front(std::vector<AtomicOp> ops, FreshVars& fresh, int& aux) {
    for (;;) {
        int k = -1;
        for (int i = 0; i + 1 < (int)ops.size(); ++i)
            if (ops[i].kind != AtomicOp::Kind::UnaryLift &&
                ops[i + 1].kind == AtomicOp::Kind::UnaryLift) {
                k = i;
                break;
            }
        if (k < 0) return ops;
        AtomicOp before = ops[k];
        AtomicOp lift = ops[k + 1];
        std::vector<AtomicOp> repl;
        if (before.kind == AtomicOp::Kind::Copy) {
            // split the choice over the doubled universe into two original-
            // universe lifts and reinterpret after copying
            std::string x1 = lift.symbol + "~o" + std::to_string(++aux);
            std::string x2 = lift.symbol + "~c" + std::to_string(aux);
            std::string origin = lift.symbol + "~g" + std::to_string(aux);
            detail::CopySplitAdvice split{before, lift.advice, x1};
            repl.push_back(op_unary_lift(x1, split.first()));
            repl.push_back(op_unary_lift(x2, split.second()));
            repl.push_back(before);
            Term x = Term::variable("x");
            Term y = Term::variable("y");
            repl.push_back(op_function_extension(
                origin, "x", "y",
                f_and({f_rel(before.clone_name(), {x, y}), f_not(f_rel(before.copy1_name(), {y}))})));
            repl.push_back(op_extension(
                lift.symbol, {"x"},
                f_or({f_and({f_not(f_rel(before.copy1_name(), {x})), f_rel(x1, {x})}),
                      f_and({f_rel(before.copy1_name(), {x}), f_rel(x2, {x.applied(origin)})})})));
            repl.push_back(op_reduct(origin));
            repl.push_back(op_reduct(x1));
            repl.push_back(op_reduct(x2));
        } else {
            AtomicOp moved = lift;
            moved.advice = detail::advice_after_op(lift.advice, before);
            repl.push_back(moved);
            repl.push_back(before);
        }
        ops.erase(ops.begin() + k, ops.begin() + k + 2);
        ops.insert(ops.begin() + k, repl.begin(), repl.end());
    }
}

} // namespace detail

inline Transduction normalize_qf(const Transduction& i) {
    if (!i.almost_quantifier_free())
        throw contract_error("normalize_qf requires an almost quantifier-free transduction");
    detail::FreshVars fresh;
    int aux = 0;
    Transduction out;
    out.ops = detail::lifts_to_front(i.ops, fresh, aux);
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Lemma "normal" shape: L;C;F;E;X;R with F/E/X formulas over input + L;C
// symbols only.
// ---------------------------------------------------------------------------

namespace detail {

inline bool formula_mentions(const FormulaPtr& f, const std::string& symbol) {
    switch (f->kind) {
        case FormulaKind::Rel:
            if (f->symbol == symbol) return true;
            [[fallthrough]];
        case FormulaKind::Eq:
        case FormulaKind::Dom:
            if (f->kind == FormulaKind::Dom && f->symbol == symbol) return true;
            for (const auto& t : f->terms)
                for (const auto& fn : t.funcs)
                    if (fn == symbol) return true;
            return false;
        default:
            for (const auto& k : f->kids)
                if (formula_mentions(k, symbol)) return true;
            return false;
    }
}

// Inline a defined relation: every atom R(t1..tk) becomes
// (terms defined) and phi_R[x_i := t_i].
inline FormulaPtr inline_relation(const FormulaPtr& f, const std::string& rel,
                                  const std::vector<std::string>& vars, const FormulaPtr& phi_r,
                                  FreshVars& fresh) {
    switch (f->kind) {
        case FormulaKind::Rel: {
            if (f->symbol != rel) return f;
            std::vector<FormulaPtr> conj;
            auto body = freshen_bound(phi_r, fresh);
            for (std::size_t i = 0; i < vars.size(); ++i) {
                conj.push_back(term_defined(f->terms[i]));
                body = subst_var(body, vars[i], f->terms[i]);
            }
            conj.push_back(body);
            return f_and(std::move(conj));
        }
        case FormulaKind::Not:
            return f_not(inline_relation(f->kids[0], rel, vars, phi_r, fresh));
        case FormulaKind::And:
        case FormulaKind::Or: {
            std::vector<FormulaPtr> ks;
            for (const auto& k : f->kids) ks.push_back(inline_relation(k, rel, vars, phi_r, fresh));
            return f->kind == FormulaKind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
        }
        case FormulaKind::Exists:
            return f_exists(f->symbol, inline_relation(f->kids[0], rel, vars, phi_r, fresh));
        case FormulaKind::Forall:
            return f_forall(f->symbol, inline_relation(f->kids[0], rel, vars, phi_r, fresh));
        default:
            return f;
    }
}

// Unique-witness formula for a defined function: phi_f(u, z) and nothing else.
inline FormulaPtr unique_witness(const FormulaPtr& phi_f, const std::string& xv,
                                 const std::string& yv, const Term& arg, const std::string& out_var,
                                 FreshVars& fresh) {
    auto b1 = subst_var(subst_var(freshen_bound(phi_f, fresh), xv, arg), yv, Term::variable(out_var));
    std::string w = fresh.next("w");
    auto b2 = subst_var(subst_var(freshen_bound(phi_f, fresh), xv, arg), yv, Term::variable(w));
    auto no_other = f_not(f_exists(w, f_and({b2, f_not(f_eq(Term::variable(w), Term::variable(out_var)))})));
    return f_and({b1, no_other});
}

// Rewrite away one innermost use of a defined function in the atom's terms.
// Returns nullptr when the atom does not use `fn`.
inline FormulaPtr eliminate_fn_in_atom(const FormulaPtr& atom, const std::string& fn,
                                       const FormulaPtr& phi_f, const std::string& xv,
                                       const std::string& yv, FreshVars& fresh) {
    // find a term with fn; take the innermost occurrence
    for (std::size_t ti = 0; ti < atom->terms.size(); ++ti) {
        const Term& t = atom->terms[ti];
        for (std::size_t j = 0; j < t.funcs.size(); ++j) {
            if (t.funcs[j] != fn) continue;
            Term prefix{t.var, {t.funcs.begin(), t.funcs.begin() + (long)j}};
            std::string z = fresh.next("z");
            Term suffix{z, {t.funcs.begin() + (long)j + 1, t.funcs.end()}};
            // replace every occurrence of the full prefix+fn stem in the atom
            Term stem = prefix.applied(fn);
            std::vector<Term> new_terms;
            for (const auto& u : atom->terms) {
                if (u.var == stem.var && u.funcs.size() >= stem.funcs.size() &&
                    std::equal(stem.funcs.begin(), stem.funcs.end(), u.funcs.begin())) {
                    Term rest{z, {u.funcs.begin() + (long)stem.funcs.size(), u.funcs.end()}};
                    new_terms.push_back(rest);
                } else {
                    new_terms.push_back(u);
                }
            }
            auto rebuilt = std::make_shared<Formula>(Formula{atom->kind, atom->symbol, new_terms, {}});
            auto uw = unique_witness(phi_f, xv, yv, prefix, z, fresh);
            return f_exists(z, f_and({uw, rebuilt}));
        }
    }
    return nullptr;
}

// Replace every use of the defined function fn (in terms and as a dom
// symbol) by explicit unique-witness quantification.
inline FormulaPtr inline_function(const FormulaPtr& f, const std::string& fn,
                                  const FormulaPtr& phi_f, const std::string& xv,
                                  const std::string& yv, FreshVars& fresh) {
    switch (f->kind) {
        case FormulaKind::Rel:
        case FormulaKind::Eq:
        case FormulaKind::Dom: {
            // dom_fn(t): t defined and a unique witness exists at t
            if (f->kind == FormulaKind::Dom && f->symbol == fn) {
                const Term& t = f->terms[0];
                if (std::find(t.funcs.begin(), t.funcs.end(), fn) == t.funcs.end()) {
                    std::string z = fresh.next("z");
                    return f_exists(z, unique_witness(phi_f, xv, yv, t, z, fresh));
                }
            }
            auto once = eliminate_fn_in_atom(f, fn, phi_f, xv, yv, fresh);
            if (once == nullptr) return f;
            return inline_function(once, fn, phi_f, xv, yv, fresh);
        }
        case FormulaKind::Not:
            return f_not(inline_function(f->kids[0], fn, phi_f, xv, yv, fresh));
        case FormulaKind::And:
        case FormulaKind::Or: {
            std::vector<FormulaPtr> ks;
            for (const auto& k : f->kids) ks.push_back(inline_function(k, fn, phi_f, xv, yv, fresh));
            return f->kind == FormulaKind::And ? f_and(std::move(ks)) : f_or(std::move(ks));
        }
        case FormulaKind::Exists:
            return f_exists(f->symbol, inline_function(f->kids[0], fn, phi_f, xv, yv, fresh));
        case FormulaKind::Forall:
            return f_forall(f->symbol, inline_function(f->kids[0], fn, phi_f, xv, yv, fresh));
        default:
            return f;
    }
}

} // namespace detail

// Full normal form L;C;F;E;X;R (Lemma "normal" shape).  Equivalent to the
// input on every structure; formulas in F/E/X use only symbols present after
// L;C.
inline Transduction normalize(const Transduction& i) {
    detail::FreshVars fresh;
    int aux = 0;
    auto ops = detail::lifts_to_front(i.ops, fresh, aux);

    // split off the lift prefix
    std::vector<AtomicOp> lifts, rest;
    for (auto& op : ops)
        (op.kind == AtomicOp::Kind::UnaryLift ? lifts : rest).push_back(op);

    // move copies to the front of `rest`
    for (;;) {
        int k = -1;
        for (int i2 = 0; i2 + 1 < (int)rest.size(); ++i2)
            if (rest[i2].kind != AtomicOp::Kind::Copy && rest[i2 + 1].kind == AtomicOp::Kind::Copy) {
                k = i2;
                break;
            }
        if (k < 0) break;
        AtomicOp before = rest[k];
        AtomicOp copy = rest[k + 1];
        std::vector<AtomicOp> repl{copy};
        switch (before.kind) {
            case AtomicOp::Kind::Reduct:
                repl.push_back(before);
                break;
            case AtomicOp::Kind::Extension: {
                AtomicOp moved = before;
                std::vector<FormulaPtr> conj;
                auto side = [&](const std::string& v) { return f_rel(copy.copy1_name(), {Term::variable(v)}); };
                for (std::size_t a2 = 1; a2 < before.vars.size(); ++a2)
                    conj.push_back(f_or({f_and({side(before.vars[0]), side(before.vars[a2])}),
                                         f_and({f_not(side(before.vars[0])), f_not(side(before.vars[a2]))})}));
                std::string anchor = before.vars.empty() ? std::string{} : before.vars[0];
                conj.push_back(detail::relativize_to_side(before.formula, copy.copy1_name(), anchor));
                moved.formula = f_and(std::move(conj));
                repl.push_back(moved);
                break;
            }
            case AtomicOp::Kind::FunctionExtension: {
                AtomicOp moved = before;
                auto side = [&](const std::string& v) { return f_rel(copy.copy1_name(), {Term::variable(v)}); };
                auto same = f_or({f_and({side(before.vars[0]), side(before.vars[1])}),
                                  f_and({f_not(side(before.vars[0])), f_not(side(before.vars[1]))})});
                moved.formula = f_and({same, detail::relativize_to_side(before.formula, copy.copy1_name(),
                                                                        before.vars[0])});
                repl.push_back(moved);
                break;
            }
            case AtomicOp::Kind::Restriction: {
                AtomicOp moved = before;
                moved.formula = detail::relativize_to_side(before.formula, copy.copy1_name(),
                                                           before.vars[0]);
                repl.push_back(moved);
                break;
            }
            default:
                throw contract_error("unexpected op while hoisting copies");
        }
        rest.erase(rest.begin() + k, rest.begin() + k + 2);
        rest.insert(rest.begin() + k, repl.begin(), repl.end());
    }

    std::vector<AtomicOp> copies, core;
    for (auto& op : rest)
        (op.kind == AtomicOp::Kind::Copy ? copies : core).push_back(op);

    // move reducts to the back of core
    std::vector<AtomicOp> reducts, working;
    for (auto& op : core) {
        if (op.kind == AtomicOp::Kind::Reduct) {
            reducts.push_back(op);
            continue;
        }
        if (op.formula)
            for (const auto& r : reducts)
                if (detail::formula_mentions(op.formula, r.symbol))
                    throw contract_error("formula references a reducted symbol");
        working.push_back(op);
    }

    // push restrictions to the end of `working`, merging into one
    std::vector<AtomicOp> exts;
    FormulaPtr restriction; // nullptr = no restriction yet
    std::string restriction_var = "x";
    for (auto& op : working) {
        if (op.kind == AtomicOp::Kind::Restriction) {
            auto psi = op.formula;
            if (restriction) {
                // second restriction: relativize against the accumulated one
                psi = f_and({restriction,
                             detail::relativize_to(detail::subst_var(detail::freshen_bound(psi, fresh),
                                                             op.vars[0], Term::variable(restriction_var)),
                                                   restriction, restriction_var, fresh)});
            } else {
                restriction_var = op.vars[0];
            }
            restriction = psi;
            continue;
        }
        // extension or function extension moving left past the restriction
        AtomicOp moved = op;
        if (restriction) {
            moved.formula = detail::relativize_to(op.formula, restriction, restriction_var, fresh);
            if (op.kind == AtomicOp::Kind::FunctionExtension) {
                // witness uniqueness must be computed over surviving elements
                auto guard_y = detail::subst_var(detail::freshen_bound(restriction, fresh), restriction_var,
                                         Term::variable(op.vars[1]));
                moved.formula = f_and({moved.formula, guard_y});
            }
        }
        exts.push_back(moved);
    }

    // inline earlier defined symbols so formulas only use input/L/C symbols
    std::vector<AtomicOp> inlined;
    for (std::size_t idx = 0; idx < exts.size(); ++idx) {
        AtomicOp op = exts[idx];
        for (std::size_t j = idx; j-- > 0;) {
            const AtomicOp& def = inlined[j];
            if (def.kind == AtomicOp::Kind::Extension)
                op.formula = detail::inline_relation(op.formula, def.symbol, def.vars, def.formula, fresh);
            else
                op.formula = detail::inline_function(op.formula, def.symbol, def.formula,
                                                     def.vars[0], def.vars[1], fresh);
        }
        inlined.push_back(std::move(op));
    }
    if (restriction)
        for (std::size_t j = inlined.size(); j-- > 0;) {
            const AtomicOp& def = inlined[j];
            if (def.kind == AtomicOp::Kind::Extension)
                restriction = detail::inline_relation(restriction, def.symbol, def.vars, def.formula, fresh);
            else
                restriction = detail::inline_function(restriction, def.symbol, def.formula,
                                                      def.vars[0], def.vars[1], fresh);
        }

    // drop extensions whose symbols are reducted at the end
    std::set<std::string> dropped;
    for (const auto& r : reducts) dropped.insert(r.symbol);
    std::vector<AtomicOp> kept_f, kept_e;
    for (auto& op : inlined) {
        if (dropped.count(op.symbol)) continue;
        (op.kind == AtomicOp::Kind::FunctionExtension ? kept_f : kept_e).push_back(op);
    }
    std::vector<AtomicOp> kept_r;
    for (auto& r : reducts) {
        bool was_introduced = false;
        for (const auto& op : inlined)
            if (op.symbol == r.symbol) was_introduced = true;
        if (!was_introduced) kept_r.push_back(r); // reduct of an input symbol
    }

    Transduction out;
    for (auto& op : lifts) out.ops.push_back(std::move(op));
    for (auto& op : copies) out.ops.push_back(std::move(op));
    for (auto& op : kept_f) out.ops.push_back(std::move(op));
    for (auto& op : kept_e) out.ops.push_back(std::move(op));
    out.ops.push_back(op_restriction(restriction ? restriction : f_true(), restriction_var));
    for (auto& op : kept_r) out.ops.push_back(std::move(op));
    out.validate();
    return out;
}

// Shape predicates used by tests.
inline bool is_normal_shape(const Transduction& t) {
    int stage = 0; // L C F E X R
    int restrictions = 0;
    for (const auto& op : t.ops) {
        int s;
        switch (op.kind) {
            case AtomicOp::Kind::UnaryLift: s = 0; break;
            case AtomicOp::Kind::Copy: s = 1; break;
            case AtomicOp::Kind::FunctionExtension: s = 2; break;
            case AtomicOp::Kind::Extension: s = 3; break;
            case AtomicOp::Kind::Restriction:
                s = 4;
                ++restrictions;
                break;
            case AtomicOp::Kind::Reduct: s = 5; break;
            default: return false;
        }
        if (s < stage) return false;
        stage = s;
    }
    return restrictions <= 1;
}

inline bool is_lifts_then_deterministic(const Transduction& t) {
    bool past_lifts = false;
    for (const auto& op : t.ops) {
        if (op.kind == AtomicOp::Kind::UnaryLift) {
            if (past_lifts) return false;
        } else {
            past_lifts = true;
        }
    }
    return true;
}

} // namespace sparse_logic
