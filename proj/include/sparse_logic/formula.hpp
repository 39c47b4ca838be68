#pragma once

#include <algorithm>
#include <cctype>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sparse_logic/errors.hpp"

namespace sparse_logic {

// A term is a composition of unary function symbols applied to a variable.
// `funcs` is kept in application order: for (f (g x)) it holds {g, f}.
struct Term {
    std::string var;
    std::vector<std::string> funcs;

    bool operator==(const Term&) const = default;
    auto operator<=>(const Term&) const = default;

    static Term variable(std::string v) { return Term{std::move(v), {}}; }

    Term applied(const std::string& f) const {
        Term t = *this;
        t.funcs.push_back(f);
        return t;
    }

    // Substitute the base variable by another term: funcs of `inner` run first.
    Term composed_with(const Term& inner) const {
        Term t = inner;
        t.funcs.insert(t.funcs.end(), funcs.begin(), funcs.end());
        return t;
    }

    std::string str() const {
        std::string s = var;
        for (const auto& f : funcs) s = "(" + f + " " + s + ")";
        return s;
    }
};

enum class FormulaKind { True, False, Rel, Eq, Dom, Not, And, Or, Exists, Forall };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
    FormulaKind kind;
    std::string symbol;             // Rel: relation name; Dom: function name; Exists/Forall: variable
    std::vector<Term> terms;        // Rel: arguments; Eq: two terms; Dom: one term
    std::vector<FormulaPtr> kids;   // Not: one; And/Or: any; Exists/Forall: one
};

inline FormulaPtr f_true() { return std::make_shared<Formula>(Formula{FormulaKind::True, "", {}, {}}); }
inline FormulaPtr f_false() { return std::make_shared<Formula>(Formula{FormulaKind::False, "", {}, {}}); }
inline FormulaPtr f_rel(std::string r, std::vector<Term> ts) {
    return std::make_shared<Formula>(Formula{FormulaKind::Rel, std::move(r), std::move(ts), {}});
}
inline FormulaPtr f_eq(Term a, Term b) {
    return std::make_shared<Formula>(Formula{FormulaKind::Eq, "", {std::move(a), std::move(b)}, {}});
}
inline FormulaPtr f_dom(std::string f, Term t) {
    return std::make_shared<Formula>(Formula{FormulaKind::Dom, std::move(f), {std::move(t)}, {}});
}
inline FormulaPtr f_not(FormulaPtr f) {
    return std::make_shared<Formula>(Formula{FormulaKind::Not, "", {}, {std::move(f)}});
}
inline FormulaPtr f_and(std::vector<FormulaPtr> fs) {
    if (fs.empty()) return f_true();
    if (fs.size() == 1) return fs[0];
    return std::make_shared<Formula>(Formula{FormulaKind::And, "", {}, std::move(fs)});
}
inline FormulaPtr f_or(std::vector<FormulaPtr> fs) {
    if (fs.empty()) return f_false();
    if (fs.size() == 1) return fs[0];
    return std::make_shared<Formula>(Formula{FormulaKind::Or, "", {}, std::move(fs)});
}
inline FormulaPtr f_exists(std::string var, FormulaPtr f) {
    return std::make_shared<Formula>(Formula{FormulaKind::Exists, std::move(var), {}, {std::move(f)}});
}
inline FormulaPtr f_forall(std::string var, FormulaPtr f) {
    return std::make_shared<Formula>(Formula{FormulaKind::Forall, std::move(var), {}, {std::move(f)}});
}

inline void collect_free_vars(const FormulaPtr& f, std::set<std::string>& bound,
                              std::set<std::string>& out) {
    switch (f->kind) {
        case FormulaKind::True:
        case FormulaKind::False:
            return;
        case FormulaKind::Rel:
        case FormulaKind::Eq:
        case FormulaKind::Dom:
            for (const auto& t : f->terms)
                if (!bound.count(t.var)) out.insert(t.var);
            return;
        case FormulaKind::Not:
        case FormulaKind::And:
        case FormulaKind::Or:
            for (const auto& k : f->kids) collect_free_vars(k, bound, out);
            return;
        case FormulaKind::Exists:
        case FormulaKind::Forall: {
            bool fresh = bound.insert(f->symbol).second;
            collect_free_vars(f->kids[0], bound, out);
            if (fresh) bound.erase(f->symbol);
            return;
        }
    }
}

inline std::set<std::string> free_vars(const FormulaPtr& f) {
    std::set<std::string> bound, out;
    collect_free_vars(f, bound, out);
    return out;
}

inline int quantifier_rank(const FormulaPtr& f) {
    switch (f->kind) {
        case FormulaKind::True:
        case FormulaKind::False:
        case FormulaKind::Rel:
        case FormulaKind::Eq:
        case FormulaKind::Dom:
            return 0;
        case FormulaKind::Not:
            return quantifier_rank(f->kids[0]);
        case FormulaKind::And:
        case FormulaKind::Or: {
            int m = 0;
            for (const auto& k : f->kids) m = std::max(m, quantifier_rank(k));
            return m;
        }
        case FormulaKind::Exists:
        case FormulaKind::Forall:
            return 1 + quantifier_rank(f->kids[0]);
    }
    return 0;
}

inline bool is_quantifier_free(const FormulaPtr& f) { return quantifier_rank(f) == 0; }

// All terms appearing in atoms, paired with nothing; subterm closure optional.
inline void collect_terms(const FormulaPtr& f, std::vector<Term>& out) {
    switch (f->kind) {
        case FormulaKind::Rel:
        case FormulaKind::Eq:
        case FormulaKind::Dom:
            for (const auto& t : f->terms) out.push_back(t);
            return;
        case FormulaKind::Not:
        case FormulaKind::And:
        case FormulaKind::Or:
        case FormulaKind::Exists:
        case FormulaKind::Forall:
            for (const auto& k : f->kids) collect_terms(k, out);
            return;
        default:
            return;
    }
}

// Normalize universal quantifiers away: forall x phi  =>  not exists x not phi.
inline FormulaPtr eliminate_forall(const FormulaPtr& f) {
    switch (f->kind) {
        case FormulaKind::True:
        case FormulaKind::False:
        case FormulaKind::Rel:
        case FormulaKind::Eq:
        case FormulaKind::Dom:
            return f;
        case FormulaKind::Not:
            return f_not(eliminate_forall(f->kids[0]));
        case FormulaKind::And: {
            std::vector<FormulaPtr> ks;
            for (const auto& k : f->kids) ks.push_back(eliminate_forall(k));
            return f_and(std::move(ks));
        }
        case FormulaKind::Or: {
            std::vector<FormulaPtr> ks;
            for (const auto& k : f->kids) ks.push_back(eliminate_forall(k));
            return f_or(std::move(ks));
        }
        case FormulaKind::Exists:
            return f_exists(f->symbol, eliminate_forall(f->kids[0]));
        case FormulaKind::Forall:
            return f_not(f_exists(f->symbol, f_not(eliminate_forall(f->kids[0]))));
    }
    return f;
}

// ---------------------------------------------------------------------------
// Prefix s-expression syntax:
//   (rel E x y)  (eq (f x) y)  (dom f (g x))  (true) (false)
//   (not p) (and p q ...) (or p q ...) (exists x p) (forall x p)
// Terms: a bare symbol is a variable, (f t) applies function f to term t.
// ---------------------------------------------------------------------------

namespace sexpr {

struct Node {
    std::string atom;          // nonempty for leaves
    std::vector<Node> items;   // nonempty for lists
    bool is_atom() const { return !atom.empty(); }
};

inline void skip_ws(const std::string& s, std::size_t& i) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
}

inline Node parse_node(const std::string& s, std::size_t& i) {
    skip_ws(s, i);
    if (i >= s.size()) throw validation_error("unexpected end of formula text");
    if (s[i] == '(') {
        ++i;
        Node n;
        skip_ws(s, i);
        while (i < s.size() && s[i] != ')') {
            n.items.push_back(parse_node(s, i));
            skip_ws(s, i);
        }
        if (i >= s.size()) throw validation_error("missing ')'");
        ++i;
        return n;
    }
    if (s[i] == ')') throw validation_error("unexpected ')'");
    Node n;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != '(' && s[i] != ')')
        n.atom.push_back(s[i++]);
    return n;
}

} // namespace sexpr

inline Term parse_term_node(const sexpr::Node& n) {
    if (n.is_atom()) return Term::variable(n.atom);
    if (n.items.size() != 2 || !n.items[0].is_atom())
        throw validation_error("term must be a variable or (f term)");
    Term inner = parse_term_node(n.items[1]);
    return inner.applied(n.items[0].atom);
}

inline FormulaPtr parse_formula_node(const sexpr::Node& n) {
    if (n.is_atom()) {
        if (n.atom == "true") return f_true();
        if (n.atom == "false") return f_false();
        throw validation_error("bare atom in formula position: " + n.atom);
    }
    if (n.items.empty() || !n.items[0].is_atom())
        throw validation_error("formula list must start with an operator");
    const std::string& op = n.items[0].atom;
    auto rest = [&](std::size_t k) {
        if (n.items.size() != k + 1)
            throw validation_error(op + " expects " + std::to_string(k) + " argument(s)");
    };
    if (op == "true") { rest(0); return f_true(); }
    if (op == "false") { rest(0); return f_false(); }
    if (op == "rel") {
        if (n.items.size() < 2 || !n.items[1].is_atom())
            throw validation_error("(rel NAME term...) expected");
        std::vector<Term> ts;
        for (std::size_t i = 2; i < n.items.size(); ++i) ts.push_back(parse_term_node(n.items[i]));
        return f_rel(n.items[1].atom, std::move(ts));
    }
    if (op == "eq") { rest(2); return f_eq(parse_term_node(n.items[1]), parse_term_node(n.items[2])); }
    if (op == "dom") {
        rest(2);
        if (!n.items[1].is_atom()) throw validation_error("(dom FUNC term) expected");
        return f_dom(n.items[1].atom, parse_term_node(n.items[2]));
    }
    if (op == "not") { rest(1); return f_not(parse_formula_node(n.items[1])); }
    if (op == "and" || op == "or") {
        std::vector<FormulaPtr> ks;
        for (std::size_t i = 1; i < n.items.size(); ++i) ks.push_back(parse_formula_node(n.items[i]));
        return op == "and" ? f_and(std::move(ks)) : f_or(std::move(ks));
    }
    if (op == "exists" || op == "forall") {
        rest(2);
        if (!n.items[1].is_atom()) throw validation_error("quantifier variable expected");
        auto body = parse_formula_node(n.items[2]);
        return op == "exists" ? f_exists(n.items[1].atom, body) : f_forall(n.items[1].atom, body);
    }
    throw validation_error("unknown formula operator: " + op);
}

inline FormulaPtr parse_formula(const std::string& text) {
    std::size_t i = 0;
    auto node = sexpr::parse_node(text, i);
    sexpr::skip_ws(text, i);
    if (i != text.size()) throw validation_error("trailing text after formula");
    return parse_formula_node(node);
}

inline std::string format_formula(const FormulaPtr& f) {
    std::ostringstream os;
    switch (f->kind) {
        case FormulaKind::True: os << "(true)"; break;
        case FormulaKind::False: os << "(false)"; break;
        case FormulaKind::Rel:
            os << "(rel " << f->symbol;
            for (const auto& t : f->terms) os << " " << t.str();
            os << ")";
            break;
        case FormulaKind::Eq:
            os << "(eq " << f->terms[0].str() << " " << f->terms[1].str() << ")";
            break;
        case FormulaKind::Dom:
            os << "(dom " << f->symbol << " " << f->terms[0].str() << ")";
            break;
        case FormulaKind::Not: os << "(not " << format_formula(f->kids[0]) << ")"; break;
        case FormulaKind::And:
        case FormulaKind::Or: {
            os << (f->kind == FormulaKind::And ? "(and" : "(or");
            for (const auto& k : f->kids) os << " " << format_formula(k);
            os << ")";
            break;
        }
        case FormulaKind::Exists:
            os << "(exists " << f->symbol << " " << format_formula(f->kids[0]) << ")";
            break;
        case FormulaKind::Forall:
            os << "(forall " << f->symbol << " " << format_formula(f->kids[0]) << ")";
            break;
    }
    return os.str();
}

} // namespace sparse_logic
