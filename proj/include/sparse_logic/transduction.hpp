#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/budget.hpp"
#include "sparse_logic/eval.hpp"
#include "sparse_logic/structure.hpp"

namespace sparse_logic {

// Fresh elements created by copying (and bundling) live in id bands of this
// width, above the ids of the input structure.  Band indices are assigned
// per apply() call, in op order, so fresh ids depend only on the original
// element id and the position of the copy operation -- never on the
// structure contents.  That keeps supports local under restrictions.
inline constexpr ElementId kIdBand = 1 << 20;

inline ElementId band_of(ElementId v) { return v / kIdBand; }

// A unary lift strategy: a deterministic choice for pipeline use plus an
// optional enumerator of the whole family for exhaustive mode.
struct LiftAdvice {
    std::string name = "anonymous";
    std::function<std::set<ElementId>(const RelStructure&)> advise;
    std::function<std::vector<std::set<ElementId>>(const RelStructure&)> enumerate;

    static LiftAdvice explicit_set(std::set<ElementId> s, std::string name = "explicit") {
        LiftAdvice a;
        a.name = std::move(name);
        a.advise = [s](const RelStructure&) { return s; };
        a.enumerate = [s](const RelStructure&) { return std::vector<std::set<ElementId>>{s}; };
        return a;
    }

    static LiftAdvice computed(std::function<std::set<ElementId>(const RelStructure&)> fn,
                               std::string name = "computed") {
        LiftAdvice a;
        a.name = std::move(name);
        a.advise = std::move(fn);
        a.enumerate = nullptr; // advice-only
        return a;
    }

    static LiftAdvice all_subsets(std::string name = "all-subsets") {
        LiftAdvice a;
        a.name = std::move(name);
        a.advise = [](const RelStructure& s) { return std::set<ElementId>{}; };
        a.enumerate = [](const RelStructure& s) {
            if (s.universe.size() > (std::size_t)default_budget().max_universe_exhaustive)
                throw capacity_error("all-subsets lift over universe budget");
            std::vector<ElementId> elems(s.universe.begin(), s.universe.end());
            std::vector<std::set<ElementId>> out;
            for (std::size_t mask = 0; mask < (1u << elems.size()); ++mask) {
                std::set<ElementId> sub;
                for (std::size_t i = 0; i < elems.size(); ++i)
                    if (mask & (1u << i)) sub.insert(elems[i]);
                out.push_back(std::move(sub));
            }
            return out;
        };
        return a;
    }
};

struct AtomicOp {
    enum class Kind { Extension, Restriction, Reduct, Copy, FunctionExtension, UnaryLift };

    Kind kind;
    std::string symbol;              // Extension/Reduct/FunctionExtension/UnaryLift: symbol name;
                                     // Copy: name suffix for clone/copy1
    std::vector<std::string> vars;   // Extension: tuple variable order; FunctionExtension: {x, y}
    FormulaPtr formula;              // Extension/Restriction/FunctionExtension
    LiftAdvice advice;               // UnaryLift

    bool introduces_color() const {
        return kind == Kind::UnaryLift || (kind == Kind::Extension && vars.size() == 1);
    }

    std::string clone_name() const { return "clone" + symbol; }
    std::string copy1_name() const { return "copy1" + symbol; }
};

inline AtomicOp op_extension(std::string rel, std::vector<std::string> vars, FormulaPtr phi) {
    return AtomicOp{AtomicOp::Kind::Extension, std::move(rel), std::move(vars), std::move(phi), {}};
}
inline AtomicOp op_restriction(FormulaPtr psi, std::string var = "x") {
    return AtomicOp{AtomicOp::Kind::Restriction, "", {std::move(var)}, std::move(psi), {}};
}
inline AtomicOp op_reduct(std::string symbol) {
    return AtomicOp{AtomicOp::Kind::Reduct, std::move(symbol), {}, nullptr, {}};
}
inline AtomicOp op_copy(std::string suffix = "") {
    return AtomicOp{AtomicOp::Kind::Copy, std::move(suffix), {}, nullptr, {}};
}
inline AtomicOp op_function_extension(std::string fn, std::string x, std::string y, FormulaPtr phi) {
    return AtomicOp{AtomicOp::Kind::FunctionExtension, std::move(fn),
                    {std::move(x), std::move(y)}, std::move(phi), {}};
}
inline AtomicOp op_unary_lift(std::string pred, LiftAdvice advice) {
    return AtomicOp{AtomicOp::Kind::UnaryLift, std::move(pred), {}, nullptr, std::move(advice)};
}

// A transduction is a sequence of atomic operations.  Later operations must
// introduce fresh symbols; reusing a name (even one that was reducted away)
// is rejected.
struct Transduction {
    std::vector<AtomicOp> ops;

    Transduction() = default;
    explicit Transduction(std::vector<AtomicOp> o) : ops(std::move(o)) { validate(); }

    void append(AtomicOp op) {
        ops.push_back(std::move(op));
        validate();
    }

    void extend(const Transduction& other) {
        for (const auto& op : other.ops) ops.push_back(op);
        validate();
    }

    bool deterministic() const {
        for (const auto& op : ops)
            if (op.kind == AtomicOp::Kind::UnaryLift) return false;
        return true;
    }

    bool almost_quantifier_free() const {
        for (const auto& op : ops)
            if (op.formula && !is_quantifier_free(op.formula)) return false;
        return true;
    }

    std::set<std::string> introduced_symbols() const {
        std::set<std::string> out;
        for (const auto& op : ops) {
            switch (op.kind) {
                case AtomicOp::Kind::Extension:
                case AtomicOp::Kind::FunctionExtension:
                case AtomicOp::Kind::UnaryLift:
                    out.insert(op.symbol);
                    break;
                case AtomicOp::Kind::Copy:
                    out.insert(op.clone_name());
                    out.insert(op.copy1_name());
                    break;
                default:
                    break;
            }
        }
        return out;
    }

    void validate() const {
        std::set<std::string> seen;
        auto fresh = [&](const std::string& name) {
            if (!seen.insert(name).second)
                throw validation_error("transduction reuses symbol: " + name);
        };
        for (const auto& op : ops) {
            switch (op.kind) {
                case AtomicOp::Kind::Extension:
                    if (op.formula == nullptr) throw validation_error("extension without formula");
                    fresh(op.symbol);
                    break;
                case AtomicOp::Kind::FunctionExtension:
                    if (op.formula == nullptr || op.vars.size() != 2)
                        throw validation_error("function extension needs a binary formula");
                    fresh(op.symbol);
                    break;
                case AtomicOp::Kind::UnaryLift:
                    if (!op.advice.advise) throw validation_error("unary lift without advice");
                    fresh(op.symbol);
                    break;
                case AtomicOp::Kind::Copy:
                    fresh(op.clone_name());
                    fresh(op.copy1_name());
                    break;
                case AtomicOp::Kind::Restriction:
                    if (op.formula == nullptr || op.vars.size() != 1)
                        throw validation_error("restriction needs a unary formula");
                    break;
                case AtomicOp::Kind::Reduct:
                    break;
            }
        }
    }
};

namespace detail {

// Formulas of atomic ops may only use symbols already present; a violation
// makes the whole application undefined (bot), not an exception.
inline bool formula_symbols_present(const RelStructure& a, const FormulaPtr& f) {
    switch (f->kind) {
        case FormulaKind::True:
        case FormulaKind::False:
            return true;
        case FormulaKind::Rel: {
            auto it = a.relations.find(f->symbol);
            if (it == a.relations.end() || it->second.arity != (int)f->terms.size()) return false;
            for (const auto& t : f->terms)
                for (const auto& fn : t.funcs)
                    if (!a.functions.count(fn)) return false;
            return true;
        }
        case FormulaKind::Eq:
        case FormulaKind::Dom: {
            if (f->kind == FormulaKind::Dom && !a.functions.count(f->symbol)) return false;
            for (const auto& t : f->terms)
                for (const auto& fn : t.funcs)
                    if (!a.functions.count(fn)) return false;
            return true;
        }
        default:
            for (const auto& k : f->kids)
                if (!formula_symbols_present(a, k)) return false;
            return true;
    }
}

struct ApplyState {
    ElementId base_band = 0;
    int copies_applied = 0;
};

// Apply one deterministic op; nullopt encodes bot.
inline std::optional<RelStructure> apply_op(const AtomicOp& op, const RelStructure& a,
                                            ApplyState& st) {
    switch (op.kind) {
        case AtomicOp::Kind::Extension: {
            if (a.has_symbol(op.symbol)) return std::nullopt;
            if (!formula_symbols_present(a, op.formula)) return std::nullopt;
            RelStructure out = a;
            out.add_relation(op.symbol, (int)op.vars.size());
            if (op.vars.size() == 1) out.colors.insert(op.symbol);
            std::vector<Valuation> nus{Valuation{}};
            for (const auto& x : op.vars) {
                std::vector<Valuation> next;
                for (const auto& nu : nus)
                    for (ElementId v : a.universe) {
                        Valuation nu2 = nu;
                        nu2[x] = v;
                        next.push_back(std::move(nu2));
                    }
                nus = std::move(next);
            }
            for (const auto& nu : nus) {
                if (!eval_naive(a, op.formula, nu)) continue;
                Tuple t;
                for (const auto& x : op.vars) t.push_back(nu.at(x));
                out.add_tuple(op.symbol, t);
            }
            return out;
        }
        case AtomicOp::Kind::Restriction: {
            if (!formula_symbols_present(a, op.formula)) return std::nullopt;
            std::set<ElementId> keep;
            for (ElementId v : a.universe)
                if (eval_naive(a, op.formula, {{op.vars[0], v}})) keep.insert(v);
            return induced_substructure(a, keep);
        }
        case AtomicOp::Kind::Reduct: {
            RelStructure out = a;
            if (out.relations.erase(op.symbol)) {
                out.colors.erase(op.symbol);
                return out;
            }
            if (out.functions.erase(op.symbol)) return out;
            return std::nullopt;
        }
        case AtomicOp::Kind::Copy: {
            if (a.has_symbol(op.clone_name()) || a.has_symbol(op.copy1_name())) return std::nullopt;
            ++st.copies_applied;
            const ElementId shift = (st.base_band + st.copies_applied) * kIdBand;
            RelStructure out = a;
            for (ElementId v : a.universe) {
                if (a.contains(v + shift)) throw validation_error("copy id band collision");
                out.universe.insert(v + shift);
            }
            for (const auto& [name, rel] : a.relations)
                for (const auto& t : rel.tuples) {
                    Tuple shifted;
                    for (ElementId v : t) shifted.push_back(v + shift);
                    out.relations[name].tuples.insert(shifted);
                }
            for (const auto& [name, fn] : a.functions)
                for (const auto& [x, y] : fn) out.functions[name][x + shift] = y + shift;
            out.add_relation(op.copy1_name(), 1);
            out.colors.insert(op.copy1_name());
            out.add_relation(op.clone_name(), 2);
            for (ElementId v : a.universe) {
                out.add_tuple(op.copy1_name(), {v + shift});
                out.add_tuple(op.clone_name(), {v, v + shift});
                out.add_tuple(op.clone_name(), {v + shift, v});
            }
            return out;
        }
        case AtomicOp::Kind::FunctionExtension: {
            if (a.has_symbol(op.symbol)) return std::nullopt;
            if (!formula_symbols_present(a, op.formula)) return std::nullopt;
            RelStructure out = a;
            out.add_function(op.symbol);
            for (ElementId x : a.universe) {
                std::optional<ElementId> unique;
                bool ambiguous = false;
                for (ElementId y : a.universe) {
                    if (!eval_naive(a, op.formula, {{op.vars[0], x}, {op.vars[1], y}})) continue;
                    if (unique) {
                        ambiguous = true;
                        break;
                    }
                    unique = y;
                }
                if (unique && !ambiguous) out.set_function(op.symbol, x, *unique);
            }
            return out;
        }
        case AtomicOp::Kind::UnaryLift: {
            // handled by callers (fans out in exhaustive mode)
            throw contract_error("apply_op cannot apply a unary lift directly");
        }
    }
    return std::nullopt;
}

inline RelStructure with_unary_predicate(const RelStructure& a, const std::string& name,
                                         const std::set<ElementId>& set) {
    RelStructure out = a;
    out.add_relation(name, 1);
    out.colors.insert(name);
    for (ElementId v : set)
        if (a.contains(v)) out.add_tuple(name, {v});
    return out;
}

} // namespace detail

enum class ApplyMode { Advice, Exhaustive };

// Advice mode: every unary lift takes its strategy's deterministic choice.
inline RelStructure apply_advice(const Transduction& i, const RelStructure& a) {
    if (a.is_bot) return a;
    detail::ApplyState st;
    for (ElementId v : a.universe) st.base_band = std::max(st.base_band, band_of(v));
    RelStructure cur = a;
    for (const auto& op : i.ops) {
        if (op.kind == AtomicOp::Kind::UnaryLift) {
            if (cur.has_symbol(op.symbol)) return RelStructure::bot();
            cur = detail::with_unary_predicate(cur, op.symbol, op.advice.advise(cur));
            continue;
        }
        auto next = detail::apply_op(op, cur, st);
        if (!next) return RelStructure::bot();
        cur = std::move(*next);
    }
    return cur;
}

// Exhaustive mode: unary lifts fan out over their whole families.  Outputs
// are deduplicated by exact equality.
inline std::vector<RelStructure> apply_exhaustive(const Transduction& i, const RelStructure& a,
                                                  const Budget& budget = default_budget()) {
    if (a.is_bot) return {a};
    detail::ApplyState st0;
    for (ElementId v : a.universe) st0.base_band = std::max(st0.base_band, band_of(v));
    struct Item {
        RelStructure s;
        detail::ApplyState st;
    };
    std::vector<Item> frontier{{a, st0}};
    bool hit_bot = false;
    for (const auto& op : i.ops) {
        std::vector<Item> next;
        auto push = [&](Item item) {
            for (const auto& other : next)
                if (other.s == item.s) return;
            if ((long)next.size() >= budget.max_outputs)
                throw capacity_error("exhaustive transduction output budget exceeded");
            next.push_back(std::move(item));
        };
        for (auto& item : frontier) {
            if (op.kind == AtomicOp::Kind::UnaryLift) {
                if (item.s.has_symbol(op.symbol)) {
                    hit_bot = true;
                    continue;
                }
                if (!op.advice.enumerate)
                    throw capacity_error("lift strategy '" + op.advice.name +
                                         "' has no exhaustive enumerator");
                auto family = op.advice.enumerate(item.s);
                if (family.empty()) throw validation_error("lift family must be nonempty");
                for (const auto& set : family)
                    push({detail::with_unary_predicate(item.s, op.symbol, set), item.st});
                continue;
            }
            detail::ApplyState st = item.st;
            auto out = detail::apply_op(op, item.s, st);
            if (!out)
                hit_bot = true;
            else
                push({std::move(*out), st});
        }
        frontier = std::move(next);
    }
    std::vector<RelStructure> out;
    for (auto& item : frontier) out.push_back(std::move(item.s));
    if (hit_bot) out.push_back(RelStructure::bot());
    return out;
}

} // namespace sparse_logic
