#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/transduction.hpp"

namespace sparse_logic {

// Bundling: disjoint union of same-signature structures plus a fresh apex
// set X and a function mapping every member element to its apex.  Apex ids
// live in a fresh id band above all member bands.
inline RelStructure bundle(const std::vector<RelStructure>& members,
                           const std::string& fn_name = "bundlefn") {
    if (members.empty()) throw contract_error("bundle of an empty family");
    RelStructure out;
    std::set<ElementId> seen;
    ElementId top_band = 0;
    for (const auto& m : members) {
        for (ElementId v : m.universe) {
            if (!seen.insert(v).second) throw validation_error("bundle members must have disjoint universes");
            top_band = std::max(top_band, band_of(v));
        }
        for (const auto& [name, rel] : m.relations)
            if (members[0].relations.count(name) == 0 ||
                members[0].relations.at(name).arity != rel.arity)
                throw validation_error("bundle members must share a signature");
        if (m.relations.size() != members[0].relations.size() ||
            m.functions.size() != members[0].functions.size())
            throw validation_error("bundle members must share a signature");
    }
    for (const auto& [name, rel] : members[0].relations) out.add_relation(name, rel.arity);
    out.colors = members[0].colors;
    for (const auto& [name, fn] : members[0].functions) out.add_function(name);
    if (out.has_symbol(fn_name)) throw validation_error("bundle function name collides");
    out.add_function(fn_name);
    const ElementId apex_base = (top_band + 1) * kIdBand;
    for (std::size_t k = 0; k < members.size(); ++k) {
        const auto& m = members[k];
        const ElementId apex = apex_base + (ElementId)k;
        out.universe.insert(apex);
        for (ElementId v : m.universe) out.universe.insert(v);
        for (const auto& [name, rel] : m.relations)
            for (const auto& t : rel.tuples) out.relations[name].tuples.insert(t);
        for (const auto& [name, fn] : m.functions)
            for (const auto& [x, y] : fn) out.functions[name][x] = y;
        for (ElementId v : m.universe) out.functions[fn_name][v] = apex;
    }
    return out;
}

// Split a bundling back into its members (fibers of the bundle function, in
// apex id order).  The bundle function itself is dropped from the members.
inline std::vector<RelStructure> unbundle(const RelStructure& b, const std::string& fn_name) {
    auto it = b.functions.find(fn_name);
    if (it == b.functions.end()) throw contract_error("unbundle: no bundle function " + fn_name);
    std::map<ElementId, std::set<ElementId>> fibers;
    for (const auto& [x, apex] : it->second) fibers[apex].insert(x);
    std::vector<RelStructure> out;
    for (const auto& [apex, fiber] : fibers) {
        RelStructure m = induced_substructure(b, fiber);
        m.functions.erase(fn_name);
        out.push_back(std::move(m));
    }
    return out;
}

// Lift a member-level almost quantifier-free transduction to bundlings
// (componentwise application).  `fn_name` is the bundle function of the
// expected input; `suffix` decorates the fresh symbols introduced here.
inline Transduction lift_star(const Transduction& i, const std::string& fn_name,
                              const std::string& suffix = "*") {
    Transduction out;
    if (!i.almost_quantifier_free())
        throw contract_error("lift_star requires an almost quantifier-free transduction");
    std::string cur_fn = fn_name; // current bundle function symbol
    int fresh = 0;
    auto same_member = [&](const std::string& x, const std::string& y) {
        return f_eq(Term::variable(x).applied(cur_fn), Term::variable(y).applied(cur_fn));
    };
    for (const auto& op : i.ops) {
        switch (op.kind) {
            case AtomicOp::Kind::Reduct:
                out.append(op);
                break;
            case AtomicOp::Kind::Restriction: {
                // keep all non-member elements (those outside dom of the bundle fn)
                auto psi = f_or({op.formula, f_not(f_dom(cur_fn, Term::variable(op.vars[0])))});
                out.append(op_restriction(psi, op.vars[0]));
                break;
            }
            case AtomicOp::Kind::Extension: {
                std::vector<FormulaPtr> conj{op.formula};
                for (std::size_t a = 0; a < op.vars.size(); ++a)
                    for (std::size_t b = a + 1; b < op.vars.size(); ++b)
                        conj.push_back(same_member(op.vars[a], op.vars[b]));
                out.append(op_extension(op.symbol, op.vars, f_and(std::move(conj))));
                break;
            }
            case AtomicOp::Kind::FunctionExtension: {
                auto phi = f_and({op.formula, same_member(op.vars[0], op.vars[1])});
                out.append(op_function_extension(op.symbol, op.vars[0], op.vars[1], phi));
                break;
            }
            case AtomicOp::Kind::UnaryLift: {
                std::string fn = cur_fn;
                LiftAdvice star;
                star.name = op.advice.name + suffix;
                auto member_advise = op.advice.advise;
                star.advise = [fn, member_advise](const RelStructure& b) {
                    std::set<ElementId> u;
                    for (const auto& m : unbundle(b, fn)) {
                        auto s = member_advise(m);
                        u.insert(s.begin(), s.end());
                    }
                    return u;
                };
                if (op.advice.enumerate) {
                    auto member_enum = op.advice.enumerate;
                    star.enumerate = [fn, member_enum](const RelStructure& b) {
                        std::vector<std::set<ElementId>> combos{{}};
                        for (const auto& m : unbundle(b, fn)) {
                            auto family = member_enum(m);
                            std::vector<std::set<ElementId>> next;
                            for (const auto& base : combos)
                                for (const auto& choice : family) {
                                    if ((long)next.size() >= default_budget().max_outputs)
                                        throw capacity_error("lift_star family budget exceeded");
                                    std::set<ElementId> u = base;
                                    u.insert(choice.begin(), choice.end());
                                    next.push_back(std::move(u));
                                }
                            combos = std::move(next);
                        }
                        return combos;
                    };
                }
                out.append(op_unary_lift(op.symbol, std::move(star)));
                break;
            }
            case AtomicOp::Kind::Copy: {
                // componentwise copy: copy everything, rebuild the bundle
                // function on member copies, then drop the junk apex copies
                out.append(op);
                const std::string origin = "origin" + suffix + std::to_string(++fresh);
                const std::string new_fn = cur_fn + suffix;
                Term x = Term::variable("x");
                Term y = Term::variable("y");
                out.append(op_function_extension(
                    origin, "x", "y",
                    f_and({f_rel(op.clone_name(), {x, y}),
                           f_not(f_rel(op.copy1_name(), {y}))})));
                out.append(op_function_extension(
                    new_fn, "x", "y",
                    f_or({f_and({f_not(f_rel(op.copy1_name(), {x})), f_eq(x.applied(cur_fn), y)}),
                          f_and({f_rel(op.copy1_name(), {x}),
                                 f_eq(x.applied(origin).applied(cur_fn), y)})})));
                out.append(op_restriction(
                    f_not(f_and({f_rel(op.copy1_name(), {x}), f_not(f_dom(cur_fn, x))})), "x"));
                cur_fn = new_fn;
                break;
            }
        }
    }
    return out;
}

} // namespace sparse_logic
