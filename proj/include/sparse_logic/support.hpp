#pragma once

#include <map>
#include <set>

#include "sparse_logic/transduction.hpp"

namespace sparse_logic {

// Per output element v, a set S_v of input elements supporting it: for any
// output window W and input set U containing every S_v (v in W),
// J(A)[W] = J(A[U])[W].
struct SupportAnnotation {
    std::map<ElementId, std::set<ElementId>> sets;

    std::size_t max_size() const {
        std::size_t m = 0;
        for (const auto& [v, s] : sets) m = std::max(m, s.size());
        return m;
    }

    std::set<ElementId> union_over(const std::set<ElementId>& w) const {
        std::set<ElementId> out;
        for (ElementId v : w) {
            auto it = sets.find(v);
            if (it == sets.end()) throw contract_error("support requested for unknown element");
            out.insert(it->second.begin(), it->second.end());
        }
        return out;
    }
};

// Supports for deterministic almost quantifier-free transductions, composed
// op by op.  Extension and restriction support an element through the
// dependency set of their formula; function extension additionally supports
// the unique witness, or two distinct witnesses when the function stays
// undefined because of ambiguity.
inline SupportAnnotation support_sets(const Transduction& j, const RelStructure& a) {
    if (!j.deterministic() || !j.almost_quantifier_free())
        throw contract_error("support_sets requires a deterministic almost quantifier-free transduction");
    std::map<ElementId, std::set<ElementId>> supp;
    for (ElementId v : a.universe) supp[v] = {v};

    detail::ApplyState st;
    for (ElementId v : a.universe) st.base_band = std::max(st.base_band, band_of(v));
    RelStructure cur = a;

    auto closure = [&](const FormulaPtr& phi, ElementId v) {
        std::set<ElementId> out;
        for (ElementId w : dependency_set(cur, phi, v)) {
            const auto& s = supp.at(w);
            out.insert(s.begin(), s.end());
        }
        return out;
    };

    for (const auto& op : j.ops) {
        std::map<ElementId, std::set<ElementId>> next;
        switch (op.kind) {
            case AtomicOp::Kind::Reduct:
                next = supp;
                break;
            case AtomicOp::Kind::Extension: {
                for (ElementId v : cur.universe) next[v] = closure(op.formula, v);
                break;
            }
            case AtomicOp::Kind::Restriction: {
                for (ElementId v : cur.universe)
                    if (eval_naive(cur, op.formula, {{op.vars[0], v}})) next[v] = closure(op.formula, v);
                break;
            }
            case AtomicOp::Kind::FunctionExtension: {
                for (ElementId v : cur.universe) {
                    auto s = closure(op.formula, v);
                    std::vector<ElementId> witnesses;
                    for (ElementId w : cur.universe)
                        if (eval_naive(cur, op.formula, {{op.vars[0], v}, {op.vars[1], w}})) {
                            witnesses.push_back(w);
                            if (witnesses.size() == 2) break;
                        }
                    for (ElementId w : witnesses) {
                        auto ws = closure(op.formula, w);
                        s.insert(ws.begin(), ws.end());
                    }
                    next[v] = std::move(s);
                }
                break;
            }
            case AtomicOp::Kind::Copy: {
                detail::ApplyState peek = st;
                const ElementId shift = (peek.base_band + peek.copies_applied + 1) * kIdBand;
                for (ElementId v : cur.universe) {
                    next[v] = supp.at(v);
                    next[v + shift] = supp.at(v);
                }
                break;
            }
            case AtomicOp::Kind::UnaryLift:
                throw contract_error("unreachable: lift in deterministic transduction");
        }
        auto out = detail::apply_op(op, cur, st);
        if (!out) throw contract_error("support_sets: transduction undefined on this input");
        cur = std::move(*out);
        supp = std::move(next);
    }

    SupportAnnotation ann;
    ann.sets = std::move(supp);
    return ann;
}

} // namespace sparse_logic
