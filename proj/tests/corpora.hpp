#pragma once

// Shared fixtures: the transduction corpus for the normal-form checks and
// the formula panels used by the QE sweeps.

#include <vector>

#include "sparse_logic/enumerate.hpp"
#include "sparse_logic/formula.hpp"
#include "sparse_logic/transduction.hpp"

namespace sparse_logic::corpora {

struct NormalFormCase {
    Transduction transduction;
    SignatureSpec input_signature;
    int max_universe = 3;
};

inline std::vector<NormalFormCase> normal_form_corpus() {
    std::vector<NormalFormCase> out;
    SignatureSpec ep{{{"E", 2}}, {"P"}, {}};
    SignatureSpec pf{{}, {"P"}, {"f"}};

    { // 1: plain extension
        Transduction t;
        t.append(op_extension("Q", {"x", "y"}, parse_formula("(rel E x y)")));
        out.push_back({t, ep});
    }
    { // 2: lift after extension (swap to the front)
        Transduction t;
        t.append(op_extension("Q", {"x"}, parse_formula("(exists y (rel E x y))")));
        t.append(op_unary_lift("X", LiftAdvice::all_subsets()));
        out.push_back({t, ep});
    }
    { // 3: lift after copy (the split-choice rewrite)
        Transduction t;
        t.append(op_copy());
        t.append(op_unary_lift("X", LiftAdvice::all_subsets()));
        out.push_back({t, {{{"E", 2}}, {}, {}}, 2});
    }
    { // 4: restriction then extension then reduct
        Transduction t;
        t.append(op_restriction(parse_formula("(rel P x)")));
        t.append(op_extension("Q", {"x", "y"}, parse_formula("(and (rel E x y) (rel P y))")));
        t.append(op_reduct("P"));
        out.push_back({t, ep});
    }
    { // 5: extension, then restriction referencing it
        Transduction t;
        t.append(op_extension("Deg", {"x"}, parse_formula("(exists y (rel E x y))")));
        t.append(op_restriction(parse_formula("(rel Deg x)")));
        t.append(op_reduct("Deg"));
        out.push_back({t, ep});
    }
    { // 6: function extension consumed by a later extension
        Transduction t;
        t.append(op_function_extension("g", "x", "y", parse_formula("(and (rel E x y) (rel P y))")));
        t.append(op_extension("Q", {"x"}, parse_formula("(eq (g x) x)")));
        t.append(op_reduct("g"));
        out.push_back({t, ep});
    }
    { // 7: copy then extension across the doubled structure
        Transduction t;
        t.append(op_copy());
        t.append(op_extension("Q", {"x"}, parse_formula("(exists y (rel E x y))")));
        out.push_back({t, {{{"E", 2}}, {}, {}}, 2});
    }
    { // 8: terms over an input function, with a dom guard
        Transduction t;
        t.append(op_extension("Q", {"x"}, parse_formula("(and (dom f x) (rel P (f x)))")));
        t.append(op_restriction(parse_formula("(or (rel Q x) (rel P x))")));
        out.push_back({t, pf});
    }
    { // 9: two restrictions merge into one
        Transduction t;
        t.append(op_restriction(parse_formula("(rel P x)")));
        t.append(op_restriction(parse_formula("(exists y (rel E x y))")));
        out.push_back({t, ep});
    }
    { // 10: lift, function extension on the lifted predicate, reduct
        Transduction t;
        t.append(op_unary_lift("X", LiftAdvice::all_subsets()));
        t.append(op_function_extension("g", "x", "y", parse_formula("(and (rel E x y) (rel X y))")));
        t.append(op_reduct("X"));
        out.push_back({t, ep});
    }
    return out;
}

// Almost quantifier-free subset for the normalize_qf checks.
inline std::vector<NormalFormCase> aqf_corpus() {
    std::vector<NormalFormCase> out;
    for (auto& c : normal_form_corpus())
        if (c.transduction.almost_quantifier_free()) out.push_back(c);
    return out;
}

} // namespace sparse_logic::corpora
