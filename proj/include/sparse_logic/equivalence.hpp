#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/canonical.hpp"
#include "sparse_logic/transduction.hpp"

namespace sparse_logic {

struct EquivalenceReport {
    bool equivalent = true;
    std::optional<RelStructure> counterexample; // a corpus structure witnessing the difference
    std::string detail;
};

// Output-set equality per corpus structure, compared up to isomorphism of
// labeled structures.  Exhaustive mode must be feasible on every member.
inline EquivalenceReport equivalent_on(const Transduction& i, const Transduction& j,
                                       const std::vector<RelStructure>& corpus,
                                       const Budget& budget = default_budget()) {
    for (const auto& a : corpus) {
        std::set<std::string> out_i, out_j;
        for (const auto& s : apply_exhaustive(i, a, budget)) out_i.insert(canonical_structure_code(s));
        for (const auto& s : apply_exhaustive(j, a, budget)) out_j.insert(canonical_structure_code(s));
        if (out_i != out_j) {
            EquivalenceReport r;
            r.equivalent = false;
            r.counterexample = a;
            r.detail = "output sets differ: " + std::to_string(out_i.size()) + " vs " +
                       std::to_string(out_j.size()) + " canonical forms";
            return r;
        }
    }
    return {};
}

} // namespace sparse_logic
