#pragma once

#include <cstdlib>
#include <string>

namespace sparse_logic {

// Capacity limits for the exact searches and exhaustive enumerations.
// SPARSE_LOGIC_BUDGET scales every limit by an integer factor.
struct Budget {
    int max_universe_exact = 14;     // treedepth_exact
    int max_universe_sc = 10;        // sc_depth_exact, longest_quasi_path
    int max_universe_exhaustive = 8; // exhaustive transduction outputs, isomorphism
    long max_outputs = 20000;        // exhaustive-mode output sets
    long max_states = 200000;        // automaton states discovered lazily
    long max_shapes = 200000;        // shape enumeration in qe_forest
    long max_steps = 50000000;       // generic search step counter

    static Budget from_env() {
        Budget b;
        if (const char* s = std::getenv("SPARSE_LOGIC_BUDGET")) {
            long f = std::strtol(s, nullptr, 10);
            if (f > 1) {
                b.max_outputs *= f;
                b.max_states *= f;
                b.max_shapes *= f;
                b.max_steps *= f;
            }
        }
        return b;
    }
};

inline const Budget& default_budget() {
    static Budget b = Budget::from_env();
    return b;
}

} // namespace sparse_logic
