#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sparse_logic/errors.hpp"

namespace sparse_logic {

using ElementId = int;
using Tuple = std::vector<ElementId>;

struct Relation {
    int arity = 0;
    std::set<Tuple> tuples;

    bool operator==(const Relation&) const = default;
    auto operator<=>(const Relation&) const = default;
};

// A finite structure over a signature of relation symbols (any arity >= 0)
// and partial unary function symbols.  Unary relations listed in `colors`
// are serialized under the "colors" key; semantically they are ordinary
// unary relations.
struct RelStructure {
    std::set<ElementId> universe;
    std::map<std::string, Relation> relations;
    std::map<std::string, std::map<ElementId, ElementId>> functions;
    std::set<std::string> colors;
    bool is_bot = false;

    bool operator==(const RelStructure&) const = default;

    // The sentinel output for undefined transduction applications.
    static RelStructure bot() {
        RelStructure b;
        b.is_bot = true;
        return b;
    }

    bool has_symbol(const std::string& name) const {
        return relations.count(name) || functions.count(name);
    }

    bool contains(ElementId v) const { return universe.count(v) != 0; }

    void add_relation(const std::string& name, int arity) {
        if (has_symbol(name)) throw validation_error("duplicate symbol: " + name);
        relations[name].arity = arity;
    }

    void add_function(const std::string& name) {
        if (has_symbol(name)) throw validation_error("duplicate symbol: " + name);
        functions[name];
    }

    void add_tuple(const std::string& rel, const Tuple& t) {
        auto it = relations.find(rel);
        if (it == relations.end()) throw validation_error("unknown relation: " + rel);
        if ((int)t.size() != it->second.arity)
            throw validation_error("arity mismatch for " + rel);
        for (ElementId v : t)
            if (!contains(v)) throw validation_error("tuple element outside universe");
        it->second.tuples.insert(t);
    }

    void set_function(const std::string& fn, ElementId x, ElementId y) {
        auto it = functions.find(fn);
        if (it == functions.end()) throw validation_error("unknown function: " + fn);
        if (!contains(x) || !contains(y))
            throw validation_error("function endpoint outside universe");
        it->second[x] = y;
    }

    std::optional<ElementId> apply_function(const std::string& fn, ElementId x) const {
        auto it = functions.find(fn);
        if (it == functions.end()) throw validation_error("unknown function: " + fn);
        auto jt = it->second.find(x);
        if (jt == it->second.end()) return std::nullopt;
        return jt->second;
    }

    bool validate() const {
        for (const auto& [name, rel] : relations)
            for (const auto& t : rel.tuples) {
                if ((int)t.size() != rel.arity) return false;
                for (ElementId v : t)
                    if (!contains(v)) return false;
            }
        for (const auto& [name, fn] : functions)
            for (const auto& [x, y] : fn)
                if (!contains(x) || !contains(y)) return false;
        for (const auto& c : colors) {
            auto it = relations.find(c);
            if (it == relations.end() || it->second.arity != 1) return false;
        }
        return true;
    }
};

// Substructure induced by X: relations keep tuples inside X, functions become
// undefined wherever the argument or the value falls outside X.
inline RelStructure induced_substructure(const RelStructure& a, const std::set<ElementId>& x) {
    for (ElementId v : x)
        if (!a.contains(v)) throw validation_error("induced_substructure: X not a subset of the universe");
    RelStructure out;
    out.universe = x;
    out.colors = a.colors;
    for (const auto& [name, rel] : a.relations) {
        Relation r;
        r.arity = rel.arity;
        for (const auto& t : rel.tuples) {
            bool inside = std::all_of(t.begin(), t.end(), [&](ElementId v) { return x.count(v); });
            if (inside) r.tuples.insert(t);
        }
        out.relations[name] = std::move(r);
    }
    for (const auto& [name, fn] : a.functions) {
        auto& g = out.functions[name];
        for (const auto& [u, v] : fn)
            if (x.count(u) && x.count(v)) g[u] = v;
    }
    return out;
}

} // namespace sparse_logic
