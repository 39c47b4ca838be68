#pragma once

#include <string>

#include <json.hpp>

#include "sparse_logic/forest.hpp"
#include "sparse_logic/graph.hpp"
#include "sparse_logic/structure.hpp"

namespace sparse_logic {

using nlohmann::json;

// {"universe":[...],"relations":{name:{"arity":k,"tuples":[[..]]}},
//  "functions":{name:[[x,y],..]},"colors":{name:[...]}}
// nlohmann objects keep keys sorted and we sort all arrays, so emission is
// canonical and round-trips are bit-exact.
inline json structure_to_json(const RelStructure& a) {
    json j;
    j["universe"] = std::vector<ElementId>(a.universe.begin(), a.universe.end());
    json rels = json::object();
    for (const auto& [name, rel] : a.relations) {
        if (a.colors.count(name)) continue;
        json r;
        r["arity"] = rel.arity;
        r["tuples"] = std::vector<Tuple>(rel.tuples.begin(), rel.tuples.end());
        rels[name] = std::move(r);
    }
    j["relations"] = std::move(rels);
    json fns = json::object();
    for (const auto& [name, fn] : a.functions) {
        std::vector<std::pair<ElementId, ElementId>> pairs(fn.begin(), fn.end());
        fns[name] = pairs;
    }
    j["functions"] = std::move(fns);
    json cols = json::object();
    for (const auto& name : a.colors) {
        const auto& rel = a.relations.at(name);
        std::vector<ElementId> elems;
        for (const auto& t : rel.tuples) elems.push_back(t[0]);
        cols[name] = elems;
    }
    j["colors"] = std::move(cols);
    return j;
}

inline RelStructure structure_from_json(const json& j) {
    RelStructure a;
    if (!j.is_object() || !j.contains("universe"))
        throw validation_error("structure json: missing universe");
    for (const auto& v : j.at("universe")) a.universe.insert(v.get<ElementId>());
    if (j.contains("relations"))
        for (const auto& [name, r] : j.at("relations").items()) {
            a.add_relation(name, r.at("arity").get<int>());
            for (const auto& t : r.at("tuples")) a.add_tuple(name, t.get<Tuple>());
        }
    if (j.contains("functions"))
        for (const auto& [name, pairs] : j.at("functions").items()) {
            a.add_function(name);
            for (const auto& p : pairs) a.set_function(name, p.at(0).get<ElementId>(), p.at(1).get<ElementId>());
        }
    if (j.contains("colors"))
        for (const auto& [name, elems] : j.at("colors").items()) {
            a.add_relation(name, 1);
            a.colors.insert(name);
            for (const auto& v : elems) a.add_tuple(name, {v.get<ElementId>()});
        }
    if (!a.validate()) throw validation_error("structure json: invalid structure");
    return a;
}

// Graphs use the structure format with relation "E" and the colors key.
inline json graph_to_json(const ColoredGraph& g) { return structure_to_json(graph_to_structure(g)); }

inline ColoredGraph graph_from_json(const json& j) { return structure_to_graph(structure_from_json(j)); }

// Covers and guidance systems: {"p":k,"members":[[ids],...]}  (p optional)
inline json vertex_family_to_json(const std::vector<std::set<ElementId>>& members, int p = -1) {
    json j;
    if (p >= 0) j["p"] = p;
    std::vector<std::vector<ElementId>> ms;
    for (const auto& m : members) ms.emplace_back(m.begin(), m.end());
    j["members"] = ms;
    return j;
}

inline std::vector<std::set<ElementId>> vertex_family_from_json(const json& j) {
    std::vector<std::set<ElementId>> out;
    for (const auto& m : j.at("members")) {
        std::set<ElementId> s;
        for (const auto& v : m) s.insert(v.get<ElementId>());
        out.push_back(std::move(s));
    }
    return out;
}

inline json forest_to_json(const RootedForest& f) {
    RootedForest p = f.to_parent_encoding();
    json j;
    j["nodes"] = std::vector<ElementId>(p.nodes.begin(), p.nodes.end());
    std::vector<std::pair<ElementId, ElementId>> pairs(p.parent.begin(), p.parent.end());
    j["parent"] = pairs;
    json labels = json::object();
    for (const auto& [name, set] : p.labels)
        labels[name] = std::vector<ElementId>(set.begin(), set.end());
    j["labels"] = std::move(labels);
    return j;
}

inline RootedForest forest_from_json(const json& j) {
    RootedForest f;
    f.encoding = RootedForest::Encoding::ParentMap;
    for (const auto& v : j.at("nodes")) f.nodes.insert(v.get<ElementId>());
    for (const auto& p : j.at("parent")) f.parent[p.at(0).get<ElementId>()] = p.at(1).get<ElementId>();
    if (j.contains("labels"))
        for (const auto& [name, elems] : j.at("labels").items())
            for (const auto& v : elems) f.labels[name].insert(v.get<ElementId>());
    f.validate();
    return f;
}

} // namespace sparse_logic
