#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sparse_logic/bundle.hpp"
#include "sparse_logic/equivalence.hpp"
#include "sparse_logic/forest.hpp"
#include "sparse_logic/graph.hpp"
#include "sparse_logic/support.hpp"
#include "sparse_logic/transduction.hpp"

using namespace sparse_logic;

namespace {

RelStructure forest_as_graph_structure(const RootedForest& f) {
    auto rooted = f.to_root_encoding();
    ColoredGraph g;
    g.vertices = rooted.nodes;
    for (const auto& [u, v] : rooted.tree_edges) g.add_edge(u, v);
    g.colors["R"] = rooted.roots;
    return graph_to_structure(g);
}

LiftAdvice depth_layer_advice(int i) {
    return LiftAdvice::computed(
        [i](const RelStructure& a) {
            ColoredGraph g = structure_to_graph(a);
            std::set<ElementId> layer = a.relations.at("R").tuples.empty()
                                            ? std::set<ElementId>{}
                                            : std::set<ElementId>{};
            // BFS from the root predicate
            std::set<ElementId> cur;
            for (const auto& t : a.relations.at("R").tuples) cur.insert(t[0]);
            std::set<ElementId> seen = cur;
            for (int step = 0; step < i; ++step) {
                std::set<ElementId> next;
                for (ElementId v : cur)
                    for (ElementId w : g.neighbors(v))
                        if (!seen.count(w)) next.insert(w);
                seen.insert(next.begin(), next.end());
                cur = std::move(next);
            }
            return cur;
        },
        "depth-layer-" + std::to_string(i));
}

RelStructure random_structure(std::mt19937& rng, int n) {
    RelStructure a;
    for (int i = 0; i < n; ++i) a.universe.insert(i);
    a.add_relation("E", 2);
    a.add_relation("P", 1);
    a.colors.insert("P");
    a.add_function("f");
    std::uniform_int_distribution<int> pick(0, n - 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (rng() % 3 == 0) a.add_tuple("E", {i, j});
    for (int i = 0; i < n; ++i)
        if (rng() % 2) a.add_tuple("P", {i});
    for (int i = 0; i < n; ++i)
        if (rng() % 2) a.set_function("f", i, pick(rng));
    return a;
}

} // namespace

TEST_CASE("empty transduction is the identity") {
    RelStructure a;
    a.universe = {0, 1};
    a.add_relation("E", 2);
    Transduction id;
    CHECK(apply_advice(id, a) == a);
    auto outs = apply_exhaustive(id, a);
    REQUIRE(outs.size() == 1);
    CHECK(outs[0] == a);
}

TEST_CASE("parent-function transduction reproduces the parent map") {
    // depth predicates via lifts, then one quantifier-free function extension
    auto forest = RootedForest::from_parent_map({0, 1, 2, 3, 4}, {{1, 0}, {2, 1}, {3, 1}, {4, 0}});
    auto a = forest_as_graph_structure(forest);

    const int d = 2;
    Transduction i;
    for (int k = 0; k <= d; ++k) i.append(op_unary_lift("D" + std::to_string(k), depth_layer_advice(k)));
    std::vector<FormulaPtr> cases;
    for (int k = 1; k <= d; ++k)
        cases.push_back(f_and({f_rel("D" + std::to_string(k), {Term::variable("x")}),
                               f_rel("D" + std::to_string(k - 1), {Term::variable("y")})}));
    auto phi = f_and({f_rel("E", {Term::variable("x"), Term::variable("y")}), f_or(std::move(cases))});
    i.append(op_function_extension("parent", "x", "y", phi));
    CHECK(i.almost_quantifier_free());
    CHECK_FALSE(i.deterministic());

    auto out = apply_advice(i, a);
    REQUIRE_FALSE(out.is_bot);
    CHECK(out.functions.at("parent") == forest.parent);
}

TEST_CASE("function extension leaves ambiguous points undefined") {
    RelStructure a;
    a.universe = {0, 1, 2};
    a.add_relation("E", 2);
    a.add_tuple("E", {0, 1});
    a.add_tuple("E", {0, 2});
    Transduction i;
    i.append(op_function_extension("f", "x", "y", parse_formula("(rel E x y)")));
    auto out = apply_advice(i, a);
    CHECK_FALSE(out.functions.at("f").count(0)); // two witnesses
    CHECK_FALSE(out.functions.at("f").count(1)); // no witness
}

TEST_CASE("signature violations yield the bot sentinel") {
    RelStructure a;
    a.universe = {0};
    Transduction uses_missing;
    uses_missing.append(op_extension("Q", {"x"}, parse_formula("(rel E x x)")));
    CHECK(apply_advice(uses_missing, a).is_bot);

    RelStructure b;
    b.universe = {0};
    b.add_relation("Q", 1);
    Transduction overrides;
    overrides.append(op_extension("Q", {"x"}, f_true()));
    CHECK(apply_advice(overrides, b).is_bot);

    Transduction missing_reduct;
    missing_reduct.append(op_reduct("Z"));
    CHECK(apply_advice(missing_reduct, a).is_bot);
}

TEST_CASE("copy doubles the structure and links clones") {
    RelStructure a;
    a.universe = {0, 1};
    a.add_relation("E", 2);
    a.add_tuple("E", {0, 1});
    Transduction i;
    i.append(op_copy());
    auto out = apply_advice(i, a);
    CHECK(out.universe.size() == 4);
    CHECK(out.relations.at("E").tuples.size() == 2);
    CHECK(out.relations.at("clone").tuples.size() == 4);
    CHECK(out.relations.at("copy1").tuples.size() == 2);
    // copies carry shifted ids in a fresh band
    CHECK(out.universe.count(0 + kIdBand));
    CHECK(out.universe.count(1 + kIdBand));
}

TEST_CASE("transduction symbol reuse is rejected at construction") {
    Transduction i;
    i.append(op_extension("Q", {"x"}, f_true()));
    CHECK_THROWS_AS(i.append(op_extension("Q", {"x"}, f_false())), validation_error);
}

TEST_CASE("determinism flag iff singleton exhaustive outputs") {
    std::mt19937 rng(5);
    for (int round = 0; round < 10; ++round) {
        auto a = random_structure(rng, 3);
        Transduction det;
        det.append(op_extension("Q", {"x", "y"}, parse_formula("(rel E x y)")));
        det.append(op_reduct("P"));
        CHECK(det.deterministic());
        CHECK(apply_exhaustive(det, a).size() == 1);

        Transduction lift;
        lift.append(op_unary_lift("X", LiftAdvice::all_subsets()));
        CHECK_FALSE(lift.deterministic());
        CHECK(apply_exhaustive(lift, a).size() == 8); // 2^3 distinct subsets
    }
}

TEST_CASE("support of the identity is the element itself") {
    RelStructure a;
    a.universe = {0, 1, 2};
    Transduction id;
    auto ann = support_sets(id, a);
    for (ElementId v : a.universe) CHECK(ann.sets.at(v) == std::set<ElementId>{v});
}

TEST_CASE("support of an extension includes term images") {
    RelStructure a;
    a.universe = {0, 1, 2};
    a.add_relation("E", 2);
    a.add_function("f");
    a.set_function("f", 0, 2);
    Transduction i;
    i.append(op_extension("Q", {"x", "y"}, parse_formula("(rel E (f x) y)")));
    auto ann = support_sets(i, a);
    CHECK(ann.sets.at(0) == std::set<ElementId>{0, 2});
    CHECK(ann.sets.at(1) == std::set<ElementId>{1});
}

TEST_CASE("support locality equation on random instances") {
    std::mt19937 rng(41);
    int checked = 0;
    for (int round = 0; round < 60; ++round) {
        auto a = random_structure(rng, 5);
        Transduction j;
        int variant = (int)(rng() % 4);
        switch (variant) {
            case 0:
                j.append(op_extension("Q", {"x", "y"}, parse_formula("(rel E (f x) y)")));
                break;
            case 1:
                j.append(op_function_extension("g", "x", "y", parse_formula("(and (rel E x y) (rel P y))")));
                break;
            case 2:
                j.append(op_copy());
                j.append(op_extension("Q", {"x"}, parse_formula("(and (rel P x) (dom f x))")));
                break;
            default:
                j.append(op_restriction(parse_formula("(or (rel P x) (dom f x))")));
                j.append(op_extension("Q", {"x", "y"}, parse_formula("(eq (f x) (f y))")));
                break;
        }
        auto out = apply_advice(j, a);
        REQUIRE_FALSE(out.is_bot);
        auto ann = support_sets(j, a);
        // random window W in the output
        std::set<ElementId> w;
        for (ElementId v : out.universe)
            if (rng() % 2) w.insert(v);
        auto u = ann.union_over(w);
        // random superset U
        for (ElementId v : a.universe)
            if (rng() % 3 == 0) u.insert(v);
        auto lhs = induced_substructure(out, w);
        auto restricted = apply_advice(j, induced_substructure(a, u));
        REQUIRE_FALSE(restricted.is_bot);
        std::set<ElementId> w_in;
        for (ElementId v : w)
            if (restricted.contains(v)) w_in.insert(v);
        REQUIRE(w_in == w); // supported elements survive restriction
        auto rhs = induced_substructure(restricted, w);
        REQUIRE(lhs == rhs);
        ++checked;
    }
    CHECK(checked == 60);
}

TEST_CASE("bundle of one structure has a constant apex function") {
    RelStructure a;
    a.universe = {0, 1};
    a.add_relation("E", 2);
    auto b = bundle({a});
    std::set<ElementId> images;
    for (const auto& [x, y] : b.functions.at("bundlefn")) images.insert(y);
    CHECK(images.size() == 1);
    CHECK(b.universe.size() == 3);
    auto members = unbundle(b, "bundlefn");
    REQUIRE(members.size() == 1);
    CHECK(members[0] == a);
}

TEST_CASE("lift_star of the identity is the identity on bundlings") {
    RelStructure a;
    a.universe = {0, 1};
    a.add_relation("E", 2);
    a.add_tuple("E", {0, 1});
    RelStructure c;
    c.universe = {5, 6};
    c.add_relation("E", 2);
    auto b = bundle({a, c});
    Transduction id;
    auto star = lift_star(id, "bundlefn");
    CHECK(apply_advice(star, b) == b);
}

TEST_CASE("lift_star of an extension acts componentwise") {
    RelStructure a;
    a.universe = {0, 1};
    a.add_relation("E", 2);
    a.add_tuple("E", {0, 1});
    RelStructure c;
    c.universe = {5, 6};
    c.add_relation("E", 2);
    c.add_tuple("E", {5, 6});
    c.add_tuple("E", {6, 5});

    Transduction ext;
    ext.append(op_extension("Q", {"x", "y"}, parse_formula("(rel E x y)")));

    auto b = bundle({a, c});
    auto star = lift_star(ext, "bundlefn");
    auto lifted = apply_advice(star, b);
    REQUIRE_FALSE(lifted.is_bot);

    // componentwise oracle: apply ext to each member, then bundle
    auto oracle = bundle({apply_advice(ext, a), apply_advice(ext, c)});
    CHECK(lifted == oracle);

    // in particular no cross-member tuples
    for (const auto& t : lifted.relations.at("Q").tuples)
        CHECK(band_of(t[0]) == band_of(t[1]));
}

TEST_CASE("lift_star with a lift enumerates member combinations") {
    RelStructure a;
    a.universe = {0};
    RelStructure c;
    c.universe = {5};
    auto b = bundle({a, c});
    Transduction i;
    i.append(op_unary_lift("X", LiftAdvice::all_subsets()));
    auto star = lift_star(i, "bundlefn");
    auto outs = apply_exhaustive(star, b);
    CHECK(outs.size() == 4); // 2 choices per member
}

TEST_CASE("equivalent_on compares output sets up to isomorphism") {
    std::mt19937 rng(17);
    std::vector<RelStructure> corpus;
    for (int k = 0; k < 5; ++k) corpus.push_back(random_structure(rng, 3));

    Transduction i;
    i.append(op_extension("Q", {"x"}, parse_formula("(rel P x)")));
    CHECK(equivalent_on(i, i, corpus).equivalent);

    Transduction j;
    j.append(op_extension("Q", {"x"}, parse_formula("(and (rel P x) (rel P x))")));
    CHECK(equivalent_on(i, j, corpus).equivalent);

    Transduction k;
    k.append(op_extension("Q", {"x"}, parse_formula("(not (rel P x))")));
    auto rep = equivalent_on(i, k, corpus);
    CHECK_FALSE(rep.equivalent);
    CHECK(rep.counterexample.has_value());
}

// --- normal forms -----------------------------------------------------------

#include "sparse_logic/normalize.hpp"
#include "sparse_logic/enumerate.hpp"
#include "corpora.hpp"

TEST_CASE("normalize_qf: already-normal input keeps its shape") {
    Transduction t;
    t.append(op_unary_lift("X", LiftAdvice::all_subsets()));
    t.append(op_extension("Q", {"x"}, parse_formula("(rel X x)")));
    auto n = normalize_qf(t);
    CHECK(is_lifts_then_deterministic(n));
    CHECK(n.ops.size() == t.ops.size());
}

TEST_CASE("normalize_qf moves lifts to the front") {
    Transduction t;
    t.append(op_extension("Q", {"x"}, parse_formula("(rel P x)")));
    t.append(op_unary_lift("X", LiftAdvice::all_subsets()));
    auto n = normalize_qf(t);
    CHECK(is_lifts_then_deterministic(n));
    CHECK(n.ops.front().kind == AtomicOp::Kind::UnaryLift);
    CHECK(n.almost_quantifier_free());

    SignatureSpec ep{{{"E", 2}}, {"P"}, {}};
    auto corpus = all_structures(ep, 3);
    CHECK(equivalent_on(t, n, corpus).equivalent);
}

TEST_CASE("normalize_qf rejects quantified transductions") {
    Transduction t;
    t.append(op_extension("Q", {"x"}, parse_formula("(exists y (rel E x y))")));
    CHECK_THROWS_AS(normalize_qf(t), contract_error);
}

TEST_CASE("normalize_qf preserves output sets on the aqf corpus") {
    for (const auto& c : corpora::aqf_corpus()) {
        auto n = normalize_qf(c.transduction);
        CHECK(is_lifts_then_deterministic(n));
        CHECK(n.almost_quantifier_free());
        auto corpus = all_structures(c.input_signature, c.max_universe);
        auto rep = equivalent_on(c.transduction, n, corpus);
        if (!rep.equivalent) {
            CAPTURE(rep.detail);
            FAIL("normalize_qf changed the output set");
        }
    }
}

TEST_CASE("normalize produces the L;C;F;E;X;R shape and preserves outputs") {
    for (const auto& c : corpora::normal_form_corpus()) {
        auto n = normalize(c.transduction);
        CHECK(is_normal_shape(n));
        CHECK(n.deterministic() == c.transduction.deterministic());
        auto corpus = all_structures(c.input_signature, c.max_universe);
        auto rep = equivalent_on(c.transduction, n, corpus);
        if (!rep.equivalent) {
            CAPTURE(rep.detail);
            FAIL("normalize changed the output set");
        }
    }
}

TEST_CASE("normalized formulas avoid symbols introduced by F/E") {
    for (const auto& c : corpora::normal_form_corpus()) {
        auto n = normalize(c.transduction);
        std::set<std::string> fe_symbols;
        for (const auto& op : n.ops)
            if (op.kind == AtomicOp::Kind::Extension || op.kind == AtomicOp::Kind::FunctionExtension)
                fe_symbols.insert(op.symbol);
        for (const auto& op : n.ops) {
            if (op.kind != AtomicOp::Kind::Extension && op.kind != AtomicOp::Kind::FunctionExtension &&
                op.kind != AtomicOp::Kind::Restriction)
                continue;
            for (const auto& sym : fe_symbols) {
                if (op.symbol == sym) continue;
                CHECK_FALSE(sparse_logic::detail::formula_mentions(op.formula, sym));
            }
        }
    }
}
