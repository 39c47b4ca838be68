#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sparse_logic/eval.hpp"
#include "sparse_logic/graph.hpp"

using namespace sparse_logic;

namespace {

RelStructure edge_path_ab() {
    ColoredGraph g;
    g.add_vertex(0);
    g.add_vertex(1);
    g.add_edge(0, 1);
    return graph_to_structure(g);
}

// random quantifier-free formula over signature {E binary, P unary, f}
FormulaPtr random_qf(std::mt19937& rng, const std::vector<std::string>& vars, int depth) {
    auto term = [&]() {
        Term t = Term::variable(vars[rng() % vars.size()]);
        int len = (int)(rng() % 3);
        for (int i = 0; i < len; ++i) t = t.applied("f");
        return t;
    };
    if (depth == 0 || rng() % 3 == 0) {
        switch (rng() % 4) {
            case 0: return f_rel("E", {term(), term()});
            case 1: return f_rel("P", {term()});
            case 2: return f_eq(term(), term());
            default: return f_dom("f", term());
        }
    }
    switch (rng() % 3) {
        case 0: return f_not(random_qf(rng, vars, depth - 1));
        case 1: return f_and({random_qf(rng, vars, depth - 1), random_qf(rng, vars, depth - 1)});
        default: return f_or({random_qf(rng, vars, depth - 1), random_qf(rng, vars, depth - 1)});
    }
}

RelStructure random_structure(std::mt19937& rng, int n) {
    RelStructure a;
    for (int i = 0; i < n; ++i) a.universe.insert(i);
    a.add_relation("E", 2);
    a.add_relation("P", 1);
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

TEST_CASE("exists true on a nonempty structure") {
    auto a = edge_path_ab();
    CHECK(eval_naive(a, parse_formula("(exists x (true))"), {}));
    RelStructure empty;
    CHECK_FALSE(eval_naive(empty, parse_formula("(exists x (true))"), {}));
}

TEST_CASE("adjacency reading of E atoms") {
    auto a = edge_path_ab();
    auto phi = parse_formula("(rel E x y)");
    CHECK(eval_naive(a, phi, {{"x", 0}, {"y", 1}}));
    CHECK_FALSE(eval_naive(a, phi, {{"x", 0}, {"y", 0}}));
}

TEST_CASE("atoms with undefined terms are false") {
    RelStructure a;
    a.universe = {0, 1};
    a.add_function("f"); // f undefined at 0
    auto phi = parse_formula("(eq (f x) y)");
    CHECK_FALSE(eval_naive(a, phi, {{"x", 0}, {"y", 1}}));
    // and negation flips it
    CHECK(eval_naive(a, f_not(phi), {{"x", 0}, {"y", 1}}));
}

TEST_CASE("dom atom on defined and undefined points") {
    RelStructure a;
    a.universe = {0, 1};
    a.add_function("f");
    a.set_function("f", 0, 1);
    CHECK(eval_qf(a, parse_formula("(dom f x)"), {{"x", 0}}));
    CHECK_FALSE(eval_qf(a, parse_formula("(dom f x)"), {{"x", 1}}));
    // dom over an undefined inner term is false
    CHECK_FALSE(eval_qf(a, parse_formula("(dom f (f x))"), {{"x", 1}}));
}

TEST_CASE("f(f(x)) = x on a 2-cycle") {
    RelStructure a;
    a.universe = {0, 1};
    a.add_function("f");
    a.set_function("f", 0, 1);
    a.set_function("f", 1, 0);
    CHECK(eval_qf(a, parse_formula("(eq (f (f x)) x)"), {{"x", 0}}));
}

TEST_CASE("eval_qf equals eval_naive on a random qf corpus") {
    std::mt19937 rng(19);
    for (int round = 0; round < 60; ++round) {
        auto a = random_structure(rng, 5);
        auto phi = random_qf(rng, {"x", "y"}, 2);
        for (const auto& nu : all_valuations(a, {"x", "y"}))
            REQUIRE(eval_qf(a, phi, nu) == eval_naive(a, phi, nu));
    }
}

TEST_CASE("eval_qf rejects quantified input") {
    auto a = edge_path_ab();
    CHECK_THROWS_AS(eval_qf(a, parse_formula("(exists x (true))"), {}), contract_error);
}

TEST_CASE("unbound free variable is an error") {
    auto a = edge_path_ab();
    CHECK_THROWS_AS(eval_naive(a, parse_formula("(rel E x y)"), {{"x", 0}}), contract_error);
}

TEST_CASE("dependency set without function symbols") {
    auto a = edge_path_ab();
    auto phi = parse_formula("(rel E x y)");
    CHECK(dependency_set(a, phi, 0) == std::set<ElementId>{0});
}

TEST_CASE("dependency set unfolds term prefixes") {
    RelStructure a;
    a.universe = {0, 1, 2, 3};
    a.add_function("f");
    a.add_function("g");
    a.set_function("g", 0, 1); // g(v)=w
    a.set_function("f", 1, 2); // f(w)=u
    auto phi = parse_formula("(rel P (f (g x)))");
    a.add_relation("P", 1);
    CHECK(dependency_set(a, phi, 0) == std::set<ElementId>{0, 1, 2});
}

TEST_CASE("truth of qf formulas is decided inside the dependency sets") {
    std::mt19937 rng(23);
    for (int round = 0; round < 80; ++round) {
        auto a = random_structure(rng, 5);
        auto phi = random_qf(rng, {"x", "y"}, 2);
        for (const auto& nu : all_valuations(a, {"x", "y"})) {
            std::set<ElementId> dep;
            for (const auto& [var, v] : nu) {
                auto d = dependency_set(a, phi, v);
                dep.insert(d.begin(), d.end());
            }
            auto sub = induced_substructure(a, dep);
            REQUIRE(eval_qf(a, phi, nu) == eval_qf(sub, phi, nu));
        }
    }
}

TEST_CASE("dependency set is monotone and always contains v") {
    std::mt19937 rng(29);
    for (int round = 0; round < 40; ++round) {
        auto a = random_structure(rng, 5);
        auto phi1 = random_qf(rng, {"x"}, 1);
        auto phi2 = random_qf(rng, {"x"}, 1);
        auto both = f_and({phi1, phi2});
        for (ElementId v : a.universe) {
            auto d1 = dependency_set(a, phi1, v);
            auto d12 = dependency_set(a, both, v);
            CHECK(d1.count(v) == 1);
            CHECK(std::includes(d12.begin(), d12.end(), d1.begin(), d1.end()));
        }
    }
}

TEST_CASE("forall is evaluated natively and via not-exists-not") {
    std::mt19937 rng(31);
    for (int round = 0; round < 25; ++round) {
        auto a = random_structure(rng, 4);
        auto body = random_qf(rng, {"x", "y"}, 1);
        auto fa = f_forall("y", body);
        auto rewritten = eliminate_forall(fa);
        for (const auto& nu : all_valuations(a, {"x"}))
            REQUIRE(eval_naive(a, fa, nu) == eval_naive(a, rewritten, nu));
    }
}

TEST_CASE("formula parser round-trips through the printer") {
    for (const char* text : {
             "(exists y (and (rel E x y) (eq (f x) y)))",
             "(or (not (dom f (g x))) (rel P x) (false))",
             "(forall x (rel E x x))",
         }) {
        auto phi = parse_formula(text);
        CHECK(format_formula(parse_formula(format_formula(phi))) == format_formula(phi));
    }
    CHECK(free_vars(parse_formula("(exists y (rel E x y))")) == std::set<std::string>{"x"});
    CHECK(quantifier_rank(parse_formula("(exists y (forall x (rel E x y)))")) == 2);
    CHECK_THROWS_AS(parse_formula("(rel E x"), validation_error);
    CHECK_THROWS_AS(parse_formula("(bogus x)"), validation_error);
}
