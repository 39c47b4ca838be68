#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "sparse_logic/qe_forest.hpp"

using namespace sparse_logic;

namespace {

const std::vector<std::string> kSigma{"a", "b"};

std::vector<LabeledForest> tree_family(int max_nodes, int height) {
    std::vector<LabeledForest> out;
    for (auto& t : labeled_trees_up_to(max_nodes, kSigma, height)) out.push_back(forest_of(t));
    return out;
}

long sweep(const QEForestResult& r, const FormulaPtr& phi, const std::vector<LabeledForest>& family) {
    long checked = 0;
    auto fv = free_vars(phi);
    for (const auto& f : family) {
        RelStructure base = f.to_structure(kSigma);
        for (const auto& nu : all_valuations(base, fv)) {
            bool want = r.eval_input(f, phi, nu);
            bool got = r.eval_relabeled(f, nu);
            REQUIRE(want == got);
            ++checked;
        }
    }
    return checked;
}

} // namespace

TEST_CASE("qe_forest: quantifier-free input keeps its meaning") {
    auto family = tree_family(4, 3);
    auto phi = parse_formula("(and (rel La x) (dom parent x))");
    auto r = qe_forest(phi, kSigma, 3, family);
    CHECK(is_quantifier_free(r.hat_phi));
    CHECK(sweep(r, phi, family) > 200);
}

TEST_CASE("qe_forest: existential child formula, exhaustive oracle sweep") {
    auto family = tree_family(5, 3);
    auto phi = parse_formula("(exists y (and (eq (parent y) x) (rel La y)))");
    auto r = qe_forest(phi, kSigma, 3, family);
    CHECK(is_quantifier_free(r.hat_phi));
    CHECK(sweep(r, phi, family) > 400);
}

TEST_CASE("qe_forest: two free variables with an lca flavor") {
    auto family = tree_family(4, 2);
    auto phi = parse_formula(
        "(and (eq (parent x) (parent y)) (not (eq x y)) (exists z (rel Lb z)))");
    auto r = qe_forest(phi, kSigma, 2, family);
    CHECK(sweep(r, phi, family) > 500);
}

TEST_CASE("qe_forest: rank-2 formula with one free variable") {
    auto family = tree_family(5, 2);
    auto phi = parse_formula(
        "(exists y (exists z (and (eq (parent y) x) (eq (parent z) x) (not (eq y z)))))");
    auto r = qe_forest(phi, kSigma, 2, family);
    CHECK(sweep(r, phi, family) > 400);
}

TEST_CASE("qe_forest handles genuine forests through the prepended root") {
    auto family = labeled_forests_up_to(4, kSigma, 2);
    // x is a root and some other tree holds an a-node
    auto phi = parse_formula(
        "(and (not (dom parent x)) (exists y (and (rel La y) (not (eq y x)) "
        "(not (eq (parent y) x)))))");
    auto r = qe_forest(phi, kSigma, 2, family);
    CHECK(sweep(r, phi, family) > 100);
}

TEST_CASE("qe_forest: universal quantifier via negation normal form") {
    auto family = tree_family(4, 2);
    auto phi = parse_formula("(forall y (or (not (eq (parent y) x)) (rel La y)))");
    auto r = qe_forest(phi, kSigma, 2, family);
    CHECK(sweep(r, phi, family) > 100);
}

TEST_CASE("qe_forest shape count stays within the enumeration bound") {
    auto family = tree_family(4, 2);
    auto phi = parse_formula("(exists y (eq (parent y) x))");
    auto r = qe_forest(phi, kSigma, 2, family);
    // |R_h| is finite and bounded by labels^(nodes) over the shape skeletons
    long gamma = (long)r.gamma_pairs.size() + 1;
    long skeleton_nodes = (long)r.vars.size() * (r.height_bound + 2);
    long bound = 1;
    for (long i = 0; i < skeleton_nodes; ++i) bound *= (gamma + 1);
    CHECK((long)r.shapes.size() <= bound);
    CHECK(r.shapes.size() >= 2);
    // retained candidates include rejected ones
    bool any_rejected = false;
    for (const auto& s : r.shapes)
        if (!s.accepted) any_rejected = true;
    CHECK(any_rejected);
}

TEST_CASE("qe_forest rejects families above the height bound") {
    auto family = tree_family(5, 4);
    auto phi = parse_formula("(rel La x)");
    CHECK_THROWS_AS(qe_forest(phi, kSigma, 2, family), contract_error);
}

TEST_CASE("qe_forest needs a free variable") {
    auto family = tree_family(3, 2);
    CHECK_THROWS_AS(qe_forest(parse_formula("(exists x (rel La x))"), kSigma, 2, family),
                    contract_error);
}
