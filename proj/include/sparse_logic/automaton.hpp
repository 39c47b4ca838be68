#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparse_logic/budget.hpp"
#include "sparse_logic/eval.hpp"
#include "sparse_logic/labeled_tree.hpp"

namespace sparse_logic {

using StateId = int;

// Multiset of states with multiplicities capped at a threshold.
struct CappedMultiset {
    std::vector<std::pair<StateId, int>> entries; // sorted by state

    static CappedMultiset from_states(std::vector<StateId> states, int tau) {
        std::sort(states.begin(), states.end());
        CappedMultiset out;
        for (StateId q : states) {
            if (!out.entries.empty() && out.entries.back().first == q) {
                if (out.entries.back().second < tau) ++out.entries.back().second;
            } else if (tau > 0) {
                out.entries.push_back({q, 1});
            }
        }
        return out;
    }

    std::string code() const {
        std::string s;
        for (const auto& [q, c] : entries) s += std::to_string(q) + "x" + std::to_string(c) + ";";
        return s;
    }

    bool operator<(const CappedMultiset& o) const { return entries < o.entries; }
    bool operator==(const CappedMultiset& o) const { return entries == o.entries; }
};

// ---------------------------------------------------------------------------
// Explicit threshold tree automata: (Sigma, Q, tau, delta, F), possibly
// nondeterministic rule sets.  The deterministic runner below requires the
// determinism flag.
// ---------------------------------------------------------------------------

struct AutomatonRule {
    std::string label;
    CappedMultiset child_states;
    StateId state;
};

struct ThresholdTreeAutomaton {
    std::vector<std::string> alphabet;
    std::vector<std::string> state_names;
    int threshold = 1;
    std::vector<AutomatonRule> rules;
    std::set<StateId> accepting;

    bool deterministic() const {
        std::map<std::pair<std::string, std::string>, int> seen;
        for (const auto& r : rules)
            if (++seen[{r.label, r.child_states.code()}] > 1) return false;
        return true;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["alphabet"] = alphabet;
        j["states"] = state_names;
        j["threshold"] = threshold;
        j["accepting"] = std::vector<StateId>(accepting.begin(), accepting.end());
        auto rules_j = nlohmann::json::array();
        for (const auto& r : rules) {
            nlohmann::json rj;
            rj["label"] = r.label;
            auto kids = nlohmann::json::array();
            for (const auto& [q, c] : r.child_states.entries) kids.push_back({q, c});
            rj["children"] = kids;
            rj["state"] = r.state;
            rules_j.push_back(rj);
        }
        j["rules"] = rules_j;
        return j;
    }

    static ThresholdTreeAutomaton from_json(const nlohmann::json& j) {
        ThresholdTreeAutomaton a;
        for (const auto& s : j.at("alphabet")) a.alphabet.push_back(s.get<std::string>());
        for (const auto& s : j.at("states")) a.state_names.push_back(s.get<std::string>());
        a.threshold = j.at("threshold").get<int>();
        for (const auto& s : j.at("accepting")) a.accepting.insert(s.get<StateId>());
        for (const auto& rj : j.at("rules")) {
            AutomatonRule r;
            r.label = rj.at("label").get<std::string>();
            for (const auto& kj : rj.at("children"))
                r.child_states.entries.push_back({kj.at(0).get<StateId>(), kj.at(1).get<int>()});
            std::sort(r.child_states.entries.begin(), r.child_states.entries.end());
            r.state = rj.at("state").get<StateId>();
            a.rules.push_back(std::move(r));
        }
        return a;
    }
};

// ---------------------------------------------------------------------------
// Deterministic automaton oracles.  Lazy implementations discover their
// state space while running; an explicit snapshot of everything discovered
// so far can be taken at any time.
// ---------------------------------------------------------------------------

class DetAutomaton {
public:
    virtual ~DetAutomaton() = default;
    virtual int threshold() const = 0;
    virtual const std::vector<std::string>& alphabet() const = 0;
    virtual StateId transition(const std::string& label, const CappedMultiset& kids) = 0;
    virtual bool accepting(StateId q) = 0;
    virtual std::string state_name(StateId q) const = 0;
    virtual int state_count() const = 0;
};

using DetAutomatonPtr = std::shared_ptr<DetAutomaton>;

struct AutomatonRun {
    std::map<ElementId, StateId> state;
    bool accepted = false;
};

namespace detail {

inline StateId run_at(DetAutomaton& a, const LabeledTree& t, ElementId v, AutomatonRun& run) {
    std::vector<StateId> kid_states;
    for (ElementId c : t.children(v)) kid_states.push_back(run_at(a, t, c, run));
    auto capped = CappedMultiset::from_states(std::move(kid_states), a.threshold());
    StateId q = a.transition(t.label.at(v), capped);
    run.state[v] = q;
    return q;
}

} // namespace detail

// Bottom-up run of a deterministic automaton; accepts iff the root state is
// accepting.  Child multiplicities are capped at the threshold at each node.
inline AutomatonRun run_automaton(DetAutomaton& a, const LabeledTree& t) {
    t.validate();
    AutomatonRun run;
    StateId root_state = detail::run_at(a, t, t.root(), run);
    run.accepted = a.accepting(root_state);
    return run;
}

// Deterministic oracle over an explicit rule table; a missing transition is
// a completeness error.
class ExplicitDetAutomaton : public DetAutomaton {
public:
    explicit ExplicitDetAutomaton(ThresholdTreeAutomaton table) : table_(std::move(table)) {
        if (!table_.deterministic())
            throw contract_error("explicit automaton is not deterministic");
        for (const auto& r : table_.rules) delta_[{r.label, r.child_states.code()}] = r.state;
    }

    int threshold() const override { return table_.threshold; }
    const std::vector<std::string>& alphabet() const override { return table_.alphabet; }

    StateId transition(const std::string& label, const CappedMultiset& kids) override {
        auto it = delta_.find({label, kids.code()});
        if (it == delta_.end())
            throw validation_error("automaton has no transition for (" + label + ", " + kids.code() +
                                   ")");
        return it->second;
    }

    bool accepting(StateId q) override { return table_.accepting.count(q) != 0; }
    std::string state_name(StateId q) const override { return table_.state_names.at(q); }
    int state_count() const override { return (int)table_.state_names.size(); }

    const ThresholdTreeAutomaton& table() const { return table_; }

private:
    ThresholdTreeAutomaton table_;
    std::map<std::pair<std::string, std::string>, StateId> delta_;
};

// ---------------------------------------------------------------------------
// FO sentence -> deterministic threshold automaton via pruned-subtree states.
//
// The state reached at a node is the canonical pruned form of its subtree:
// child isomorphism classes keep multiplicity at most tau = quantifier rank.
// Acceptance evaluates the sentence on the pruned representative, which
// agrees with the original tree up to rank-tau equivalence.
// ---------------------------------------------------------------------------

class PrunedTreeAutomaton : public DetAutomaton {
public:
    PrunedTreeAutomaton(std::vector<std::string> sigma, FormulaPtr sentence, int height_bound,
                        int tau, Budget budget = default_budget())
        : sigma_(std::move(sigma)),
          sentence_(std::move(sentence)),
          height_bound_(height_bound),
          tau_(std::max(tau, 1)),
          budget_(budget) {
        if (!free_vars(sentence_).empty())
            throw contract_error("automaton compilation needs a sentence");
        sink_ = intern(LabeledTree::single(0, "?sink"), true);
    }

    int threshold() const override { return tau_; }
    const std::vector<std::string>& alphabet() const override { return sigma_; }

    StateId transition(const std::string& label, const CappedMultiset& kids) override {
        auto key = std::make_pair(label, kids.code());
        auto it = delta_.find(key);
        if (it != delta_.end()) return it->second;
        StateId q;
        for (const auto& [state, count] : kids.entries)
            if (state == sink_) {
                q = sink_;
                delta_[key] = q;
                return q;
            }
        // assemble the pruned representative
        LabeledTree t = LabeledTree::single(0, label);
        ElementId next = 1;
        for (const auto& [state, count] : kids.entries)
            for (int i = 0; i < count; ++i) {
                const LabeledTree& rep = reps_[state];
                std::map<ElementId, ElementId> rename;
                for (ElementId v : rep.nodes) rename[v] = next++;
                for (ElementId v : rep.nodes) {
                    t.nodes.insert(rename[v]);
                    t.label[rename[v]] = rep.label.at(v);
                }
                for (const auto& [c, p] : rep.parent) t.parent[rename[c]] = rename[p];
                t.parent[rename[rep.root()]] = 0;
            }
        if (t.height() > height_bound_)
            q = sink_;
        else
            q = intern(t.canonical_form(), false);
        delta_[key] = q;
        return q;
    }

    bool accepting(StateId q) override {
        if (q == sink_) return false;
        auto it = accept_memo_.find(q);
        if (it != accept_memo_.end()) return it->second != 0;
        bool acc = eval_naive(reps_[q].to_structure(sigma_), sentence_, {});
        accept_memo_[q] = acc ? 1 : 0;
        return acc;
    }

    std::string state_name(StateId q) const override { return codes_[q]; }
    int state_count() const override { return (int)reps_.size(); }
    const LabeledTree& representative(StateId q) const { return reps_[q]; }
    StateId sink_state() const { return sink_; }

    // explicit snapshot of everything discovered so far
    ThresholdTreeAutomaton snapshot() {
        ThresholdTreeAutomaton out;
        out.alphabet = sigma_;
        out.threshold = tau_;
        for (StateId q = 0; q < (int)reps_.size(); ++q) {
            out.state_names.push_back(codes_[q]);
            if (q != sink_ && accepting(q)) out.accepting.insert(q);
        }
        for (const auto& [key, q] : delta_) {
            AutomatonRule r;
            r.label = key.first;
            // recover the multiset from its code
            CappedMultiset ms;
            const std::string& code = key.second;
            std::size_t i = 0;
            while (i < code.size()) {
                std::size_t x = code.find('x', i);
                std::size_t s = code.find(';', x);
                ms.entries.push_back({std::stoi(code.substr(i, x - i)),
                                      std::stoi(code.substr(x + 1, s - x - 1))});
                i = s + 1;
            }
            r.child_states = std::move(ms);
            r.state = q;
            out.rules.push_back(std::move(r));
        }
        return out;
    }

private:
    StateId intern(const LabeledTree& pruned, bool is_sink) {
        auto code = is_sink ? std::string("?sink") : pruned.canonical_code();
        auto it = code2state_.find(code);
        if (it != code2state_.end()) return it->second;
        if ((long)reps_.size() >= budget_.max_states)
            throw capacity_error("automaton state budget exceeded");
        StateId q = (StateId)reps_.size();
        reps_.push_back(pruned);
        codes_.push_back(code);
        code2state_[code] = q;
        return q;
    }

    std::vector<std::string> sigma_;
    FormulaPtr sentence_;
    int height_bound_;
    int tau_;
    Budget budget_;
    std::vector<LabeledTree> reps_;
    std::vector<std::string> codes_;
    std::map<std::string, StateId> code2state_;
    std::map<std::pair<std::string, std::string>, StateId> delta_;
    std::map<StateId, char> accept_memo_;
    StateId sink_ = -1;
};

// FO sentence over Sigma-labeled trees (labels appear as unary predicates
// "L<letter>", the parent function as "parent") to a deterministic threshold
// automaton with threshold = quantifier rank.
inline std::shared_ptr<PrunedTreeAutomaton> fo_to_automaton(const FormulaPtr& sentence,
                                                            const std::vector<std::string>& sigma,
                                                            int height_bound,
                                                            const Budget& budget = default_budget()) {
    int q = quantifier_rank(sentence);
    return std::make_shared<PrunedTreeAutomaton>(sigma, eliminate_forall(sentence), height_bound, q,
                                                 budget);
}

// ---------------------------------------------------------------------------
// Boolean combinations of deterministic automata (product construction,
// complemented acceptance).
// ---------------------------------------------------------------------------

enum class BoolOp { And, Or, Not };

class ProductAutomaton : public DetAutomaton {
public:
    ProductAutomaton(DetAutomatonPtr a, DetAutomatonPtr b, BoolOp op)
        : a_(std::move(a)), b_(std::move(b)), op_(op) {
        if (op == BoolOp::Not) throw contract_error("product automaton needs a binary op");
        if (a_->alphabet() != b_->alphabet())
            throw validation_error("boolean combination needs equal alphabets");
        tau_ = std::max(a_->threshold(), b_->threshold());
    }

    int threshold() const override { return tau_; }
    const std::vector<std::string>& alphabet() const override { return a_->alphabet(); }

    StateId transition(const std::string& label, const CappedMultiset& kids) override {
        // project the pair multiset to each component and re-cap; capping at
        // the larger threshold first keeps the component counts exact
        std::vector<StateId> left, right;
        for (const auto& [q, c] : kids.entries) {
            const auto& [qa, qb] = pairs_[q];
            for (int i = 0; i < c; ++i) {
                left.push_back(qa);
                right.push_back(qb);
            }
        }
        StateId qa = a_->transition(label, CappedMultiset::from_states(left, a_->threshold()));
        StateId qb = b_->transition(label, CappedMultiset::from_states(right, b_->threshold()));
        return intern(qa, qb);
    }

    bool accepting(StateId q) override {
        const auto& [qa, qb] = pairs_[q];
        bool x = a_->accepting(qa), y = b_->accepting(qb);
        return op_ == BoolOp::And ? (x && y) : (x || y);
    }

    std::string state_name(StateId q) const override {
        const auto& [qa, qb] = pairs_[q];
        return "<" + a_->state_name(qa) + "," + b_->state_name(qb) + ">";
    }
    int state_count() const override { return (int)pairs_.size(); }

private:
    StateId intern(StateId qa, StateId qb) {
        auto key = std::make_pair(qa, qb);
        auto it = index_.find(key);
        if (it != index_.end()) return it->second;
        StateId q = (StateId)pairs_.size();
        pairs_.push_back(key);
        index_[key] = q;
        return q;
    }

    DetAutomatonPtr a_, b_;
    BoolOp op_;
    int tau_;
    std::vector<std::pair<StateId, StateId>> pairs_;
    std::map<std::pair<StateId, StateId>, StateId> index_;
};

class ComplementAutomaton : public DetAutomaton {
public:
    explicit ComplementAutomaton(DetAutomatonPtr a) : a_(std::move(a)) {}
    int threshold() const override { return a_->threshold(); }
    const std::vector<std::string>& alphabet() const override { return a_->alphabet(); }
    StateId transition(const std::string& label, const CappedMultiset& kids) override {
        return a_->transition(label, kids);
    }
    bool accepting(StateId q) override { return !a_->accepting(q); }
    std::string state_name(StateId q) const override { return a_->state_name(q); }
    int state_count() const override { return a_->state_count(); }

private:
    DetAutomatonPtr a_;
};

inline DetAutomatonPtr bool_combine(DetAutomatonPtr a, DetAutomatonPtr b, BoolOp op) {
    if (op == BoolOp::Not) {
        if (b) throw contract_error("negation takes one automaton");
        return std::make_shared<ComplementAutomaton>(std::move(a));
    }
    return std::make_shared<ProductAutomaton>(std::move(a), std::move(b), op);
}

} // namespace sparse_logic
