#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace omr {

// Exponents for the p-mean-error quantifier and the knowledge-base aggregator.
// Both must be >= 1.
struct AggregationConfig {
    double p_forall = 2.0;
    double p_sat = 2.0;
};

class LogicTape;

// A truth degree in [0, 1] recorded on a LogicTape; `node` is its gradient slot.
struct TruthValue {
    double value = 0.0;
    std::uint32_t node = 0;
};

// Minimal reverse-mode scalar engine for fuzzy-logic expressions. Leaves are
// predicate outputs; connectives and aggregators store local partials, and a
// single backward sweep yields d(root)/d(leaf) for every leaf.
//
// Semantics: standard negation, product t-norm, Reichenbach implication,
// p-mean-error quantifier aggregation.
class LogicTape {
public:
    LogicTape() { clear(); }

    TruthValue leaf(double value);

    TruthValue fz_not(TruthValue a);
    TruthValue fz_and(TruthValue a, TruthValue b);
    TruthValue fz_implies(TruthValue a, TruthValue b);

    // 1 - (mean((1 - v_i)^p))^(1/p). Throws EmptyDomain on an empty span.
    TruthValue forall(std::span<const TruthValue> values, double p);
    // Same map applied across axiom satisfiabilities. Throws EmptyKnowledgeBase.
    TruthValue sat_agg(std::span<const TruthValue> axiom_sats, double p);

    // Seeds d(root)/d(root) = 1 and sweeps the tape in reverse.
    void backward(TruthValue root);

    double value(TruthValue t) const { return nodes_[t.node].value; }
    double grad(TruthValue t) const { return nodes_[t.node].grad; }
    std::size_t size() const { return nodes_.size(); }

    void clear();

private:
    struct Node {
        double value;
        double grad;
        std::uint32_t first_arg;
        std::uint32_t n_args;
    };

    TruthValue push(double value, std::initializer_list<std::pair<TruthValue, double>> args);
    TruthValue aggregate(std::span<const TruthValue> values, double p);

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> arg_node_;
    std::vector<double> arg_partial_;
};

// Truth-degree clamp applied to learned predicate outputs before they enter
// logic composition.
inline constexpr double kTruthClampEps = 1e-7;

}  // namespace omr
