#include "ontomedrec/logic.hpp"

#include <algorithm>
#include <cmath>

#include "ontomedrec/errors.hpp"

namespace omr {

void LogicTape::clear() {
    nodes_.clear();
    arg_node_.clear();
    arg_partial_.clear();
}

TruthValue LogicTape::push(double value, std::initializer_list<std::pair<TruthValue, double>> args) {
    Node n;
    n.value = value;
    n.grad = 0.0;
    n.first_arg = static_cast<std::uint32_t>(arg_node_.size());
    n.n_args = static_cast<std::uint32_t>(args.size());
    for (const auto& [tv, partial] : args) {
        arg_node_.push_back(tv.node);
        arg_partial_.push_back(partial);
    }
    nodes_.push_back(n);
    return TruthValue{value, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

TruthValue LogicTape::leaf(double value) { return push(value, {}); }

TruthValue LogicTape::fz_not(TruthValue a) { return push(1.0 - a.value, {{a, -1.0}}); }

TruthValue LogicTape::fz_and(TruthValue a, TruthValue b) {
    return push(a.value * b.value, {{a, b.value}, {b, a.value}});
}

TruthValue LogicTape::fz_implies(TruthValue a, TruthValue b) {
    return push(1.0 - a.value + a.value * b.value, {{a, b.value - 1.0}, {b, a.value}});
}

TruthValue LogicTape::aggregate(std::span<const TruthValue> values, double p) {
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (const TruthValue& v : values) mean += std::pow(std::max(0.0, 1.0 - v.value), p);
    mean /= n;

    Node node;
    node.value = 1.0 - std::pow(mean, 1.0 / p);
    node.grad = 0.0;
    node.first_arg = static_cast<std::uint32_t>(arg_node_.size());
    node.n_args = static_cast<std::uint32_t>(values.size());
    // d/dv_i = (1/n) * mean^((1-p)/p) * (1-v_i)^(p-1). At mean == 0 every
    // v_i is 1 and the all-equal limit of the partial is 1/n.
    const double scale = (mean == 0.0) ? 0.0 : std::pow(mean, (1.0 - p) / p) / n;
    for (const TruthValue& v : values) {
        arg_node_.push_back(v.node);
        arg_partial_.push_back(mean == 0.0 ? 1.0 / n
                                           : scale * std::pow(std::max(0.0, 1.0 - v.value), p - 1.0));
    }
    nodes_.push_back(node);
    return TruthValue{node.value, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

TruthValue LogicTape::forall(std::span<const TruthValue> values, double p) {
    if (values.empty()) throw EmptyDomain("forall over an empty domain");
    return aggregate(values, p);
}

TruthValue LogicTape::sat_agg(std::span<const TruthValue> axiom_sats, double p) {
    if (axiom_sats.empty()) throw EmptyKnowledgeBase("sat_agg over an empty knowledge base");
    return aggregate(axiom_sats, p);
}

void LogicTape::backward(TruthValue root) {
    for (Node& n : nodes_) n.grad = 0.0;
    nodes_[root.node].grad = 1.0;
    for (std::size_t i = nodes_.size(); i-- > 0;) {
        const Node& n = nodes_[i];
        if (n.grad == 0.0 || n.n_args == 0) continue;
        for (std::uint32_t a = 0; a < n.n_args; ++a)
            nodes_[arg_node_[n.first_arg + a]].grad += n.grad * arg_partial_[n.first_arg + a];
    }
}

}  // namespace omr
