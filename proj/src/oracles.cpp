#include "ontomedrec/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace omr::oracle {

PairSet reachable_pairs(const OntologyDag& dag) {
    const std::size_t n = dag.node_count();
    std::vector<std::vector<NodeIndex>> adj(n);
    for (NodeIndex i = 0; i < n; ++i)
        if (!dag.is_root(i)) adj[dag.parent_of(i)].push_back(i);

    PairSet pairs;
    for (NodeIndex src = 0; src < n; ++src) {
        std::vector<char> seen(n, 0);
        std::vector<NodeIndex> stack{src};
        while (!stack.empty()) {
            NodeIndex u = stack.back();
            stack.pop_back();
            for (NodeIndex v : adj[u]) {
                if (seen[v]) continue;
                seen[v] = 1;
                pairs.insert(pack_pair(src, v));
                stack.push_back(v);
            }
        }
    }
    return pairs;
}

RelationTriples derive_relations_bruteforce(const OntologyDag& dag, std::size_t max_depth) {
    const std::size_t n = dag.node_count();
    std::vector<std::vector<NodeIndex>> adj(n);
    for (NodeIndex i = 0; i < n; ++i)
        if (!dag.is_root(i)) adj[dag.parent_of(i)].push_back(i);

    RelationTriples rel;
    // BFS with hop counts from every source.
    for (NodeIndex src = 0; src < n; ++src) {
        std::deque<std::pair<NodeIndex, std::size_t>> queue{{src, 0}};
        std::vector<char> seen(n, 0);
        seen[src] = 1;
        while (!queue.empty()) {
            auto [u, hops] = queue.front();
            queue.pop_front();
            if (hops >= max_depth) continue;
            for (NodeIndex v : adj[u]) {
                if (seen[v]) continue;
                seen[v] = 1;
                if (hops + 1 == 1) {
                    rel.parent_pairs.emplace_back(src, v);
                    rel.parent_set.insert(pack_pair(src, v));
                } else {
                    rel.ancestor_pairs.emplace_back(src, v);
                    rel.ancestor_set.insert(pack_pair(src, v));
                }
                queue.emplace_back(v, hops + 1);
            }
        }
    }
    // Sibling scan over all unordered node pairs.
    for (NodeIndex a = 0; a < n; ++a)
        for (NodeIndex b = a + 1; b < n; ++b) {
            if (dag.is_root(a) || dag.is_root(b)) continue;
            if (dag.parent_of(a) != dag.parent_of(b)) continue;
            rel.sibling_pairs.emplace_back(a, b);
            rel.sibling_set.insert(pack_pair(a, b));
            rel.sibling_set.insert(pack_pair(b, a));
        }
    return rel;
}

std::vector<IndexPair> edges_within(const OntologyDag& dag, const std::vector<NodeIndex>& nodes) {
    std::vector<IndexPair> out;
    for (NodeIndex u : nodes)
        for (NodeIndex v : nodes)
            if (u != v && dag.has_edge(u, v)) out.emplace_back(u, v);
    return out;
}

std::vector<NodeIndex> descendants_bruteforce(const OntologyDag& dag, NodeIndex n) {
    std::vector<NodeIndex> out;
    for (NodeIndex v = 0; v < dag.node_count(); ++v) {
        if (v == n) continue;
        // walk v's parent chain looking for n
        NodeIndex cur = v;
        while (!dag.is_root(cur)) {
            cur = dag.parent_of(cur);
            if (cur == n) {
                out.push_back(v);
                break;
            }
        }
    }
    return out;
}

double jaccard_sets(const std::set<std::size_t>& truth, const std::set<std::size_t>& pred) {
    std::vector<std::size_t> inter, uni;
    std::set_intersection(truth.begin(), truth.end(), pred.begin(), pred.end(),
                          std::back_inserter(inter));
    std::set_union(truth.begin(), truth.end(), pred.begin(), pred.end(), std::back_inserter(uni));
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

void precision_recall_f1_sets(const std::set<std::size_t>& truth, const std::set<std::size_t>& pred,
                              double& precision, double& recall, double& f1) {
    std::vector<std::size_t> inter;
    std::set_intersection(truth.begin(), truth.end(), pred.begin(), pred.end(),
                          std::back_inserter(inter));
    precision = pred.empty() ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(pred.size());
    recall = truth.empty() ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(truth.size());
    f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

double ddi_sets(const std::vector<std::set<std::size_t>>& admissions, const DdiMatrix& D) {
    std::uint64_t hits = 0, total = 0;
    for (const auto& meds : admissions)
        for (auto a = meds.begin(); a != meds.end(); ++a) {
            auto b = a;
            for (++b; b != meds.end(); ++b) {
                ++total;
                hits += D.interacts(*a, *b) ? 1 : 0;
            }
        }
    return static_cast<double>(hits) / static_cast<double>(total);
}

double p_mean_error(const std::vector<double>& values, double p) {
    double acc = 0.0;
    for (double v : values) acc += std::pow(1.0 - v, p);
    acc /= static_cast<double>(values.size());
    return 1.0 - std::pow(acc, 1.0 / p);
}

}  // namespace omr::oracle
