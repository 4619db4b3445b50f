#include "ontomedrec/sampler.hpp"

#include <algorithm>
#include <unordered_set>

#include "ontomedrec/errors.hpp"
#include "ontomedrec/rng.hpp"

namespace omr {

namespace {

// Uniform sample of `cap` ordered non-edge pairs (u != v) over batch nodes.
// Rejection sampling while the target is a small fraction of the domain,
// otherwise a partial shuffle of the enumerated domain.
std::vector<IndexPair> sample_negatives(const std::vector<NodeIndex>& nodes,
                                        const OntologyDag& dag, std::uint64_t domain_size,
                                        std::uint64_t cap, Rng& rng) {
    std::vector<IndexPair> out;
    if (domain_size == 0 || cap == 0) return out;
    if (cap > domain_size) cap = domain_size;

    const std::uint64_t n = nodes.size();
    if (cap * 3 <= domain_size) {
        std::unordered_set<std::uint64_t> taken;
        taken.reserve(cap * 2);
        while (out.size() < cap) {
            NodeIndex u = nodes[rng.below(n)];
            NodeIndex v = nodes[rng.below(n)];
            if (u == v || dag.has_edge(u, v)) continue;
            if (!taken.insert(pack_pair(u, v)).second) continue;
            out.emplace_back(u, v);
        }
        return out;
    }

    std::vector<IndexPair> domain;
    domain.reserve(domain_size);
    for (NodeIndex u : nodes)
        for (NodeIndex v : nodes)
            if (u != v && !dag.has_edge(u, v)) domain.emplace_back(u, v);
    for (std::uint64_t i = 0; i < cap; ++i) {
        std::uint64_t j = i + rng.below(domain.size() - i);
        std::swap(domain[i], domain[j]);
        out.push_back(domain[i]);
    }
    return out;
}

}  // namespace

AxiomBatch build_batch_from_seeds(const OntologyDag& dag, const RelationTriples& relations,
                                  const std::vector<NodeIndex>& seeds, std::uint64_t rng_seed,
                                  std::int64_t neg_cap) {
    AxiomBatch batch;
    std::unordered_set<NodeIndex> members;
    auto add = [&](NodeIndex n) {
        if (members.insert(n).second) batch.nodes.push_back(n);
    };

    // Closure over seeds only: parent, full ancestor chain, siblings.
    for (NodeIndex s : seeds) add(s);
    for (NodeIndex s : seeds) {
        if (!dag.is_root(s)) {
            NodeIndex p = dag.parent_of(s);
            add(p);
            for (NodeIndex a : dag.ancestors_of(p)) add(a);
            for (NodeIndex sib : dag.children_of(p))
                if (sib != s) add(sib);
        }
    }

    for (NodeIndex child : batch.nodes) {
        if (dag.is_root(child)) continue;
        NodeIndex p = dag.parent_of(child);
        if (members.count(p)) batch.positive_edges.emplace_back(p, child);
    }

    // Restrict the full relations to batch members.
    batch.triples.parent_pairs = batch.positive_edges;
    for (const auto& [a, b] : relations.ancestor_pairs)
        if (members.count(a) && members.count(b)) batch.triples.ancestor_pairs.emplace_back(a, b);
    for (const auto& [a, b] : relations.sibling_pairs)
        if (members.count(a) && members.count(b)) batch.triples.sibling_pairs.emplace_back(a, b);

    const std::uint64_t n = batch.nodes.size();
    const std::uint64_t domain = n * n - n - batch.positive_edges.size();
    std::uint64_t cap;
    if (neg_cap == kNegCapUnlimited)
        cap = domain;
    else if (neg_cap == kNegCapAuto)
        cap = 4 * batch.positive_edges.size();
    else
        cap = static_cast<std::uint64_t>(neg_cap);

    Rng rng(rng_seed);
    batch.negative_pairs = sample_negatives(batch.nodes, dag, domain, cap, rng);
    return batch;
}

AxiomBatch sample_batch(const OntologyDag& dag, const RelationTriples& relations,
                        std::uint32_t seed_count, std::uint64_t rng_seed, std::int64_t neg_cap) {
    if (seed_count > dag.node_count())
        throw ConfigError("seed_count exceeds ontology size");
    Rng rng(rng_seed);
    std::vector<NodeIndex> seeds =
        rng.sample_without_replacement(static_cast<std::uint32_t>(dag.node_count()), seed_count);
    return build_batch_from_seeds(dag, relations, seeds, rng.next(), neg_cap);
}

std::uint64_t batch_footprint(const AxiomBatch& batch, std::uint32_t n_vars, std::uint32_t dim) {
    return static_cast<std::uint64_t>(n_vars) * batch.nodes.size() * dim;
}

}  // namespace omr
