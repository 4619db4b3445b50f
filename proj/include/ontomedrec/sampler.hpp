#pragma once

#include <cstdint>
#include <vector>

#include "ontomedrec/ontology.hpp"

namespace omr {

inline constexpr std::int64_t kNegCapUnlimited = -1;
inline constexpr std::int64_t kNegCapAuto = 0;  // 4 * |positive_edges|

// Relation pairs restricted to the batch node set.
struct BatchTriples {
    std::vector<IndexPair> parent_pairs;
    std::vector<IndexPair> ancestor_pairs;
    std::vector<IndexPair> sibling_pairs;  // unordered, first < second
};

// Axiom-oriented node batch: seed nodes plus their parents, ancestors and
// siblings, so quantified variables only ever range over `nodes`.
struct AxiomBatch {
    std::vector<NodeIndex> nodes;             // N_b, in discovery order (seeds first)
    std::vector<IndexPair> positive_edges;    // (parent, child), both endpoints in N_b
    std::vector<IndexPair> negative_pairs;    // ordered, u != v, no edge u -> v
    BatchTriples triples;

    bool empty() const { return nodes.empty(); }
};

AxiomBatch sample_batch(const OntologyDag& dag, const RelationTriples& relations,
                        std::uint32_t seed_count, std::uint64_t rng_seed,
                        std::int64_t neg_cap = kNegCapAuto);

// Batch built from an explicit seed set (closure + edge/negative scan only).
AxiomBatch build_batch_from_seeds(const OntologyDag& dag, const RelationTriples& relations,
                                  const std::vector<NodeIndex>& seeds, std::uint64_t rng_seed,
                                  std::int64_t neg_cap = kNegCapAuto);

// Scalar variable slots the batch materializes: n_vars * |N_b| * dim.
std::uint64_t batch_footprint(const AxiomBatch& batch, std::uint32_t n_vars, std::uint32_t dim);

}  // namespace omr
