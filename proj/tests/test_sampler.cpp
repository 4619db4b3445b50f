#include <doctest.h>

#include <algorithm>
#include <set>

#include "ontomedrec/oracles.hpp"
#include "ontomedrec/sampler.hpp"
#include "ontomedrec/synth.hpp"
#include "testutil.hpp"

using namespace omr;

namespace {

OntologyDag from_edges(const std::string& edges) {
    test::TempDir dir;
    test::write_file(dir.file("o.tsv"), edges);
    return load_ontology(dir.file("o.tsv"), OntologyKind::diagnosis);
}

std::set<std::uint64_t> as_set(const std::vector<IndexPair>& pairs) {
    std::set<std::uint64_t> s;
    for (const auto& [a, b] : pairs) s.insert(pack_pair(a, b));
    return s;
}

bool contains(const std::vector<NodeIndex>& nodes, NodeIndex n) {
    return std::find(nodes.begin(), nodes.end(), n) != nodes.end();
}

}  // namespace

TEST_CASE("closure on a chain pulls in parent and ancestor") {
    OntologyDag dag = from_edges("b\ta\nc\tb\n");
    RelationTriples rel = derive_relations(dag);
    AxiomBatch batch = build_batch_from_seeds(dag, rel, {dag.index_of("c")}, 1);
    CHECK(contains(batch.nodes, dag.index_of("a")));
    CHECK(contains(batch.nodes, dag.index_of("b")));
    CHECK(contains(batch.nodes, dag.index_of("c")));
}

TEST_CASE("closure on a star pulls in the sibling") {
    OntologyDag dag = from_edges("b\ta\nc\ta\n");
    RelationTriples rel = derive_relations(dag);
    AxiomBatch batch = build_batch_from_seeds(dag, rel, {dag.index_of("b")}, 1);
    CHECK(contains(batch.nodes, dag.index_of("a")));
    CHECK(contains(batch.nodes, dag.index_of("c")));
}

TEST_CASE("positive edges match the brute-force pair scan") {
    Rng rng(61);
    for (int rep = 0; rep < 20; ++rep) {
        OntologySpec spec;
        spec.n_nodes = 20 + rng.below(181);
        spec.max_depth = 3 + rng.below(5);
        OntologyDag dag = gen_ontology(spec, rng.next());
        RelationTriples rel = derive_relations(dag);
        const std::uint32_t seeds = 1 + static_cast<std::uint32_t>(rng.below(12));
        AxiomBatch batch = sample_batch(dag, rel, seeds, rng.next());
        CHECK(as_set(batch.positive_edges) == as_set(oracle::edges_within(dag, batch.nodes)));
    }
}

TEST_CASE("sample_batch is deterministic in its seed") {
    OntologySpec spec;
    spec.n_nodes = 120;
    spec.max_depth = 5;
    OntologyDag dag = gen_ontology(spec, 4);
    RelationTriples rel = derive_relations(dag);
    AxiomBatch a = sample_batch(dag, rel, 8, 42, 16);
    AxiomBatch b = sample_batch(dag, rel, 8, 42, 16);
    CHECK(a.nodes == b.nodes);
    CHECK(a.positive_edges == b.positive_edges);
    CHECK(a.negative_pairs == b.negative_pairs);
    AxiomBatch c = sample_batch(dag, rel, 8, 43, 16);
    CHECK(a.nodes != c.nodes);
}

TEST_CASE("negative pairs avoid edges, the diagonal and duplicates") {
    OntologySpec spec;
    spec.n_nodes = 60;
    spec.max_depth = 4;
    OntologyDag dag = gen_ontology(spec, 5);
    RelationTriples rel = derive_relations(dag);

    SUBCASE("explicit cap") {
        AxiomBatch batch = sample_batch(dag, rel, 6, 9, 25);
        CHECK(batch.negative_pairs.size() <= 25);
        std::set<std::uint64_t> seen;
        for (const auto& [u, v] : batch.negative_pairs) {
            CHECK(u != v);
            CHECK_FALSE(dag.has_edge(u, v));
            CHECK(seen.insert(pack_pair(u, v)).second);
            CHECK(contains(batch.nodes, u));
            CHECK(contains(batch.nodes, v));
        }
    }
    SUBCASE("unlimited cap enumerates the full non-edge domain") {
        AxiomBatch batch = sample_batch(dag, rel, 4, 9, kNegCapUnlimited);
        const std::uint64_t n = batch.nodes.size();
        CHECK(batch.negative_pairs.size() == n * n - n - batch.positive_edges.size());
    }
    SUBCASE("auto cap is four positives") {
        AxiomBatch batch = sample_batch(dag, rel, 6, 9, kNegCapAuto);
        const std::uint64_t n = batch.nodes.size();
        const std::uint64_t domain = n * n - n - batch.positive_edges.size();
        CHECK(batch.negative_pairs.size() == std::min<std::uint64_t>(4 * batch.positive_edges.size(), domain));
    }
}

TEST_CASE("a batch covering the whole ontology carries every edge") {
    OntologySpec spec;
    spec.n_nodes = 40;
    spec.max_depth = 4;
    OntologyDag dag = gen_ontology(spec, 6);
    RelationTriples rel = derive_relations(dag);
    std::vector<NodeIndex> all;
    for (NodeIndex i = 0; i < dag.node_count(); ++i) all.push_back(i);
    AxiomBatch batch = build_batch_from_seeds(dag, rel, all, 1);
    CHECK(batch.positive_edges.size() == dag.edge_count());
}

TEST_CASE("batch triples agree with the full ontology relations") {
    Rng rng(71);
    for (int rep = 0; rep < 10; ++rep) {
        OntologySpec spec;
        spec.n_nodes = 30 + rng.below(150);
        spec.max_depth = 3 + rng.below(4);
        OntologyDag dag = gen_ontology(spec, rng.next());
        RelationTriples rel = derive_relations(dag);
        AxiomBatch batch = sample_batch(dag, rel, 5, rng.next());
        PairSet reach = oracle::reachable_pairs(dag);
        for (const auto& [p, c] : batch.triples.parent_pairs) CHECK(dag.has_edge(p, c));
        for (const auto& [a, d] : batch.triples.ancestor_pairs) {
            CHECK(reach.count(pack_pair(a, d)) == 1);
            CHECK_FALSE(dag.has_edge(a, d));
        }
        for (const auto& [x, y] : batch.triples.sibling_pairs) {
            CHECK_FALSE(dag.is_root(x));
            CHECK_FALSE(dag.is_root(y));
            CHECK(dag.parent_of(x) == dag.parent_of(y));
            CHECK(x != y);
        }
    }
}

TEST_CASE("batch_footprint counts materialized variable slots") {
    AxiomBatch batch;
    for (NodeIndex i = 0; i < 10; ++i) batch.nodes.push_back(i);
    CHECK(batch_footprint(batch, 3, 8) == 240);
    AxiomBatch empty;
    CHECK(batch_footprint(empty, 3, 8) == 0);
}

TEST_CASE("sampled batches materialize a small fraction of a large ontology") {
    OntologySpec spec;
    spec.n_nodes = 17737;
    spec.max_depth = 7;
    OntologyDag dag = gen_ontology(spec, 13);
    RelationTriples rel = derive_relations(dag);
    AxiomBatch batch = sample_batch(dag, rel, 256, 3);

    // Seeds alone would be 256/17737 ~ 0.0144 of the node set; the closure
    // stays within the same order of magnitude.
    CHECK(256.0 / 17737.0 == doctest::Approx(0.0144).epsilon(2e-2));
    const double ratio = static_cast<double>(batch_footprint(batch, 3, 64)) /
                         static_cast<double>(3ull * dag.node_count() * 64);
    CHECK(ratio < 0.2);
    CHECK(batch.nodes.size() >= 256);
    CHECK(batch_footprint(batch, 3, 64) == 3ull * batch.nodes.size() * 64);
}
