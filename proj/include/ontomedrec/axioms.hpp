#pragma once

#include <array>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ontomedrec/grounding.hpp"
#include "ontomedrec/logic.hpp"
#include "ontomedrec/sampler.hpp"

namespace omr {

// Relation scorers over one ontology's batch, producing tape leaves. Repeated
// queries for the same ordered pair share one leaf.
class PredicateEvaluator {
public:
    virtual ~PredicateEvaluator() = default;
    virtual TruthValue parent(NodeIndex x, NodeIndex y) = 0;
    virtual TruthValue sibling(NodeIndex x, NodeIndex y) = 0;
    virtual TruthValue ancestor(NodeIndex x, NodeIndex y) = 0;
};

// Learned groundings: sigma(MLP(x, y)) per relation, output clamped before
// logic composition. flush_gradients() routes d(loss)/d(leaf) into the nets
// and the embedding table after the tape backward pass.
class MlpOntologyEvaluator : public PredicateEvaluator {
public:
    MlpOntologyEvaluator(LogicTape& tape, EmbeddingTable& emb, PredicateNet& parent_net,
                         PredicateNet& sibling_net, PredicateNet& ancestor_net);

    TruthValue parent(NodeIndex x, NodeIndex y) override { return query(0, x, y); }
    TruthValue sibling(NodeIndex x, NodeIndex y) override { return query(1, x, y); }
    TruthValue ancestor(NodeIndex x, NodeIndex y) override { return query(2, x, y); }

    void flush_gradients();

private:
    TruthValue query(int rel, NodeIndex x, NodeIndex y);

    struct Pending {
        int rel;
        NodeIndex x, y;
        TruthValue leaf;
        bool pass_grad;  // false when the clamp was active
        PredicateNet::Cache cache;
    };

    LogicTape& tape_;
    EmbeddingTable& emb_;
    std::array<PredicateNet*, 3> nets_;
    std::unordered_map<std::uint64_t, TruthValue> memo_;
    std::vector<Pending> pending_;
};

// Crisp indicator groundings from the true derived relations. Used for the
// soundness checks; produces exact {0, 1} leaves with no gradient path.
class OracleOntologyEvaluator : public PredicateEvaluator {
public:
    OracleOntologyEvaluator(LogicTape& tape, const RelationTriples& relations)
        : tape_(tape), rel_(relations) {}

    TruthValue parent(NodeIndex x, NodeIndex y) override {
        return tape_.leaf(rel_.is_parent(x, y) ? 1.0 : 0.0);
    }
    TruthValue sibling(NodeIndex x, NodeIndex y) override {
        return tape_.leaf(rel_.is_sibling(x, y) ? 1.0 : 0.0);
    }
    TruthValue ancestor(NodeIndex x, NodeIndex y) override {
        return tape_.leaf(rel_.is_ancestor(x, y) ? 1.0 : 0.0);
    }

private:
    LogicTape& tape_;
    const RelationTriples& rel_;
};

// Fixed-value groundings for hand-computed expectations in tests.
class ConstantEvaluator : public PredicateEvaluator {
public:
    ConstantEvaluator(LogicTape& tape, double value) : tape_(tape), value_(value) {}
    TruthValue parent(NodeIndex, NodeIndex) override { return tape_.leaf(value_); }
    TruthValue sibling(NodeIndex, NodeIndex) override { return tape_.leaf(value_); }
    TruthValue ancestor(NodeIndex, NodeIndex) override { return tape_.leaf(value_); }

private:
    LogicTape& tape_;
    double value_;
};

struct AxiomSat {
    std::string name;
    double sat = 0.0;
    std::size_t instances = 0;
    bool skipped = false;  // empty quantifier domain on this batch
};

struct SatReport {
    std::vector<AxiomSat> axioms;
    double aggregated = 0.0;
    double loss = 0.0;
    TruthValue loss_node;  // valid until the tape is cleared

    std::size_t evaluated_count() const;
    std::size_t skipped_count() const;
};

struct AxiomEvalOptions {
    // Default quantification ranges only over instances whose antecedent
    // relations can hold; the literal mode quantifies over the full cartesian
    // batch domain.
    bool literal_quantifier = false;
};

// Stable names of the ontology axiom schemata, in evaluation order.
std::span<const char* const> ontology_axiom_names();

SatReport eval_ontology_axioms(LogicTape& tape, const AxiomBatch& batch, PredicateEvaluator& ev,
                               const AggregationConfig& cfg, const AxiomEvalOptions& opts = {});

// ---------------------------------------------------------------------------
// Indication alignment

class IndicationEvaluator {
public:
    virtual ~IndicationEvaluator() = default;
    virtual TruthValue indication(NodeIndex med_row, NodeIndex diag_row) = 0;
};

class MlpIndicationEvaluator : public IndicationEvaluator {
public:
    MlpIndicationEvaluator(LogicTape& tape, EmbeddingTable& med_emb, EmbeddingTable& diag_emb,
                           PredicateNet& net);

    TruthValue indication(NodeIndex med_row, NodeIndex diag_row) override;

    // freeze_embeddings: route gradients into the net only.
    void flush_gradients(bool freeze_embeddings = false);

private:
    struct Pending {
        NodeIndex m, d;
        TruthValue leaf;
        bool pass_grad;
        PredicateNet::Cache cache;
    };

    LogicTape& tape_;
    EmbeddingTable& med_;
    EmbeddingTable& diag_;
    PredicateNet& net_;
    std::unordered_map<std::uint64_t, TruthValue> memo_;
    std::vector<Pending> pending_;
};

// pairs/neg_pairs hold (medication row, diagnosis row).
SatReport eval_indication_axioms(LogicTape& tape, std::span<const IndexPair> pairs,
                                 std::span<const IndexPair> neg_pairs, IndicationEvaluator& ev,
                                 const AggregationConfig& cfg);

// Descendant closure of the diagnosis side: a medication indicated for a
// diagnosis also indicates every diagnosis below it. Idempotent.
using IdPair = std::pair<std::string, std::string>;  // (medication id, diagnosis id)
std::vector<IdPair> expand_indications(const std::vector<IdPair>& pairs, const OntologyDag& diag_dag);

std::vector<IdPair> load_indications(const std::string& path);
void save_indications(const std::vector<IdPair>& pairs, const std::string& path);

}  // namespace omr
