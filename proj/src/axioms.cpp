#include "ontomedrec/axioms.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "ontomedrec/errors.hpp"

namespace omr {

std::size_t SatReport::evaluated_count() const {
    std::size_t n = 0;
    for (const auto& a : axioms)
        if (!a.skipped) ++n;
    return n;
}

std::size_t SatReport::skipped_count() const { return axioms.size() - evaluated_count(); }

// ---------------------------------------------------------------------------
// MLP evaluator

MlpOntologyEvaluator::MlpOntologyEvaluator(LogicTape& tape, EmbeddingTable& emb,
                                           PredicateNet& parent_net, PredicateNet& sibling_net,
                                           PredicateNet& ancestor_net)
    : tape_(tape), emb_(emb), nets_{&parent_net, &sibling_net, &ancestor_net} {}

TruthValue MlpOntologyEvaluator::query(int rel, NodeIndex x, NodeIndex y) {
    const std::uint64_t key = (static_cast<std::uint64_t>(rel) << 62) | pack_pair(x, y);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;

    Pending p;
    p.rel = rel;
    p.x = x;
    p.y = y;
    const double raw = nets_[rel]->forward(emb_.row(x), emb_.row(y), p.cache);
    const double clamped = std::clamp(raw, kTruthClampEps, 1.0 - kTruthClampEps);
    p.pass_grad = raw > kTruthClampEps && raw < 1.0 - kTruthClampEps;
    p.leaf = tape_.leaf(clamped);
    memo_.emplace(key, p.leaf);
    pending_.push_back(std::move(p));
    return pending_.back().leaf;
}

void MlpOntologyEvaluator::flush_gradients() {
    for (Pending& p : pending_) {
        if (!p.pass_grad) continue;
        const double g = tape_.grad(p.leaf);
        if (g == 0.0) continue;
        nets_[p.rel]->backward(emb_.row(p.x), emb_.row(p.y), p.cache, g, emb_.grad_row(p.x),
                               emb_.grad_row(p.y));
    }
}

// ---------------------------------------------------------------------------
// Ontology axiom schemata

namespace {

constexpr const char* kOntologyAxiomNames[] = {
    "parent_not_reflexive",     "parent_anticommutative", "ancestor_not_reflexive",
    "ancestor_anticommutative", "sibling_definition",     "sibling_not_reflexive",
    "sibling_commutative",      "parent_parent_ancestor", "parent_ancestor_ancestor",
    "positive_edges",           "negative_edges",
};

class ReportBuilder {
public:
    ReportBuilder(LogicTape& tape, const AggregationConfig& cfg) : tape_(tape), cfg_(cfg) {}

    void add(const char* name, const std::vector<TruthValue>& instances) {
        AxiomSat entry;
        entry.name = name;
        entry.instances = instances.size();
        if (instances.empty()) {
            entry.skipped = true;
        } else {
            TruthValue s = tape_.forall(instances, cfg_.p_forall);
            entry.sat = s.value;
            sat_nodes_.push_back(s);
        }
        report_.axioms.push_back(std::move(entry));
    }

    SatReport finish() {
        TruthValue agg = tape_.sat_agg(sat_nodes_, cfg_.p_sat);
        report_.aggregated = agg.value;
        report_.loss_node = tape_.fz_not(agg);
        report_.loss = report_.loss_node.value;
        return std::move(report_);
    }

private:
    LogicTape& tape_;
    const AggregationConfig& cfg_;
    std::vector<TruthValue> sat_nodes_;
    SatReport report_;
};

}  // namespace

std::span<const char* const> ontology_axiom_names() { return kOntologyAxiomNames; }

SatReport eval_ontology_axioms(LogicTape& tape, const AxiomBatch& batch, PredicateEvaluator& ev,
                               const AggregationConfig& cfg, const AxiomEvalOptions& opts) {
    if (batch.empty()) throw EmptyDomain("axiom evaluation over an empty batch");

    const auto& N = batch.nodes;
    ReportBuilder rb(tape, cfg);
    std::vector<TruthValue> inst;

    auto P = [&](NodeIndex a, NodeIndex b) { return ev.parent(a, b); };
    auto S = [&](NodeIndex a, NodeIndex b) { return ev.sibling(a, b); };
    auto A = [&](NodeIndex a, NodeIndex b) { return ev.ancestor(a, b); };

    // forall x: not P(x, x)
    inst.clear();
    for (NodeIndex x : N) inst.push_back(tape.fz_not(P(x, x)));
    rb.add(kOntologyAxiomNames[0], inst);

    // forall x, y: P(x, y) -> not P(y, x)
    inst.clear();
    if (opts.literal_quantifier) {
        for (NodeIndex x : N)
            for (NodeIndex y : N)
                inst.push_back(tape.fz_implies(P(x, y), tape.fz_not(P(y, x))));
    } else {
        for (const auto& [x, y] : batch.positive_edges)
            inst.push_back(tape.fz_implies(P(x, y), tape.fz_not(P(y, x))));
    }
    rb.add(kOntologyAxiomNames[1], inst);

    // forall x: not A(x, x)
    inst.clear();
    for (NodeIndex x : N) inst.push_back(tape.fz_not(A(x, x)));
    rb.add(kOntologyAxiomNames[2], inst);

    // forall x, y: A(x, y) -> not A(y, x)
    inst.clear();
    if (opts.literal_quantifier) {
        for (NodeIndex x : N)
            for (NodeIndex y : N)
                inst.push_back(tape.fz_implies(A(x, y), tape.fz_not(A(y, x))));
    } else {
        for (const auto& [x, y] : batch.triples.ancestor_pairs)
            inst.push_back(tape.fz_implies(A(x, y), tape.fz_not(A(y, x))));
    }
    rb.add(kOntologyAxiomNames[3], inst);

    // Children of each batch parent, for the antecedent joins below.
    std::unordered_map<NodeIndex, std::vector<NodeIndex>> kids;
    for (const auto& [p, c] : batch.positive_edges) kids[p].push_back(c);
    std::unordered_map<NodeIndex, std::vector<NodeIndex>> anc_from;
    for (const auto& [a, d] : batch.triples.ancestor_pairs) anc_from[a].push_back(d);

    // forall x, y, z (y != z): P(x, y) and P(x, z) -> S(y, z)
    // The y == z instances are excluded in both modes: they would assert
    // S(y, y), which contradicts sibling irreflexivity.
    inst.clear();
    if (opts.literal_quantifier) {
        for (NodeIndex x : N)
            for (NodeIndex y : N)
                for (NodeIndex z : N) {
                    if (y == z) continue;
                    inst.push_back(tape.fz_implies(tape.fz_and(P(x, y), P(x, z)), S(y, z)));
                }
    } else {
        for (const auto& [x, children] : kids)
            for (NodeIndex y : children)
                for (NodeIndex z : children) {
                    if (y == z) continue;
                    inst.push_back(tape.fz_implies(tape.fz_and(P(x, y), P(x, z)), S(y, z)));
                }
    }
    rb.add(kOntologyAxiomNames[4], inst);

    // forall x: not S(x, x)
    inst.clear();
    for (NodeIndex x : N) inst.push_back(tape.fz_not(S(x, x)));
    rb.add(kOntologyAxiomNames[5], inst);

    // forall x, y: S(x, y) -> S(y, x)
    inst.clear();
    if (opts.literal_quantifier) {
        for (NodeIndex x : N)
            for (NodeIndex y : N)
                inst.push_back(tape.fz_implies(S(x, y), S(y, x)));
    } else {
        for (const auto& [a, b] : batch.triples.sibling_pairs) {
            inst.push_back(tape.fz_implies(S(a, b), S(b, a)));
            inst.push_back(tape.fz_implies(S(b, a), S(a, b)));
        }
    }
    rb.add(kOntologyAxiomNames[6], inst);

    // forall x, y, z: P(x, y) and P(y, z) -> A(x, z)
    inst.clear();
    if (opts.literal_quantifier) {
        for (NodeIndex x : N)
            for (NodeIndex y : N)
                for (NodeIndex z : N)
                    inst.push_back(tape.fz_implies(tape.fz_and(P(x, y), P(y, z)), A(x, z)));
    } else {
        for (const auto& [x, y] : batch.positive_edges) {
            auto it = kids.find(y);
            if (it == kids.end()) continue;
            for (NodeIndex z : it->second)
                inst.push_back(tape.fz_implies(tape.fz_and(P(x, y), P(y, z)), A(x, z)));
        }
    }
    rb.add(kOntologyAxiomNames[7], inst);

    // forall x, y, z: P(x, y) and A(y, z) -> A(x, z)
    inst.clear();
    if (opts.literal_quantifier) {
        for (NodeIndex x : N)
            for (NodeIndex y : N)
                for (NodeIndex z : N)
                    inst.push_back(tape.fz_implies(tape.fz_and(P(x, y), A(y, z)), A(x, z)));
    } else {
        for (const auto& [x, y] : batch.positive_edges) {
            auto it = anc_from.find(y);
            if (it == anc_from.end()) continue;
            for (NodeIndex z : it->second)
                inst.push_back(tape.fz_implies(tape.fz_and(P(x, y), A(y, z)), A(x, z)));
        }
    }
    rb.add(kOntologyAxiomNames[8], inst);

    // forall (x, y) in P_b: P(x, y)
    inst.clear();
    for (const auto& [x, y] : batch.positive_edges) inst.push_back(P(x, y));
    rb.add(kOntologyAxiomNames[9], inst);

    // forall (x, y) not in P_b: not P(x, y)
    inst.clear();
    for (const auto& [x, y] : batch.negative_pairs) inst.push_back(tape.fz_not(P(x, y)));
    rb.add(kOntologyAxiomNames[10], inst);

    return rb.finish();
}

// ---------------------------------------------------------------------------
// Indication alignment

MlpIndicationEvaluator::MlpIndicationEvaluator(LogicTape& tape, EmbeddingTable& med_emb,
                                               EmbeddingTable& diag_emb, PredicateNet& net)
    : tape_(tape), med_(med_emb), diag_(diag_emb), net_(net) {
    if (med_.dim() != diag_.dim())
        throw DimensionMismatch("medication and diagnosis embeddings disagree on dim");
    if (net_.dim() != med_.dim())
        throw DimensionMismatch("indication net dim does not match the embeddings");
}

TruthValue MlpIndicationEvaluator::indication(NodeIndex med_row, NodeIndex diag_row) {
    const std::uint64_t key = pack_pair(med_row, diag_row);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;

    Pending p;
    p.m = med_row;
    p.d = diag_row;
    const double raw = net_.forward(med_.row(med_row), diag_.row(diag_row), p.cache);
    const double clamped = std::clamp(raw, kTruthClampEps, 1.0 - kTruthClampEps);
    p.pass_grad = raw > kTruthClampEps && raw < 1.0 - kTruthClampEps;
    p.leaf = tape_.leaf(clamped);
    memo_.emplace(key, p.leaf);
    pending_.push_back(std::move(p));
    return pending_.back().leaf;
}

void MlpIndicationEvaluator::flush_gradients(bool freeze_embeddings) {
    std::span<double> none;
    for (Pending& p : pending_) {
        if (!p.pass_grad) continue;
        const double g = tape_.grad(p.leaf);
        if (g == 0.0) continue;
        if (freeze_embeddings)
            net_.backward(med_.row(p.m), diag_.row(p.d), p.cache, g, none, none);
        else
            net_.backward(med_.row(p.m), diag_.row(p.d), p.cache, g, med_.grad_row(p.m),
                          diag_.grad_row(p.d));
    }
}

SatReport eval_indication_axioms(LogicTape& tape, std::span<const IndexPair> pairs,
                                 std::span<const IndexPair> neg_pairs, IndicationEvaluator& ev,
                                 const AggregationConfig& cfg) {
    if (pairs.empty()) throw EmptyDomain("no indication pairs in batch");

    ReportBuilder rb(tape, cfg);
    std::vector<TruthValue> inst;
    for (const auto& [m, d] : pairs) inst.push_back(ev.indication(m, d));
    rb.add("positive_indications", inst);

    inst.clear();
    for (const auto& [m, d] : neg_pairs) inst.push_back(tape.fz_not(ev.indication(m, d)));
    rb.add("negative_indications", inst);

    return rb.finish();
}

std::vector<IdPair> expand_indications(const std::vector<IdPair>& pairs,
                                       const OntologyDag& diag_dag) {
    std::vector<IdPair> out;
    std::unordered_set<std::string> seen;
    auto add = [&](const std::string& m, const std::string& d) {
        if (seen.insert(m + '\t' + d).second) out.emplace_back(m, d);
    };
    for (const auto& [med, diag] : pairs) {
        NodeIndex di = diag_dag.index_of(diag);  // throws UnknownNode
        add(med, diag);
        for (NodeIndex c : diag_dag.descendants_of(di)) add(med, diag_dag.id_of(c));
    }
    return out;
}

std::vector<IdPair> load_indications(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open indications file: " + path);
    std::vector<IdPair> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected 'med_id<TAB>diag_id', got: " + line);
        pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return pairs;
}

void save_indications(const std::vector<IdPair>& pairs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write indications file: " + path);
    for (const auto& [m, d] : pairs) out << m << '\t' << d << '\n';
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace omr
