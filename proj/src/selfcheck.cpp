#include "ontomedrec/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "ontomedrec/axioms.hpp"
#include "ontomedrec/metrics.hpp"
#include "ontomedrec/oracles.hpp"
#include "ontomedrec/synth.hpp"
#include "ontomedrec/trainer.hpp"

namespace omr {

namespace {

OntologyDag random_ontology(OntologyKind kind, const char* prefix, Rng& rng, std::size_t min_nodes,
                            std::size_t max_nodes) {
    OntologySpec spec;
    spec.kind = kind;
    spec.prefix = prefix;
    spec.n_nodes = min_nodes + rng.below(max_nodes - min_nodes + 1);
    spec.max_depth = 3 + rng.below(5);
    return gen_ontology(spec, rng.next());
}

bool same_pairs(const std::vector<IndexPair>& a, const std::vector<IndexPair>& b) {
    std::set<std::uint64_t> sa, sb;
    for (const auto& [x, y] : a) sa.insert(pack_pair(x, y));
    for (const auto& [x, y] : b) sb.insert(pack_pair(x, y));
    return sa == sb;
}

CheckResult check_gradients(const SelfCheckOptions& opts) {
    CheckResult res{"grad_check", false, ""};
    Rng rng(opts.seed);
    OntologySpec spec;
    spec.n_nodes = 12;
    spec.max_depth = 4;
    spec.kind = OntologyKind::diagnosis;
    spec.prefix = "D";
    OntologyDag diag = gen_ontology(spec, rng.next());
    spec.kind = OntologyKind::procedure;
    spec.prefix = "P";
    spec.n_nodes = 10;
    OntologyDag proc = gen_ontology(spec, rng.next());
    spec.kind = OntologyKind::medication;
    spec.prefix = "M";
    spec.n_nodes = 10;
    OntologyDag med = gen_ontology(spec, rng.next());

    std::vector<IdPair> indications;
    for (int i = 0; i < 6; ++i)
        indications.emplace_back(med.id_of(static_cast<NodeIndex>(rng.below(med.node_count()))),
                                 diag.id_of(static_cast<NodeIndex>(rng.below(diag.node_count()))));
    indications = expand_indications(indications, diag);

    TrainConfig cfg;
    cfg.dim = 6;
    cfg.epochs = 1;
    cfg.seed_count = 4;
    cfg.rng_seed = rng.next();
    Trainer trainer(diag, proc, med, indications, cfg);

    GradCheckOptions gopts;
    gopts.batch_seed = rng.next();
    gopts.inject_bug = opts.inject_grad_bug;
    GradCheckResult r = grad_check(trainer, gopts);

    std::ostringstream detail;
    detail << "max relative error " << r.max_rel_err << " over all parameter groups";
    res.detail = detail.str();
    res.passed = r.max_rel_err < 1e-4;
    return res;
}

CheckResult check_crisp_limit(const SelfCheckOptions& opts) {
    CheckResult res{"crisp_limit", false, ""};
    Rng rng(opts.seed + 1);
    AggregationConfig agg;
    LogicTape tape;
    std::size_t evaluated = 0;
    for (int i = 0; i < opts.random_dags; ++i) {
        OntologyDag dag = random_ontology(OntologyKind::diagnosis, "N", rng, 10, 200);
        RelationTriples rel = derive_relations(dag);
        const std::uint32_t seeds =
            1 + static_cast<std::uint32_t>(rng.below(std::min<std::size_t>(dag.node_count(), 16)));
        AxiomBatch batch = sample_batch(dag, rel, seeds, rng.next());
        tape.clear();
        OracleOntologyEvaluator ev(tape, rel);
        SatReport report = eval_ontology_axioms(tape, batch, ev, agg);
        for (const AxiomSat& a : report.axioms) {
            if (a.skipped) continue;
            ++evaluated;
            if (a.sat != 1.0) {
                res.detail = "axiom " + a.name + " = " + std::to_string(a.sat) + " with oracle predicates";
                return res;
            }
        }
    }
    res.passed = true;
    res.detail = std::to_string(evaluated) + " axiom evaluations at exactly 1.0 across " +
                 std::to_string(opts.random_dags) + " random DAGs";
    return res;
}

CheckResult check_closure_and_sampler(const SelfCheckOptions& opts) {
    CheckResult res{"closure_sampler", false, ""};
    Rng rng(opts.seed + 2);
    for (int i = 0; i < opts.random_dags; ++i) {
        OntologyDag dag = random_ontology(OntologyKind::diagnosis, "N", rng, 10, 200);
        RelationTriples rel = derive_relations(dag);
        RelationTriples ref = oracle::derive_relations_bruteforce(dag);
        if (!same_pairs(rel.parent_pairs, ref.parent_pairs) ||
            !same_pairs(rel.ancestor_pairs, ref.ancestor_pairs) ||
            !same_pairs(rel.sibling_pairs, ref.sibling_pairs)) {
            res.detail = "derived relations disagree with the brute-force oracle";
            return res;
        }
        const std::uint32_t seeds =
            1 + static_cast<std::uint32_t>(rng.below(std::min<std::size_t>(dag.node_count(), 16)));
        AxiomBatch batch = sample_batch(dag, rel, seeds, rng.next());
        if (!same_pairs(batch.positive_edges, oracle::edges_within(dag, batch.nodes))) {
            res.detail = "batch positive edges disagree with the pair-scan oracle";
            return res;
        }
    }

    // Locality: no gradient reaches embeddings outside the batch.
    {
        Rng lrng(opts.seed + 3);
        OntologyDag dag = random_ontology(OntologyKind::diagnosis, "N", lrng, 40, 80);
        RelationTriples rel = derive_relations(dag);
        AxiomBatch batch = sample_batch(dag, rel, 4, lrng.next());
        const int dim = 6;
        EmbeddingTable emb = init_embeddings(dag, dim, lrng.next());
        PredicateNet pn("parent_diagnosis", dim, lrng.next());
        PredicateNet sn("sibling_diagnosis", dim, lrng.next());
        PredicateNet an("ancestor_diagnosis", dim, lrng.next());
        LogicTape tape;
        MlpOntologyEvaluator ev(tape, emb, pn, sn, an);
        AggregationConfig agg;
        SatReport report = eval_ontology_axioms(tape, batch, ev, agg);
        tape.backward(report.loss_node);
        emb.zero_grads();
        pn.zero_grads();
        sn.zero_grads();
        an.zero_grads();
        ev.flush_gradients();
        std::set<NodeIndex> members(batch.nodes.begin(), batch.nodes.end());
        for (NodeIndex n = 0; n < dag.node_count(); ++n) {
            if (members.count(n)) continue;
            for (double g : emb.grad_row(n))
                if (g != 0.0) {
                    res.detail = "gradient leaked to node " + dag.id_of(n) + " outside the batch";
                    return res;
                }
        }
    }
    res.passed = true;
    res.detail = "closures, batch edges and gradient locality match on " +
                 std::to_string(opts.random_dags) + " random DAGs";
    return res;
}

CheckResult check_metric_oracles(const SelfCheckOptions& opts) {
    CheckResult res{"metric_oracles", false, ""};
    Rng rng(opts.seed + 4);
    const int cases = 1000;
    for (int i = 0; i < cases; ++i) {
        const std::size_t vocab = 3 + rng.below(10);
        Prediction truth, pred;
        truth.bits.resize(vocab);
        pred.bits.resize(vocab);
        std::set<std::size_t> ts, ps;
        for (std::size_t v = 0; v < vocab; ++v) {
            if (rng.uniform() < 0.45) {
                truth.bits[v] = 1;
                ts.insert(v);
            }
            if (rng.uniform() < 0.45) {
                pred.bits[v] = 1;
                ps.insert(v);
            }
        }
        DdiMatrix D(vocab);
        for (std::size_t a = 0; a < vocab; ++a)
            for (std::size_t b = a + 1; b < vocab; ++b)
                if (rng.uniform() < 0.3) D.set(a, b);

        if (!ts.empty() || !ps.empty()) {
            const double got = jaccard(truth, pred);
            const double want = oracle::jaccard_sets(ts, ps);
            if (std::abs(got - want) > 1e-12) {
                res.detail = "jaccard mismatch vs set oracle";
                return res;
            }
        }
        PrfResult prf = precision_recall_f1(truth, pred);
        double p, r, f;
        oracle::precision_recall_f1_sets(ts, ps, p, r, f);
        if (std::abs(prf.precision - p) > 1e-12 || std::abs(prf.recall - r) > 1e-12 ||
            std::abs(prf.f1 - f) > 1e-12) {
            res.detail = "precision/recall/f1 mismatch vs set oracle";
            return res;
        }
        if (ps.size() >= 2) {
            const double got = ddi_score(std::span<const Prediction>(&pred, 1), D);
            const double want = oracle::ddi_sets({ps}, D);
            if (std::abs(got - want) > 1e-12) {
                res.detail = "ddi mismatch vs set oracle";
                return res;
            }
        }
    }

    // Pinned hand values.
    {
        Prediction t, p;
        t.bits = {1, 1, 0};  // {A, B}
        p.bits = {0, 1, 1};  // {B, C}
        if (jaccard(t, p) != 1.0 / 3.0) {
            res.detail = "jaccard({A,B},{B,C}) != 1/3";
            return res;
        }
        DdiMatrix D(3);
        D.set(0, 1);
        Prediction all;
        all.bits = {1, 1, 1};
        if (ddi_score(std::span<const Prediction>(&all, 1), D) != 1.0 / 3.0) {
            res.detail = "ddi of one interacting pair among three meds != 1/3";
            return res;
        }
    }
    res.passed = true;
    res.detail = std::to_string(cases) + " random cases match the set oracles; hand values exact";
    return res;
}

}  // namespace

std::vector<CheckResult> run_self_checks(const SelfCheckOptions& opts) {
    std::vector<CheckResult> results;
    results.push_back(check_gradients(opts));
    results.push_back(check_crisp_limit(opts));
    results.push_back(check_closure_and_sampler(opts));
    results.push_back(check_metric_oracles(opts));
    return results;
}

std::string format_check_report(const std::vector<CheckResult>& results) {
    std::string out;
    for (const auto& r : results) {
        out += r.passed ? "PASS" : "FAIL";
        out += "  ";
        out += r.name;
        if (!r.detail.empty()) out += "  (" + r.detail + ")";
        out += '\n';
    }
    return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
    return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

}  // namespace omr
