#include <doctest.h>

#include <algorithm>

#include "ontomedrec/errors.hpp"
#include "ontomedrec/recommender.hpp"
#include "ontomedrec/synth.hpp"
#include "testutil.hpp"

using namespace omr;

namespace {

struct World {
    OntologyDag diag;
    OntologyDag proc;
    OntologyDag med;
    IndicationGen ind;
    EhrDataset data;
};

World make_world(std::size_t patients, std::uint64_t seed) {
    OntologySpec spec;
    spec.kind = OntologyKind::diagnosis;
    spec.prefix = "D";
    spec.n_nodes = 50;
    spec.max_depth = 4;
    OntologyDag diag = gen_ontology(spec, seed);
    spec.kind = OntologyKind::procedure;
    spec.prefix = "P";
    spec.n_nodes = 25;
    spec.max_depth = 3;
    OntologyDag proc = gen_ontology(spec, seed + 1);
    spec.kind = OntologyKind::medication;
    spec.prefix = "M";
    spec.n_nodes = 70;
    spec.max_depth = 4;
    OntologyDag med = gen_ontology(spec, seed + 2);
    IndicationGen ind = gen_indications(med, diag, 24, 2, seed + 3);
    EhrGenConfig cfg;
    cfg.n_patients = patients;
    cfg.rng_seed = seed + 4;
    EhrDataset data;
    gen_synthetic_ehr(diag, proc, ind, cfg, data);
    return {std::move(diag), std::move(proc), std::move(med), std::move(ind), std::move(data)};
}

// Echoes the ground truth.
class OracleRecommender : public Recommender {
public:
    Prediction predict(const EhrDataset& data, const AdmissionRef& ref) const override {
        Prediction p;
        p.bits.assign(data.med_vocab.size(), 0);
        for (const auto& m : data.patients[ref.patient].admissions[ref.admission].medications)
            p.bits[data.vocab_index(m)] = 1;
        return p;
    }
};

class EmptyRecommender : public Recommender {
public:
    Prediction predict(const EhrDataset& data, const AdmissionRef&) const override {
        Prediction p;
        p.bits.assign(data.med_vocab.size(), 0);
        return p;
    }
};

}  // namespace

TEST_CASE("zero training epochs leaves the model at its initialization") {
    World w = make_world(30, 7);
    SplitSpec split = split_dataset(w.data, 30.0, 1);
    RecommenderConfig cfg;
    cfg.dim = 8;
    cfg.epochs = 0;
    cfg.rng_seed = 5;
    ReferenceModel trained = train_reference_model(w.data, split, w.diag, w.proc, nullptr, cfg);
    ReferenceModel fresh(w.diag, w.proc, w.data.med_vocab, cfg);
    const Admission& adm = w.data.patients[0].admissions[0];
    CHECK(trained.scores(w.data, adm) == fresh.scores(w.data, adm));
}

TEST_CASE("the reference model can overfit a tiny training set") {
    World w = make_world(12, 9);
    SplitSpec split = split_dataset(w.data, 30.0, 2);
    RecommenderConfig cfg;
    cfg.dim = 16;
    cfg.epochs = 300;
    cfg.learning_rate = 2e-2;
    cfg.rng_seed = 3;
    ReferenceModel model = train_reference_model(w.data, split, w.diag, w.proc, nullptr, cfg);

    double jac_sum = 0.0;
    std::size_t n = 0;
    for (std::uint32_t pi : split.train_patients) {
        for (std::uint32_t t = 0; t < w.data.patients[pi].admissions.size(); ++t) {
            Prediction truth;
            truth.bits.assign(w.data.med_vocab.size(), 0);
            for (const auto& m : w.data.patients[pi].admissions[t].medications)
                truth.bits[w.data.vocab_index(m)] = 1;
            jac_sum += jaccard(truth, model.predict(w.data, {pi, t}));
            ++n;
        }
    }
    CHECK(jac_sum / static_cast<double>(n) > 0.9);
}

TEST_CASE("training is deterministic per seed") {
    World w = make_world(25, 11);
    SplitSpec split = split_dataset(w.data, 30.0, 4);
    RecommenderConfig cfg;
    cfg.dim = 8;
    cfg.epochs = 5;
    cfg.rng_seed = 17;
    ReferenceModel a = train_reference_model(w.data, split, w.diag, w.proc, nullptr, cfg);
    ReferenceModel b = train_reference_model(w.data, split, w.diag, w.proc, nullptr, cfg);
    const Admission& adm = w.data.patients[1].admissions[0];
    CHECK(a.scores(w.data, adm) == b.scores(w.data, adm));
}

TEST_CASE("load_pretrained rejects dimension and vocabulary mismatches") {
    World w = make_world(15, 13);
    RecommenderConfig cfg;
    cfg.dim = 8;
    ReferenceModel model(w.diag, w.proc, w.data.med_vocab, cfg);

    EmbeddingExport exp;
    exp.dim = 4;  // wrong dim
    CHECK_THROWS_AS(model.load_pretrained(exp, w.diag, w.proc), DimensionMismatch);

    EmbeddingExport exp2;
    exp2.dim = 8;
    exp2.diagnosis = EmbeddingTable(OntologyKind::diagnosis, {"bogus"}, 8);
    exp2.procedure = EmbeddingTable(OntologyKind::procedure, {"bogus"}, 8);
    exp2.medication = EmbeddingTable(OntologyKind::medication, {"bogus"}, 8);
    CHECK_THROWS_AS(model.load_pretrained(exp2, w.diag, w.proc), UnknownCode);
}

TEST_CASE("evaluate scores a perfect oracle at 1 and reproduces the truth DDI") {
    World w = make_world(60, 15);
    SplitSpec split = split_dataset(w.data, 30.0, 6);
    std::vector<IdPair> pairs = gen_ddi_pairs(w.data.med_vocab, 0.08, 3);
    test::TempDir dir;
    save_ddi_pairs(pairs, dir.file("ddi.tsv"));
    DdiMatrix D = load_ddi(dir.file("ddi.tsv"), w.data.med_vocab);

    OracleRecommender oracle;
    EvalReport report = evaluate(oracle, w.data, split, D, 10, 123);
    CHECK(report.full.jaccard.mean == 1.0);
    CHECK(report.full.jaccard.stdev == 0.0);
    CHECK(report.full.f1.mean == 1.0);

    // the oracle's DDI equals the ground-truth prescriptions' DDI
    std::vector<Prediction> truths;
    for (std::uint32_t pi : split.test_patients)
        for (const auto& adm : w.data.patients[pi].admissions) {
            Prediction t;
            t.bits.assign(w.data.med_vocab.size(), 0);
            for (const auto& m : adm.medications) t.bits[w.data.vocab_index(m)] = 1;
            truths.push_back(std::move(t));
        }
    const double truth_ddi = ddi_score(truths, D);
    // bootstrap resampling moves the mean a little; the point estimate of
    // round-free pooling is recovered as the rounds grow
    CHECK(report.full.ddi.mean == doctest::Approx(truth_ddi).epsilon(0.35));
}

TEST_CASE("evaluate flags a constant-empty model and scores it zero") {
    World w = make_world(40, 17);
    SplitSpec split = split_dataset(w.data, 30.0, 8);
    DdiMatrix D(w.data.med_vocab.size());
    EmptyRecommender model;
    EvalReport report = evaluate(model, w.data, split, D, 5, 9);
    CHECK(report.full.jaccard.mean == 0.0);
    CHECK(report.full.f1.mean == 0.0);
    CHECK(report.full.ddi.mean == 0.0);
    CHECK(report.full.avg_drugs.mean == 0.0);
    CHECK(report.full.ddi.flagged);
    CHECK(report.full.f1.flagged);
    CHECK_FALSE(report.warnings.empty());
}

TEST_CASE("format_report pins the tab-separated golden format") {
    std::vector<ReportRow> rows{
        {"ref-full", "random", {0.4689, 0.0019, false}, {0.6287, 0.0019, false},
         {0.0603, 0.0004, false}, {17.881, 0.0405, false}},
        {"ref-full", "pretrained", {0.4732, 0.0017, false}, {0.6322, 0.0016, false},
         {0.0596, 0.0004, false}, {17.1709, 0.0465, false}},
    };
    const std::string got = format_report(rows);
    const std::string want =
        "model\tinit\tjaccard\tf1\tddi\tavg_drugs\n"
        "ref-full\trandom\t0.4689±0.0019\t0.6287±0.0019\t0.0603±0.0004\t"
        "17.8810±0.0405\n"
        "ref-full\tpretrained\t0.4732±0.0017\t0.6322±0.0016\t0.0596±0.0004\t"
        "17.1709±0.0465\n";
    CHECK(got == want);
}
