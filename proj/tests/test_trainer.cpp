#include <doctest.h>

#include <cmath>
#include <limits>

#include "ontomedrec/errors.hpp"
#include "ontomedrec/synth.hpp"
#include "ontomedrec/trainer.hpp"

using namespace omr;

namespace {

struct ToyWorld {
    OntologyDag diag;
    OntologyDag proc;
    OntologyDag med;
    std::vector<IdPair> indications;
};

ToyWorld make_world(std::size_t nodes, std::uint64_t seed, std::size_t n_indications = 8) {
    Rng rng(seed);
    OntologySpec spec;
    spec.kind = OntologyKind::diagnosis;
    spec.prefix = "D";
    spec.n_nodes = nodes;
    spec.max_depth = 3;
    OntologyDag diag = gen_ontology(spec, rng.next());
    spec.kind = OntologyKind::procedure;
    spec.prefix = "P";
    OntologyDag proc = gen_ontology(spec, rng.next());
    spec.kind = OntologyKind::medication;
    spec.prefix = "M";
    OntologyDag med = gen_ontology(spec, rng.next());

    std::vector<IdPair> ind;
    for (std::size_t i = 0; i < n_indications; ++i)
        ind.emplace_back(med.id_of(static_cast<NodeIndex>(rng.below(med.node_count()))),
                         diag.id_of(static_cast<NodeIndex>(rng.below(diag.node_count()))));
    ind = expand_indications(ind, diag);
    return {std::move(diag), std::move(proc), std::move(med), std::move(ind)};
}

TrainConfig toy_config(int dim = 8, std::uint64_t seed = 5) {
    TrainConfig cfg;
    cfg.dim = dim;
    cfg.epochs = 10;
    cfg.seed_count = 4;
    cfg.learning_rate = 5e-3;
    cfg.rng_seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("adam_step with zero gradient leaves parameters untouched") {
    std::vector<double> params{1.0, -2.0, 3.5};
    std::vector<double> grads{0.0, 0.0, 0.0};
    AdamState state;
    AdamConfig cfg;
    adam_step(params, grads, state, cfg);
    CHECK(params == std::vector<double>{1.0, -2.0, 3.5});
    CHECK(state.t == 1);
}

TEST_CASE("adam_step matches the hand-computed single-scalar update") {
    std::vector<double> params{1.0};
    std::vector<double> grads{0.5};
    AdamState state;
    AdamConfig cfg;
    cfg.lr = 0.1;
    adam_step(params, grads, state, cfg);
    // m = 0.05, v = 0.00025; mhat = 0.5, vhat = 0.25
    // p = 1 - 0.1 * 0.5 / (0.5 + 1e-8)
    const double want = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
    CHECK(params[0] == doctest::Approx(want).epsilon(1e-15));
    CHECK(state.m[0] == doctest::Approx(0.05).epsilon(1e-15));
    CHECK(state.v[0] == doctest::Approx(0.00025).epsilon(1e-15));
}

TEST_CASE("adam_step trajectories are deterministic") {
    auto run = [] {
        std::vector<double> params{0.2, -0.4};
        AdamState state;
        AdamConfig cfg;
        for (int i = 0; i < 50; ++i) {
            std::vector<double> grads{std::sin(i * 0.1), std::cos(i * 0.2)};
            adam_step(params, grads, state, cfg);
        }
        return params;
    };
    CHECK(run() == run());
}

TEST_CASE("select_checkpoints implements the argmax-with-earliest-tie rule") {
    auto entry = [](std::int64_t e, double proc, double ind) {
        EpochLogEntry x;
        x.epoch = e;
        x.procedure_sat = proc;
        x.indication_sat = ind;
        return x;
    };
    SUBCASE("monotone logs select the last epoch") {
        std::vector<EpochLogEntry> logs{entry(0, 0.1, 0.2), entry(1, 0.5, 0.4), entry(2, 0.9, 0.8)};
        CheckpointSelection sel = select_checkpoints(logs);
        CHECK(sel.procedure_epoch == 2);
        CHECK(sel.alignment_epoch == 2);
    }
    SUBCASE("different peaks compose a mixed checkpoint") {
        std::vector<EpochLogEntry> logs;
        for (int e = 0; e < 10; ++e) logs.push_back(entry(e, e == 3 ? 0.9 : 0.2, e == 7 ? 0.8 : 0.1));
        CheckpointSelection sel = select_checkpoints(logs);
        CHECK(sel.procedure_epoch == 3);
        CHECK(sel.alignment_epoch == 7);
    }
    SUBCASE("ties break to the earliest epoch") {
        std::vector<EpochLogEntry> logs{entry(0, 0.5, 0.5), entry(1, 0.5, 0.5), entry(2, 0.4, 0.5)};
        CheckpointSelection sel = select_checkpoints(logs);
        CHECK(sel.procedure_epoch == 0);
        CHECK(sel.alignment_epoch == 0);
    }
}

TEST_CASE("phases touch only their own parameter groups") {
    ToyWorld w = make_world(12, 2);
    Trainer t(w.diag, w.proc, w.med, w.indications, toy_config());

    auto snapshot = [&] {
        std::vector<std::vector<double>> s;
        for (auto kind : {OntologyKind::diagnosis, OntologyKind::procedure, OntologyKind::medication}) {
            s.push_back(t.table(kind).values());
            for (int r = 0; r < 3; ++r) s.push_back(t.net(kind, r).params());
        }
        s.push_back(t.indication_net().params());
        return s;
    };

    SUBCASE("diagnosis phase") {
        auto before = snapshot();
        EpochLogEntry e;
        t.run_ontology_phase(OntologyKind::diagnosis, e);
        auto after = snapshot();
        CHECK(after[0] != before[0]);  // diagnosis table moved
        for (int i = 4; i < 12; ++i) CHECK(after[i] == before[i]);  // procedure+medication groups
        CHECK(after[12] == before[12]);  // indication net
    }
    SUBCASE("alignment phase") {
        auto before = snapshot();
        EpochLogEntry e;
        t.run_alignment_phase(e);
        auto after = snapshot();
        CHECK(after[0] != before[0]);    // diagnosis table moved
        CHECK(after[8] != before[8]);    // medication table moved
        CHECK(after[12] != before[12]);  // indication net moved
        CHECK(after[4] == before[4]);    // procedure table untouched
        for (int i : {1, 2, 3, 5, 6, 7, 9, 10, 11}) CHECK(after[i] == before[i]);  // ontology nets
    }
    SUBCASE("alignment with frozen embeddings") {
        TrainConfig cfg = toy_config();
        cfg.freeze_embeddings_on_align = true;
        Trainer t2(w.diag, w.proc, w.med, w.indications, cfg);
        auto before_diag = t2.table(OntologyKind::diagnosis).values();
        auto before_med = t2.table(OntologyKind::medication).values();
        auto before_net = t2.indication_net().params();
        EpochLogEntry e;
        t2.run_alignment_phase(e);
        CHECK(t2.table(OntologyKind::diagnosis).values() == before_diag);
        CHECK(t2.table(OntologyKind::medication).values() == before_med);
        CHECK(t2.indication_net().params() != before_net);
    }
}

TEST_CASE("zero learning rate is a bit-exact no-op on parameters") {
    ToyWorld w = make_world(10, 3);
    TrainConfig cfg = toy_config();
    cfg.learning_rate = 0.0;
    Trainer t(w.diag, w.proc, w.med, w.indications, cfg);
    auto before_table = t.table(OntologyKind::diagnosis).values();
    auto before_net = t.net(OntologyKind::medication, 0).params();
    t.train_epoch();
    CHECK(t.table(OntologyKind::diagnosis).values() == before_table);
    CHECK(t.net(OntologyKind::medication, 0).params() == before_net);
}

TEST_CASE("training is deterministic per seed") {
    ToyWorld w = make_world(14, 4);
    auto run = [&] {
        Trainer t(w.diag, w.proc, w.med, w.indications, toy_config(6, 77));
        t.train(3);
        return t.logs();
    };
    auto a = run();
    auto b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].diagnosis_sat == b[i].diagnosis_sat);
        CHECK(a[i].procedure_sat == b[i].procedure_sat);
        CHECK(a[i].medication_sat == b[i].medication_sat);
        CHECK(a[i].indication_sat == b[i].indication_sat);
        CHECK(a[i].losses == b[i].losses);
    }
}

TEST_CASE("a NaN loss raises DivergenceError") {
    ToyWorld w = make_world(10, 6);
    Trainer t(w.diag, w.proc, w.med, w.indications, toy_config());
    t.net(OntologyKind::diagnosis, 0).params()[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(t.train_epoch(), DivergenceError);
}

TEST_CASE("toy ontologies reach high satisfiability within 200 epochs") {
    ToyWorld w = make_world(7, 8, 4);
    TrainConfig cfg = toy_config(8, 21);
    cfg.learning_rate = 1e-2;
    Trainer t(w.diag, w.proc, w.med, w.indications, cfg);
    double diag_sat = 0.0, proc_sat = 0.0, med_sat = 0.0;
    for (int epoch = 0; epoch < 200; ++epoch) {
        EpochLogEntry e = t.train_epoch();
        diag_sat = e.diagnosis_sat;
        proc_sat = e.procedure_sat;
        med_sat = e.medication_sat;
        if (diag_sat >= 0.95 && proc_sat >= 0.95 && med_sat >= 0.95) break;
    }
    CHECK(diag_sat >= 0.95);
    CHECK(proc_sat >= 0.95);
    CHECK(med_sat >= 0.95);
}

TEST_CASE("satisfiability is near-monotone after the warmup epochs") {
    ToyWorld w = make_world(9, 10, 4);
    TrainConfig cfg = toy_config(8, 31);
    cfg.learning_rate = 1e-2;
    Trainer t(w.diag, w.proc, w.med, w.indications, cfg);
    t.train(60);
    const auto& logs = t.logs();
    for (std::size_t e = 20; e + 1 < logs.size(); ++e) {
        CHECK(logs[e + 1].diagnosis_sat >= logs[e].diagnosis_sat - 0.02);
        CHECK(logs[e + 1].procedure_sat >= logs[e].procedure_sat - 0.02);
        CHECK(logs[e + 1].medication_sat >= logs[e].medication_sat - 0.02);
    }
}

TEST_CASE("compose_checkpoint matches the pure selection rule") {
    ToyWorld w = make_world(10, 12);
    Trainer t(w.diag, w.proc, w.med, w.indications, toy_config(6, 9));
    t.train(12);
    CheckpointSelection sel = select_checkpoints(t.logs());
    ModelCheckpoint ckpt = t.compose_checkpoint();
    CHECK(ckpt.procedure_epoch == sel.procedure_epoch);
    CHECK(ckpt.alignment_epoch == sel.alignment_epoch);
    CHECK(ckpt.epochs_trained == 12);
    CHECK(ckpt.nets.size() == 10);
    CHECK(ckpt.sat_scores.procedure ==
          t.logs()[sel.procedure_epoch].procedure_sat);
    CHECK(ckpt.sat_scores.indication ==
          t.logs()[sel.alignment_epoch].indication_sat);
    TrainConfig round = TrainConfig::from_json(ckpt.config_json);
    CHECK(round.dim == 6);
    CHECK(round.rng_seed == 9);
}

TEST_CASE("grad_check stays under 1e-4 on toy batches") {
    ToyWorld w = make_world(10, 14, 5);
    Trainer t(w.diag, w.proc, w.med, w.indications, toy_config(6, 3));
    GradCheckResult r = grad_check(t);
    CHECK(r.max_rel_err < 1e-4);
    CHECK(r.per_group.size() == 13);
}

TEST_CASE("grad_check reports exact zeros for phases that are excluded") {
    ToyWorld w = make_world(10, 16, 5);
    Trainer t(w.diag, w.proc, w.med, w.indications, toy_config(6, 4));
    GradCheckOptions opts;
    opts.include_procedure = false;
    opts.include_medication = false;
    opts.include_indication = false;
    GradCheckResult r = grad_check(t, opts);
    CHECK(r.max_rel_err < 1e-4);
    // untouched groups contribute exactly zero error
    CHECK(r.per_group.at("emb_procedure") == 0.0);
    CHECK(r.per_group.at("emb_medication") == 0.0);
    CHECK(r.per_group.at("parent_procedure") == 0.0);
    CHECK(r.per_group.at("indication") == 0.0);
}

TEST_CASE("grad_check holds at a doubled embedding dimension") {
    ToyWorld w = make_world(8, 18, 4);
    TrainConfig cfg = toy_config(12, 6);
    Trainer t(w.diag, w.proc, w.med, w.indications, cfg);
    GradCheckOptions opts;
    opts.batch_seed_count = 2;
    GradCheckResult r = grad_check(t, opts);
    CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("grad_check catches an injected gradient bug") {
    ToyWorld w = make_world(8, 20, 4);
    Trainer t(w.diag, w.proc, w.med, w.indications, toy_config(6, 7));
    GradCheckOptions opts;
    opts.inject_bug = 0.05;
    GradCheckResult r = grad_check(t, opts);
    CHECK(r.max_rel_err > 1e-4);
}
