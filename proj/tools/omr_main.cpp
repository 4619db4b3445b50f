// Command-line front end. Talks to the library exclusively through the C API
// in ontomedrec.h; exit codes are the omr_status values.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "ontomedrec.h"

namespace {

int finish(omr_status st) {
    if (st != OMR_OK) std::fprintf(stderr, "error: %s\n", omr_last_error());
    return static_cast<int>(st);
}

struct PretrainArgs {
    std::string diagnosis, procedure, medication, indications, out;
    omr_pretrain_options o{};
};

struct AlignArgs {
    std::string checkpoint, diagnosis, medication, indications, out;
    omr_align_options o{};
};

struct ExportArgs {
    std::string checkpoint, out;
};

struct GenerateArgs {
    std::string out;
    omr_generate_options o{};
};

struct EvalArgs {
    std::string diagnosis, procedure, medication, embeddings, ehr, ddi, out;
    omr_eval_options o{};
};

struct CheckArgs {
    omr_check_options o{};
};

struct StatsArgs {
    std::string path;
    std::string kind = "diagnosis";
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ontology-encoder pretraining, alignment and evaluation"};
    app.set_config("--config", "", "Read options from an INI file (CLI flags win)");
    app.require_subcommand(1);

    PretrainArgs pt;
    omr_pretrain_options_init(&pt.o);
    auto* pretrain = app.add_subcommand(
        "pretrain", "Pretrain the three ontology encoders and align medications to diagnoses");
    pretrain->add_option("--diagnosis", pt.diagnosis, "Diagnosis ontology edge list")->required();
    pretrain->add_option("--procedure", pt.procedure, "Procedure ontology edge list")->required();
    pretrain->add_option("--medication", pt.medication, "Medication ontology edge list")->required();
    pretrain->add_option("--indications", pt.indications, "med_id<TAB>diag_id pairs")->required();
    pretrain->add_option("--out", pt.out, "Output directory")->required();
    pretrain->add_option("--dim", pt.o.dim, "Embedding dimension");
    pretrain->add_option("--epochs", pt.o.epochs, "Training epochs");
    pretrain->add_option("--steps-per-epoch", pt.o.steps_per_epoch,
                         "Batches per ontology per epoch (0: cover each ontology once)");
    pretrain->add_option("--batch", pt.o.batch, "Seed nodes per batch");
    pretrain->add_option("--lr", pt.o.learning_rate, "Learning rate");
    pretrain->add_option("--p-forall", pt.o.p_forall, "Quantifier aggregation exponent");
    pretrain->add_option("--p-sat", pt.o.p_sat, "Knowledge-base aggregation exponent");
    pretrain->add_option("--neg-cap", pt.o.neg_cap,
                         "Negative pairs per batch; -1 all non-edges, 0 auto (4x positives)");
    pretrain->add_option("--seed", pt.o.seed, "RNG seed");
    pretrain->add_flag("--literal-quantifier", pt.o.literal_quantifier,
                       "Quantify over the full cartesian batch domain");
    pretrain->add_flag("--freeze-embeddings-on-align", pt.o.freeze_embeddings_on_align,
                       "Alignment updates the indication net only");
    pretrain->add_option("--align-pair-cap", pt.o.align_pair_cap,
                         "Max indication pairs per alignment pass");
    pretrain->callback([&] {
        pt.o.diagnosis_ontology = pt.diagnosis.c_str();
        pt.o.procedure_ontology = pt.procedure.c_str();
        pt.o.medication_ontology = pt.medication.c_str();
        pt.o.indications = pt.indications.c_str();
        pt.o.out_dir = pt.out.c_str();
        omr_status st = omr_pretrain(&pt.o);
        if (st == OMR_OK)
            std::printf("pretrain: wrote checkpoint.omr, embeddings.tsv, epochs.tsv to %s\n",
                        pt.out.c_str());
        std::exit(finish(st));
    });

    AlignArgs al;
    omr_align_options_init(&al.o);
    auto* align = app.add_subcommand("align", "Re-run the alignment phase on a checkpoint");
    align->add_option("--checkpoint", al.checkpoint, "Input checkpoint")->required();
    align->add_option("--diagnosis", al.diagnosis, "Diagnosis ontology edge list")->required();
    align->add_option("--medication", al.medication, "Medication ontology edge list")->required();
    align->add_option("--indications", al.indications, "med_id<TAB>diag_id pairs")->required();
    align->add_option("--out", al.out, "Output directory")->required();
    align->add_option("--epochs", al.o.epochs, "Alignment epochs");
    align->add_option("--lr", al.o.learning_rate, "Learning rate");
    align->add_option("--p-forall", al.o.p_forall, "Quantifier aggregation exponent");
    align->add_option("--p-sat", al.o.p_sat, "Knowledge-base aggregation exponent");
    align->add_option("--align-pair-cap", al.o.align_pair_cap, "Max pairs per pass");
    align->add_flag("--freeze-embeddings", al.o.freeze_embeddings,
                    "Update the indication net only");
    align->add_option("--seed", al.o.seed, "RNG seed");
    align->callback([&] {
        al.o.checkpoint = al.checkpoint.c_str();
        al.o.diagnosis_ontology = al.diagnosis.c_str();
        al.o.medication_ontology = al.medication.c_str();
        al.o.indications = al.indications.c_str();
        al.o.out_dir = al.out.c_str();
        omr_status st = omr_align(&al.o);
        if (st == OMR_OK)
            std::printf("align: wrote checkpoint.omr, embeddings.tsv to %s\n", al.out.c_str());
        std::exit(finish(st));
    });

    ExportArgs ex;
    auto* exp = app.add_subcommand("export", "Export a checkpoint's embedding tables as text");
    exp->add_option("--checkpoint", ex.checkpoint, "Input checkpoint")->required();
    exp->add_option("--out", ex.out, "Output embeddings file")->required();
    exp->callback([&] {
        omr_status st = omr_export_embeddings(ex.checkpoint.c_str(), ex.out.c_str());
        if (st == OMR_OK) std::printf("export: wrote %s\n", ex.out.c_str());
        std::exit(finish(st));
    });

    GenerateArgs gn;
    omr_generate_options_init(&gn.o);
    auto* gen = app.add_subcommand(
        "generate", "Generate synthetic ontologies, indications, EHR and DDI fixtures");
    gen->add_option("--out", gn.out, "Output directory")->required();
    gen->add_option("--patients", gn.o.patients, "Number of patients");
    gen->add_option("--zipf-s", gn.o.zipf_s, "Zipf exponent for code frequencies");
    gen->add_option("--diag-nodes", gn.o.diagnosis_nodes, "Diagnosis ontology size");
    gen->add_option("--proc-nodes", gn.o.procedure_nodes, "Procedure ontology size");
    gen->add_option("--med-nodes", gn.o.medication_nodes, "Medication ontology size");
    gen->add_option("--diag-depth", gn.o.diagnosis_depth, "Diagnosis ontology max depth");
    gen->add_option("--proc-depth", gn.o.procedure_depth, "Procedure ontology max depth");
    gen->add_option("--med-depth", gn.o.medication_depth, "Medication ontology max depth");
    gen->add_option("--med-vocab", gn.o.med_vocab, "Medication vocabulary size");
    gen->add_option("--themes", gn.o.themes_per_group, "Diagnosis themes per sibling group");
    gen->add_option("--ddi-rate", gn.o.ddi_rate, "Fraction of interacting medication pairs");
    gen->add_option("--inject-p", gn.o.indication_inject_p,
                    "Probability a medication injects an indicated diagnosis");
    gen->add_option("--seed", gn.o.seed, "RNG seed");
    gen->callback([&] {
        gn.o.out_dir = gn.out.c_str();
        omr_status st = omr_generate(&gn.o);
        if (st == OMR_OK) std::printf("generate: wrote fixtures to %s\n", gn.out.c_str());
        std::exit(finish(st));
    });

    EvalArgs ev;
    omr_eval_options_init(&ev.o);
    auto* eval = app.add_subcommand(
        "eval", "Train the reference recommender with random and pretrained initialization");
    eval->add_option("--diagnosis", ev.diagnosis, "Diagnosis ontology edge list")->required();
    eval->add_option("--procedure", ev.procedure, "Procedure ontology edge list")->required();
    eval->add_option("--medication", ev.medication, "Medication ontology edge list")->required();
    eval->add_option("--embeddings", ev.embeddings, "Pretrained embeddings export")->required();
    eval->add_option("--ehr", ev.ehr, "EHR records file")->required();
    eval->add_option("--ddi", ev.ddi, "DDI pairs file")->required();
    eval->add_option("--out", ev.out, "Output directory")->required();
    eval->add_option("--epochs", ev.o.epochs, "Fine-tuning epochs");
    eval->add_option("--lr", ev.o.learning_rate, "Learning rate");
    eval->add_option("--threshold", ev.o.threshold, "Prediction threshold");
    eval->add_option("--tail-percentage", ev.o.tail_percentage,
                     "Lowest-frequency percentage defining few-shot medications");
    eval->add_option("--few-shot-min", ev.o.few_shot_min,
                     "Few-shot medications required per few-shot admission");
    eval->add_option("--bootstrap", ev.o.bootstrap_rounds, "Bootstrap rounds");
    eval->add_option("--seed", ev.o.seed, "RNG seed");
    eval->callback([&] {
        ev.o.diagnosis_ontology = ev.diagnosis.c_str();
        ev.o.procedure_ontology = ev.procedure.c_str();
        ev.o.medication_ontology = ev.medication.c_str();
        ev.o.embeddings = ev.embeddings.c_str();
        ev.o.ehr = ev.ehr.c_str();
        ev.o.ddi = ev.ddi.c_str();
        ev.o.out_dir = ev.out.c_str();
        omr_status st = omr_eval(&ev.o);
        if (st == OMR_OK) std::printf("eval: wrote report.tsv to %s\n", ev.out.c_str());
        std::exit(finish(st));
    });

    CheckArgs ck;
    omr_check_options_init(&ck.o);
    auto* check = app.add_subcommand("check", "Run the validation suites");
    check->add_option("--seed", ck.o.seed, "RNG seed");
    check->add_option("--random-dags", ck.o.random_dags, "Random DAGs per suite");
    check->add_option("--inject-grad-bug", ck.o.inject_grad_bug, "Corrupt one gradient (testing)")
        ->group("");  // hidden
    check->callback([&] {
        char* report = nullptr;
        omr_status st = omr_check(&ck.o, &report);
        if (report) {
            std::fputs(report, stdout);
            omr_string_free(report);
        }
        std::exit(finish(st));
    });

    StatsArgs si;
    auto* stats = app.add_subcommand("stats", "Validate an ontology file and print its shape");
    stats->add_option("path", si.path, "Ontology edge list")->required();
    stats->add_option("--kind", si.kind, "diagnosis|procedure|medication");
    stats->callback([&] {
        omr_ontology_kind kind = OMR_ONTOLOGY_DIAGNOSIS;
        if (si.kind == "procedure") kind = OMR_ONTOLOGY_PROCEDURE;
        else if (si.kind == "medication") kind = OMR_ONTOLOGY_MEDICATION;
        else if (si.kind != "diagnosis") {
            std::fprintf(stderr, "error: unknown kind %s\n", si.kind.c_str());
            std::exit(1);
        }
        omr_ontology* dag = nullptr;
        omr_status st = omr_ontology_load(si.path.c_str(), kind, &dag);
        if (st != OMR_OK) std::exit(finish(st));
        std::printf("nodes\t%lld\nedges\t%lld\nmax_depth\t%lld\n",
                    static_cast<long long>(omr_ontology_node_count(dag)),
                    static_cast<long long>(omr_ontology_edge_count(dag)),
                    static_cast<long long>(omr_ontology_max_depth(dag)));
        omr_ontology_free(dag);
        std::exit(0);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    return 0;
}
