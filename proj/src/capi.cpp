#include "ontomedrec.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "ontomedrec/errors.hpp"
#include "ontomedrec/ontology.hpp"
#include "ontomedrec/pipeline.hpp"

namespace {

thread_local std::string g_last_error;

omr_status status_from(const omr::Error& e) {
    g_last_error = e.what();
    switch (e.code()) {
        case omr::ErrorCode::config: return OMR_ERR_CONFIG;
        case omr::ErrorCode::data: return OMR_ERR_DATA;
        case omr::ErrorCode::divergence: return OMR_ERR_DIVERGED;
        case omr::ErrorCode::check: return OMR_ERR_CHECK;
        case omr::ErrorCode::internal: return OMR_ERR_INTERNAL;
    }
    return OMR_ERR_INTERNAL;
}

template <class Fn>
omr_status guarded(Fn&& fn) {
    try {
        fn();
        return OMR_OK;
    } catch (const omr::Error& e) {
        return status_from(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return OMR_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return OMR_ERR_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out) std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

const char* require(const char* s, const char* what) {
    if (!s || !*s) throw omr::ConfigError(std::string(what) + " not set");
    return s;
}

}  // namespace

struct omr_ontology {
    omr::OntologyDag dag;
};

extern "C" {

const char* omr_version(void) { return "0.1.0"; }

const char* omr_last_error(void) { return g_last_error.c_str(); }

void omr_string_free(char* s) { std::free(s); }

omr_status omr_ontology_load(const char* path, omr_ontology_kind kind, omr_ontology** out) {
    return guarded([&] {
        if (!out) throw omr::ConfigError("output handle is NULL");
        *out = new omr_ontology{
            omr::load_ontology(require(path, "ontology path"),
                               static_cast<omr::OntologyKind>(kind))};
    });
}

void omr_ontology_free(omr_ontology* dag) { delete dag; }

int64_t omr_ontology_node_count(const omr_ontology* dag) {
    return dag ? static_cast<int64_t>(dag->dag.node_count()) : -1;
}

int64_t omr_ontology_edge_count(const omr_ontology* dag) {
    return dag ? static_cast<int64_t>(dag->dag.edge_count()) : -1;
}

int64_t omr_ontology_max_depth(const omr_ontology* dag) {
    return dag ? static_cast<int64_t>(dag->dag.max_depth()) : -1;
}

int64_t omr_ontology_depth_of(const omr_ontology* dag, const char* node_id) {
    if (!dag || !node_id || !dag->dag.contains(node_id)) return -1;
    return static_cast<int64_t>(omr::depth_of(dag->dag, node_id));
}

void omr_pretrain_options_init(omr_pretrain_options* opts) {
    if (!opts) return;
    std::memset(opts, 0, sizeof(*opts));
    omr::TrainConfig defaults;
    opts->dim = defaults.dim;
    opts->epochs = defaults.epochs;
    opts->steps_per_epoch = defaults.steps_per_epoch;
    opts->batch = defaults.seed_count;
    opts->learning_rate = defaults.learning_rate;
    opts->p_forall = defaults.p_forall;
    opts->p_sat = defaults.p_sat;
    opts->neg_cap = defaults.neg_cap;
    opts->seed = defaults.rng_seed;
    opts->align_pair_cap = defaults.align_pair_cap;
}

omr_status omr_pretrain(const omr_pretrain_options* opts) {
    return guarded([&] {
        if (!opts) throw omr::ConfigError("options are NULL");
        omr::PretrainOptions p;
        p.diagnosis_ontology = require(opts->diagnosis_ontology, "diagnosis ontology path");
        p.procedure_ontology = require(opts->procedure_ontology, "procedure ontology path");
        p.medication_ontology = require(opts->medication_ontology, "medication ontology path");
        p.indications = require(opts->indications, "indications path");
        p.out_dir = require(opts->out_dir, "output directory");
        p.train.dim = opts->dim;
        p.train.epochs = opts->epochs;
        p.train.steps_per_epoch = opts->steps_per_epoch;
        p.train.seed_count = opts->batch;
        p.train.learning_rate = opts->learning_rate;
        p.train.p_forall = opts->p_forall;
        p.train.p_sat = opts->p_sat;
        p.train.neg_cap = opts->neg_cap;
        p.train.rng_seed = opts->seed;
        p.train.literal_quantifier = opts->literal_quantifier != 0;
        p.train.freeze_embeddings_on_align = opts->freeze_embeddings_on_align != 0;
        p.train.align_pair_cap = opts->align_pair_cap;
        omr::run_pretrain(p);
    });
}

void omr_align_options_init(omr_align_options* opts) {
    if (!opts) return;
    std::memset(opts, 0, sizeof(*opts));
    omr::AlignOptions defaults;
    opts->epochs = defaults.epochs;
    opts->learning_rate = defaults.learning_rate;
    opts->p_forall = defaults.p_forall;
    opts->p_sat = defaults.p_sat;
    opts->align_pair_cap = defaults.align_pair_cap;
    opts->seed = defaults.rng_seed;
}

omr_status omr_align(const omr_align_options* opts) {
    return guarded([&] {
        if (!opts) throw omr::ConfigError("options are NULL");
        omr::AlignOptions a;
        a.checkpoint = require(opts->checkpoint, "checkpoint path");
        a.diagnosis_ontology = require(opts->diagnosis_ontology, "diagnosis ontology path");
        a.medication_ontology = require(opts->medication_ontology, "medication ontology path");
        a.indications = require(opts->indications, "indications path");
        a.out_dir = require(opts->out_dir, "output directory");
        a.epochs = opts->epochs;
        a.learning_rate = opts->learning_rate;
        a.p_forall = opts->p_forall;
        a.p_sat = opts->p_sat;
        a.align_pair_cap = opts->align_pair_cap;
        a.freeze_embeddings = opts->freeze_embeddings != 0;
        a.rng_seed = opts->seed;
        omr::run_align(a);
    });
}

omr_status omr_export_embeddings(const char* checkpoint, const char* out_path) {
    return guarded([&] {
        omr::ExportOptions e;
        e.checkpoint = require(checkpoint, "checkpoint path");
        e.out_path = require(out_path, "output path");
        omr::run_export(e);
    });
}

void omr_generate_options_init(omr_generate_options* opts) {
    if (!opts) return;
    std::memset(opts, 0, sizeof(*opts));
    omr::GenerateOptions defaults;
    opts->diagnosis_nodes = defaults.diagnosis_nodes;
    opts->procedure_nodes = defaults.procedure_nodes;
    opts->medication_nodes = defaults.medication_nodes;
    opts->diagnosis_depth = defaults.diagnosis_depth;
    opts->procedure_depth = defaults.procedure_depth;
    opts->medication_depth = defaults.medication_depth;
    opts->med_vocab = defaults.med_vocab;
    opts->themes_per_group = defaults.themes_per_group;
    opts->patients = defaults.patients;
    opts->zipf_s = defaults.zipf_s;
    opts->indication_inject_p = defaults.indication_inject_p;
    opts->ddi_rate = defaults.ddi_rate;
    opts->seed = defaults.rng_seed;
}

omr_status omr_generate(const omr_generate_options* opts) {
    return guarded([&] {
        if (!opts) throw omr::ConfigError("options are NULL");
        omr::GenerateOptions g;
        g.out_dir = require(opts->out_dir, "output directory");
        g.diagnosis_nodes = opts->diagnosis_nodes;
        g.procedure_nodes = opts->procedure_nodes;
        g.medication_nodes = opts->medication_nodes;
        g.diagnosis_depth = opts->diagnosis_depth;
        g.procedure_depth = opts->procedure_depth;
        g.medication_depth = opts->medication_depth;
        g.med_vocab = opts->med_vocab;
        g.themes_per_group = opts->themes_per_group;
        g.patients = opts->patients;
        g.zipf_s = opts->zipf_s;
        g.indication_inject_p = opts->indication_inject_p;
        g.ddi_rate = opts->ddi_rate;
        g.rng_seed = opts->seed;
        omr::run_generate(g);
    });
}

void omr_eval_options_init(omr_eval_options* opts) {
    if (!opts) return;
    std::memset(opts, 0, sizeof(*opts));
    omr::EvalOptions defaults;
    opts->epochs = defaults.epochs;
    opts->learning_rate = defaults.learning_rate;
    opts->threshold = defaults.threshold;
    opts->tail_percentage = defaults.tail_percentage;
    opts->few_shot_min = defaults.few_shot_min;
    opts->bootstrap_rounds = defaults.bootstrap_rounds;
    opts->seed = defaults.rng_seed;
}

omr_status omr_eval(const omr_eval_options* opts) {
    return guarded([&] {
        if (!opts) throw omr::ConfigError("options are NULL");
        omr::EvalOptions e;
        e.diagnosis_ontology = require(opts->diagnosis_ontology, "diagnosis ontology path");
        e.procedure_ontology = require(opts->procedure_ontology, "procedure ontology path");
        e.medication_ontology = require(opts->medication_ontology, "medication ontology path");
        e.embeddings = require(opts->embeddings, "embeddings path");
        e.ehr = require(opts->ehr, "EHR path");
        e.ddi = require(opts->ddi, "DDI path");
        e.out_dir = require(opts->out_dir, "output directory");
        e.epochs = opts->epochs;
        e.learning_rate = opts->learning_rate;
        e.threshold = opts->threshold;
        e.tail_percentage = opts->tail_percentage;
        e.few_shot_min = opts->few_shot_min;
        e.bootstrap_rounds = opts->bootstrap_rounds;
        e.rng_seed = opts->seed;
        omr::run_eval(e);
    });
}

void omr_check_options_init(omr_check_options* opts) {
    if (!opts) return;
    std::memset(opts, 0, sizeof(*opts));
    omr::SelfCheckOptions defaults;
    opts->seed = defaults.seed;
    opts->random_dags = defaults.random_dags;
    opts->inject_grad_bug = defaults.inject_grad_bug;
}

omr_status omr_check(const omr_check_options* opts, char** report_out) {
    bool passed = false;
    omr_status st = guarded([&] {
        if (!opts) throw omr::ConfigError("options are NULL");
        omr::CheckOptions c;
        c.self.seed = opts->seed;
        c.self.random_dags = opts->random_dags;
        c.self.inject_grad_bug = opts->inject_grad_bug;
        auto results = omr::run_check(c);
        passed = omr::all_passed(results);
        if (report_out) *report_out = dup_string(omr::format_check_report(results));
        if (!passed) g_last_error = "one or more self-check suites failed";
    });
    if (st != OMR_OK) return st;
    return passed ? OMR_OK : OMR_ERR_CHECK;
}

}  // extern "C"
