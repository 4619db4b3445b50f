/* C interface to the ontology-encoder pretraining library.
 *
 * All functions return omr_status; OMR_OK is 0 and the nonzero codes double
 * as CLI exit codes. On failure, omr_last_error() returns a message for the
 * calling thread. Handles are opaque and must be released with their _free
 * function; strings returned through out-parameters must be released with
 * omr_string_free().
 */
#ifndef ONTOMEDREC_H
#define ONTOMEDREC_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum omr_status {
    OMR_OK = 0,
    OMR_ERR_CONFIG = 1,
    OMR_ERR_DATA = 2,
    OMR_ERR_DIVERGED = 3,
    OMR_ERR_CHECK = 4,
    OMR_ERR_INTERNAL = 5
} omr_status;

typedef enum omr_ontology_kind {
    OMR_ONTOLOGY_DIAGNOSIS = 0,
    OMR_ONTOLOGY_PROCEDURE = 1,
    OMR_ONTOLOGY_MEDICATION = 2
} omr_ontology_kind;

const char* omr_version(void);

/* Message for the most recent failure on this thread; never NULL. */
const char* omr_last_error(void);

void omr_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Ontologies                                                          */

typedef struct omr_ontology omr_ontology;

omr_status omr_ontology_load(const char* path, omr_ontology_kind kind, omr_ontology** out);
void omr_ontology_free(omr_ontology* dag);

int64_t omr_ontology_node_count(const omr_ontology* dag);
int64_t omr_ontology_edge_count(const omr_ontology* dag);
int64_t omr_ontology_max_depth(const omr_ontology* dag);
/* Depth of a node, or -1 if the id is unknown. */
int64_t omr_ontology_depth_of(const omr_ontology* dag, const char* node_id);

/* ------------------------------------------------------------------ */
/* Pipelines. Every run writes its outputs plus a manifest.json into   */
/* out_dir (or next to the output file).                               */

typedef struct omr_pretrain_options {
    const char* diagnosis_ontology;
    const char* procedure_ontology;
    const char* medication_ontology;
    const char* indications;
    const char* out_dir;
    int32_t dim;
    int32_t epochs;
    int32_t steps_per_epoch; /* 0: one pass over each ontology per epoch */
    uint32_t batch;          /* seed nodes per batch */
    double learning_rate;
    double p_forall;
    double p_sat;
    int64_t neg_cap; /* -1 unlimited, 0 auto (4x positives), else cap */
    uint64_t seed;
    int32_t literal_quantifier;
    int32_t freeze_embeddings_on_align;
    uint32_t align_pair_cap;
} omr_pretrain_options;

void omr_pretrain_options_init(omr_pretrain_options* opts);
omr_status omr_pretrain(const omr_pretrain_options* opts);

typedef struct omr_align_options {
    const char* checkpoint;
    const char* diagnosis_ontology;
    const char* medication_ontology;
    const char* indications;
    const char* out_dir;
    int32_t epochs;
    double learning_rate;
    double p_forall;
    double p_sat;
    uint32_t align_pair_cap;
    int32_t freeze_embeddings;
    uint64_t seed;
} omr_align_options;

void omr_align_options_init(omr_align_options* opts);
omr_status omr_align(const omr_align_options* opts);

omr_status omr_export_embeddings(const char* checkpoint, const char* out_path);

typedef struct omr_generate_options {
    const char* out_dir;
    uint64_t diagnosis_nodes;
    uint64_t procedure_nodes;
    uint64_t medication_nodes;
    uint64_t diagnosis_depth;
    uint64_t procedure_depth;
    uint64_t medication_depth;
    uint64_t med_vocab;
    uint64_t themes_per_group;
    uint64_t patients;
    double zipf_s;
    double indication_inject_p;
    double ddi_rate;
    uint64_t seed;
} omr_generate_options;

void omr_generate_options_init(omr_generate_options* opts);
omr_status omr_generate(const omr_generate_options* opts);

typedef struct omr_eval_options {
    const char* diagnosis_ontology;
    const char* procedure_ontology;
    const char* medication_ontology;
    const char* embeddings;
    const char* ehr;
    const char* ddi;
    const char* out_dir;
    int32_t epochs;
    double learning_rate;
    double threshold;
    double tail_percentage;
    int32_t few_shot_min;
    int32_t bootstrap_rounds;
    uint64_t seed;
} omr_eval_options;

void omr_eval_options_init(omr_eval_options* opts);
omr_status omr_eval(const omr_eval_options* opts);

typedef struct omr_check_options {
    uint64_t seed;
    int32_t random_dags;
    double inject_grad_bug; /* nonzero: deliberately corrupt one gradient */
} omr_check_options;

void omr_check_options_init(omr_check_options* opts);
/* report_out receives a malloc'd pass/fail line per suite. Returns OMR_OK
 * when every suite passes, OMR_ERR_CHECK otherwise. */
omr_status omr_check(const omr_check_options* opts, char** report_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* ONTOMEDREC_H */
