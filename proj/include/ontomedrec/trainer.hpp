#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ontomedrec/axioms.hpp"
#include "ontomedrec/grounding.hpp"
#include "ontomedrec/logic.hpp"
#include "ontomedrec/ontology.hpp"
#include "ontomedrec/sampler.hpp"

namespace omr {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t t = 0;
};

// First/second-moment adaptive update with bias correction.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg);

struct TrainConfig {
    int dim = 64;
    int epochs = 100;
    int steps_per_epoch = 0;  // 0: ceil(|nodes| / seed_count), per ontology
    std::uint32_t seed_count = 64;
    double learning_rate = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double p_forall = 2.0;
    double p_sat = 2.0;
    std::int64_t neg_cap = kNegCapAuto;
    std::uint64_t rng_seed = 42;
    bool literal_quantifier = false;
    bool freeze_embeddings_on_align = false;
    std::uint32_t align_pair_cap = 1024;

    void validate() const;  // throws ConfigError
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

struct EpochLogEntry {
    std::int64_t epoch = 0;
    double diagnosis_sat = 0.0;
    double procedure_sat = 0.0;
    double medication_sat = 0.0;
    double indication_sat = 0.0;
    std::vector<double> losses;  // per-step loss trajectory across all phases
};

// Which epoch each checkpoint part is taken from: procedure embeddings from
// the epoch with the highest procedure-ontology satisfiability, medication and
// diagnosis embeddings from the epoch with the highest indication
// satisfiability. Ties break to the earliest epoch.
struct CheckpointSelection {
    std::int64_t procedure_epoch = 0;
    std::int64_t alignment_epoch = 0;
};

CheckpointSelection select_checkpoints(std::span<const EpochLogEntry> logs);

// Sequential per-epoch schedule: diagnosis, procedure, medication encoder
// phases (each touching only its own table and predicates), then one
// alignment pass over the indication pairs.
class Trainer {
public:
    Trainer(const OntologyDag& diag, const OntologyDag& proc, const OntologyDag& med,
            std::vector<IdPair> expanded_indications, TrainConfig cfg);

    EpochLogEntry train_epoch();
    void train(int epochs);  // convenience loop

    // Single-phase stepping outside the epoch loop (ablations and tests).
    // These do not append to the epoch log or update checkpoint snapshots.
    void run_ontology_phase(OntologyKind kind, EpochLogEntry& entry) { ontology_phase(kind, entry); }
    void run_alignment_phase(EpochLogEntry& entry) { alignment_phase(entry); }

    const std::vector<EpochLogEntry>& logs() const { return logs_; }
    const TrainConfig& config() const { return cfg_; }

    ModelCheckpoint compose_checkpoint() const;

    EmbeddingTable& table(OntologyKind kind) { return tables_[static_cast<int>(kind)]; }
    const EmbeddingTable& table(OntologyKind kind) const { return tables_[static_cast<int>(kind)]; }
    // rel: 0 parent, 1 sibling, 2 ancestor
    PredicateNet& net(OntologyKind kind, int rel) { return nets_[static_cast<int>(kind)][rel]; }
    PredicateNet& indication_net() { return net_indication_; }

    // Forward-only mean of the indication scorer over (med row, diag row)
    // pairs; used to probe alignment quality.
    double mean_indication_score(std::span<const IndexPair> med_diag_rows) const;

    const std::vector<IndexPair>& indication_rows() const { return indication_rows_; }

private:
    friend struct GradCheckAccess;

    void ontology_phase(OntologyKind kind, EpochLogEntry& entry);
    void alignment_phase(EpochLogEntry& entry);
    std::vector<IndexPair> sample_negative_indications(std::size_t count, Rng& rng) const;

    const OntologyDag* dags_[3];
    RelationTriples relations_[3];
    TrainConfig cfg_;
    AggregationConfig agg_;
    AdamConfig adam_cfg_;

    std::array<EmbeddingTable, 3> tables_;
    std::array<std::array<PredicateNet, 3>, 3> nets_;  // [kind][parent|sibling|ancestor]
    PredicateNet net_indication_;

    std::array<AdamState, 3> table_opt_;
    std::array<std::array<AdamState, 3>, 3> net_opt_;
    AdamState indication_opt_;

    std::vector<IndexPair> indication_rows_;  // (med row, diag row), expanded
    PairSet indication_set_;

    Rng rng_;
    LogicTape tape_;
    std::vector<EpochLogEntry> logs_;

    double best_procedure_sat_ = -1.0;
    double best_indication_sat_ = -1.0;
    std::int64_t best_procedure_epoch_ = 0;
    std::int64_t best_alignment_epoch_ = 0;
    EmbeddingTable procedure_snapshot_;
    EmbeddingTable diagnosis_snapshot_;
    EmbeddingTable medication_snapshot_;
};

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::map<std::string, double> per_group;  // parameter group -> max rel err
};

struct GradCheckOptions {
    double step = 1e-5;
    bool include_diagnosis = true;
    bool include_procedure = true;
    bool include_medication = true;
    bool include_indication = true;
    std::uint32_t batch_seed_count = 4;
    std::uint64_t batch_seed = 7;
    // Applied to one analytic gradient entry before comparison; lets callers
    // verify the checker catches a broken gradient.
    double inject_bug = 0.0;
};

// Compares analytic d(loss)/d(param) against central finite differences over
// every parameter, on fixed small batches.
GradCheckResult grad_check(Trainer& trainer, const GradCheckOptions& opts = {});

}  // namespace omr
