#include "ontomedrec/trainer.hpp"

#include <cmath>

#include <json.hpp>

#include "ontomedrec/errors.hpp"

namespace omr {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg) {
    if (params.size() != grads.size()) throw DimensionMismatch("adam_step: shape mismatch");
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
        state.t = 0;
    }
    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

void TrainConfig::validate() const {
    if (dim <= 0) throw ConfigError("dim must be positive");
    if (epochs <= 0) throw ConfigError("epochs must be positive");
    if (steps_per_epoch < 0) throw ConfigError("steps_per_epoch must be >= 0");
    if (seed_count == 0) throw ConfigError("batch seed count must be positive");
    if (learning_rate < 0) throw ConfigError("learning rate must be >= 0");
    if (p_forall < 1.0 || p_sat < 1.0) throw ConfigError("p exponents must be >= 1");
    if (neg_cap < kNegCapUnlimited) throw ConfigError("neg_cap must be -1 (unlimited), 0 (auto) or positive");
    if (align_pair_cap == 0) throw ConfigError("align_pair_cap must be positive");
}

std::string TrainConfig::to_json() const {
    nlohmann::json j;
    j["dim"] = dim;
    j["epochs"] = epochs;
    j["steps_per_epoch"] = steps_per_epoch;
    j["seed_count"] = seed_count;
    j["learning_rate"] = learning_rate;
    j["adam_beta1"] = adam_beta1;
    j["adam_beta2"] = adam_beta2;
    j["adam_eps"] = adam_eps;
    j["p_forall"] = p_forall;
    j["p_sat"] = p_sat;
    j["neg_cap"] = neg_cap;
    j["rng_seed"] = rng_seed;
    j["literal_quantifier"] = literal_quantifier;
    j["freeze_embeddings_on_align"] = freeze_embeddings_on_align;
    j["align_pair_cap"] = align_pair_cap;
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    TrainConfig c;
    c.dim = j.at("dim").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.steps_per_epoch = j.at("steps_per_epoch").get<int>();
    c.seed_count = j.at("seed_count").get<std::uint32_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.p_forall = j.at("p_forall").get<double>();
    c.p_sat = j.at("p_sat").get<double>();
    c.neg_cap = j.at("neg_cap").get<std::int64_t>();
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    c.literal_quantifier = j.at("literal_quantifier").get<bool>();
    c.freeze_embeddings_on_align = j.at("freeze_embeddings_on_align").get<bool>();
    c.align_pair_cap = j.at("align_pair_cap").get<std::uint32_t>();
    return c;
}

CheckpointSelection select_checkpoints(std::span<const EpochLogEntry> logs) {
    if (logs.empty()) throw ConfigError("checkpoint selection requires at least one epoch");
    CheckpointSelection sel;
    double best_proc = logs[0].procedure_sat;
    double best_ind = logs[0].indication_sat;
    sel.procedure_epoch = logs[0].epoch;
    sel.alignment_epoch = logs[0].epoch;
    for (const auto& e : logs.subspan(1)) {
        if (e.procedure_sat > best_proc) {
            best_proc = e.procedure_sat;
            sel.procedure_epoch = e.epoch;
        }
        if (e.indication_sat > best_ind) {
            best_ind = e.indication_sat;
            sel.alignment_epoch = e.epoch;
        }
    }
    return sel;
}

namespace {

constexpr const char* kRelationNames[3] = {"parent", "sibling", "ancestor"};

}  // namespace

Trainer::Trainer(const OntologyDag& diag, const OntologyDag& proc, const OntologyDag& med,
                 std::vector<IdPair> expanded_indications, TrainConfig cfg)
    : dags_{&diag, &proc, &med}, cfg_(cfg), rng_(cfg.rng_seed) {
    cfg_.validate();
    if (diag.kind() != OntologyKind::diagnosis || proc.kind() != OntologyKind::procedure ||
        med.kind() != OntologyKind::medication)
        throw ConfigError("ontologies passed to Trainer in the wrong order");

    agg_.p_forall = cfg_.p_forall;
    agg_.p_sat = cfg_.p_sat;
    adam_cfg_.lr = cfg_.learning_rate;
    adam_cfg_.beta1 = cfg_.adam_beta1;
    adam_cfg_.beta2 = cfg_.adam_beta2;
    adam_cfg_.eps = cfg_.adam_eps;

    for (int k = 0; k < 3; ++k) {
        relations_[k] = derive_relations(*dags_[k]);
        Rng stream = rng_.child(100 + k);
        tables_[k] = init_embeddings(*dags_[k], cfg_.dim, stream.next());
        for (int r = 0; r < 3; ++r) {
            Rng net_stream = rng_.child(200 + k * 3 + r);
            nets_[k][r] = PredicateNet(
                predicate_name(kRelationNames[r], dags_[k]->kind()), cfg_.dim, net_stream.next());
        }
    }
    {
        Rng stream = rng_.child(300);
        net_indication_ = PredicateNet("indication", cfg_.dim, stream.next());
    }

    indication_rows_.reserve(expanded_indications.size());
    for (const auto& [m, d] : expanded_indications) {
        NodeIndex mi = dags_[2]->index_of(m);
        NodeIndex di = dags_[0]->index_of(d);
        indication_rows_.emplace_back(mi, di);
        indication_set_.insert(pack_pair(mi, di));
    }
}

void Trainer::ontology_phase(OntologyKind kind, EpochLogEntry& entry) {
    const int k = static_cast<int>(kind);
    const OntologyDag& dag = *dags_[k];
    const std::uint32_t seeds =
        std::min<std::uint32_t>(cfg_.seed_count, static_cast<std::uint32_t>(dag.node_count()));
    int steps = cfg_.steps_per_epoch;
    if (steps == 0)
        steps = static_cast<int>((dag.node_count() + seeds - 1) / seeds);

    AxiomEvalOptions opts;
    opts.literal_quantifier = cfg_.literal_quantifier;

    double sat_sum = 0.0;
    for (int s = 0; s < steps; ++s) {
        AxiomBatch batch = sample_batch(dag, relations_[k], seeds, rng_.next(), cfg_.neg_cap);
        tape_.clear();
        MlpOntologyEvaluator ev(tape_, tables_[k], nets_[k][0], nets_[k][1], nets_[k][2]);
        SatReport report = eval_ontology_axioms(tape_, batch, ev, agg_, opts);
        if (!std::isfinite(report.loss))
            throw DivergenceError("loss is not finite in the " +
                                  std::string(to_string(kind)) + " phase; lower the learning rate");
        entry.losses.push_back(report.loss);
        sat_sum += report.aggregated;

        tape_.backward(report.loss_node);
        tables_[k].zero_grads();
        for (int r = 0; r < 3; ++r) nets_[k][r].zero_grads();
        ev.flush_gradients();

        adam_step(tables_[k].values(), tables_[k].grads(), table_opt_[k], adam_cfg_);
        for (int r = 0; r < 3; ++r)
            adam_step(nets_[k][r].params(), nets_[k][r].grads(), net_opt_[k][r], adam_cfg_);
    }
    const double mean_sat = sat_sum / steps;
    switch (kind) {
        case OntologyKind::diagnosis: entry.diagnosis_sat = mean_sat; break;
        case OntologyKind::procedure: entry.procedure_sat = mean_sat; break;
        case OntologyKind::medication: entry.medication_sat = mean_sat; break;
    }
}

std::vector<IndexPair> Trainer::sample_negative_indications(std::size_t count, Rng& rng) const {
    std::vector<IndexPair> out;
    out.reserve(count);
    const std::uint64_t n_med = dags_[2]->node_count();
    const std::uint64_t n_diag = dags_[0]->node_count();
    const std::uint64_t available = n_med * n_diag - indication_set_.size();
    count = std::min<std::size_t>(count, available);
    std::unordered_set<std::uint64_t> taken;
    while (out.size() < count) {
        NodeIndex m = static_cast<NodeIndex>(rng.below(n_med));
        NodeIndex d = static_cast<NodeIndex>(rng.below(n_diag));
        const std::uint64_t key = pack_pair(m, d);
        if (indication_set_.count(key) || !taken.insert(key).second) continue;
        out.emplace_back(m, d);
    }
    return out;
}

void Trainer::alignment_phase(EpochLogEntry& entry) {
    if (indication_rows_.empty()) {
        entry.indication_sat = 0.0;
        return;
    }
    Rng step_rng(rng_.next());
    std::vector<IndexPair> pos;
    if (indication_rows_.size() <= cfg_.align_pair_cap) {
        pos = indication_rows_;
    } else {
        auto idx = step_rng.sample_without_replacement(
            static_cast<std::uint32_t>(indication_rows_.size()), cfg_.align_pair_cap);
        pos.reserve(idx.size());
        for (auto i : idx) pos.push_back(indication_rows_[i]);
    }
    std::vector<IndexPair> neg = sample_negative_indications(pos.size(), step_rng);

    tape_.clear();
    MlpIndicationEvaluator ev(tape_, tables_[2], tables_[0], net_indication_);
    SatReport report = eval_indication_axioms(tape_, pos, neg, ev, agg_);
    if (!std::isfinite(report.loss))
        throw DivergenceError("loss is not finite in the alignment phase; lower the learning rate");
    entry.losses.push_back(report.loss);
    entry.indication_sat = report.aggregated;

    tape_.backward(report.loss_node);
    tables_[0].zero_grads();
    tables_[2].zero_grads();
    net_indication_.zero_grads();
    ev.flush_gradients(cfg_.freeze_embeddings_on_align);

    adam_step(net_indication_.params(), net_indication_.grads(), indication_opt_, adam_cfg_);
    if (!cfg_.freeze_embeddings_on_align) {
        adam_step(tables_[2].values(), tables_[2].grads(), table_opt_[2], adam_cfg_);
        adam_step(tables_[0].values(), tables_[0].grads(), table_opt_[0], adam_cfg_);
    }
}

EpochLogEntry Trainer::train_epoch() {
    EpochLogEntry entry;
    entry.epoch = static_cast<std::int64_t>(logs_.size());
    ontology_phase(OntologyKind::diagnosis, entry);
    ontology_phase(OntologyKind::procedure, entry);
    ontology_phase(OntologyKind::medication, entry);
    alignment_phase(entry);
    logs_.push_back(entry);

    if (entry.procedure_sat > best_procedure_sat_) {
        best_procedure_sat_ = entry.procedure_sat;
        best_procedure_epoch_ = entry.epoch;
        procedure_snapshot_ = tables_[1];
    }
    if (entry.indication_sat > best_indication_sat_) {
        best_indication_sat_ = entry.indication_sat;
        best_alignment_epoch_ = entry.epoch;
        diagnosis_snapshot_ = tables_[0];
        medication_snapshot_ = tables_[2];
    }
    return entry;
}

void Trainer::train(int epochs) {
    for (int i = 0; i < epochs; ++i) train_epoch();
}

ModelCheckpoint Trainer::compose_checkpoint() const {
    if (logs_.empty()) throw ConfigError("cannot compose a checkpoint before any epoch");
    ModelCheckpoint ckpt;
    ckpt.diagnosis = diagnosis_snapshot_;
    ckpt.procedure = procedure_snapshot_;
    ckpt.medication = medication_snapshot_;
    for (int k = 0; k < 3; ++k)
        for (int r = 0; r < 3; ++r) ckpt.nets.push_back(nets_[k][r]);
    ckpt.nets.push_back(net_indication_);
    ckpt.epochs_trained = static_cast<std::int64_t>(logs_.size());
    ckpt.procedure_epoch = best_procedure_epoch_;
    ckpt.alignment_epoch = best_alignment_epoch_;
    ckpt.sat_scores.diagnosis = logs_[best_alignment_epoch_].diagnosis_sat;
    ckpt.sat_scores.procedure = logs_[best_procedure_epoch_].procedure_sat;
    ckpt.sat_scores.medication = logs_[best_alignment_epoch_].medication_sat;
    ckpt.sat_scores.indication = logs_[best_alignment_epoch_].indication_sat;
    ckpt.config_json = cfg_.to_json();
    return ckpt;
}

double Trainer::mean_indication_score(std::span<const IndexPair> med_diag_rows) const {
    if (med_diag_rows.empty()) throw EmptyDomain("mean_indication_score over no pairs");
    double sum = 0.0;
    for (const auto& [m, d] : med_diag_rows)
        sum += net_indication_.forward(tables_[2].row(m), tables_[0].row(d));
    return sum / static_cast<double>(med_diag_rows.size());
}

// ---------------------------------------------------------------------------
// Gradient check

struct GradCheckAccess {
    static std::vector<std::pair<std::string, std::pair<std::vector<double>*, std::vector<double>*>>>
    groups(Trainer& t) {
        std::vector<std::pair<std::string, std::pair<std::vector<double>*, std::vector<double>*>>> g;
        const char* kinds[3] = {"diagnosis", "procedure", "medication"};
        for (int k = 0; k < 3; ++k)
            g.emplace_back(std::string("emb_") + kinds[k],
                           std::make_pair(&t.tables_[k].values(), &t.tables_[k].grads()));
        for (int k = 0; k < 3; ++k)
            for (int r = 0; r < 3; ++r)
                g.emplace_back(t.nets_[k][r].name(),
                               std::make_pair(&t.nets_[k][r].params(), &t.nets_[k][r].grads()));
        g.emplace_back(t.net_indication_.name(),
                       std::make_pair(&t.net_indication_.params(), &t.net_indication_.grads()));
        return g;
    }

    static double loss(Trainer& t, const std::vector<AxiomBatch>& batches,
                       const std::vector<IndexPair>& pos, const std::vector<IndexPair>& neg,
                       const std::vector<int>& phase_kinds, bool include_indication,
                       bool with_grads) {
        double total = 0.0;
        int terms = 0;
        AxiomEvalOptions opts;
        opts.literal_quantifier = t.cfg_.literal_quantifier;
        for (std::size_t i = 0; i < phase_kinds.size(); ++i) {
            const int k = phase_kinds[i];
            t.tape_.clear();
            MlpOntologyEvaluator ev(t.tape_, t.tables_[k], t.nets_[k][0], t.nets_[k][1],
                                    t.nets_[k][2]);
            SatReport report = eval_ontology_axioms(t.tape_, batches[i], ev, t.agg_, opts);
            total += report.loss;
            ++terms;
            if (with_grads) {
                t.tape_.backward(report.loss_node);
                ev.flush_gradients();
            }
        }
        if (include_indication) {
            t.tape_.clear();
            MlpIndicationEvaluator ev(t.tape_, t.tables_[2], t.tables_[0], t.net_indication_);
            SatReport report = eval_indication_axioms(t.tape_, pos, neg, ev, t.agg_);
            total += report.loss;
            ++terms;
            if (with_grads) {
                t.tape_.backward(report.loss_node);
                ev.flush_gradients(false);
            }
        }
        return total / static_cast<double>(terms);
    }

    static const OntologyDag& dag(Trainer& t, int k) { return *t.dags_[k]; }
    static const RelationTriples& relations(Trainer& t, int k) { return t.relations_[k]; }
};

GradCheckResult grad_check(Trainer& trainer, const GradCheckOptions& opts) {
    std::vector<int> phase_kinds;
    if (opts.include_diagnosis) phase_kinds.push_back(0);
    if (opts.include_procedure) phase_kinds.push_back(1);
    if (opts.include_medication) phase_kinds.push_back(2);

    Rng rng(opts.batch_seed);
    std::vector<AxiomBatch> batches;
    for (int k : phase_kinds) {
        const auto& dag = GradCheckAccess::dag(trainer, k);
        const std::uint32_t seeds = std::min<std::uint32_t>(
            opts.batch_seed_count, static_cast<std::uint32_t>(dag.node_count()));
        batches.push_back(sample_batch(dag, GradCheckAccess::relations(trainer, k), seeds,
                                       rng.next(), trainer.config().neg_cap));
    }

    std::vector<IndexPair> pos, neg;
    const bool include_indication =
        opts.include_indication && !trainer.indication_rows().empty();
    if (include_indication) {
        pos = trainer.indication_rows();
        if (pos.size() > 16) pos.resize(16);
        Rng neg_rng(rng.next());
        std::unordered_set<std::uint64_t> taken;
        for (const auto& [m, d] : trainer.indication_rows()) taken.insert(pack_pair(m, d));
        const auto& med = trainer.table(OntologyKind::medication);
        const auto& dia = trainer.table(OntologyKind::diagnosis);
        for (std::uint32_t attempts = 0; neg.size() < pos.size() && attempts < 100000; ++attempts) {
            NodeIndex m = static_cast<NodeIndex>(neg_rng.below(med.rows()));
            NodeIndex d = static_cast<NodeIndex>(neg_rng.below(dia.rows()));
            if (!taken.insert(pack_pair(m, d)).second) continue;
            neg.emplace_back(m, d);
        }
    }

    const double terms =
        static_cast<double>(phase_kinds.size()) + (include_indication ? 1.0 : 0.0);
    if (terms == 0.0) throw ConfigError("grad_check needs at least one phase");

    auto groups = GradCheckAccess::groups(trainer);
    for (auto& [name, pg] : groups) std::fill(pg.second->begin(), pg.second->end(), 0.0);

    GradCheckResult result;
    GradCheckAccess::loss(trainer, batches, pos, neg, phase_kinds, include_indication, true);

    // Copy analytic gradients before finite differencing mutates parameters.
    // The flushed buffers hold the sum over phases; the loss is their mean.
    std::vector<std::vector<double>> analytic;
    for (auto& [name, pg] : groups) {
        analytic.push_back(*pg.second);
        for (double& v : analytic.back()) v /= terms;
    }
    if (opts.inject_bug != 0.0 && !analytic.empty() && !analytic.back().empty())
        analytic.back()[0] += opts.inject_bug;

    const double h = opts.step;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        auto& params = *groups[g].second.first;
        double group_max = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double saved = params[i];
            params[i] = saved + h;
            const double fp = GradCheckAccess::loss(trainer, batches, pos, neg, phase_kinds,
                                                    include_indication, false);
            params[i] = saved - h;
            const double fm = GradCheckAccess::loss(trainer, batches, pos, neg, phase_kinds,
                                                    include_indication, false);
            params[i] = saved;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[g][i];
            const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
            group_max = std::max(group_max, err);
        }
        result.per_group[groups[g].first] = group_max;
        result.max_rel_err = std::max(result.max_rel_err, group_max);
    }
    return result;
}

}  // namespace omr
