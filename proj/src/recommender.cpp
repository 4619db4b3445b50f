#include "ontomedrec/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "ontomedrec/errors.hpp"
#include "ontomedrec/rng.hpp"
#include "ontomedrec/trainer.hpp"

namespace omr {

struct ReferenceModel::Opt {
    AdamState state;
    AdamConfig cfg;
};

ReferenceModel::~ReferenceModel() = default;
ReferenceModel::ReferenceModel(ReferenceModel&&) noexcept = default;
ReferenceModel& ReferenceModel::operator=(ReferenceModel&&) noexcept = default;

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void fill_uniform(std::vector<double>& v, double bound, Rng& rng) {
    for (double& x : v) x = rng.uniform(-bound, bound);
}

}  // namespace

ReferenceModel::ReferenceModel(const OntologyDag& diag_dag, const OntologyDag& proc_dag,
                               std::vector<std::string> med_vocab, const RecommenderConfig& cfg)
    : diag_dag_(&diag_dag), proc_dag_(&proc_dag), vocab_(std::move(med_vocab)), cfg_(cfg) {
    if (cfg_.dim <= 0) throw ConfigError("recommender dim must be positive");
    const std::size_t d = static_cast<std::size_t>(cfg_.dim);
    diag_emb_.assign(diag_dag.node_count() * d, 0.0);
    proc_emb_.assign(proc_dag.node_count() * d, 0.0);
    med_emb_.assign(vocab_.size() * d, 0.0);
    bilinear_.assign(d * d, 0.0);
    w_.assign(2 * d, 0.0);
    bias_.assign(vocab_.size(), 0.0);

    Rng rng(cfg_.rng_seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    fill_uniform(diag_emb_, bound, rng);
    fill_uniform(proc_emb_, bound, rng);
    fill_uniform(med_emb_, bound, rng);
    fill_uniform(bilinear_, bound, rng);
    fill_uniform(w_, bound, rng);

    diag_grad_.assign(diag_emb_.size(), 0.0);
    proc_grad_.assign(proc_emb_.size(), 0.0);
    med_grad_.assign(med_emb_.size(), 0.0);
    bilinear_grad_.assign(bilinear_.size(), 0.0);
    w_grad_.assign(w_.size(), 0.0);
    bias_grad_.assign(bias_.size(), 0.0);

    for (int i = 0; i < 6; ++i) {
        auto o = std::make_unique<Opt>();
        o->cfg.lr = cfg_.learning_rate;
        opt_.push_back(std::move(o));
    }
}

void ReferenceModel::load_pretrained(const EmbeddingExport& exp, const OntologyDag& diag_dag,
                                     const OntologyDag& proc_dag) {
    if (exp.dim != cfg_.dim)
        throw DimensionMismatch("pretrained export dim " + std::to_string(exp.dim) +
                                " does not match recommender dim " + std::to_string(cfg_.dim));
    const std::size_t d = static_cast<std::size_t>(cfg_.dim);
    auto index_rows = [](const EmbeddingTable& t) {
        std::unordered_map<std::string, std::size_t> m;
        for (std::size_t i = 0; i < t.rows(); ++i) m[t.node_ids()[i]] = i;
        return m;
    };
    auto copy_all = [&](const EmbeddingTable& src, const OntologyDag& dag, std::vector<double>& dst) {
        auto rows = index_rows(src);
        for (NodeIndex i = 0; i < dag.node_count(); ++i) {
            auto it = rows.find(dag.id_of(i));
            if (it == rows.end())
                throw UnknownCode("node " + dag.id_of(i) + " missing from pretrained export");
            auto r = src.row(it->second);
            std::copy(r.begin(), r.end(), dst.begin() + i * d);
        }
    };
    copy_all(exp.diagnosis, diag_dag, diag_emb_);
    copy_all(exp.procedure, proc_dag, proc_emb_);

    auto med_rows = index_rows(exp.medication);
    for (std::size_t v = 0; v < vocab_.size(); ++v) {
        auto it = med_rows.find(vocab_[v]);
        if (it == med_rows.end())
            throw UnknownCode("medication " + vocab_[v] + " missing from pretrained export");
        auto r = exp.medication.row(it->second);
        std::copy(r.begin(), r.end(), med_emb_.begin() + v * d);
    }
}

ReferenceModel::AdmissionFeatures ReferenceModel::features(const Admission& adm) const {
    const std::size_t d = static_cast<std::size_t>(cfg_.dim);
    AdmissionFeatures f;
    f.mean_diag.assign(d, 0.0);
    f.mean_proc.assign(d, 0.0);
    for (const auto& code : adm.diagnoses) f.diag_rows.push_back(diag_dag_->index_of(code));
    for (const auto& code : adm.procedures) f.proc_rows.push_back(proc_dag_->index_of(code));
    if (!f.diag_rows.empty()) {
        for (NodeIndex r : f.diag_rows)
            for (std::size_t c = 0; c < d; ++c) f.mean_diag[c] += diag_emb_[r * d + c];
        for (double& x : f.mean_diag) x /= static_cast<double>(f.diag_rows.size());
    }
    if (!f.proc_rows.empty()) {
        for (NodeIndex r : f.proc_rows)
            for (std::size_t c = 0; c < d; ++c) f.mean_proc[c] += proc_emb_[r * d + c];
        for (double& x : f.mean_proc) x /= static_cast<double>(f.proc_rows.size());
    }
    return f;
}

std::vector<double> ReferenceModel::scores(const EhrDataset&, const Admission& adm) const {
    const std::size_t d = static_cast<std::size_t>(cfg_.dim);
    AdmissionFeatures f = features(adm);

    double s0 = 0.0;
    for (std::size_t c = 0; c < d; ++c) s0 += w_[c] * f.mean_diag[c] + w_[d + c] * f.mean_proc[c];
    std::vector<double> q(d, 0.0);  // M * mean_diag
    for (std::size_t r = 0; r < d; ++r) {
        double acc = 0.0;
        const double* row = bilinear_.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) acc += row[c] * f.mean_diag[c];
        q[r] = acc;
    }
    std::vector<double> out(vocab_.size());
    for (std::size_t m = 0; m < vocab_.size(); ++m) {
        double z = s0 + bias_[m];
        const double* e = med_emb_.data() + m * d;
        for (std::size_t c = 0; c < d; ++c) z += e[c] * q[c];
        out[m] = sigmoid(z);
    }
    return out;
}

void ReferenceModel::train_step(const EhrDataset& data, const Admission& adm) {
    const std::size_t d = static_cast<std::size_t>(cfg_.dim);
    const std::size_t V = vocab_.size();
    AdmissionFeatures f = features(adm);

    double s0 = 0.0;
    for (std::size_t c = 0; c < d; ++c) s0 += w_[c] * f.mean_diag[c] + w_[d + c] * f.mean_proc[c];
    std::vector<double> q(d, 0.0);
    for (std::size_t r = 0; r < d; ++r) {
        double acc = 0.0;
        const double* row = bilinear_.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) acc += row[c] * f.mean_diag[c];
        q[r] = acc;
    }

    std::vector<std::uint8_t> label(V, 0);
    for (const auto& m : adm.medications) label[data.vocab_index(m)] = 1;

    // Mean BCE over the vocabulary; dz_m = (p_m - y_m) / |V|.
    std::fill(bias_grad_.begin(), bias_grad_.end(), 0.0);
    std::fill(w_grad_.begin(), w_grad_.end(), 0.0);
    std::fill(bilinear_grad_.begin(), bilinear_grad_.end(), 0.0);
    std::vector<double> q_grad(d, 0.0);
    double g_sum = 0.0;

    // med embedding grads are sparse over the whole vocab here (dense pass)
    std::fill(med_grad_.begin(), med_grad_.end(), 0.0);
    for (std::size_t m = 0; m < V; ++m) {
        double z = s0 + bias_[m];
        const double* e = med_emb_.data() + m * d;
        for (std::size_t c = 0; c < d; ++c) z += e[c] * q[c];
        const double p = sigmoid(z);
        const double g = (p - static_cast<double>(label[m])) / static_cast<double>(V);
        bias_grad_[m] = g;
        g_sum += g;
        double* ge = med_grad_.data() + m * d;
        for (std::size_t c = 0; c < d; ++c) {
            ge[c] += g * q[c];
            q_grad[c] += g * e[c];
        }
    }

    std::vector<double> mean_diag_grad(d, 0.0), mean_proc_grad(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
        w_grad_[c] = g_sum * f.mean_diag[c];
        w_grad_[d + c] = g_sum * f.mean_proc[c];
        mean_diag_grad[c] = g_sum * w_[c];
        mean_proc_grad[c] = g_sum * w_[d + c];
    }
    for (std::size_t r = 0; r < d; ++r) {
        double* grow = bilinear_grad_.data() + r * d;
        const double* mrow = bilinear_.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) {
            grow[c] = q_grad[r] * f.mean_diag[c];
            mean_diag_grad[c] += q_grad[r] * mrow[c];
        }
    }

    std::fill(diag_grad_.begin(), diag_grad_.end(), 0.0);
    std::fill(proc_grad_.begin(), proc_grad_.end(), 0.0);
    if (!f.diag_rows.empty()) {
        const double scale = 1.0 / static_cast<double>(f.diag_rows.size());
        for (NodeIndex r : f.diag_rows)
            for (std::size_t c = 0; c < d; ++c) diag_grad_[r * d + c] += scale * mean_diag_grad[c];
    }
    if (!f.proc_rows.empty()) {
        const double scale = 1.0 / static_cast<double>(f.proc_rows.size());
        for (NodeIndex r : f.proc_rows)
            for (std::size_t c = 0; c < d; ++c) proc_grad_[r * d + c] += scale * mean_proc_grad[c];
    }

    adam_step(diag_emb_, diag_grad_, opt_[0]->state, opt_[0]->cfg);
    adam_step(proc_emb_, proc_grad_, opt_[1]->state, opt_[1]->cfg);
    adam_step(med_emb_, med_grad_, opt_[2]->state, opt_[2]->cfg);
    adam_step(bilinear_, bilinear_grad_, opt_[3]->state, opt_[3]->cfg);
    adam_step(w_, w_grad_, opt_[4]->state, opt_[4]->cfg);
    adam_step(bias_, bias_grad_, opt_[5]->state, opt_[5]->cfg);
}

void ReferenceModel::train(const EhrDataset& data, std::span<const std::uint32_t> train_patients) {
    std::vector<AdmissionRef> refs;
    for (std::uint32_t pi : train_patients)
        for (std::uint32_t t = 0; t < data.patients[pi].admissions.size(); ++t)
            refs.push_back({pi, t});
    Rng rng(cfg_.rng_seed ^ 0x5eedULL);
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
        rng.shuffle(refs);
        for (const AdmissionRef& r : refs)
            train_step(data, data.patients[r.patient].admissions[r.admission]);
    }
}

Prediction ReferenceModel::predict(const EhrDataset& data, const AdmissionRef& ref) const {
    const Admission& adm = data.patients[ref.patient].admissions[ref.admission];
    std::vector<double> s = scores(data, adm);
    Prediction pred;
    pred.threshold = cfg_.threshold;
    pred.bits.assign(s.size(), 0);
    for (std::size_t i = 0; i < s.size(); ++i) pred.bits[i] = s[i] > cfg_.threshold ? 1 : 0;
    return pred;
}

ReferenceModel train_reference_model(const EhrDataset& data, const SplitSpec& split,
                                     const OntologyDag& diag_dag, const OntologyDag& proc_dag,
                                     const EmbeddingExport* init, const RecommenderConfig& cfg) {
    ReferenceModel model(diag_dag, proc_dag, data.med_vocab, cfg);
    if (init) model.load_pretrained(*init, diag_dag, proc_dag);
    model.train(data, split.train_patients);
    return model;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

struct AdmissionEval {
    std::uint32_t patient;
    double jaccard = 0.0;
    double f1 = 0.0;
    std::uint64_t ddi_pairs = 0;
    std::uint64_t ddi_interacting = 0;
    std::size_t pred_count = 0;
    bool empty_pred = false;
};

struct ScopeInput {
    std::vector<AdmissionEval> admissions;
    std::vector<std::uint32_t> patients;  // unique, those owning admissions
};

MetricSummary summarize(const std::vector<double>& rounds, bool flagged) {
    MetricSummary s;
    s.flagged = flagged;
    if (rounds.empty()) return s;
    double sum = 0.0;
    for (double v : rounds) sum += v;
    s.mean = sum / static_cast<double>(rounds.size());
    if (rounds.size() > 1) {
        double ss = 0.0;
        for (double v : rounds) ss += (v - s.mean) * (v - s.mean);
        s.stdev = std::sqrt(ss / static_cast<double>(rounds.size() - 1));
    }
    return s;
}

EvalScope evaluate_scope(const ScopeInput& in, int rounds, Rng& rng,
                         std::vector<std::string>& warnings, const char* scope_name) {
    EvalScope scope;
    scope.n_patients = in.patients.size();
    scope.n_admissions = in.admissions.size();
    if (in.admissions.empty()) {
        warnings.push_back(std::string(scope_name) + ": no admissions to evaluate");
        scope.jaccard.flagged = scope.f1.flagged = scope.ddi.flagged = scope.avg_drugs.flagged = true;
        return scope;
    }

    std::unordered_map<std::uint32_t, std::vector<std::size_t>> by_patient;
    for (std::size_t i = 0; i < in.admissions.size(); ++i)
        by_patient[in.admissions[i].patient].push_back(i);

    bool any_empty_pred = false;
    for (const auto& a : in.admissions) any_empty_pred |= a.empty_pred;
    if (any_empty_pred)
        warnings.push_back(std::string(scope_name) + ": empty predictions scored as precision 0");

    std::vector<double> r_jac, r_f1, r_ddi, r_drugs;
    bool ddi_flag = false;
    for (int round = 0; round < rounds; ++round) {
        std::vector<std::uint32_t> sample(in.patients.size());
        for (auto& s : sample) s = in.patients[rng.below(in.patients.size())];

        double jac_sum = 0.0, f1_sum = 0.0, drugs_sum = 0.0;
        std::uint64_t pairs = 0, interacting = 0;
        std::size_t n_adm = 0;
        for (std::uint32_t pi : sample) {
            const auto& idx = by_patient.at(pi);
            double pj = 0.0, pf = 0.0;
            for (std::size_t i : idx) {
                const AdmissionEval& a = in.admissions[i];
                pj += a.jaccard;
                pf += a.f1;
                drugs_sum += static_cast<double>(a.pred_count);
                pairs += a.ddi_pairs;
                interacting += a.ddi_interacting;
                ++n_adm;
            }
            jac_sum += pj / static_cast<double>(idx.size());
            f1_sum += pf / static_cast<double>(idx.size());
        }
        r_jac.push_back(jac_sum / static_cast<double>(sample.size()));
        r_f1.push_back(f1_sum / static_cast<double>(sample.size()));
        if (pairs == 0) {
            ddi_flag = true;
            r_ddi.push_back(0.0);
        } else {
            r_ddi.push_back(static_cast<double>(interacting) / static_cast<double>(pairs));
        }
        r_drugs.push_back(drugs_sum / static_cast<double>(n_adm));
    }
    if (ddi_flag)
        warnings.push_back(std::string(scope_name) +
                           ": a bootstrap round had no predicted pairs; DDI reported as 0");

    scope.jaccard = summarize(r_jac, false);
    scope.f1 = summarize(r_f1, any_empty_pred);
    scope.ddi = summarize(r_ddi, ddi_flag);
    scope.avg_drugs = summarize(r_drugs, false);
    return scope;
}

}  // namespace

EvalReport evaluate(const Recommender& model, const EhrDataset& data, const SplitSpec& split,
                    const DdiMatrix& D, int bootstrap_rounds, std::uint64_t rng_seed) {
    if (bootstrap_rounds <= 0) throw ConfigError("bootstrap rounds must be positive");

    auto eval_admission = [&](const AdmissionRef& ref) {
        const Admission& adm = data.patients[ref.patient].admissions[ref.admission];
        Prediction truth;
        truth.bits.assign(data.med_vocab.size(), 0);
        for (const auto& m : adm.medications) truth.bits[data.vocab_index(m)] = 1;
        Prediction pred = model.predict(data, ref);

        AdmissionEval e;
        e.patient = ref.patient;
        e.jaccard = jaccard(truth, pred);  // truth is never empty
        PrfResult prf = precision_recall_f1(truth, pred);
        e.f1 = prf.f1;
        e.empty_pred = prf.undefined_precision;
        e.pred_count = pred.count();
        std::vector<std::size_t> on;
        for (std::size_t i = 0; i < pred.bits.size(); ++i)
            if (pred.bits[i]) on.push_back(i);
        for (std::size_t a = 0; a < on.size(); ++a)
            for (std::size_t b = a + 1; b < on.size(); ++b) {
                ++e.ddi_pairs;
                e.ddi_interacting += D.interacts(on[a], on[b]) ? 1 : 0;
            }
        return e;
    };

    EvalReport report;
    Rng rng(rng_seed);

    ScopeInput full;
    for (std::uint32_t pi : split.test_patients) {
        if (data.patients[pi].admissions.empty()) continue;
        full.patients.push_back(pi);
        for (std::uint32_t t = 0; t < data.patients[pi].admissions.size(); ++t)
            full.admissions.push_back(eval_admission({pi, t}));
    }
    Rng full_rng = rng.child(1);
    report.full = evaluate_scope(full, bootstrap_rounds, full_rng, report.warnings, "full");

    ScopeInput few;
    {
        std::unordered_set<std::uint32_t> seen;
        for (const AdmissionRef& ref : split.few_shot_admissions) {
            few.admissions.push_back(eval_admission(ref));
            if (seen.insert(ref.patient).second) few.patients.push_back(ref.patient);
        }
    }
    Rng few_rng = rng.child(2);
    report.few_shot = evaluate_scope(few, bootstrap_rounds, few_rng, report.warnings, "few_shot");
    return report;
}

std::string format_report(std::span<const ReportRow> rows) {
    auto cell = [](const MetricSummary& m) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.4f±%.4f", m.mean, m.stdev);
        return std::string(buf);
    };
    std::string out = "model\tinit\tjaccard\tf1\tddi\tavg_drugs\n";
    for (const ReportRow& r : rows) {
        out += r.model + '\t' + r.init + '\t' + cell(r.jaccard) + '\t' + cell(r.f1) + '\t' +
               cell(r.ddi) + '\t' + cell(r.avg_drugs) + '\n';
    }
    return out;
}

}  // namespace omr
