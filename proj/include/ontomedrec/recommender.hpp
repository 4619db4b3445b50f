#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ontomedrec/ehr.hpp"
#include "ontomedrec/grounding.hpp"
#include "ontomedrec/metrics.hpp"

namespace omr {

class Recommender {
public:
    virtual ~Recommender() = default;
    virtual Prediction predict(const EhrDataset& data, const AdmissionRef& ref) const = 0;
};

struct RecommenderConfig {
    int dim = 64;
    int epochs = 20;
    double learning_rate = 1e-2;
    double threshold = 0.5;
    std::uint64_t rng_seed = 1;
};

// Instance-based stand-in for the downstream recommenders: per medication m,
// score(m | admission) = sigmoid(w . [mean_diag; mean_proc] + e_m . M mean_diag + b_m),
// trained with per-medication binary cross-entropy. Uses all three embedding
// tables so the pretraining initialization can matter.
class ReferenceModel : public Recommender {
public:
    ReferenceModel(const OntologyDag& diag_dag, const OntologyDag& proc_dag,
                   std::vector<std::string> med_vocab, const RecommenderConfig& cfg);
    ~ReferenceModel() override;
    ReferenceModel(ReferenceModel&&) noexcept;
    ReferenceModel& operator=(ReferenceModel&&) noexcept;

    // Copies matching rows out of a pretrained export; throws UnknownCode when
    // a needed node id is missing from the export.
    void load_pretrained(const EmbeddingExport& exp, const OntologyDag& diag_dag,
                         const OntologyDag& proc_dag);

    void train(const EhrDataset& data, std::span<const std::uint32_t> train_patients);

    Prediction predict(const EhrDataset& data, const AdmissionRef& ref) const override;
    std::vector<double> scores(const EhrDataset& data, const Admission& adm) const;

    const RecommenderConfig& config() const { return cfg_; }
    const std::vector<double>& med_rows() const { return med_emb_; }

private:
    struct AdmissionFeatures {
        std::vector<double> mean_diag;
        std::vector<double> mean_proc;
        std::vector<NodeIndex> diag_rows;
        std::vector<NodeIndex> proc_rows;
    };
    AdmissionFeatures features(const Admission& adm) const;
    void train_step(const EhrDataset& data, const Admission& adm);

    const OntologyDag* diag_dag_;
    const OntologyDag* proc_dag_;
    std::vector<std::string> vocab_;
    RecommenderConfig cfg_;

    // parameter groups + gradients + adam state, flat layouts
    std::vector<double> diag_emb_, diag_grad_;
    std::vector<double> proc_emb_, proc_grad_;
    std::vector<double> med_emb_, med_grad_;   // one row per vocabulary entry
    std::vector<double> bilinear_, bilinear_grad_;  // d x d
    std::vector<double> w_, w_grad_;                // 2d
    std::vector<double> bias_, bias_grad_;          // |vocab|

    struct Opt;
    std::vector<std::unique_ptr<Opt>> opt_;
};

// `init`: pretrained export or nullptr for random initialization.
ReferenceModel train_reference_model(const EhrDataset& data, const SplitSpec& split,
                                     const OntologyDag& diag_dag, const OntologyDag& proc_dag,
                                     const EmbeddingExport* init, const RecommenderConfig& cfg);

struct MetricSummary {
    double mean = 0.0;
    double stdev = 0.0;
    bool flagged = false;
};

struct EvalScope {
    MetricSummary jaccard;
    MetricSummary f1;
    MetricSummary ddi;
    MetricSummary avg_drugs;
    std::size_t n_patients = 0;
    std::size_t n_admissions = 0;
};

struct EvalReport {
    EvalScope full;
    EvalScope few_shot;
    std::vector<std::string> warnings;
};

// Bootstrap-resampled (over patients) evaluation on the full test set and the
// few-shot subset. Jaccard/F1 average per patient then across patients; DDI
// pools pairs across admissions; avg_drugs is the mean predicted set size.
EvalReport evaluate(const Recommender& model, const EhrDataset& data, const SplitSpec& split,
                    const DdiMatrix& D, int bootstrap_rounds, std::uint64_t rng_seed);

struct ReportRow {
    std::string model;
    std::string init;
    MetricSummary jaccard, f1, ddi, avg_drugs;
};

// Tab-separated `model  init  jaccard  f1  ddi  avg_drugs` table; every cell
// is mean±std at fixed 4 decimals.
std::string format_report(std::span<const ReportRow> rows);

}  // namespace omr
