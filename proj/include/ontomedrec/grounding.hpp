#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ontomedrec/ontology.hpp"
#include "ontomedrec/rng.hpp"

namespace omr {

// One trainable d-dimensional row per ontology node, plus a parallel gradient
// buffer filled during axiom backward passes.
class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(OntologyKind kind, std::vector<std::string> node_ids, int dim);

    OntologyKind kind() const { return kind_; }
    int dim() const { return dim_; }
    std::size_t rows() const { return ids_.size(); }
    const std::vector<std::string>& node_ids() const { return ids_; }

    std::span<double> row(std::size_t i) { return {values_.data() + i * dim_, static_cast<std::size_t>(dim_)}; }
    std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * dim_, static_cast<std::size_t>(dim_)};
    }
    std::span<double> grad_row(std::size_t i) {
        return {grads_.data() + i * dim_, static_cast<std::size_t>(dim_)};
    }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& grads() { return grads_; }
    const std::vector<double>& grads() const { return grads_; }

    void zero_grads();

private:
    OntologyKind kind_ = OntologyKind::diagnosis;
    int dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<double> values_;
    std::vector<double> grads_;
};

// Rows i.i.d. uniform on [-1/sqrt(d), 1/sqrt(d)], deterministic per seed.
EmbeddingTable init_embeddings(const OntologyDag& dag, int dim, std::uint64_t seed);

// Two-input relation scorer: concat(x, y) -> ELU(2d) -> ELU(d) -> sigmoid.
// Order-sensitive by construction; the single output is a truth degree.
class PredicateNet {
public:
    PredicateNet() = default;
    PredicateNet(std::string name, int dim, std::uint64_t seed);

    const std::string& name() const { return name_; }
    int dim() const { return dim_; }
    std::size_t param_count() const { return params_.size(); }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::vector<double>& grads() { return grads_; }
    void zero_grads();

    // Activation cache for one forward evaluation; backward needs it plus the
    // original inputs.
    struct Cache {
        std::vector<double> h1;  // after first ELU, size 2d
        std::vector<double> h2;  // after second ELU, size d
        double out = 0.0;        // sigmoid output
    };

    double forward(std::span<const double> x, std::span<const double> y, Cache& cache) const;
    double forward(std::span<const double> x, std::span<const double> y) const;

    // Accumulates parameter gradients and, when non-null, input gradients.
    void backward(std::span<const double> x, std::span<const double> y, const Cache& cache,
                  double upstream, std::span<double> dx, std::span<double> dy);

    static std::size_t param_count_for_dim(int dim);

private:
    void check_dims(std::size_t x_size, std::size_t y_size) const;

    std::string name_;
    int dim_ = 0;
    std::vector<double> params_;
    std::vector<double> grads_;
};

// Standard predicate names: parent/sibling/ancestor per ontology + indication.
std::string predicate_name(const std::string& relation, OntologyKind kind);

struct SatScores {
    double diagnosis = 0.0;
    double procedure = 0.0;
    double medication = 0.0;
    double indication = 0.0;
};

struct TrainConfig;  // defined in trainer.hpp

// Full trainable state plus the bookkeeping the selection rule needs.
struct ModelCheckpoint {
    EmbeddingTable diagnosis;
    EmbeddingTable procedure;
    EmbeddingTable medication;
    std::vector<PredicateNet> nets;
    std::int64_t epochs_trained = 0;
    std::int64_t procedure_epoch = 0;  // epoch the procedure table was taken from
    std::int64_t alignment_epoch = 0;  // epoch the diagnosis/medication tables were taken from
    SatScores sat_scores;
    std::string config_json;  // serialized TrainConfig for reproducibility
};

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path);
ModelCheckpoint load_checkpoint(const std::string& path);

// Text export: `dim=<d>` header, then one `kind\tnode_id\tv1 v2 ... vd` row
// per node, reals at 17 significant digits.
void export_embeddings(const ModelCheckpoint& ckpt, const std::string& path);

struct EmbeddingExport {
    int dim = 0;
    EmbeddingTable diagnosis;
    EmbeddingTable procedure;
    EmbeddingTable medication;
};

EmbeddingExport load_embeddings(const std::string& path);

}  // namespace omr
