#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ontomedrec/axioms.hpp"
#include "ontomedrec/ehr.hpp"
#include "ontomedrec/ontology.hpp"

namespace omr {

// Random single-parent hierarchy. A spine guarantees max_depth is reached;
// the remaining nodes attach uniformly below it.
struct OntologySpec {
    OntologyKind kind = OntologyKind::diagnosis;
    std::string prefix = "D";
    std::size_t n_nodes = 100;
    std::size_t max_depth = 5;
};

OntologyDag gen_ontology(const OntologySpec& spec, std::uint64_t seed);

// Zipf(s) ranks over n items; s = 0 degenerates to uniform.
class ZipfSampler {
public:
    ZipfSampler(std::size_t n, double s);
    std::size_t sample(Rng& rng) const;
    double weight(std::size_t rank) const;

private:
    std::vector<double> cdf_;
};

// Indication structure: medication leaves are grouped by parent; each sibling
// group is assigned a few diagnosis subtrees ("themes") and every group member
// indicates the subtree roots. Sibling medications therefore share indicated
// diagnoses, which is what the alignment phase and the downstream transfer
// feed on.
struct IndicationGen {
    std::vector<IdPair> pairs;                       // (med leaf, diag node) as written to file
    std::vector<std::string> med_vocab;              // sorted leaf medications covered
    std::vector<std::vector<std::string>> med_diag_leaves;  // per vocab med: indicated diag leaves
};

IndicationGen gen_indications(const OntologyDag& med, const OntologyDag& diag,
                              std::size_t target_vocab, std::size_t themes_per_group,
                              std::uint64_t seed);

struct EhrGenConfig {
    std::size_t n_patients = 1000;
    double zipf_s = 1.1;
    // Probability that a sampled medication injects one of its indicated
    // diagnoses into the admission.
    double indication_inject_p = 0.9;
    std::uint64_t rng_seed = 7;
};

struct EhrGenManifest {
    std::size_t n_patients = 0;
    std::size_t n_admissions = 0;
    std::size_t n_prescriptions = 0;  // total medication entries
    std::size_t vocab_size = 0;
    double zipf_s = 0.0;
    std::uint64_t rng_seed = 0;

    std::string to_json() const;
};

// Medication frequencies follow the Zipf ranks over the vocabulary, so a tail
// exists; co-occurrence is injected from the indication structure.
EhrGenManifest gen_synthetic_ehr(const OntologyDag& diag, const OntologyDag& proc,
                                 const IndicationGen& ind, const EhrGenConfig& cfg,
                                 EhrDataset& out);

// Random interacting pairs over the vocabulary at the given rate.
std::vector<IdPair> gen_ddi_pairs(const std::vector<std::string>& med_vocab, double rate,
                                  std::uint64_t seed);
void save_ddi_pairs(const std::vector<IdPair>& pairs, const std::string& path);

}  // namespace omr
