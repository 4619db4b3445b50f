#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ontomedrec/ontology.hpp"

namespace omr {

struct Admission {
    std::vector<std::string> diagnoses;
    std::vector<std::string> procedures;
    std::vector<std::string> medications;
};

struct PatientRecord {
    std::string patient_id;
    std::vector<Admission> admissions;  // chronological
};

struct EhrDataset {
    std::vector<PatientRecord> patients;
    // Sorted unique medication codes across the dataset; the prediction
    // vocabulary downstream.
    std::vector<std::string> med_vocab;

    std::size_t admission_count() const;
    std::size_t vocab_index(const std::string& med) const;  // throws UnknownCode
};

// One patient per line: `patient_id | adm1: D=d1,d2 P=p1 M=m1,m2 | adm2: ...`
// Every code must exist in its ontology; every admission needs >= 1 medication.
EhrDataset load_ehr(const std::string& path, const OntologyDag& diag, const OntologyDag& proc,
                    const OntologyDag& med);
void save_ehr(const EhrDataset& data, const std::string& path);

// Symmetric 0/1 interaction matrix over the medication vocabulary.
class DdiMatrix {
public:
    DdiMatrix() = default;
    explicit DdiMatrix(std::size_t vocab_size) : n_(vocab_size), cells_(vocab_size * vocab_size, 0) {}

    std::size_t size() const { return n_; }
    bool interacts(std::size_t i, std::size_t j) const { return cells_[i * n_ + j] != 0; }
    void set(std::size_t i, std::size_t j) {
        if (i == j) return;
        cells_[i * n_ + j] = 1;
        cells_[j * n_ + i] = 1;
    }

private:
    std::size_t n_ = 0;
    std::vector<std::uint8_t> cells_;
};

// `med_id<TAB>med_id` per interacting pair. Pairs naming medications outside
// the vocabulary are ignored; they can never be recommended.
DdiMatrix load_ddi(const std::string& path, const std::vector<std::string>& med_vocab);

struct AdmissionRef {
    std::uint32_t patient = 0;
    std::uint32_t admission = 0;
};

struct SplitSpec {
    std::vector<std::uint32_t> train_patients;
    std::vector<std::uint32_t> test_patients;
    std::vector<std::uint32_t> validation_patients;
    std::vector<std::string> few_shot_medications;  // sorted
    std::vector<AdmissionRef> few_shot_admissions;  // subset of test admissions
    double tail_percentage = 30.0;
};

// Patient-level 4:1:1 split. Medication frequencies are counted on the full
// dataset (one count per admission containing the code), sorted ascending
// with lexicographic tie-break; the bottom floor(tail% * |vocab|) codes are
// the few-shot medications. Test admissions containing at least
// `few_shot_min` of them form the few-shot test set.
SplitSpec split_dataset(const EhrDataset& data, double tail_percentage, std::uint64_t rng_seed,
                        int few_shot_min = 2);

std::vector<std::size_t> medication_frequencies(const EhrDataset& data);

}  // namespace omr
