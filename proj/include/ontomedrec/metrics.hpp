#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ontomedrec/ehr.hpp"

namespace omr {

// Multi-hot medication set over a fixed vocabulary.
struct Prediction {
    std::vector<std::uint8_t> bits;
    double threshold = 0.5;

    std::size_t count() const;
};

// |truth AND pred| / |truth OR pred| for one admission. Throws UndefinedMetric
// when both sets are empty.
double jaccard(const Prediction& truth, const Prediction& pred);

struct PrfResult {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool undefined_precision = false;  // empty prediction, reported as 0
    bool undefined_recall = false;     // empty truth, reported as 0
};

PrfResult precision_recall_f1(const Prediction& truth, const Prediction& pred);

// Fraction of predicted unordered medication pairs with a known interaction,
// pooled over admissions. Admissions with fewer than two predictions
// contribute nothing; throws UndefinedMetric when no admission has a pair.
double ddi_score(std::span<const Prediction> preds, const DdiMatrix& D);

}  // namespace omr
