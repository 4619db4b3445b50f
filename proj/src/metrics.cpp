#include "ontomedrec/metrics.hpp"

#include "ontomedrec/errors.hpp"

namespace omr {

std::size_t Prediction::count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b != 0;
    return n;
}

namespace {

void check_vocab(const Prediction& a, const Prediction& b) {
    if (a.bits.size() != b.bits.size())
        throw DimensionMismatch("predictions disagree on vocabulary size");
}

}  // namespace

double jaccard(const Prediction& truth, const Prediction& pred) {
    check_vocab(truth, pred);
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < truth.bits.size(); ++i) {
        const bool t = truth.bits[i] != 0, p = pred.bits[i] != 0;
        inter += t && p;
        uni += t || p;
    }
    if (uni == 0) throw UndefinedMetric("jaccard of two empty sets");
    return static_cast<double>(inter) / static_cast<double>(uni);
}

PrfResult precision_recall_f1(const Prediction& truth, const Prediction& pred) {
    check_vocab(truth, pred);
    std::size_t inter = 0, n_truth = 0, n_pred = 0;
    for (std::size_t i = 0; i < truth.bits.size(); ++i) {
        const bool t = truth.bits[i] != 0, p = pred.bits[i] != 0;
        inter += t && p;
        n_truth += t;
        n_pred += p;
    }
    PrfResult r;
    if (n_pred == 0)
        r.undefined_precision = true;
    else
        r.precision = static_cast<double>(inter) / static_cast<double>(n_pred);
    if (n_truth == 0)
        r.undefined_recall = true;
    else
        r.recall = static_cast<double>(inter) / static_cast<double>(n_truth);
    if (r.precision + r.recall > 0.0)
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

double ddi_score(std::span<const Prediction> preds, const DdiMatrix& D) {
    std::uint64_t interacting = 0, total = 0;
    for (const Prediction& pred : preds) {
        if (pred.bits.size() != D.size())
            throw DimensionMismatch("prediction vocabulary does not match the DDI matrix");
        std::vector<std::size_t> on;
        for (std::size_t i = 0; i < pred.bits.size(); ++i)
            if (pred.bits[i]) on.push_back(i);
        for (std::size_t a = 0; a < on.size(); ++a)
            for (std::size_t b = a + 1; b < on.size(); ++b) {
                ++total;
                interacting += D.interacts(on[a], on[b]) ? 1 : 0;
            }
    }
    if (total == 0) throw UndefinedMetric("no admission has two or more predicted medications");
    return static_cast<double>(interacting) / static_cast<double>(total);
}

}  // namespace omr
