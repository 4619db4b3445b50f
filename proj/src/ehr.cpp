#include "ontomedrec/ehr.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "ontomedrec/errors.hpp"
#include "ontomedrec/rng.hpp"

namespace omr {

std::size_t EhrDataset::admission_count() const {
    std::size_t n = 0;
    for (const auto& p : patients) n += p.admissions.size();
    return n;
}

std::size_t EhrDataset::vocab_index(const std::string& med) const {
    auto it = std::lower_bound(med_vocab.begin(), med_vocab.end(), med);
    if (it == med_vocab.end() || *it != med) throw UnknownCode("medication not in vocabulary: " + med);
    return static_cast<std::size_t>(it - med_vocab.begin());
}

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_codes(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void check_codes(const std::vector<std::string>& codes, const OntologyDag& dag, const char* role,
                 const std::string& where) {
    for (const auto& c : codes)
        if (!dag.contains(c))
            throw UnknownCode(where + ": unknown " + role + " code " + c);
}

}  // namespace

EhrDataset load_ehr(const std::string& path, const OntologyDag& diag, const OntologyDag& proc,
                    const OntologyDag& med) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open EHR file: " + path);

    EhrDataset data;
    std::unordered_set<std::string> seen_patients;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::string where = path + ":" + std::to_string(lineno);

        std::vector<std::string> segments;
        std::string seg;
        std::istringstream ls(line);
        while (std::getline(ls, seg, '|')) segments.push_back(seg);
        if (segments.size() < 2) throw ParseError(where + ": expected 'patient_id | admission...'");

        PatientRecord rec;
        rec.patient_id = trim(segments[0]);
        if (rec.patient_id.empty()) throw ParseError(where + ": empty patient id");
        if (!seen_patients.insert(rec.patient_id).second)
            throw ParseError(where + ": duplicate patient id " + rec.patient_id);

        for (std::size_t i = 1; i < segments.size(); ++i) {
            const std::string& s = segments[i];
            auto colon = s.find(':');
            if (colon == std::string::npos)
                throw ParseError(where + ": admission segment missing ':' label");
            Admission adm;
            std::istringstream as(s.substr(colon + 1));
            std::string group;
            while (as >> group) {
                if (group.rfind("D=", 0) == 0)
                    adm.diagnoses = split_codes(group.substr(2));
                else if (group.rfind("P=", 0) == 0)
                    adm.procedures = split_codes(group.substr(2));
                else if (group.rfind("M=", 0) == 0)
                    adm.medications = split_codes(group.substr(2));
                else
                    throw ParseError(where + ": unknown group '" + group + "'");
            }
            if (adm.medications.empty())
                throw ParseError(where + ": admission without medications");
            check_codes(adm.diagnoses, diag, "diagnosis", where);
            check_codes(adm.procedures, proc, "procedure", where);
            check_codes(adm.medications, med, "medication", where);
            rec.admissions.push_back(std::move(adm));
        }
        data.patients.push_back(std::move(rec));
    }
    if (data.patients.empty()) throw ParseError(path + ": no patient records");

    std::unordered_set<std::string> meds;
    for (const auto& p : data.patients)
        for (const auto& a : p.admissions)
            for (const auto& m : a.medications) meds.insert(m);
    data.med_vocab.assign(meds.begin(), meds.end());
    std::sort(data.med_vocab.begin(), data.med_vocab.end());
    return data;
}

void save_ehr(const EhrDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write EHR file: " + path);
    auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ',';
            s += v[i];
        }
        return s;
    };
    for (const auto& p : data.patients) {
        out << p.patient_id;
        for (std::size_t t = 0; t < p.admissions.size(); ++t) {
            const Admission& a = p.admissions[t];
            out << " | adm" << (t + 1) << ":";
            if (!a.diagnoses.empty()) out << " D=" << join(a.diagnoses);
            if (!a.procedures.empty()) out << " P=" << join(a.procedures);
            out << " M=" << join(a.medications);
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

DdiMatrix load_ddi(const std::string& path, const std::vector<std::string>& med_vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open DDI file: " + path);
    DdiMatrix D(med_vocab.size());
    auto find = [&](const std::string& m) -> std::ptrdiff_t {
        auto it = std::lower_bound(med_vocab.begin(), med_vocab.end(), m);
        if (it == med_vocab.end() || *it != m) return -1;
        return it - med_vocab.begin();
    };
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
            throw ParseError(path + ":" + std::to_string(lineno) +
                             ": expected 'med_id<TAB>med_id', got: " + line);
        auto a = find(line.substr(0, tab));
        auto b = find(line.substr(tab + 1));
        if (a < 0 || b < 0) continue;  // outside the vocabulary
        D.set(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
    }
    return D;
}

std::vector<std::size_t> medication_frequencies(const EhrDataset& data) {
    std::vector<std::size_t> freq(data.med_vocab.size(), 0);
    for (const auto& p : data.patients)
        for (const auto& a : p.admissions)
            for (const auto& m : a.medications) ++freq[data.vocab_index(m)];
    return freq;
}

SplitSpec split_dataset(const EhrDataset& data, double tail_percentage, std::uint64_t rng_seed,
                        int few_shot_min) {
    if (data.patients.empty()) throw ConfigError("cannot split an empty dataset");
    if (tail_percentage < 0.0 || tail_percentage > 100.0)
        throw ConfigError("tail percentage must be in [0, 100]");

    SplitSpec spec;
    spec.tail_percentage = tail_percentage;

    const std::uint32_t n = static_cast<std::uint32_t>(data.patients.size());
    std::vector<std::uint32_t> order(n);
    for (std::uint32_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(rng_seed);
    rng.shuffle(order);

    const std::uint32_t n_test = n / 6;
    const std::uint32_t n_val = n / 6;
    const std::uint32_t n_train = n - n_test - n_val;
    spec.train_patients.assign(order.begin(), order.begin() + n_train);
    spec.test_patients.assign(order.begin() + n_train, order.begin() + n_train + n_test);
    spec.validation_patients.assign(order.begin() + n_train + n_test, order.end());

    // Few-shot medications: ascending frequency over the full dataset,
    // lexicographic tie-break, bottom floor(tail% * |vocab|).
    std::vector<std::size_t> freq = medication_frequencies(data);
    std::vector<std::size_t> idx(freq.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (freq[a] != freq[b]) return freq[a] < freq[b];
        return data.med_vocab[a] < data.med_vocab[b];
    });
    const std::size_t n_tail =
        static_cast<std::size_t>(tail_percentage / 100.0 * static_cast<double>(freq.size()));
    std::unordered_set<std::size_t> tail_set;
    for (std::size_t i = 0; i < n_tail && i < idx.size(); ++i) {
        tail_set.insert(idx[i]);
        spec.few_shot_medications.push_back(data.med_vocab[idx[i]]);
    }
    std::sort(spec.few_shot_medications.begin(), spec.few_shot_medications.end());

    for (std::uint32_t pi : spec.test_patients) {
        const PatientRecord& p = data.patients[pi];
        for (std::uint32_t t = 0; t < p.admissions.size(); ++t) {
            int hits = 0;
            for (const auto& m : p.admissions[t].medications)
                if (tail_set.count(data.vocab_index(m))) ++hits;
            if (hits >= few_shot_min) spec.few_shot_admissions.push_back({pi, t});
        }
    }
    return spec;
}

}  // namespace omr
