#include "ontomedrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <unordered_set>

#include <json.hpp>

#include "ontomedrec/errors.hpp"

namespace omr {

OntologyDag gen_ontology(const OntologySpec& spec, std::uint64_t seed) {
    if (spec.n_nodes < 2) throw ConfigError("ontology needs at least 2 nodes");
    if (spec.max_depth < 1) throw ConfigError("max_depth must be >= 1");

    const std::size_t n = spec.n_nodes;
    const std::size_t spine = std::min(spec.max_depth, n - 1);
    Rng rng(seed);

    int width = 1;
    for (std::size_t v = n; v >= 10; v /= 10) ++width;
    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string num = std::to_string(i);
        ids[i] = spec.prefix + std::string(width - num.size(), '0') + num;
    }

    std::vector<std::int32_t> parent(n, -1);
    std::vector<std::size_t> depth(n, 0);
    // Spine 0 -> 1 -> ... -> spine, then uniform attachment below max_depth.
    for (std::size_t i = 1; i <= spine; ++i) {
        parent[i] = static_cast<std::int32_t>(i - 1);
        depth[i] = i;
    }
    std::vector<std::uint32_t> attachable;
    for (std::size_t i = 0; i <= spine; ++i)
        if (depth[i] < spec.max_depth) attachable.push_back(static_cast<std::uint32_t>(i));
    for (std::size_t i = spine + 1; i < n; ++i) {
        const std::uint32_t p = attachable[rng.below(attachable.size())];
        parent[i] = static_cast<std::int32_t>(p);
        depth[i] = depth[p] + 1;
        if (depth[i] < spec.max_depth) attachable.push_back(static_cast<std::uint32_t>(i));
    }
    return OntologyDag(spec.kind, std::move(ids), std::move(parent));
}

ZipfSampler::ZipfSampler(std::size_t n, double s) {
    if (n == 0) throw ConfigError("zipf sampler over zero items");
    cdf_.resize(n);
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        acc += 1.0 / std::pow(static_cast<double>(r + 1), s);
        cdf_[r] = acc;
    }
    for (double& c : cdf_) c /= acc;
}

double ZipfSampler::weight(std::size_t rank) const {
    return rank == 0 ? cdf_[0] : cdf_[rank] - cdf_[rank - 1];
}

std::size_t ZipfSampler::sample(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) return cdf_.size() - 1;
    return static_cast<std::size_t>(it - cdf_.begin());
}

namespace {

std::vector<NodeIndex> leaves_of(const OntologyDag& dag) {
    std::vector<NodeIndex> out;
    for (NodeIndex i = 0; i < dag.node_count(); ++i)
        if (dag.children_of(i).empty()) out.push_back(i);
    return out;
}

std::vector<NodeIndex> leaf_descendants(const OntologyDag& dag, NodeIndex n) {
    std::vector<NodeIndex> out;
    for (NodeIndex c : dag.descendants_of(n))
        if (dag.children_of(c).empty()) out.push_back(c);
    if (out.empty() && dag.children_of(n).empty()) out.push_back(n);
    return out;
}

}  // namespace

IndicationGen gen_indications(const OntologyDag& med, const OntologyDag& diag,
                              std::size_t target_vocab, std::size_t themes_per_group,
                              std::uint64_t seed) {
    if (themes_per_group == 0) throw ConfigError("themes_per_group must be positive");
    Rng rng(seed);

    // Sibling groups of medication leaves, keyed by parent.
    std::map<NodeIndex, std::vector<NodeIndex>> groups;
    for (NodeIndex leaf : leaves_of(med)) {
        if (med.is_root(leaf)) continue;
        groups[med.parent_of(leaf)].push_back(leaf);
    }
    std::vector<NodeIndex> group_parents;
    for (const auto& [p, members] : groups) group_parents.push_back(p);
    rng.shuffle(group_parents);

    // Candidate diagnosis subtree roots: internal nodes below the root.
    std::vector<NodeIndex> diag_internals;
    for (NodeIndex i = 0; i < diag.node_count(); ++i)
        if (!diag.is_root(i) && !diag.children_of(i).empty()) diag_internals.push_back(i);
    if (diag_internals.empty()) diag_internals.push_back(diag.root());

    IndicationGen gen;
    std::vector<std::pair<std::string, std::vector<std::string>>> vocab_leaves;
    for (NodeIndex parent : group_parents) {
        if (gen.med_vocab.size() >= target_vocab) break;
        std::vector<NodeIndex> themes;
        for (std::size_t t = 0; t < themes_per_group; ++t)
            themes.push_back(diag_internals[rng.below(diag_internals.size())]);

        std::vector<std::string> theme_leaf_ids;
        for (NodeIndex th : themes)
            for (NodeIndex leaf : leaf_descendants(diag, th))
                theme_leaf_ids.push_back(diag.id_of(leaf));
        std::sort(theme_leaf_ids.begin(), theme_leaf_ids.end());
        theme_leaf_ids.erase(std::unique(theme_leaf_ids.begin(), theme_leaf_ids.end()),
                             theme_leaf_ids.end());

        for (NodeIndex m : groups[parent]) {
            if (gen.med_vocab.size() >= target_vocab) break;
            gen.med_vocab.push_back(med.id_of(m));
            for (NodeIndex th : themes) gen.pairs.emplace_back(med.id_of(m), diag.id_of(th));
            vocab_leaves.emplace_back(med.id_of(m), theme_leaf_ids);
        }
    }
    if (gen.med_vocab.empty()) throw ConfigError("medication ontology has no usable leaf groups");

    std::sort(vocab_leaves.begin(), vocab_leaves.end());
    std::sort(gen.med_vocab.begin(), gen.med_vocab.end());
    gen.med_diag_leaves.resize(vocab_leaves.size());
    for (std::size_t i = 0; i < vocab_leaves.size(); ++i)
        gen.med_diag_leaves[i] = std::move(vocab_leaves[i].second);
    return gen;
}

std::string EhrGenManifest::to_json() const {
    nlohmann::json j;
    j["n_patients"] = n_patients;
    j["n_admissions"] = n_admissions;
    j["n_prescriptions"] = n_prescriptions;
    j["vocab_size"] = vocab_size;
    j["zipf_s"] = zipf_s;
    j["rng_seed"] = rng_seed;
    return j.dump(2);
}

EhrGenManifest gen_synthetic_ehr(const OntologyDag& diag, const OntologyDag& proc,
                                 const IndicationGen& ind, const EhrGenConfig& cfg,
                                 EhrDataset& out) {
    if (cfg.n_patients == 0) throw ConfigError("n_patients must be positive");
    Rng rng(cfg.rng_seed);

    const std::vector<std::string>& vocab = ind.med_vocab;
    ZipfSampler med_zipf(vocab.size(), cfg.zipf_s);

    std::vector<NodeIndex> diag_leaves = leaves_of(diag);
    std::vector<NodeIndex> proc_leaves = leaves_of(proc);
    ZipfSampler diag_zipf(diag_leaves.size(), cfg.zipf_s);
    ZipfSampler proc_zipf(proc_leaves.size(), cfg.zipf_s);

    // Zipf rank -> vocabulary entry, shuffled so rank is unrelated to the
    // sibling-group structure.
    std::vector<std::size_t> rank_to_med(vocab.size());
    for (std::size_t i = 0; i < rank_to_med.size(); ++i) rank_to_med[i] = i;
    rng.shuffle(rank_to_med);

    EhrGenManifest manifest;
    manifest.n_patients = cfg.n_patients;
    manifest.vocab_size = vocab.size();
    manifest.zipf_s = cfg.zipf_s;
    manifest.rng_seed = cfg.rng_seed;

    out.patients.clear();
    out.med_vocab = vocab;

    int width = 1;
    for (std::size_t v = cfg.n_patients; v >= 10; v /= 10) ++width;
    for (std::size_t pi = 0; pi < cfg.n_patients; ++pi) {
        PatientRecord rec;
        std::string num = std::to_string(pi);
        rec.patient_id = "pt" + std::string(width - num.size(), '0') + num;
        const std::size_t n_adm = 1 + rng.below(3);
        for (std::size_t t = 0; t < n_adm; ++t) {
            Admission adm;
            std::unordered_set<std::size_t> meds;
            const std::size_t n_meds = 2 + rng.below(5);
            for (std::size_t k = 0; k < n_meds * 4 && meds.size() < n_meds; ++k)
                meds.insert(rank_to_med[med_zipf.sample(rng)]);

            std::unordered_set<std::string> diags;
            for (std::size_t mi : meds) {
                adm.medications.push_back(vocab[mi]);
                const auto& targets = ind.med_diag_leaves[mi];
                if (!targets.empty() && rng.uniform() < cfg.indication_inject_p)
                    diags.insert(targets[rng.below(targets.size())]);
            }
            std::sort(adm.medications.begin(), adm.medications.end());

            const std::size_t n_bg = 1 + rng.below(3);
            for (std::size_t k = 0; k < n_bg; ++k)
                diags.insert(diag.id_of(diag_leaves[diag_zipf.sample(rng)]));
            adm.diagnoses.assign(diags.begin(), diags.end());
            std::sort(adm.diagnoses.begin(), adm.diagnoses.end());

            std::unordered_set<std::string> procs;
            const std::size_t n_proc = rng.below(3);
            for (std::size_t k = 0; k < n_proc; ++k)
                procs.insert(proc.id_of(proc_leaves[proc_zipf.sample(rng)]));
            adm.procedures.assign(procs.begin(), procs.end());
            std::sort(adm.procedures.begin(), adm.procedures.end());

            manifest.n_prescriptions += adm.medications.size();
            ++manifest.n_admissions;
            rec.admissions.push_back(std::move(adm));
        }
        out.patients.push_back(std::move(rec));
    }
    return manifest;
}

std::vector<IdPair> gen_ddi_pairs(const std::vector<std::string>& med_vocab, double rate,
                                  std::uint64_t seed) {
    if (rate < 0.0 || rate > 1.0) throw ConfigError("ddi rate must be in [0, 1]");
    const std::size_t n = med_vocab.size();
    if (n < 2) return {};
    Rng rng(seed);
    const std::uint64_t all_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    std::uint64_t want = static_cast<std::uint64_t>(rate * static_cast<double>(all_pairs));
    std::vector<IdPair> out;
    std::unordered_set<std::uint64_t> taken;
    while (out.size() < want) {
        std::uint32_t a = static_cast<std::uint32_t>(rng.below(n));
        std::uint32_t b = static_cast<std::uint32_t>(rng.below(n));
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        if (!taken.insert(pack_pair(a, b)).second) continue;
        out.emplace_back(med_vocab[a], med_vocab[b]);
    }
    return out;
}

void save_ddi_pairs(const std::vector<IdPair>& pairs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write DDI file: " + path);
    for (const auto& [a, b] : pairs) out << a << '\t' << b << '\n';
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace omr
