#include "ontomedrec/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ontomedrec/errors.hpp"
#include "ontomedrec/synth.hpp"

namespace omr {

namespace fs = std::filesystem;
using nlohmann::json;

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for digest: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!in) break;
    }
    char hex[32];
    std::snprintf(hex, sizeof(hex), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
    return hex;
}

namespace {

class ManifestWriter {
public:
    ManifestWriter(std::string command, std::uint64_t seed) {
        j_["command"] = std::move(command);
        j_["seed"] = seed;
        start_ = std::chrono::steady_clock::now();
    }

    void config(json cfg) { j_["config"] = std::move(cfg); }
    void input(const std::string& path) { j_["inputs"][path] = file_digest(path); }
    void output(const std::string& path) { j_["outputs"].push_back(path); }

    // Atomic: write to a temp file in the same directory, then rename.
    void write(const std::string& path) {
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        j_["wall_clock_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
        const std::string tmp = path + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            if (!out) throw IoError("cannot write manifest: " + tmp);
            out << j_.dump(2) << '\n';
        }
        fs::rename(tmp, path);
    }

private:
    json j_;
    std::chrono::steady_clock::time_point start_;
};

void ensure_dir(const std::string& dir) {
    if (dir.empty()) throw ConfigError("output directory not set");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const char* name) {
    return (fs::path(dir) / name).string();
}

void write_epoch_log(const std::vector<EpochLogEntry>& logs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write epoch log: " + path);
    out << "epoch\tdiagnosis_sat\tprocedure_sat\tmedication_sat\tindication_sat\tmean_loss\n";
    char buf[256];
    for (const auto& e : logs) {
        double mean_loss = 0.0;
        for (double l : e.losses) mean_loss += l;
        if (!e.losses.empty()) mean_loss /= static_cast<double>(e.losses.size());
        std::snprintf(buf, sizeof(buf), "%lld\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n",
                      static_cast<long long>(e.epoch), e.diagnosis_sat, e.procedure_sat,
                      e.medication_sat, e.indication_sat, mean_loss);
        out << buf;
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace

bool verify_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw IoError("cannot open manifest: " + manifest_path);
    json j = json::parse(in, nullptr, /*allow_exceptions=*/true);
    if (!j.contains("inputs")) return true;
    for (auto& [path, digest] : j["inputs"].items()) {
        if (!fs::exists(path)) return false;
        if (file_digest(path) != digest.get<std::string>()) return false;
    }
    return true;
}

PretrainOutputs run_pretrain(const PretrainOptions& opts) {
    opts.train.validate();
    ensure_dir(opts.out_dir);

    ManifestWriter manifest("pretrain", opts.train.rng_seed);
    manifest.input(opts.diagnosis_ontology);
    manifest.input(opts.procedure_ontology);
    manifest.input(opts.medication_ontology);
    manifest.input(opts.indications);
    manifest.config(json::parse(opts.train.to_json()));

    OntologyDag diag = load_ontology(opts.diagnosis_ontology, OntologyKind::diagnosis);
    OntologyDag proc = load_ontology(opts.procedure_ontology, OntologyKind::procedure);
    OntologyDag med = load_ontology(opts.medication_ontology, OntologyKind::medication);
    std::vector<IdPair> pairs = load_indications(opts.indications);
    pairs = expand_indications(pairs, diag);
    for (const auto& [m, d] : pairs)
        if (!med.contains(m)) throw UnknownCode("indication medication not in ontology: " + m);

    Trainer trainer(diag, proc, med, pairs, opts.train);
    trainer.train(opts.train.epochs);

    PretrainOutputs out;
    out.logs = trainer.logs();
    out.checkpoint_path = join(opts.out_dir, "checkpoint.omr");
    out.embeddings_path = join(opts.out_dir, "embeddings.tsv");
    out.epoch_log_path = join(opts.out_dir, "epochs.tsv");
    out.manifest_path = join(opts.out_dir, "manifest.json");

    ModelCheckpoint ckpt = trainer.compose_checkpoint();
    save_checkpoint(ckpt, out.checkpoint_path);
    export_embeddings(ckpt, out.embeddings_path);
    write_epoch_log(out.logs, out.epoch_log_path);

    manifest.output(out.checkpoint_path);
    manifest.output(out.embeddings_path);
    manifest.output(out.epoch_log_path);
    manifest.write(out.manifest_path);
    return out;
}

AlignOutputs run_align(const AlignOptions& opts) {
    if (opts.epochs <= 0) throw ConfigError("epochs must be positive");
    if (opts.align_pair_cap == 0) throw ConfigError("align_pair_cap must be positive");
    ensure_dir(opts.out_dir);

    ManifestWriter manifest("align", opts.rng_seed);
    manifest.input(opts.checkpoint);
    manifest.input(opts.diagnosis_ontology);
    manifest.input(opts.medication_ontology);
    manifest.input(opts.indications);
    {
        json cfg;
        cfg["epochs"] = opts.epochs;
        cfg["learning_rate"] = opts.learning_rate;
        cfg["p_forall"] = opts.p_forall;
        cfg["p_sat"] = opts.p_sat;
        cfg["align_pair_cap"] = opts.align_pair_cap;
        cfg["freeze_embeddings"] = opts.freeze_embeddings;
        cfg["rng_seed"] = opts.rng_seed;
        manifest.config(cfg);
    }

    ModelCheckpoint ckpt = load_checkpoint(opts.checkpoint);
    OntologyDag diag = load_ontology(opts.diagnosis_ontology, OntologyKind::diagnosis);
    OntologyDag med = load_ontology(opts.medication_ontology, OntologyKind::medication);
    std::vector<IdPair> pairs = load_indications(opts.indications);
    pairs = expand_indications(pairs, diag);

    // Row lookup through the checkpoint tables' own id lists.
    std::unordered_map<std::string, NodeIndex> med_rows, diag_rows;
    for (NodeIndex i = 0; i < ckpt.medication.rows(); ++i) med_rows[ckpt.medication.node_ids()[i]] = i;
    for (NodeIndex i = 0; i < ckpt.diagnosis.rows(); ++i) diag_rows[ckpt.diagnosis.node_ids()[i]] = i;
    std::vector<IndexPair> rows;
    PairSet row_set;
    for (const auto& [m, d] : pairs) {
        auto mi = med_rows.find(m);
        auto di = diag_rows.find(d);
        if (mi == med_rows.end()) throw UnknownCode("medication not in checkpoint: " + m);
        if (di == diag_rows.end()) throw UnknownCode("diagnosis not in checkpoint: " + d);
        rows.emplace_back(mi->second, di->second);
        row_set.insert(pack_pair(mi->second, di->second));
    }
    if (rows.empty()) throw EmptyDomain("no indication pairs to align on");

    PredicateNet* net_i = nullptr;
    for (auto& n : ckpt.nets)
        if (n.name() == "indication") net_i = &n;
    if (!net_i) throw ParseError("checkpoint has no indication predicate");

    AdamConfig acfg;
    acfg.lr = opts.learning_rate;
    AdamState opt_net, opt_med, opt_diag;
    AggregationConfig agg{opts.p_forall, opts.p_sat};
    Rng rng(opts.rng_seed);
    LogicTape tape;

    AlignOutputs out;
    double best_sat = -1.0;
    EmbeddingTable best_med = ckpt.medication;
    EmbeddingTable best_diag = ckpt.diagnosis;
    std::int64_t best_epoch = 0;

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        Rng step_rng(rng.next());
        std::vector<IndexPair> pos;
        if (rows.size() <= opts.align_pair_cap) {
            pos = rows;
        } else {
            auto idx = step_rng.sample_without_replacement(static_cast<std::uint32_t>(rows.size()),
                                                           opts.align_pair_cap);
            for (auto i : idx) pos.push_back(rows[i]);
        }
        std::vector<IndexPair> neg;
        const std::uint64_t domain =
            ckpt.medication.rows() * ckpt.diagnosis.rows() - row_set.size();
        std::unordered_set<std::uint64_t> taken;
        while (neg.size() < std::min<std::uint64_t>(pos.size(), domain)) {
            NodeIndex m = static_cast<NodeIndex>(step_rng.below(ckpt.medication.rows()));
            NodeIndex d = static_cast<NodeIndex>(step_rng.below(ckpt.diagnosis.rows()));
            const std::uint64_t key = pack_pair(m, d);
            if (row_set.count(key) || !taken.insert(key).second) continue;
            neg.emplace_back(m, d);
        }

        tape.clear();
        MlpIndicationEvaluator ev(tape, ckpt.medication, ckpt.diagnosis, *net_i);
        SatReport report = eval_indication_axioms(tape, pos, neg, ev, agg);
        if (!std::isfinite(report.loss))
            throw DivergenceError("alignment loss is not finite; lower the learning rate");
        out.indication_sats.push_back(report.aggregated);

        tape.backward(report.loss_node);
        ckpt.medication.zero_grads();
        ckpt.diagnosis.zero_grads();
        net_i->zero_grads();
        ev.flush_gradients(opts.freeze_embeddings);
        adam_step(net_i->params(), net_i->grads(), opt_net, acfg);
        if (!opts.freeze_embeddings) {
            adam_step(ckpt.medication.values(), ckpt.medication.grads(), opt_med, acfg);
            adam_step(ckpt.diagnosis.values(), ckpt.diagnosis.grads(), opt_diag, acfg);
        }

        if (report.aggregated > best_sat) {
            best_sat = report.aggregated;
            best_med = ckpt.medication;
            best_diag = ckpt.diagnosis;
            best_epoch = epoch;
        }
    }

    ckpt.medication = best_med;
    ckpt.diagnosis = best_diag;
    ckpt.alignment_epoch = best_epoch;
    ckpt.sat_scores.indication = best_sat;

    out.checkpoint_path = join(opts.out_dir, "checkpoint.omr");
    out.embeddings_path = join(opts.out_dir, "embeddings.tsv");
    out.manifest_path = join(opts.out_dir, "manifest.json");
    save_checkpoint(ckpt, out.checkpoint_path);
    export_embeddings(ckpt, out.embeddings_path);
    manifest.output(out.checkpoint_path);
    manifest.output(out.embeddings_path);
    manifest.write(out.manifest_path);
    return out;
}

void run_export(const ExportOptions& opts) {
    ModelCheckpoint ckpt = load_checkpoint(opts.checkpoint);
    export_embeddings(ckpt, opts.out_path);
    ManifestWriter manifest("export", 0);
    manifest.input(opts.checkpoint);
    manifest.output(opts.out_path);
    manifest.write(opts.out_path + ".manifest.json");
}

GenerateOutputs run_generate(const GenerateOptions& opts) {
    ensure_dir(opts.out_dir);
    Rng rng(opts.rng_seed);

    OntologySpec spec;
    spec.kind = OntologyKind::diagnosis;
    spec.prefix = "D";
    spec.n_nodes = opts.diagnosis_nodes;
    spec.max_depth = opts.diagnosis_depth;
    OntologyDag diag = gen_ontology(spec, rng.child(1).next());
    spec.kind = OntologyKind::procedure;
    spec.prefix = "P";
    spec.n_nodes = opts.procedure_nodes;
    spec.max_depth = opts.procedure_depth;
    OntologyDag proc = gen_ontology(spec, rng.child(2).next());
    spec.kind = OntologyKind::medication;
    spec.prefix = "M";
    spec.n_nodes = opts.medication_nodes;
    spec.max_depth = opts.medication_depth;
    OntologyDag med = gen_ontology(spec, rng.child(3).next());

    IndicationGen ind = gen_indications(med, diag, opts.med_vocab, opts.themes_per_group,
                                        rng.child(4).next());

    EhrGenConfig ecfg;
    ecfg.n_patients = opts.patients;
    ecfg.zipf_s = opts.zipf_s;
    ecfg.indication_inject_p = opts.indication_inject_p;
    ecfg.rng_seed = rng.child(5).next();
    EhrDataset data;
    EhrGenManifest emanifest = gen_synthetic_ehr(diag, proc, ind, ecfg, data);

    std::vector<IdPair> ddi = gen_ddi_pairs(ind.med_vocab, opts.ddi_rate, rng.child(6).next());

    GenerateOutputs out;
    out.diagnosis_path = join(opts.out_dir, "diagnosis.tsv");
    out.procedure_path = join(opts.out_dir, "procedure.tsv");
    out.medication_path = join(opts.out_dir, "medication.tsv");
    out.indications_path = join(opts.out_dir, "indications.tsv");
    out.ehr_path = join(opts.out_dir, "ehr.txt");
    out.ddi_path = join(opts.out_dir, "ddi.tsv");
    out.manifest_path = join(opts.out_dir, "manifest.json");
    out.ehr_manifest = emanifest;

    save_ontology(diag, out.diagnosis_path);
    save_ontology(proc, out.procedure_path);
    save_ontology(med, out.medication_path);
    save_indications(ind.pairs, out.indications_path);
    save_ehr(data, out.ehr_path);
    save_ddi_pairs(ddi, out.ddi_path);

    ManifestWriter manifest("generate", opts.rng_seed);
    {
        json cfg = json::parse(emanifest.to_json());
        cfg["diagnosis_nodes"] = opts.diagnosis_nodes;
        cfg["procedure_nodes"] = opts.procedure_nodes;
        cfg["medication_nodes"] = opts.medication_nodes;
        cfg["med_vocab"] = opts.med_vocab;
        cfg["themes_per_group"] = opts.themes_per_group;
        cfg["ddi_rate"] = opts.ddi_rate;
        cfg["indication_pairs"] = ind.pairs.size();
        cfg["ddi_pairs"] = ddi.size();
        manifest.config(cfg);
    }
    manifest.output(out.diagnosis_path);
    manifest.output(out.procedure_path);
    manifest.output(out.medication_path);
    manifest.output(out.indications_path);
    manifest.output(out.ehr_path);
    manifest.output(out.ddi_path);
    manifest.write(out.manifest_path);
    return out;
}

EvalOutputs run_eval(const EvalOptions& opts) {
    if (opts.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (opts.bootstrap_rounds <= 0) throw ConfigError("bootstrap rounds must be positive");
    if (opts.few_shot_min < 1) throw ConfigError("few_shot_min must be >= 1");
    ensure_dir(opts.out_dir);

    ManifestWriter manifest("eval", opts.rng_seed);
    manifest.input(opts.diagnosis_ontology);
    manifest.input(opts.procedure_ontology);
    manifest.input(opts.medication_ontology);
    manifest.input(opts.embeddings);
    manifest.input(opts.ehr);
    manifest.input(opts.ddi);
    {
        json cfg;
        cfg["epochs"] = opts.epochs;
        cfg["learning_rate"] = opts.learning_rate;
        cfg["threshold"] = opts.threshold;
        cfg["tail_percentage"] = opts.tail_percentage;
        cfg["few_shot_min"] = opts.few_shot_min;
        cfg["bootstrap_rounds"] = opts.bootstrap_rounds;
        cfg["rng_seed"] = opts.rng_seed;
        manifest.config(cfg);
    }

    OntologyDag diag = load_ontology(opts.diagnosis_ontology, OntologyKind::diagnosis);
    OntologyDag proc = load_ontology(opts.procedure_ontology, OntologyKind::procedure);
    OntologyDag med = load_ontology(opts.medication_ontology, OntologyKind::medication);
    EhrDataset data = load_ehr(opts.ehr, diag, proc, med);
    DdiMatrix D = load_ddi(opts.ddi, data.med_vocab);
    EmbeddingExport emb = load_embeddings(opts.embeddings);

    Rng rng(opts.rng_seed);
    SplitSpec split = split_dataset(data, opts.tail_percentage, rng.child(1).next(),
                                    opts.few_shot_min);

    RecommenderConfig rcfg;
    rcfg.dim = emb.dim;
    rcfg.epochs = opts.epochs;
    rcfg.learning_rate = opts.learning_rate;
    rcfg.threshold = opts.threshold;
    rcfg.rng_seed = rng.child(2).next();

    ReferenceModel random_model =
        train_reference_model(data, split, diag, proc, nullptr, rcfg);
    ReferenceModel pretrained_model =
        train_reference_model(data, split, diag, proc, &emb, rcfg);

    const std::uint64_t eval_seed = rng.child(3).next();
    EvalReport random_report = evaluate(random_model, data, split, D, opts.bootstrap_rounds, eval_seed);
    EvalReport pretrained_report =
        evaluate(pretrained_model, data, split, D, opts.bootstrap_rounds, eval_seed);

    EvalOutputs out;
    out.rows = {
        {"ref-full", "random", random_report.full.jaccard, random_report.full.f1,
         random_report.full.ddi, random_report.full.avg_drugs},
        {"ref-full", "pretrained", pretrained_report.full.jaccard, pretrained_report.full.f1,
         pretrained_report.full.ddi, pretrained_report.full.avg_drugs},
        {"ref-fewshot", "random", random_report.few_shot.jaccard, random_report.few_shot.f1,
         random_report.few_shot.ddi, random_report.few_shot.avg_drugs},
        {"ref-fewshot", "pretrained", pretrained_report.few_shot.jaccard,
         pretrained_report.few_shot.f1, pretrained_report.few_shot.ddi,
         pretrained_report.few_shot.avg_drugs},
    };
    for (const auto& w : random_report.warnings) out.warnings.push_back("random: " + w);
    for (const auto& w : pretrained_report.warnings) out.warnings.push_back("pretrained: " + w);

    out.report_path = join(opts.out_dir, "report.tsv");
    out.manifest_path = join(opts.out_dir, "manifest.json");
    {
        std::ofstream rep(out.report_path, std::ios::binary);
        if (!rep) throw IoError("cannot write report: " + out.report_path);
        rep << format_report(out.rows);
    }
    manifest.output(out.report_path);
    manifest.write(out.manifest_path);
    return out;
}

std::vector<CheckResult> run_check(const CheckOptions& opts) { return run_self_checks(opts.self); }

}  // namespace omr
