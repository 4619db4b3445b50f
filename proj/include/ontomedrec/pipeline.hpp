#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ontomedrec/recommender.hpp"
#include "ontomedrec/selfcheck.hpp"
#include "ontomedrec/synth.hpp"
#include "ontomedrec/trainer.hpp"

namespace omr {

// FNV-1a 64 content digest, hex-encoded; good enough to detect input drift.
std::string file_digest(const std::string& path);

// Runs record their command, config, seeds, input digests and outputs in a
// manifest.json written atomically next to the outputs.
bool verify_manifest(const std::string& manifest_path);

struct PretrainOptions {
    std::string diagnosis_ontology;
    std::string procedure_ontology;
    std::string medication_ontology;
    std::string indications;
    std::string out_dir;
    TrainConfig train;
};

struct PretrainOutputs {
    std::string checkpoint_path;
    std::string embeddings_path;
    std::string epoch_log_path;
    std::string manifest_path;
    std::vector<EpochLogEntry> logs;
};

PretrainOutputs run_pretrain(const PretrainOptions& opts);

struct AlignOptions {
    std::string checkpoint;
    std::string diagnosis_ontology;
    std::string medication_ontology;
    std::string indications;
    std::string out_dir;
    int epochs = 50;
    double learning_rate = 1e-3;
    double p_forall = 2.0;
    double p_sat = 2.0;
    std::uint32_t align_pair_cap = 1024;
    bool freeze_embeddings = false;
    std::uint64_t rng_seed = 42;
};

struct AlignOutputs {
    std::string checkpoint_path;
    std::string embeddings_path;
    std::string manifest_path;
    std::vector<double> indication_sats;  // per epoch
};

AlignOutputs run_align(const AlignOptions& opts);

struct ExportOptions {
    std::string checkpoint;
    std::string out_path;
};

void run_export(const ExportOptions& opts);

struct GenerateOptions {
    std::string out_dir;
    std::size_t diagnosis_nodes = 300;
    std::size_t procedure_nodes = 120;
    std::size_t medication_nodes = 260;
    std::size_t diagnosis_depth = 7;
    std::size_t procedure_depth = 4;
    std::size_t medication_depth = 5;
    std::size_t med_vocab = 120;
    std::size_t themes_per_group = 2;
    std::size_t patients = 1000;
    double zipf_s = 1.1;
    double indication_inject_p = 0.9;
    double ddi_rate = 0.08;
    std::uint64_t rng_seed = 7;
};

struct GenerateOutputs {
    std::string diagnosis_path;
    std::string procedure_path;
    std::string medication_path;
    std::string indications_path;
    std::string ehr_path;
    std::string ddi_path;
    std::string manifest_path;
    EhrGenManifest ehr_manifest;
};

GenerateOutputs run_generate(const GenerateOptions& opts);

struct EvalOptions {
    std::string diagnosis_ontology;
    std::string procedure_ontology;
    std::string medication_ontology;
    std::string embeddings;
    std::string ehr;
    std::string ddi;
    std::string out_dir;
    int epochs = 20;
    double learning_rate = 1e-2;
    double threshold = 0.5;
    double tail_percentage = 30.0;
    int few_shot_min = 2;
    int bootstrap_rounds = 10;
    std::uint64_t rng_seed = 1;
};

struct EvalOutputs {
    std::string report_path;
    std::string manifest_path;
    std::vector<ReportRow> rows;
    std::vector<std::string> warnings;
};

EvalOutputs run_eval(const EvalOptions& opts);

struct CheckOptions {
    SelfCheckOptions self;
};

std::vector<CheckResult> run_check(const CheckOptions& opts);

}  // namespace omr
