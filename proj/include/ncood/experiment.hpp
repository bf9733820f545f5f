#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncood/datagen.hpp"
#include "ncood/model.hpp"
#include "ncood/train.hpp"

namespace ncood {

enum class ExperimentKind { TrainEval, AblationGrid, Intervention, OvertrainSweep, BaselineCompare };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& text);

struct InterventionSettings {
    int checkpoint_epoch = -1; // validated < train epochs
    int epochs = 20;
    double lr_scale = 0.1;  // both arms restart this much below the branch lr
    int lr_step_after = 10; // one further decay inside the continuation
};

struct ExperimentConfig {
    int schema_version = 1;
    ExperimentKind kind = ExperimentKind::TrainEval;
    SyntheticSpec data;           // per-run seed is derived, data.seed ignored
    std::vector<int> layer_dims;  // model template; layer_dims[0] == data.input_dim
    MlpOptions model_options;
    TrainConfig train_template;   // per-run seed is derived, template seed ignored
    std::vector<std::uint64_t> seeds;
    std::vector<int> checkpoint_epochs; // epochs with a scorer evaluation
    std::string output_dir = "out";

    InterventionSettings intervention;
};

// Throws InvalidInputError on schema violations (duplicate seeds, milestone
// out of range, missing intervention checkpoint, ...).
void validate_config(const ExperimentConfig& config);

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);

// Runs every (condition, seed) unit, writes results.csv / summary.csv /
// nc_trace.csv / eval_curve.csv, the NCFB data dumps, NCCK checkpoints and
// GMM JSON files into output_dir, then a manifest.json hashing every
// artifact. Per-unit failures are recorded in the manifest, not fatal.
// Identical configs produce identical bytes for any jobs count. Returns the
// manifest path.
std::string run_experiment(const ExperimentConfig& config, int jobs = 1);

// Verifies every artifact hash in the manifest (IntegrityError on any
// mismatch), then writes plot-ready long-format tables next to it:
// nc_long.csv, auroc_long.csv, correlation.csv, pearson.csv.
void write_report(const std::string& manifest_path, const std::string& out_dir);

} // namespace ncood
