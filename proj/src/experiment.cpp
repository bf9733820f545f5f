#include "ncood/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <optional>
#include <set>
#include <thread>

#include "ncood/ddu.hpp"
#include "ncood/errors.hpp"
#include "ncood/io.hpp"
#include "ncood/ood_eval.hpp"

namespace fs = std::filesystem;

namespace ncood {

namespace {

// ---------------------------------------------------------------------------
// Enum <-> string plumbing for the config schema.

std::string activation_name(Activation a) {
    return a == Activation::Rectifier ? "standard-rectifier" : "leaky-rectifier";
}

Activation parse_activation(const std::string& text) {
    if (text == "standard-rectifier") return Activation::Rectifier;
    if (text == "leaky-rectifier") return Activation::LeakyRectifier;
    throw InvalidInputError("unknown activation '" + text + "'");
}

std::string loss_mode_name(LossMode mode) {
    return mode == LossMode::CrossEntropy ? "cross-entropy" : "nc-loss";
}

LossMode parse_loss_mode(const std::string& text) {
    if (text == "cross-entropy") return LossMode::CrossEntropy;
    if (text == "nc-loss") return LossMode::NcLoss;
    throw InvalidInputError("unknown loss mode '" + text + "'");
}

// ---------------------------------------------------------------------------
// CSV layout. Header strings and the row formatters live together so a
// column change cannot go out of sync.

const char* kResultsHeader =
    "condition,seed,final_ce_loss,final_train_accuracy,id_accuracy,auroc_gmm_feature,"
    "auroc_gmm_logit,auroc_softmax,false_positive_count,nc1,en_means,en_classifier,ea_means,"
    "ea_classifier,nc3,nc4_error";

const std::vector<std::string> kSummaryMetrics = {
    "final_ce_loss", "final_train_accuracy", "id_accuracy",    "auroc_gmm_feature",
    "auroc_gmm_logit", "auroc_softmax",      "false_positive_count", "nc1",
    "en_means",      "en_classifier",        "ea_means",       "ea_classifier",
    "nc3",           "nc4_error"};

const char* kNcTraceHeader =
    "condition,seed,epoch,learning_rate,ce_loss,train_accuracy,nc1,en_means,en_classifier,"
    "ea_means,ea_classifier,nc3,nc4_error";

const char* kEvalCurveHeader =
    "condition,seed,epoch,auroc_gmm_feature,auroc_gmm_logit,auroc_softmax,"
    "false_positive_count,id_accuracy,ea_means,nc1";

std::string join_fields(const std::vector<std::string>& fields) {
    std::string row;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) row.push_back(',');
        row += csv_field(fields[i]);
    }
    return row;
}

// ---------------------------------------------------------------------------
// Per-unit work product; workers fill these, the main thread assembles them
// in a fixed order so the artifact bytes never depend on scheduling.

struct ResultRow {
    std::string condition;
    std::string csv;
    std::vector<double> metrics; // aligned with kSummaryMetrics
};

struct UnitOutput {
    std::string condition; // condition of the unit itself
    std::uint64_t seed = 0;
    std::string status = "ok";
    std::vector<ResultRow> results;
    std::vector<std::string> nc_trace_rows;
    std::vector<std::string> eval_curve_rows;
    std::vector<std::pair<std::string, std::string>> files; // name -> bytes
};

struct Condition {
    std::string name;
    MlpOptions options;
};

std::vector<Condition> experiment_conditions(const ExperimentConfig& config) {
    if (config.kind != ExperimentKind::AblationGrid) {
        return {{"default", config.model_options}};
    }
    std::vector<Condition> conditions;
    for (int l2 = 0; l2 <= 1; ++l2) {
        for (int sn = 0; sn <= 1; ++sn) {
            for (int leaky = 0; leaky <= 1; ++leaky) {
                Condition cond;
                cond.name = "l2=" + std::to_string(l2) + "_sn=" + std::to_string(sn) +
                            "_leaky=" + std::to_string(leaky);
                cond.options = config.model_options;
                cond.options.l2_normalize_features = l2 == 1;
                cond.options.spectral_normalize = sn == 1;
                cond.options.activation = leaky == 1 ? Activation::LeakyRectifier
                                                     : Activation::Rectifier;
                conditions.push_back(std::move(cond));
            }
        }
    }
    return conditions;
}

// ---------------------------------------------------------------------------
// Scorer evaluation shared by every experiment kind.

struct EvalOutcome {
    double auroc_feature = 0.0;
    double auroc_logit = 0.0;
    double auroc_softmax = 0.0;
    std::size_t false_positives = 0;
    double id_accuracy = 0.0;
    GaussianMixtureDensity gmm_feature;
    GaussianMixtureDensity gmm_logit;
};

EvalOutcome evaluate_scorers(const MlpClassifier& model, const SyntheticData& data) {
    const ForwardResult train_fwd = forward(model, data.train.features);
    const FeatureBank feature_bank(train_fwd.features, data.train.labels, data.train.num_classes);
    const FeatureBank logit_bank(train_fwd.logits, data.train.labels, data.train.num_classes);

    EvalOutcome out;
    out.gmm_feature = fit_gmm(feature_bank, SpaceTag::FeatureSpace);
    out.gmm_logit = fit_gmm(logit_bank, SpaceTag::LogitSpace);

    const ForwardResult id_fwd = forward(model, data.id_test.features);
    const ForwardResult ood_fwd = forward(model, data.ood_test);

    ScoredPopulations feature_pop{log_density(out.gmm_feature, id_fwd.features),
                                  log_density(out.gmm_feature, ood_fwd.features),
                                  ScoreSource::GmmFeature};
    ScoredPopulations logit_pop{log_density(out.gmm_logit, id_fwd.logits),
                                log_density(out.gmm_logit, ood_fwd.logits),
                                ScoreSource::GmmLogit};
    ScoredPopulations softmax_pop{softmax_max_score(id_fwd.logits),
                                  softmax_max_score(ood_fwd.logits), ScoreSource::SoftmaxMax};

    out.auroc_feature = auroc(feature_pop);
    out.auroc_logit = auroc(logit_pop);
    out.auroc_softmax = auroc(softmax_pop);
    out.false_positives = false_positive_count(feature_pop);
    out.id_accuracy = classification_accuracy(id_fwd.logits, data.id_test.labels);
    return out;
}

std::string eval_curve_row(const std::string& condition, std::uint64_t seed, int epoch,
                           const EvalOutcome& eval, const NcReport& nc) {
    return join_fields({condition, std::to_string(seed), std::to_string(epoch),
                        format_double(eval.auroc_feature), format_double(eval.auroc_logit),
                        format_double(eval.auroc_softmax), std::to_string(eval.false_positives),
                        format_double(eval.id_accuracy), format_double(nc.ea_means),
                        format_double(nc.nc1)});
}

std::string nc_trace_row(const std::string& condition, std::uint64_t seed, int epoch,
                         const EpochRecord& rec) {
    return join_fields({condition, std::to_string(seed), std::to_string(epoch),
                        format_double(rec.learning_rate), format_double(rec.ce_loss),
                        format_double(rec.accuracy), format_double(rec.nc.nc1),
                        format_double(rec.nc.en_means), format_double(rec.nc.en_classifier),
                        format_double(rec.nc.ea_means), format_double(rec.nc.ea_classifier),
                        format_double(rec.nc.nc3), format_double(rec.nc.nc4_error)});
}

ResultRow make_result_row(const std::string& condition, std::uint64_t seed,
                          const EpochRecord& last, const EvalOutcome& eval) {
    ResultRow row;
    row.condition = condition;
    row.metrics = {last.ce_loss,
                   last.accuracy,
                   eval.id_accuracy,
                   eval.auroc_feature,
                   eval.auroc_logit,
                   eval.auroc_softmax,
                   static_cast<double>(eval.false_positives),
                   last.nc.nc1,
                   last.nc.en_means,
                   last.nc.en_classifier,
                   last.nc.ea_means,
                   last.nc.ea_classifier,
                   last.nc.nc3,
                   last.nc.nc4_error};
    std::vector<std::string> fields{condition, std::to_string(seed)};
    for (std::size_t i = 0; i < row.metrics.size(); ++i) {
        // The false-positive column is an integer count.
        if (kSummaryMetrics[i] == "false_positive_count") {
            fields.push_back(std::to_string(eval.false_positives));
        } else {
            fields.push_back(format_double(row.metrics[i]));
        }
    }
    row.csv = join_fields(fields);
    return row;
}

std::string seed_file_prefix(const std::string& condition, std::uint64_t seed) {
    return condition + "_seed_" + std::to_string(seed);
}

void add_gmm_artifacts(UnitOutput& out, const std::string& prefix, const EvalOutcome& eval) {
    out.files.emplace_back(prefix + "_gmm_feature.json", gmm_to_json(eval.gmm_feature).dump(2) + "\n");
    out.files.emplace_back(prefix + "_gmm_logit.json", gmm_to_json(eval.gmm_logit).dump(2) + "\n");
}

void add_data_artifacts(UnitOutput& out, std::uint64_t seed, const SyntheticData& data) {
    const std::string prefix = "seed_" + std::to_string(seed);
    out.files.emplace_back(prefix + "_train.ncfb", encode_ncfb(data.train));
    out.files.emplace_back(prefix + "_id_test.ncfb", encode_ncfb(data.id_test));
    // OoD probes carry no labels; stored as a single-class bank.
    const FeatureBank ood_bank(data.ood_test,
                               std::vector<int>(static_cast<std::size_t>(data.ood_test.rows()), 0),
                               1);
    out.files.emplace_back(prefix + "_ood_test.ncfb", encode_ncfb(ood_bank));
}

// ---------------------------------------------------------------------------
// Unit runners.

// train-eval / baseline-compare / ablation-grid / overtrain-sweep all share
// this shape: one full training run, scorer evaluations at the checkpoint
// epochs, a final evaluation into results.csv.
UnitOutput run_standard_unit(const ExperimentConfig& config, const Condition& cond,
                             std::uint64_t seed, bool emit_data) {
    UnitOutput out;
    out.condition = cond.name;
    out.seed = seed;
    try {
        SyntheticSpec spec = config.data;
        spec.seed = derive_seed(seed, "data");
        const SyntheticData data = generate(spec);
        if (emit_data) add_data_artifacts(out, seed, data);

        Rng model_rng(derive_seed(seed, "model"));
        MlpClassifier model =
            make_mlp(config.layer_dims, config.data.num_classes, cond.options, model_rng);

        TrainConfig tc = config.train_template;
        tc.seed = derive_seed(seed, "train");

        const std::set<int> checkpoints(config.checkpoint_epochs.begin(),
                                        config.checkpoint_epochs.end());
        const EpochCallback callback = [&](int epoch, const MlpClassifier& m,
                                           const EpochRecord& rec) {
            if (checkpoints.count(epoch)) {
                const EvalOutcome eval = evaluate_scorers(m, data);
                out.eval_curve_rows.push_back(eval_curve_row(cond.name, seed, epoch, eval, rec.nc));
            }
        };

        const TrainTrace trace = train(model, data.train, tc, WeightInit::FromSeed, callback);
        for (std::size_t e = 0; e < trace.epochs.size(); ++e) {
            out.nc_trace_rows.push_back(
                nc_trace_row(cond.name, seed, static_cast<int>(e), trace.epochs[e]));
        }

        const EvalOutcome final_eval = evaluate_scorers(model, data);
        out.results.push_back(make_result_row(cond.name, seed, trace.epochs.back(), final_eval));

        const std::string prefix = seed_file_prefix(cond.name, seed);
        out.files.emplace_back(prefix + "_final.ncck", encode_checkpoint(model));
        add_gmm_artifacts(out, prefix, final_eval);
    } catch (const TrainingDivergedError& e) {
        out.status = "diverged: " + std::string(e.what());
        out.results.clear();
        out.nc_trace_rows.clear();
        out.eval_curve_rows.clear();
        out.files.clear();
    } catch (const std::exception& e) {
        out.status = "failed: " + std::string(e.what());
        out.results.clear();
        out.nc_trace_rows.clear();
        out.eval_curve_rows.clear();
        out.files.clear();
    }
    return out;
}

// Intervention: a base run to the branch point, then a cross-entropy
// control arm and an nc-loss intervention arm continued from the identical
// checkpoint, both at a reduced learning rate with one decay step inside
// the continuation. Scorers are evaluated every continuation epoch.
UnitOutput run_intervention_unit(const ExperimentConfig& config, std::uint64_t seed,
                                 bool emit_data) {
    UnitOutput out;
    out.condition = "default";
    out.seed = seed;
    try {
        SyntheticSpec spec = config.data;
        spec.seed = derive_seed(seed, "data");
        const SyntheticData data = generate(spec);
        if (emit_data) add_data_artifacts(out, seed, data);

        Rng model_rng(derive_seed(seed, "model"));
        MlpClassifier base =
            make_mlp(config.layer_dims, config.data.num_classes, config.model_options, model_rng);

        const InterventionSettings& iv = config.intervention;
        TrainConfig base_tc = config.train_template;
        base_tc.seed = derive_seed(seed, "train");
        base_tc.epochs = iv.checkpoint_epoch;
        base_tc.lr_milestones.clear();
        double branch_lr = base_tc.initial_lr;
        for (int milestone : config.train_template.lr_milestones) {
            if (milestone < iv.checkpoint_epoch) {
                base_tc.lr_milestones.push_back(milestone);
                branch_lr *= base_tc.lr_decay;
            }
        }

        const TrainTrace base_trace = train(base, data.train, base_tc, WeightInit::FromSeed);
        for (std::size_t e = 0; e < base_trace.epochs.size(); ++e) {
            out.nc_trace_rows.push_back(
                nc_trace_row("base", seed, static_cast<int>(e), base_trace.epochs[e]));
        }
        out.files.emplace_back("seed_" + std::to_string(seed) + "_branch.ncck",
                               encode_checkpoint(base));

        struct Arm {
            const char* name;
            LossMode loss;
        };
        for (const Arm& arm : {Arm{"control", LossMode::CrossEntropy},
                               Arm{"intervention", LossMode::NcLoss}}) {
            TrainConfig arm_tc = config.train_template;
            arm_tc.seed = derive_seed(seed, arm.name);
            arm_tc.epochs = iv.epochs;
            arm_tc.initial_lr = branch_lr * iv.lr_scale;
            arm_tc.lr_milestones.clear();
            if (iv.lr_step_after > 0 && iv.lr_step_after < iv.epochs) {
                arm_tc.lr_milestones.push_back(iv.lr_step_after);
            }
            arm_tc.loss_mode = arm.loss;
            arm_tc.class_balanced_batches = true;

            MlpClassifier arm_model = base;
            const EpochCallback callback = [&](int epoch, const MlpClassifier& m,
                                               const EpochRecord& rec) {
                const EvalOutcome eval = evaluate_scorers(m, data);
                out.eval_curve_rows.push_back(eval_curve_row(arm.name, seed, epoch, eval, rec.nc));
            };
            const TrainTrace arm_trace =
                train(arm_model, data.train, arm_tc, WeightInit::Keep, callback);
            for (std::size_t e = 0; e < arm_trace.epochs.size(); ++e) {
                out.nc_trace_rows.push_back(
                    nc_trace_row(arm.name, seed, static_cast<int>(e), arm_trace.epochs[e]));
            }

            const EvalOutcome final_eval = evaluate_scorers(arm_model, data);
            out.results.push_back(
                make_result_row(arm.name, seed, arm_trace.epochs.back(), final_eval));
            const std::string prefix = seed_file_prefix(arm.name, seed);
            out.files.emplace_back(prefix + "_final.ncck", encode_checkpoint(arm_model));
            add_gmm_artifacts(out, prefix, final_eval);
        }
    } catch (const TrainingDivergedError& e) {
        out.status = "diverged: " + std::string(e.what());
        out.results.clear();
        out.nc_trace_rows.clear();
        out.eval_curve_rows.clear();
        out.files.clear();
    } catch (const std::exception& e) {
        out.status = "failed: " + std::string(e.what());
        out.results.clear();
        out.nc_trace_rows.clear();
        out.eval_curve_rows.clear();
        out.files.clear();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Summary: per condition, per metric, min/max/mean/std over seeds. Sums run
// left to right in row order so an independent recomputation can match the
// bytes exactly. Population standard deviation.

std::string summary_csv(const std::vector<ResultRow>& rows) {
    std::vector<std::string> condition_order;
    for (const ResultRow& row : rows) {
        if (std::find(condition_order.begin(), condition_order.end(), row.condition) ==
            condition_order.end()) {
            condition_order.push_back(row.condition);
        }
    }

    std::string csv = "condition,count";
    for (const std::string& metric : kSummaryMetrics) {
        csv += "," + metric + "_min," + metric + "_max," + metric + "_mean," + metric + "_std";
    }
    csv.push_back('\n');

    for (const std::string& condition : condition_order) {
        std::vector<const ResultRow*> members;
        for (const ResultRow& row : rows) {
            if (row.condition == condition) members.push_back(&row);
        }
        const auto n = static_cast<double>(members.size());
        std::vector<std::string> fields{condition, std::to_string(members.size())};
        for (std::size_t m = 0; m < kSummaryMetrics.size(); ++m) {
            double lo = members.front()->metrics[m];
            double hi = lo;
            double sum = 0.0;
            for (const ResultRow* row : members) {
                lo = std::min(lo, row->metrics[m]);
                hi = std::max(hi, row->metrics[m]);
                sum += row->metrics[m];
            }
            const double mean = sum / n;
            double sq_dev = 0.0;
            for (const ResultRow* row : members) {
                sq_dev += (row->metrics[m] - mean) * (row->metrics[m] - mean);
            }
            const double std_dev = std::sqrt(sq_dev / n);
            fields.push_back(format_double(lo));
            fields.push_back(format_double(hi));
            fields.push_back(format_double(mean));
            fields.push_back(format_double(std_dev));
        }
        csv += join_fields(fields);
        csv.push_back('\n');
    }
    return csv;
}

} // namespace

// ---------------------------------------------------------------------------

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::TrainEval: return "train-eval";
        case ExperimentKind::AblationGrid: return "ablation-grid";
        case ExperimentKind::Intervention: return "intervention";
        case ExperimentKind::OvertrainSweep: return "overtrain-sweep";
        case ExperimentKind::BaselineCompare: return "baseline-compare";
    }
    return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& text) {
    if (text == "train-eval") return ExperimentKind::TrainEval;
    if (text == "ablation-grid") return ExperimentKind::AblationGrid;
    if (text == "intervention") return ExperimentKind::Intervention;
    if (text == "overtrain-sweep") return ExperimentKind::OvertrainSweep;
    if (text == "baseline-compare") return ExperimentKind::BaselineCompare;
    throw InvalidInputError("unknown experiment kind '" + text + "'");
}

void validate_config(const ExperimentConfig& config) {
    if (config.schema_version != 1) {
        throw InvalidInputError("config: unsupported schema_version " +
                                std::to_string(config.schema_version));
    }
    if (config.seeds.empty()) throw InvalidInputError("config: seeds must be nonempty");
    std::set<std::uint64_t> distinct(config.seeds.begin(), config.seeds.end());
    if (distinct.size() != config.seeds.size()) {
        throw InvalidInputError("config: seeds must be distinct");
    }
    if (config.layer_dims.size() < 2) {
        throw InvalidInputError("config: model.layer_dims needs input and feature dims");
    }
    if (config.layer_dims.front() != config.data.input_dim) {
        throw InvalidInputError("config: model.layer_dims[0] must equal data.input_dim");
    }
    validate_train_config(config.train_template);
    for (int epoch : config.checkpoint_epochs) {
        if (epoch < 0 || epoch >= config.train_template.epochs) {
            throw InvalidInputError("config: checkpoint epoch " + std::to_string(epoch) +
                                    " outside [0, epochs)");
        }
    }
    if (config.kind == ExperimentKind::Intervention) {
        const InterventionSettings& iv = config.intervention;
        if (iv.checkpoint_epoch < 1 || iv.checkpoint_epoch >= config.train_template.epochs) {
            throw InvalidInputError(
                "config: intervention.checkpoint_epoch must lie in [1, train.epochs)");
        }
        if (iv.epochs < 1) throw InvalidInputError("config: intervention.epochs must be >= 1");
        if (iv.lr_scale <= 0.0) {
            throw InvalidInputError("config: intervention.lr_scale must be positive");
        }
    }
    if (config.output_dir.empty()) throw InvalidInputError("config: output_dir must be set");
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig config;
    try {
        config.schema_version = j.at("schema_version").get<int>();
        config.kind = parse_experiment_kind(j.at("experiment_kind").get<std::string>());

        const auto& data = j.at("data");
        config.data.num_classes = data.at("num_classes").get<int>();
        config.data.input_dim = data.at("input_dim").get<int>();
        config.data.samples_per_class = data.at("samples_per_class").get<int>();
        config.data.cluster_spread = data.at("cluster_spread").get<double>();
        config.data.class_separation = data.at("class_separation").get<double>();
        config.data.ood_kind = parse_ood_kind(data.at("ood_kind").get<std::string>());
        config.data.ood_samples = data.at("ood_samples").get<int>();
        if (data.contains("ood_shift_factor")) {
            config.data.ood_shift_factor = data.at("ood_shift_factor").get<double>();
        }

        const auto& model = j.at("model");
        config.layer_dims = model.at("layer_dims").get<std::vector<int>>();
        config.model_options.activation =
            parse_activation(model.value("activation", std::string("standard-rectifier")));
        config.model_options.leaky_slope = model.value("leaky_slope", 0.01);
        config.model_options.l2_normalize_features = model.value("l2_normalize_features", false);
        config.model_options.l2_epsilon = model.value("l2_epsilon", 1e-12);
        config.model_options.spectral_normalize = model.value("spectral_normalize", false);
        config.model_options.spectral_iterations = model.value("spectral_iterations", 1);

        const auto& tr = j.at("train");
        config.train_template.epochs = tr.at("epochs").get<int>();
        config.train_template.batch_size = tr.at("batch_size").get<int>();
        config.train_template.initial_lr = tr.at("initial_lr").get<double>();
        config.train_template.lr_milestones = tr.value("lr_milestones", std::vector<int>{});
        config.train_template.lr_decay = tr.value("lr_decay", 0.1);
        config.train_template.loss_mode =
            parse_loss_mode(tr.value("loss_mode", std::string("cross-entropy")));
        config.train_template.class_balanced_batches = tr.value("class_balanced_batches", false);

        config.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
        config.checkpoint_epochs = j.value("checkpoint_epochs", std::vector<int>{});
        std::sort(config.checkpoint_epochs.begin(), config.checkpoint_epochs.end());
        config.checkpoint_epochs.erase(
            std::unique(config.checkpoint_epochs.begin(), config.checkpoint_epochs.end()),
            config.checkpoint_epochs.end());
        config.output_dir = j.value("output_dir", std::string("out"));

        if (j.contains("intervention")) {
            const auto& iv = j.at("intervention");
            config.intervention.checkpoint_epoch = iv.at("checkpoint_epoch").get<int>();
            config.intervention.epochs = iv.value("epochs", 20);
            config.intervention.lr_scale = iv.value("lr_scale", 0.1);
            config.intervention.lr_step_after = iv.value("lr_step_after", 10);
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInputError(std::string("config: malformed document: ") + e.what());
    }
    validate_config(config);
    return config;
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
    nlohmann::json j;
    j["schema_version"] = config.schema_version;
    j["experiment_kind"] = to_string(config.kind);
    j["data"] = {{"num_classes", config.data.num_classes},
                 {"input_dim", config.data.input_dim},
                 {"samples_per_class", config.data.samples_per_class},
                 {"cluster_spread", config.data.cluster_spread},
                 {"class_separation", config.data.class_separation},
                 {"ood_kind", to_string(config.data.ood_kind)},
                 {"ood_samples", config.data.ood_samples},
                 {"ood_shift_factor", config.data.ood_shift_factor}};
    j["model"] = {{"layer_dims", config.layer_dims},
                  {"activation", activation_name(config.model_options.activation)},
                  {"leaky_slope", config.model_options.leaky_slope},
                  {"l2_normalize_features", config.model_options.l2_normalize_features},
                  {"l2_epsilon", config.model_options.l2_epsilon},
                  {"spectral_normalize", config.model_options.spectral_normalize},
                  {"spectral_iterations", config.model_options.spectral_iterations}};
    j["train"] = {{"epochs", config.train_template.epochs},
                  {"batch_size", config.train_template.batch_size},
                  {"initial_lr", config.train_template.initial_lr},
                  {"lr_milestones", config.train_template.lr_milestones},
                  {"lr_decay", config.train_template.lr_decay},
                  {"loss_mode", loss_mode_name(config.train_template.loss_mode)},
                  {"class_balanced_batches", config.train_template.class_balanced_batches}};
    j["seeds"] = config.seeds;
    j["checkpoint_epochs"] = config.checkpoint_epochs;
    j["output_dir"] = config.output_dir;
    if (config.kind == ExperimentKind::Intervention) {
        j["intervention"] = {{"checkpoint_epoch", config.intervention.checkpoint_epoch},
                             {"epochs", config.intervention.epochs},
                             {"lr_scale", config.intervention.lr_scale},
                             {"lr_step_after", config.intervention.lr_step_after}};
    }
    return j;
}

std::string run_experiment(const ExperimentConfig& config, int jobs) {
    validate_config(config);
    if (jobs < 1) throw InvalidInputError("run_experiment: jobs must be >= 1");

    const std::vector<Condition> conditions = experiment_conditions(config);

    struct Unit {
        std::size_t condition_index;
        std::uint64_t seed;
    };
    std::vector<Unit> units;
    for (std::size_t c = 0; c < conditions.size(); ++c) {
        for (std::uint64_t seed : config.seeds) units.push_back({c, seed});
    }

    std::vector<UnitOutput> outputs(units.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= units.size()) return;
            const Unit& unit = units[i];
            // Only the first condition of each seed emits the NCFB data
            // dumps; the data depends on the seed alone.
            const bool emit_data = unit.condition_index == 0;
            if (config.kind == ExperimentKind::Intervention) {
                outputs[i] = run_intervention_unit(config, unit.seed, emit_data);
            } else {
                outputs[i] = run_standard_unit(config, conditions[unit.condition_index],
                                               unit.seed, emit_data);
            }
        }
    };
    if (jobs == 1 || units.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        const int thread_count = std::min<int>(jobs, static_cast<int>(units.size()));
        pool.reserve(static_cast<std::size_t>(thread_count));
        for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    // Serial assembly in unit order; bytes are independent of the schedule.
    fs::create_directories(config.output_dir);
    const fs::path out_dir(config.output_dir);

    nlohmann::json manifest;
    manifest["schema_version"] = 1;
    manifest["experiment_kind"] = to_string(config.kind);
    manifest["config"] = config_to_json(config);

    std::vector<std::pair<std::string, std::string>> artifacts; // name -> bytes
    artifacts.emplace_back("config.json", config_to_json(config).dump(2) + "\n");

    std::string results_csv = std::string(kResultsHeader) + "\n";
    std::string nc_trace_csv = std::string(kNcTraceHeader) + "\n";
    std::string eval_curve_csv = std::string(kEvalCurveHeader) + "\n";
    std::vector<ResultRow> all_rows;
    nlohmann::json runs = nlohmann::json::array();

    for (const UnitOutput& out : outputs) {
        runs.push_back({{"condition", out.condition},
                        {"seed", out.seed},
                        {"status", out.status}});
        for (const ResultRow& row : out.results) {
            results_csv += row.csv;
            results_csv.push_back('\n');
            all_rows.push_back(row);
        }
        for (const std::string& row : out.nc_trace_rows) {
            nc_trace_csv += row;
            nc_trace_csv.push_back('\n');
        }
        for (const std::string& row : out.eval_curve_rows) {
            eval_curve_csv += row;
            eval_curve_csv.push_back('\n');
        }
        for (const auto& [name, bytes] : out.files) artifacts.emplace_back(name, bytes);
    }

    artifacts.emplace_back("results.csv", results_csv);
    artifacts.emplace_back("summary.csv", summary_csv(all_rows));
    artifacts.emplace_back("nc_trace.csv", nc_trace_csv);
    artifacts.emplace_back("eval_curve.csv", eval_curve_csv);

    nlohmann::json artifact_list = nlohmann::json::array();
    for (const auto& [name, bytes] : artifacts) {
        write_file_bytes((out_dir / name).string(), bytes);
        artifact_list.push_back({{"path", name},
                                 {"sha256", sha256_hex(bytes)},
                                 {"bytes", bytes.size()}});
    }
    manifest["runs"] = runs;
    manifest["artifacts"] = artifact_list;

    const std::string manifest_path = (out_dir / "manifest.json").string();
    write_file_bytes(manifest_path, manifest.dump(2) + "\n");
    return manifest_path;
}

// ---------------------------------------------------------------------------
// Report.

namespace {

// Our CSV files never quote fields, so a plain split is exact.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw IntegrityError("report: column '" + name + "' missing");
    }
};

CsvTable parse_csv(const std::string& bytes) {
    CsvTable table;
    std::size_t start = 0;
    bool first = true;
    while (start < bytes.size()) {
        std::size_t stop = bytes.find('\n', start);
        if (stop == std::string::npos) stop = bytes.size();
        const std::string line = bytes.substr(start, stop - start);
        if (!line.empty()) {
            if (first) {
                table.header = split_csv_line(line);
                first = false;
            } else {
                table.rows.push_back(split_csv_line(line));
            }
        }
        start = stop + 1;
    }
    return table;
}

} // namespace

void write_report(const std::string& manifest_path, const std::string& out_dir) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file_bytes(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInputError(std::string("report: malformed manifest: ") + e.what());
    }
    const fs::path base = fs::path(manifest_path).parent_path();

    std::string nc_trace_bytes;
    std::string eval_curve_bytes;
    try {
        for (const auto& artifact : manifest.at("artifacts")) {
            const std::string name = artifact.at("path").get<std::string>();
            const std::string recorded = artifact.at("sha256").get<std::string>();
            std::string bytes;
            try {
                bytes = read_file_bytes((base / name).string());
            } catch (const IoError&) {
                throw IntegrityError("report: artifact '" + name + "' is missing");
            }
            if (sha256_hex(bytes) != recorded) {
                throw IntegrityError("report: artifact '" + name + "' does not match its hash");
            }
            if (name == "nc_trace.csv") nc_trace_bytes = bytes;
            if (name == "eval_curve.csv") eval_curve_bytes = bytes;
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInputError(std::string("report: malformed manifest: ") + e.what());
    }
    if (nc_trace_bytes.empty() || eval_curve_bytes.empty()) {
        throw IntegrityError("report: manifest lacks nc_trace.csv or eval_curve.csv");
    }

    fs::create_directories(out_dir);
    const fs::path out(out_dir);

    // NC trajectories in long format. Values are copied verbatim from the
    // source so the report is a pure function of the artifact bytes.
    const CsvTable trace = parse_csv(nc_trace_bytes);
    const std::vector<std::string> nc_columns = {"nc1", "en_means", "en_classifier",
                                                 "ea_means", "ea_classifier", "nc3",
                                                 "nc4_error"};
    std::string nc_long = "condition,seed,epoch,metric,value\n";
    {
        const std::size_t cond = trace.column("condition");
        const std::size_t seed = trace.column("seed");
        const std::size_t epoch = trace.column("epoch");
        for (const auto& row : trace.rows) {
            for (const std::string& metric : nc_columns) {
                nc_long += row[cond] + "," + row[seed] + "," + row[epoch] + "," + metric + "," +
                           row[trace.column(metric)] + "\n";
            }
        }
    }
    write_file_bytes((out / "nc_long.csv").string(), nc_long);

    const CsvTable curve = parse_csv(eval_curve_bytes);
    std::string auroc_long = "condition,seed,epoch,auroc_source,auroc\n";
    {
        const std::size_t cond = curve.column("condition");
        const std::size_t seed = curve.column("seed");
        const std::size_t epoch = curve.column("epoch");
        const std::size_t f = curve.column("auroc_gmm_feature");
        const std::size_t l = curve.column("auroc_gmm_logit");
        const std::size_t s = curve.column("auroc_softmax");
        for (const auto& row : curve.rows) {
            const std::string prefix = row[cond] + "," + row[seed] + "," + row[epoch] + ",";
            auroc_long += prefix + "gmm-feature," + row[f] + "\n";
            auroc_long += prefix + "gmm-logit," + row[l] + "\n";
            auroc_long += prefix + "softmax-max," + row[s] + "\n";
        }
    }
    write_file_bytes((out / "auroc_long.csv").string(), auroc_long);

    std::string correlation = "ea_means,auroc_gmm_feature\n";
    std::vector<double> xs;
    std::vector<double> ys;
    {
        const std::size_t x = curve.column("ea_means");
        const std::size_t y = curve.column("auroc_gmm_feature");
        for (const auto& row : curve.rows) {
            correlation += row[x] + "," + row[y] + "\n";
            xs.push_back(std::stod(row[x]));
            ys.push_back(std::stod(row[y]));
        }
    }
    write_file_bytes((out / "correlation.csv").string(), correlation);

    std::string pearson = "n,r\n";
    if (xs.size() >= 2) {
        bool x_varies = false;
        bool y_varies = false;
        for (std::size_t i = 1; i < xs.size(); ++i) {
            x_varies |= xs[i] != xs[0];
            y_varies |= ys[i] != ys[0];
        }
        if (x_varies && y_varies) {
            pearson += std::to_string(xs.size()) + "," + format_double(pearson_r(xs, ys)) + "\n";
        }
    }
    write_file_bytes((out / "pearson.csv").string(), pearson);
}

} // namespace ncood
