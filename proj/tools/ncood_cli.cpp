#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ncood/datagen.hpp"
#include "ncood/errors.hpp"
#include "ncood/experiment.hpp"
#include "ncood/io.hpp"
#include "ncood/rng.hpp"

namespace {

// Exit codes by failure category; 0 is success, 1 is an uncategorized error.
enum ExitCode : int {
    kOk = 0,
    kUnknown = 1,
    kInvalidInput = 2,
    kDegenerateInput = 3,
    kTrainingDiverged = 4,
    kFitFailed = 5,
    kIo = 6,
    kIntegrity = 7,
};

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string seeds_csv;
    int jobs = 1;
};

void attach_common(CLI::App* cmd, CommonArgs& args, bool with_jobs = true) {
    cmd->add_option("--config", args.config_path, "experiment config JSON")->required();
    cmd->add_option("--out", args.out_dir, "output directory (overrides config)");
    cmd->add_option("--seeds", args.seeds_csv, "comma-separated seed list (overrides config)");
    if (with_jobs) {
        cmd->add_option("--jobs", args.jobs, "parallel seed pipelines")
            ->check(CLI::PositiveNumber);
    }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        const std::string field = text.substr(start, comma - start);
        if (field.empty()) throw ncood::InvalidInputError("--seeds: empty entry in list");
        std::size_t consumed = 0;
        std::uint64_t value = 0;
        try {
            value = std::stoull(field, &consumed);
        } catch (const std::exception&) {
            throw ncood::InvalidInputError("--seeds: '" + field + "' is not an unsigned integer");
        }
        if (consumed != field.size()) {
            throw ncood::InvalidInputError("--seeds: '" + field + "' is not an unsigned integer");
        }
        seeds.push_back(value);
        start = comma + 1;
    }
    return seeds;
}

ncood::ExperimentConfig load_config(const CommonArgs& args) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(ncood::read_file_bytes(args.config_path));
    } catch (const nlohmann::json::exception& e) {
        throw ncood::InvalidInputError("config: malformed JSON: " + std::string(e.what()));
    }
    ncood::ExperimentConfig config = ncood::config_from_json(doc);
    if (!args.out_dir.empty()) config.output_dir = args.out_dir;
    if (!args.seeds_csv.empty()) config.seeds = parse_seed_list(args.seeds_csv);
    return config;
}

int run_kind(const CommonArgs& args, ncood::ExperimentKind kind) {
    ncood::ExperimentConfig config = load_config(args);
    config.kind = kind;
    ncood::validate_config(config);
    const std::string manifest = ncood::run_experiment(config, args.jobs);
    std::printf("wrote %s\n", manifest.c_str());
    return kOk;
}

// Writes the per-seed dataset dumps without training anything. Sub-seeds
// match the experiment pipelines, so these files are byte-identical to the
// dumps a full run would produce for the same config.
int run_generate(const CommonArgs& args) {
    ncood::ExperimentConfig config = load_config(args);
    namespace fs = std::filesystem;
    fs::create_directories(config.output_dir);
    const fs::path out(config.output_dir);

    nlohmann::json artifact_list = nlohmann::json::array();
    auto emit = [&](const std::string& name, const std::string& bytes) {
        ncood::write_file_bytes((out / name).string(), bytes);
        artifact_list.push_back({{"path", name},
                                 {"sha256", ncood::sha256_hex(bytes)},
                                 {"bytes", bytes.size()}});
    };

    for (const std::uint64_t seed : config.seeds) {
        ncood::SyntheticSpec spec = config.data;
        spec.seed = ncood::derive_seed(seed, "data");
        const ncood::SyntheticData data = ncood::generate(spec);
        const std::string prefix = "seed_" + std::to_string(seed);
        emit(prefix + "_train.ncfb", ncood::encode_ncfb(data.train));
        emit(prefix + "_id_test.ncfb", ncood::encode_ncfb(data.id_test));
        const ncood::FeatureBank ood_bank(
            data.ood_test,
            std::vector<int>(static_cast<std::size_t>(data.ood_test.rows()), 0), 1);
        emit(prefix + "_ood_test.ncfb", ncood::encode_ncfb(ood_bank));
    }

    nlohmann::json manifest;
    manifest["schema_version"] = 1;
    manifest["experiment_kind"] = "generate";
    manifest["config"] = ncood::config_to_json(config);
    manifest["artifacts"] = artifact_list;
    const std::string manifest_path = (out / "manifest.json").string();
    ncood::write_file_bytes(manifest_path, manifest.dump(2) + "\n");
    std::printf("wrote %s\n", manifest_path.c_str());
    return kOk;
}

int run_report(const std::string& manifest_path, const std::string& out_dir) {
    std::string target = out_dir;
    if (target.empty()) {
        target = (std::filesystem::path(manifest_path).parent_path() / "report").string();
    }
    ncood::write_report(manifest_path, target);
    std::printf("wrote report to %s\n", target.c_str());
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural-collapse / OoD-detection experiment harness"};
    app.require_subcommand(1);

    CommonArgs generate_args;
    CLI::App* generate = app.add_subcommand("generate", "write synthetic dataset dumps");
    attach_common(generate, generate_args, /*with_jobs=*/false);

    CommonArgs train_args;
    CLI::App* train = app.add_subcommand("train", "single-condition train and evaluate");
    attach_common(train, train_args);

    CommonArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "baseline scorer comparison");
    attach_common(eval, eval_args);

    CommonArgs ablate_args;
    CLI::App* ablate = app.add_subcommand("ablate", "L2 x spectral x leaky ablation grid");
    attach_common(ablate, ablate_args);

    CommonArgs intervene_args;
    CLI::App* intervene = app.add_subcommand("intervene", "NC-loss intervention from a checkpoint");
    attach_common(intervene, intervene_args);

    CommonArgs sweep_args;
    CLI::App* sweep = app.add_subcommand("sweep", "overtraining sweep with checkpoint evals");
    attach_common(sweep, sweep_args);

    std::string manifest_path;
    std::string report_out;
    CLI::App* report = app.add_subcommand("report", "derive plot-ready CSVs from a manifest");
    report->add_option("--manifest", manifest_path, "manifest.json of a finished run")->required();
    report->add_option("--out", report_out, "report output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return run_generate(generate_args);
        if (train->parsed()) return run_kind(train_args, ncood::ExperimentKind::TrainEval);
        if (eval->parsed()) return run_kind(eval_args, ncood::ExperimentKind::BaselineCompare);
        if (ablate->parsed()) return run_kind(ablate_args, ncood::ExperimentKind::AblationGrid);
        if (intervene->parsed()) return run_kind(intervene_args, ncood::ExperimentKind::Intervention);
        if (sweep->parsed()) return run_kind(sweep_args, ncood::ExperimentKind::OvertrainSweep);
        if (report->parsed()) return run_report(manifest_path, report_out);
    } catch (const ncood::InvalidInputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInvalidInput;
    } catch (const ncood::DegenerateInputError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kDegenerateInput;
    } catch (const ncood::TrainingDivergedError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kTrainingDiverged;
    } catch (const ncood::FitFailedError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kFitFailed;
    } catch (const ncood::IntegrityError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIntegrity;
    } catch (const ncood::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUnknown;
    }
    return kOk;
}
