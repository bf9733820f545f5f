#include "ncood/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "ncood/errors.hpp"
#include "ncood/losses.hpp"
#include "ncood/ood_eval.hpp"

namespace ncood {

namespace {

using IndexBatch = std::vector<Eigen::Index>;

std::vector<IndexBatch> standard_batches(Eigen::Index n, int batch_size, Rng& rng) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);

    std::vector<IndexBatch> batches;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return batches;
}

// Every batch carries a fixed per-class quota: batch_size/C each, plus one
// extra for the first batch_size%C classes. Samples past the last full
// batch sit out this epoch (next epoch reshuffles).
std::vector<IndexBatch> balanced_batches(const std::vector<int>& labels, int num_classes,
                                         int batch_size, Rng& rng) {
    if (batch_size < num_classes) {
        throw InvalidInputError("train: class-balanced batches need batch_size >= num_classes");
    }
    std::vector<std::vector<Eigen::Index>> by_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
    }
    for (auto& members : by_class) rng.shuffle(members);

    const int base = batch_size / num_classes;
    const int extra = batch_size % num_classes;
    std::vector<int> quota(static_cast<std::size_t>(num_classes));
    std::size_t num_batches = std::numeric_limits<std::size_t>::max();
    for (int k = 0; k < num_classes; ++k) {
        quota[static_cast<std::size_t>(k)] = base + (k < extra ? 1 : 0);
        num_batches = std::min(num_batches, by_class[static_cast<std::size_t>(k)].size() /
                                                static_cast<std::size_t>(quota[static_cast<std::size_t>(k)]));
    }
    if (num_batches == 0) {
        throw InvalidInputError("train: some class is too small for one balanced batch");
    }

    std::vector<IndexBatch> batches(num_batches);
    for (std::size_t b = 0; b < num_batches; ++b) {
        batches[b].reserve(static_cast<std::size_t>(batch_size));
        for (int k = 0; k < num_classes; ++k) {
            const auto q = static_cast<std::size_t>(quota[static_cast<std::size_t>(k)]);
            const auto& members = by_class[static_cast<std::size_t>(k)];
            for (std::size_t j = 0; j < q; ++j) batches[b].push_back(members[b * q + j]);
        }
    }
    return batches;
}

} // namespace

void validate_train_config(const TrainConfig& config) {
    if (config.epochs < 1) throw InvalidInputError("TrainConfig: epochs must be >= 1");
    if (config.batch_size < 1) throw InvalidInputError("TrainConfig: batch_size must be >= 1");
    if (config.initial_lr <= 0.0) throw InvalidInputError("TrainConfig: initial_lr must be positive");
    if (config.lr_decay <= 0.0) throw InvalidInputError("TrainConfig: lr_decay must be positive");
    for (std::size_t i = 0; i < config.lr_milestones.size(); ++i) {
        const int milestone = config.lr_milestones[i];
        if (milestone < 0 || milestone >= config.epochs) {
            throw InvalidInputError("TrainConfig: milestone " + std::to_string(milestone) +
                                    " outside [0, epochs)");
        }
        if (i > 0 && milestone <= config.lr_milestones[i - 1]) {
            throw InvalidInputError("TrainConfig: milestones must be strictly increasing");
        }
    }
    if (config.loss_mode == LossMode::NcLoss && !config.class_balanced_batches) {
        throw InvalidInputError("TrainConfig: nc-loss mode requires class_balanced_batches");
    }
}

TrainTrace train(MlpClassifier& model, const FeatureBank& data, const TrainConfig& config,
                 WeightInit init, const EpochCallback& callback) {
    validate_train_config(config);
    if (data.size() == 0) throw InvalidInputError("train: empty dataset");
    if (data.dim() != model.input_dim()) {
        throw InvalidInputError("train: data width " + std::to_string(data.dim()) +
                                " does not match model input dim " +
                                std::to_string(model.input_dim()));
    }
    if (data.num_classes != model.num_classes) {
        throw InvalidInputError("train: class count mismatch between data and model");
    }

    Rng rng(config.seed);
    if (init == WeightInit::FromSeed) reinitialize_weights(model, rng);

    double lr = config.initial_lr;
    TrainTrace trace;
    trace.epochs.reserve(static_cast<std::size_t>(config.epochs));

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        if (std::find(config.lr_milestones.begin(), config.lr_milestones.end(), epoch) !=
            config.lr_milestones.end()) {
            lr *= config.lr_decay;
        }

        const auto batches =
            config.class_balanced_batches
                ? balanced_batches(data.labels, data.num_classes, config.batch_size, rng)
                : standard_batches(data.size(), config.batch_size, rng);

        for (const IndexBatch& batch : batches) {
            Matrix inputs(static_cast<Eigen::Index>(batch.size()), data.dim());
            std::vector<int> batch_labels(batch.size());
            for (std::size_t j = 0; j < batch.size(); ++j) {
                inputs.row(static_cast<Eigen::Index>(j)) = data.features.row(batch[j]);
                batch_labels[j] = data.labels[static_cast<std::size_t>(batch[j])];
            }

            const ForwardCache cache = forward_cached(model, inputs);
            double batch_loss = 0.0;
            ModelGradients grads;
            if (config.loss_mode == LossMode::CrossEntropy) {
                batch_loss = cross_entropy(cache.logits, batch_labels);
                const Matrix d_logits = cross_entropy_gradient(cache.logits, batch_labels);
                grads = backward(model, cache, Matrix(), d_logits);
            } else {
                NcLossGradients nc_grads =
                    nc_loss_gradients(cache.features, batch_labels, model.classifier_weights);
                batch_loss = nc_grads.loss;
                grads = backward(model, cache, nc_grads.features, Matrix());
                grads.classifier_weights += nc_grads.classifier;
            }
            if (!std::isfinite(batch_loss)) throw TrainingDivergedError(epoch);

            apply_sgd_step(model, grads, lr);
            if (model.options.spectral_normalize) spectral_project(model);
        }

        const ForwardResult full = forward(model, data.features);
        EpochRecord record;
        record.ce_loss = cross_entropy(full.logits, data.labels);
        record.accuracy = classification_accuracy(full.logits, data.labels);
        const FeatureBank feature_bank(full.features, data.labels, data.num_classes);
        record.nc = nc_report(feature_bank, model.classifier_weights);
        record.learning_rate = lr;
        record.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
        if (!std::isfinite(record.ce_loss)) throw TrainingDivergedError(epoch);
        trace.epochs.push_back(record);
        if (callback) callback(epoch, model, record);
    }
    return trace;
}

std::pair<TrainTrace, TrainTrace> intervene(const MlpClassifier& checkpoint,
                                            const FeatureBank& data,
                                            const TrainConfig& control_config,
                                            const TrainConfig& intervention_config,
                                            const EpochCallback& control_callback,
                                            const EpochCallback& intervention_callback) {
    if (control_config.loss_mode != LossMode::CrossEntropy) {
        throw InvalidInputError("intervene: control arm must use cross-entropy");
    }
    if (intervention_config.loss_mode != LossMode::NcLoss) {
        throw InvalidInputError("intervene: intervention arm must use nc-loss");
    }
    MlpClassifier control_model = checkpoint;
    MlpClassifier intervention_model = checkpoint;
    TrainTrace control =
        train(control_model, data, control_config, WeightInit::Keep, control_callback);
    TrainTrace intervention = train(intervention_model, data, intervention_config,
                                    WeightInit::Keep, intervention_callback);
    return {std::move(control), std::move(intervention)};
}

} // namespace ncood
