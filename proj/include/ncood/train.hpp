#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ncood/feature_stats.hpp"
#include "ncood/model.hpp"
#include "ncood/nc_metrics.hpp"

namespace ncood {

enum class LossMode { CrossEntropy, NcLoss };

struct TrainConfig {
    std::uint64_t seed = 0;
    int epochs = 1;
    int batch_size = 64;
    double initial_lr = 0.1;
    std::vector<int> lr_milestones; // zero-based epoch indices, strictly increasing, < epochs
    double lr_decay = 0.1;
    LossMode loss_mode = LossMode::CrossEntropy;
    bool class_balanced_batches = false;
};

// Throws InvalidInputError on violated invariants (nc-loss mode requires
// class-balanced batches).
void validate_train_config(const TrainConfig& config);

struct EpochRecord {
    double ce_loss = 0.0;
    double accuracy = 0.0;
    NcReport nc;
    double learning_rate = 0.0;
    // Timing is informational only; it is excluded from serialized
    // artifacts so reruns stay bit-identical.
    double wall_seconds = 0.0;
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;
};

enum class WeightInit {
    FromSeed, // draw fresh weights from the config seed
    Keep      // continue from the weights already in the model
};

// Invoked after each epoch's record is complete, with the model in its
// end-of-epoch state.
using EpochCallback = std::function<void(int epoch, const MlpClassifier& model,
                                         const EpochRecord& record)>;

// Plain SGD over shuffled batches. The learning rate is multiplied by
// lr_decay at the start of each milestone epoch. Every epoch appends a
// record with full-dataset cross-entropy, accuracy and NcReport. All
// randomness comes from one generator seeded with config.seed; identical
// inputs give bit-identical traces. Non-finite batch loss throws
// TrainingDivergedError carrying the epoch.
TrainTrace train(MlpClassifier& model, const FeatureBank& data, const TrainConfig& config,
                 WeightInit init = WeightInit::FromSeed, const EpochCallback& callback = {});

// Two continuations from one checkpoint state: a cross-entropy control arm
// and an nc-loss intervention arm. Returns (control, intervention).
std::pair<TrainTrace, TrainTrace> intervene(const MlpClassifier& checkpoint,
                                            const FeatureBank& data,
                                            const TrainConfig& control_config,
                                            const TrainConfig& intervention_config,
                                            const EpochCallback& control_callback = {},
                                            const EpochCallback& intervention_callback = {});

} // namespace ncood
