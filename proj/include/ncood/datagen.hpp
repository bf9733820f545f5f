#pragma once

#include <cstdint>
#include <string>

#include "ncood/feature_stats.hpp"

namespace ncood {

enum class OodKind { UniformBox, ShiftedClusters, IsotropicShell };

std::string to_string(OodKind kind);
OodKind parse_ood_kind(const std::string& text);

struct SyntheticSpec {
    std::uint64_t seed = 0;
    int num_classes = 2;
    int input_dim = 2;
    int samples_per_class = 100;
    double cluster_spread = 1.0;
    double class_separation = 5.0;
    OodKind ood_kind = OodKind::ShiftedClusters;
    int ood_samples = 100;
    // Displacement for shifted-clusters probes, as a fraction of
    // class_separation: each OoD cluster center sits at the matching class
    // mean plus shift_factor * class_separation along a seeded random unit
    // direction. Must be positive.
    double ood_shift_factor = 0.5;
};

struct SyntheticData {
    FeatureBank train;
    FeatureBank id_test;
    Matrix ood_test; // unlabeled
};

// Class means are class_separation times the reduced simplex-ETF vertices,
// zero-padded to input_dim; each sample is its mean plus cluster_spread
// times a standard normal draw. Train, ID test and OoD test consume
// independent sub-seeds of spec.seed, so regenerating any one of them alone
// is stable. Identical specs give bit-identical outputs.
SyntheticData generate(const SyntheticSpec& spec);

} // namespace ncood
