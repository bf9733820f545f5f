#pragma once

#include <vector>

#include "ncood/linalg.hpp"

namespace ncood {

// N vectors with class labels in [0, num_classes). Doubles as the container
// for raw model inputs, which share the same shape.
struct FeatureBank {
    Matrix features;         // N x d, one vector per row
    std::vector<int> labels; // N entries
    int num_classes = 0;

    FeatureBank() = default;
    // Validates shapes, label range and finiteness.
    FeatureBank(Matrix features, std::vector<int> labels, int num_classes);

    Eigen::Index size() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }
};

struct ClassStatistics {
    Matrix class_means;              // C x d, row c is u_c
    Vector global_mean;              // d, unweighted mean of class means
    Matrix within_cov;               // d x d
    Matrix between_cov;              // d x d
    std::vector<Eigen::Index> class_counts; // C entries

    int num_classes() const { return static_cast<int>(class_means.rows()); }
};

// u_c      = mean of features with label c
// u_G      = (1/C) sum_c u_c
// Sigma_W  = (1/N) sum_i (z_i - u_{y_i})(z_i - u_{y_i})^T
// Sigma_B  = (1/C) sum_c (u_c - u_G)(u_c - u_G)^T
// Population convention throughout. Throws InvalidInputError naming the
// class if some class has no samples.
ClassStatistics class_statistics(const FeatureBank& bank);

} // namespace ncood
