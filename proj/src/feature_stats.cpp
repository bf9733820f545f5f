#include "ncood/feature_stats.hpp"

#include <string>

#include "ncood/errors.hpp"

namespace ncood {

FeatureBank::FeatureBank(Matrix features_in, std::vector<int> labels_in, int num_classes_in)
    : features(std::move(features_in)), labels(std::move(labels_in)), num_classes(num_classes_in) {
    if (num_classes <= 0) {
        throw InvalidInputError("FeatureBank: num_classes must be positive, got " +
                                std::to_string(num_classes));
    }
    if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
        throw InvalidInputError("FeatureBank: " + std::to_string(labels.size()) + " labels for " +
                                std::to_string(features.rows()) + " feature rows");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) {
            throw InvalidInputError("FeatureBank: label " + std::to_string(labels[i]) +
                                    " at row " + std::to_string(i) + " outside [0, " +
                                    std::to_string(num_classes) + ")");
        }
    }
    if (!all_finite(features)) {
        throw InvalidInputError("FeatureBank: features contain non-finite values");
    }
}

ClassStatistics class_statistics(const FeatureBank& bank) {
    const int c = bank.num_classes;
    const Eigen::Index n = bank.size();
    const Eigen::Index d = bank.dim();
    if (n == 0) {
        throw InvalidInputError("class_statistics: empty feature bank");
    }

    ClassStatistics stats;
    stats.class_counts.assign(c, 0);
    stats.class_means = Matrix::Zero(c, d);

    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = bank.labels[static_cast<std::size_t>(i)];
        stats.class_counts[static_cast<std::size_t>(y)] += 1;
        stats.class_means.row(y) += bank.features.row(i);
    }
    for (int k = 0; k < c; ++k) {
        if (stats.class_counts[static_cast<std::size_t>(k)] == 0) {
            throw InvalidInputError("class_statistics: class " + std::to_string(k) +
                                    " has no samples");
        }
        stats.class_means.row(k) /= static_cast<double>(stats.class_counts[static_cast<std::size_t>(k)]);
    }

    stats.global_mean = stats.class_means.colwise().mean().transpose();

    stats.within_cov = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = bank.labels[static_cast<std::size_t>(i)];
        const Vector r = bank.features.row(i).transpose() - stats.class_means.row(y).transpose();
        stats.within_cov.noalias() += r * r.transpose();
    }
    stats.within_cov /= static_cast<double>(n);

    stats.between_cov = Matrix::Zero(d, d);
    for (int k = 0; k < c; ++k) {
        const Vector m = stats.class_means.row(k).transpose() - stats.global_mean;
        stats.between_cov.noalias() += m * m.transpose();
    }
    stats.between_cov /= static_cast<double>(c);

    return stats;
}

} // namespace ncood
