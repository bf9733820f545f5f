#include "ncood/nc_metrics.hpp"

#include <cmath>
#include <string>

#include "ncood/errors.hpp"

namespace ncood {

namespace {

// Norms of rows about a common center.
Vector centered_row_norms(const Matrix& vectors, const Vector& center) {
    Vector norms(vectors.rows());
    for (Eigen::Index c = 0; c < vectors.rows(); ++c) {
        norms(c) = (vectors.row(c).transpose() - center).norm();
    }
    return norms;
}

} // namespace

double nc1(const ClassStatistics& stats, int num_classes) {
    if (num_classes < 2) {
        throw InvalidInputError("nc1: need at least 2 classes, got " +
                                std::to_string(num_classes));
    }
    if (stats.within_cov.rows() != stats.within_cov.cols() ||
        stats.between_cov.rows() != stats.between_cov.cols() ||
        stats.within_cov.rows() != stats.between_cov.rows()) {
        throw InvalidInputError("nc1: covariance shapes disagree");
    }
    const Matrix between_pinv = pseudo_inverse(stats.between_cov);
    return (stats.within_cov * between_pinv).trace() / static_cast<double>(num_classes);
}

double equinormality(const Matrix& vectors, const Vector& center) {
    const Eigen::Index c = vectors.rows();
    if (c < 2) {
        throw InvalidInputError("equinormality: need at least 2 vectors");
    }
    const Vector norms = centered_row_norms(vectors, center);
    const double avg = norms.mean();
    if (avg == 0.0) {
        throw DegenerateInputError("equinormality: all centered vectors have zero norm");
    }
    const double variance = (norms.array() - avg).square().mean();
    return std::sqrt(variance) / avg;
}

double equiangularity(const Matrix& vectors, const Vector& center) {
    const Eigen::Index c = vectors.rows();
    if (c < 2) {
        throw InvalidInputError("equiangularity: need at least 2 vectors");
    }
    Matrix centered = vectors;
    centered.rowwise() -= center.transpose();
    for (Eigen::Index i = 0; i < c; ++i) {
        const double norm = centered.row(i).norm();
        if (norm == 0.0) {
            throw DegenerateInputError("equiangularity: centered vector " + std::to_string(i) +
                                       " has zero norm");
        }
        centered.row(i) /= norm;
    }
    const Matrix gram = centered * centered.transpose();
    const double target = -1.0 / static_cast<double>(c - 1);
    double total = 0.0;
    for (Eigen::Index i = 0; i < c; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) {
            if (i == j) continue;
            total += std::abs(gram(i, j) - target);
        }
    }
    return total / static_cast<double>(c * (c - 1));
}

double self_duality(const Matrix& classifier, const Matrix& class_means,
                    const Vector& global_mean) {
    if (classifier.rows() != class_means.rows() || classifier.cols() != class_means.cols()) {
        throw InvalidInputError("self_duality: classifier and class means shapes disagree");
    }
    Matrix centered = class_means;
    centered.rowwise() -= global_mean.transpose();
    Matrix diff(classifier.rows(), classifier.cols());
    for (Eigen::Index i = 0; i < classifier.rows(); ++i) {
        const double wn = classifier.row(i).norm();
        const double mn = centered.row(i).norm();
        if (wn == 0.0 || mn == 0.0) {
            throw DegenerateInputError("self_duality: zero row " + std::to_string(i) +
                                       " before normalization");
        }
        diff.row(i) = classifier.row(i) / wn - centered.row(i) / mn;
    }
    return diff.squaredNorm();
}

double ncc_error(const FeatureBank& bank, const ClassStatistics& stats) {
    const Eigen::Index n = bank.size();
    const int c = stats.num_classes();
    Eigen::Index wrong = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        int best = 0;
        double best_dist = (bank.features.row(i) - stats.class_means.row(0)).squaredNorm();
        for (int k = 1; k < c; ++k) {
            const double dist = (bank.features.row(i) - stats.class_means.row(k)).squaredNorm();
            if (dist < best_dist) {
                best_dist = dist;
                best = k;
            }
        }
        if (best != bank.labels[static_cast<std::size_t>(i)]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(n);
}

NcReport nc_report(const FeatureBank& bank, const Matrix& classifier,
                   const ClassStatistics& stats) {
    const Vector zero_center = Vector::Zero(classifier.cols());
    NcReport report;
    report.nc1 = nc1(stats, bank.num_classes);
    report.en_means = equinormality(stats.class_means, stats.global_mean);
    report.en_classifier = equinormality(classifier, zero_center);
    report.ea_means = equiangularity(stats.class_means, stats.global_mean);
    report.ea_classifier = equiangularity(classifier, zero_center);
    report.nc3 = self_duality(classifier, stats.class_means, stats.global_mean);
    report.nc4_error = ncc_error(bank, stats);
    return report;
}

NcReport nc_report(const FeatureBank& bank, const Matrix& classifier) {
    return nc_report(bank, classifier, class_statistics(bank));
}

Matrix simplex_etf_vertices(int num_classes) {
    if (num_classes < 2) {
        throw InvalidInputError("simplex_etf_vertices: need at least 2 classes");
    }
    const double c = static_cast<double>(num_classes);
    const double scale = std::sqrt(c / (c - 1.0));
    Matrix vertices = Matrix::Identity(num_classes, num_classes);
    vertices.array() -= 1.0 / c;
    return scale * vertices;
}

Matrix simplex_etf_vertices_reduced(int num_classes) {
    if (num_classes < 2) {
        throw InvalidInputError("simplex_etf_vertices_reduced: need at least 2 classes");
    }
    const double c = static_cast<double>(num_classes);
    // Helmert rows h_k = (1,...,1, -k, 0,...)/sqrt(k(k+1)) span the
    // orthogonal complement of the all-ones vector; the reduced vertex
    // matrix is sqrt(C/(C-1)) * H^T, preserving the full frame's Gram.
    Matrix helmert = Matrix::Zero(num_classes - 1, num_classes);
    for (int k = 1; k < num_classes; ++k) {
        const double denom = std::sqrt(static_cast<double>(k) * (k + 1.0));
        for (int j = 0; j < k; ++j) helmert(k - 1, j) = 1.0 / denom;
        helmert(k - 1, k) = -static_cast<double>(k) / denom;
    }
    return std::sqrt(c / (c - 1.0)) * helmert.transpose();
}

} // namespace ncood
