#include "ncood/losses.hpp"

#include <cmath>
#include <string>

#include "ncood/errors.hpp"
#include "ncood/feature_stats.hpp"
#include "ncood/nc_metrics.hpp"

namespace ncood {

namespace {

void check_labels(Eigen::Index batch, const std::vector<int>& labels, Eigen::Index num_classes,
                  const char* where) {
    if (static_cast<Eigen::Index>(labels.size()) != batch) {
        throw InvalidInputError(std::string(where) + ": label count mismatch");
    }
    for (int label : labels) {
        if (label < 0 || label >= num_classes) {
            throw InvalidInputError(std::string(where) + ": label " + std::to_string(label) +
                                    " out of range");
        }
    }
}

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Norms of the rows of a matrix; throws if any row is zero (every piece of
// the loss divides by them).
Vector row_norms_nonzero(const Matrix& rows, const char* what) {
    Vector norms(rows.rows());
    for (Eigen::Index c = 0; c < rows.rows(); ++c) {
        norms(c) = rows.row(c).norm();
        if (norms(c) == 0.0) {
            throw DegenerateInputError(std::string("nc_loss: zero-norm ") + what + " row " +
                                       std::to_string(c));
        }
    }
    return norms;
}

// dEN/da for EN = popstd(a)/mean(a); zero vector when the std vanishes
// (the loss sits at its minimum, subgradient 0).
Vector equinormality_norm_gradient(const Vector& norms) {
    const auto c = static_cast<double>(norms.size());
    const double mu = norms.mean();
    const double sd = std::sqrt((norms.array() - mu).square().mean());
    Vector grad = Vector::Zero(norms.size());
    if (sd == 0.0) return grad;
    for (Eigen::Index k = 0; k < norms.size(); ++k) {
        grad(k) = ((norms(k) - mu) / sd - sd / mu) / (c * mu);
    }
    return grad;
}

// dEA/dV for EA over unit rows V: 2 S V with S the signed deviation mask.
Matrix equiangularity_unit_gradient(const Matrix& unit_rows) {
    const Eigen::Index c = unit_rows.rows();
    const double target = -1.0 / static_cast<double>(c - 1);
    const double scale = 1.0 / static_cast<double>(c * (c - 1));
    const Matrix gram = unit_rows * unit_rows.transpose();
    Matrix s = Matrix::Zero(c, c);
    for (Eigen::Index i = 0; i < c; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) {
            if (i == j) continue;
            s(i, j) = sign_of(gram(i, j) - target) * scale;
        }
    }
    return 2.0 * s * unit_rows;
}

// Pulls a gradient on unit rows v = m/||m|| back to the raw rows:
// dm = (g - (g.v) v)/a per row.
Matrix row_normalization_backward(const Matrix& unit_rows, const Vector& norms,
                                  const Matrix& unit_grad) {
    Matrix out(unit_rows.rows(), unit_rows.cols());
    for (Eigen::Index c = 0; c < unit_rows.rows(); ++c) {
        const double radial = unit_grad.row(c).dot(unit_rows.row(c));
        out.row(c) = (unit_grad.row(c) - radial * unit_rows.row(c)) / norms(c);
    }
    return out;
}

} // namespace

double cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
    check_labels(logits.rows(), labels, logits.cols(), "cross_entropy");
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double row_max = logits.row(i).maxCoeff();
        const double lse = row_max + std::log((logits.row(i).array() - row_max).exp().sum());
        total += lse - logits(i, labels[static_cast<std::size_t>(i)]);
    }
    return total / static_cast<double>(logits.rows());
}

Matrix cross_entropy_gradient(const Matrix& logits, const std::vector<int>& labels) {
    check_labels(logits.rows(), labels, logits.cols(), "cross_entropy_gradient");
    Matrix grad(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double row_max = logits.row(i).maxCoeff();
        Eigen::RowVectorXd p = (logits.row(i).array() - row_max).exp();
        p /= p.sum();
        grad.row(i) = p;
        grad(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    }
    return grad / static_cast<double>(logits.rows());
}

double nc_loss(const Matrix& features, const std::vector<int>& labels, const Matrix& classifier) {
    const auto c = static_cast<int>(classifier.rows());
    check_labels(features.rows(), labels, c, "nc_loss");
    if (features.cols() != classifier.cols()) {
        throw InvalidInputError("nc_loss: feature and classifier widths disagree");
    }
    std::vector<int> counts(static_cast<std::size_t>(c), 0);
    for (int label : labels) counts[static_cast<std::size_t>(label)] += 1;
    for (int k = 0; k < c; ++k) {
        if (counts[static_cast<std::size_t>(k)] == 0) {
            throw InvalidInputError("nc_loss: class " + std::to_string(k) +
                                    " missing from the batch");
        }
    }

    const FeatureBank bank(features, labels, c);
    const ClassStatistics stats = class_statistics(bank);
    const Vector zero_center = Vector::Zero(classifier.cols());
    return nc1(stats, c) + equinormality(stats.class_means, stats.global_mean) +
           equinormality(classifier, zero_center) +
           equiangularity(stats.class_means, stats.global_mean) +
           equiangularity(classifier, zero_center) +
           self_duality(classifier, stats.class_means, stats.global_mean);
}

NcLossGradients nc_loss_gradients(const Matrix& features, const std::vector<int>& labels,
                                  const Matrix& classifier) {
    const auto c = static_cast<Eigen::Index>(classifier.rows());
    const Eigen::Index b = features.rows();
    const Eigen::Index d = features.cols();
    check_labels(b, labels, c, "nc_loss_gradients");
    if (d != classifier.cols()) {
        throw InvalidInputError("nc_loss_gradients: feature and classifier widths disagree");
    }
    if (c < 2) throw InvalidInputError("nc_loss_gradients: need at least 2 classes");

    std::vector<Eigen::Index> counts(static_cast<std::size_t>(c), 0);
    for (int label : labels) counts[static_cast<std::size_t>(label)] += 1;
    for (Eigen::Index k = 0; k < c; ++k) {
        if (counts[static_cast<std::size_t>(k)] == 0) {
            throw InvalidInputError("nc_loss_gradients: class " + std::to_string(k) +
                                    " missing from the batch");
        }
    }

    // Batch statistics.
    Matrix class_means = Matrix::Zero(c, d);
    for (Eigen::Index i = 0; i < b; ++i) {
        class_means.row(labels[static_cast<std::size_t>(i)]) += features.row(i);
    }
    for (Eigen::Index k = 0; k < c; ++k) {
        class_means.row(k) /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
    }
    const Eigen::RowVectorXd global_mean = class_means.colwise().mean();
    Matrix m = class_means;
    m.rowwise() -= global_mean; // rows m_c = u_c - u_G

    Matrix residuals(b, d);
    for (Eigen::Index i = 0; i < b; ++i) {
        residuals.row(i) = features.row(i) - class_means.row(labels[static_cast<std::size_t>(i)]);
    }
    const Matrix sigma_w = residuals.transpose() * residuals / static_cast<double>(b);
    const Matrix sigma_b = m.transpose() * m / static_cast<double>(c);

    Matrix b_pinv = pseudo_inverse(sigma_b);
    b_pinv = 0.5 * (b_pinv + b_pinv.transpose()); // exact symmetry for the formulas below

    NcLossGradients out;
    out.features = Matrix::Zero(b, d);
    out.classifier = Matrix::Zero(c, d);
    Matrix dm = Matrix::Zero(c, d); // accumulated dL/dm_c

    // --- NC1 = Tr(Sigma_W B+)/C ---------------------------------------
    const double nc1_val = (sigma_w * b_pinv).trace() / static_cast<double>(c);

    // Sigma_W path: the class-mean terms cancel because residuals sum to
    // zero within each class.
    out.features.noalias() +=
        (2.0 / (static_cast<double>(b) * static_cast<double>(c))) * residuals * b_pinv;

    // Sigma_B path, through the pseudoinverse differential at locally
    // constant rank.
    {
        const Matrix identity = Matrix::Identity(d, d);
        const Matrix proj = sigma_b * b_pinv;
        const Matrix complement = identity - proj;
        const Matrix bpbp = b_pinv * b_pinv;
        Matrix g_b = (-b_pinv * sigma_w * b_pinv + complement * sigma_w * bpbp +
                      bpbp * sigma_w * complement) /
                     static_cast<double>(c);
        g_b = 0.5 * (g_b + g_b.transpose());
        dm.noalias() += (2.0 / static_cast<double>(c)) * m * g_b;
    }

    // --- Equinormality, means and classifier --------------------------
    const Vector mean_norms = row_norms_nonzero(m, "centered-mean");
    const Vector cls_norms = row_norms_nonzero(classifier, "classifier");
    Matrix mean_units(c, d);
    Matrix cls_units(c, d);
    for (Eigen::Index k = 0; k < c; ++k) {
        mean_units.row(k) = m.row(k) / mean_norms(k);
        cls_units.row(k) = classifier.row(k) / cls_norms(k);
    }

    const double en_means_mu = mean_norms.mean();
    const double en_means_sd = std::sqrt((mean_norms.array() - en_means_mu).square().mean());
    const double en_means_val = en_means_sd / en_means_mu;
    const double en_cls_mu = cls_norms.mean();
    const double en_cls_sd = std::sqrt((cls_norms.array() - en_cls_mu).square().mean());
    const double en_cls_val = en_cls_sd / en_cls_mu;

    const Vector den_means = equinormality_norm_gradient(mean_norms);
    const Vector den_cls = equinormality_norm_gradient(cls_norms);
    for (Eigen::Index k = 0; k < c; ++k) {
        dm.row(k) += den_means(k) * mean_units.row(k);
        out.classifier.row(k) += den_cls(k) * cls_units.row(k);
    }

    // --- Equiangularity, means and classifier -------------------------
    const double target = -1.0 / static_cast<double>(c - 1);
    auto ea_value = [&](const Matrix& units) {
        const Matrix gram = units * units.transpose();
        double total = 0.0;
        for (Eigen::Index i = 0; i < c; ++i) {
            for (Eigen::Index j = 0; j < c; ++j) {
                if (i != j) total += std::abs(gram(i, j) - target);
            }
        }
        return total / static_cast<double>(c * (c - 1));
    };
    const double ea_means_val = ea_value(mean_units);
    const double ea_cls_val = ea_value(cls_units);

    Matrix d_mean_units = equiangularity_unit_gradient(mean_units);
    Matrix d_cls_units = equiangularity_unit_gradient(cls_units);

    // --- Self-duality --------------------------------------------------
    const Matrix duality_diff = cls_units - mean_units;
    const double nc3_val = duality_diff.squaredNorm();
    d_cls_units += 2.0 * duality_diff;
    d_mean_units -= 2.0 * duality_diff;

    dm += row_normalization_backward(mean_units, mean_norms, d_mean_units);
    out.classifier += row_normalization_backward(cls_units, cls_norms, d_cls_units);

    // --- Mean path back to the features ---------------------------------
    // m_c = u_c - (1/C) sum_k u_k, so du = dm - rowmean(dm); then each
    // sample inherits du_{y_i}/n_{y_i}.
    const Eigen::RowVectorXd dm_mean = dm.colwise().mean();
    Matrix du = dm;
    du.rowwise() -= dm_mean;
    for (Eigen::Index i = 0; i < b; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        out.features.row(i) += du.row(y) / static_cast<double>(counts[static_cast<std::size_t>(y)]);
    }

    out.loss = nc1_val + en_means_val + en_cls_val + ea_means_val + ea_cls_val + nc3_val;
    return out;
}

} // namespace ncood
