#include "ncood/datagen.hpp"

#include "ncood/errors.hpp"
#include "ncood/nc_metrics.hpp"
#include "ncood/rng.hpp"

namespace ncood {

namespace {

void check_spec(const SyntheticSpec& spec) {
    if (spec.num_classes < 2) throw InvalidInputError("SyntheticSpec: num_classes must be >= 2");
    if (spec.input_dim < spec.num_classes - 1) {
        throw InvalidInputError("SyntheticSpec: input_dim must be >= num_classes - 1");
    }
    if (spec.samples_per_class < 1) {
        throw InvalidInputError("SyntheticSpec: samples_per_class must be >= 1");
    }
    if (spec.cluster_spread <= 0.0) {
        throw InvalidInputError("SyntheticSpec: cluster_spread must be positive");
    }
    if (spec.class_separation <= 0.0) {
        throw InvalidInputError("SyntheticSpec: class_separation must be positive");
    }
    if (spec.ood_samples < 1) throw InvalidInputError("SyntheticSpec: ood_samples must be >= 1");
    if (spec.ood_shift_factor <= 0.0) {
        throw InvalidInputError("SyntheticSpec: ood_shift_factor must be positive");
    }
}

// Class means: scaled reduced-ETF vertices, zero-padded up to input_dim.
Matrix class_mean_layout(const SyntheticSpec& spec) {
    const Matrix reduced = simplex_etf_vertices_reduced(spec.num_classes);
    Matrix means = Matrix::Zero(spec.num_classes, spec.input_dim);
    means.leftCols(spec.num_classes - 1) = spec.class_separation * reduced;
    return means;
}

Vector normal_vector(Eigen::Index size, Rng& rng) {
    Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = rng.normal();
    return v;
}

FeatureBank sample_clusters(const SyntheticSpec& spec, const Matrix& means, Rng& rng) {
    const Eigen::Index n =
        static_cast<Eigen::Index>(spec.num_classes) * spec.samples_per_class;
    Matrix features(n, spec.input_dim);
    std::vector<int> labels(static_cast<std::size_t>(n));
    Eigen::Index row = 0;
    for (int c = 0; c < spec.num_classes; ++c) {
        for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
            features.row(row) =
                means.row(c) + spec.cluster_spread * normal_vector(spec.input_dim, rng).transpose();
            labels[static_cast<std::size_t>(row)] = c;
        }
    }
    return FeatureBank(std::move(features), std::move(labels), spec.num_classes);
}

Matrix sample_ood(const SyntheticSpec& spec, const Matrix& means, Rng& rng) {
    Matrix ood(spec.ood_samples, spec.input_dim);
    switch (spec.ood_kind) {
        case OodKind::UniformBox:
            // A box strictly outside the cluster hull: every coordinate in
            // [2*sep, 3*sep] while class means have norm sep.
            for (Eigen::Index i = 0; i < ood.rows(); ++i) {
                for (Eigen::Index j = 0; j < ood.cols(); ++j) {
                    ood(i, j) = rng.uniform(2.0 * spec.class_separation,
                                            3.0 * spec.class_separation);
                }
            }
            break;
        case OodKind::ShiftedClusters: {
            // Clusters of the same shape displaced along per-class random
            // unit directions, so the offsets have components both inside
            // and outside the span of the class means.  All displacement
            // directions are drawn before any sample noise.
            Matrix centers(spec.num_classes, spec.input_dim);
            for (int c = 0; c < spec.num_classes; ++c) {
                Vector direction = normal_vector(spec.input_dim, rng);
                while (direction.norm() < 1e-8) {
                    direction = normal_vector(spec.input_dim, rng);
                }
                centers.row(c) =
                    means.row(c) + spec.ood_shift_factor * spec.class_separation *
                                       (direction / direction.norm()).transpose();
            }
            for (Eigen::Index i = 0; i < ood.rows(); ++i) {
                const auto c = static_cast<Eigen::Index>(
                    rng.bounded(static_cast<std::uint64_t>(spec.num_classes)));
                ood.row(i) = centers.row(c) +
                             spec.cluster_spread * normal_vector(spec.input_dim, rng).transpose();
            }
            break;
        }
        case OodKind::IsotropicShell:
            // Uniform directions at the class-mean radius; almost all of
            // the shell is far from every cluster.
            for (Eigen::Index i = 0; i < ood.rows(); ++i) {
                const Vector g = normal_vector(spec.input_dim, rng);
                ood.row(i) = spec.class_separation * (g / g.norm()).transpose();
            }
            break;
    }
    return ood;
}

} // namespace

std::string to_string(OodKind kind) {
    switch (kind) {
        case OodKind::UniformBox: return "uniform-box";
        case OodKind::ShiftedClusters: return "shifted-clusters";
        case OodKind::IsotropicShell: return "isotropic-shell";
    }
    return "unknown";
}

OodKind parse_ood_kind(const std::string& text) {
    if (text == "uniform-box") return OodKind::UniformBox;
    if (text == "shifted-clusters") return OodKind::ShiftedClusters;
    if (text == "isotropic-shell") return OodKind::IsotropicShell;
    throw InvalidInputError("unknown ood kind '" + text + "'");
}

SyntheticData generate(const SyntheticSpec& spec) {
    check_spec(spec);
    const Matrix means = class_mean_layout(spec);

    Rng train_rng(derive_seed(spec.seed, "train"));
    Rng id_test_rng(derive_seed(spec.seed, "id-test"));
    Rng ood_rng(derive_seed(spec.seed, "ood-test"));

    SyntheticData data;
    data.train = sample_clusters(spec, means, train_rng);
    data.id_test = sample_clusters(spec, means, id_test_rng);
    data.ood_test = sample_ood(spec, means, ood_rng);
    return data;
}

} // namespace ncood
