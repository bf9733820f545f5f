#include "ncood/ood_eval.hpp"

#include <algorithm>
#include <cmath>

#include "ncood/errors.hpp"

namespace ncood {

namespace {

void check_populations(const ScoredPopulations& pop, const char* where) {
    if (pop.id_scores.empty() || pop.ood_scores.empty()) {
        throw InvalidInputError(std::string(where) + ": both populations must be nonempty");
    }
    for (double s : pop.id_scores) {
        if (!std::isfinite(s)) throw InvalidInputError(std::string(where) + ": non-finite ID score");
    }
    for (double s : pop.ood_scores) {
        if (!std::isfinite(s)) throw InvalidInputError(std::string(where) + ": non-finite OoD score");
    }
}

} // namespace

std::string to_string(ScoreSource source) {
    switch (source) {
        case ScoreSource::GmmFeature: return "gmm-feature";
        case ScoreSource::GmmLogit: return "gmm-logit";
        case ScoreSource::SoftmaxMax: return "softmax-max";
    }
    return "unknown";
}

double auroc(const ScoredPopulations& pop) {
    check_populations(pop, "auroc");
    std::vector<double> ood_sorted = pop.ood_scores;
    std::sort(ood_sorted.begin(), ood_sorted.end());

    // Numerator in half-units: each ID/OoD pair contributes 2 when the ID
    // score wins, 1 on a tie. Exact integer arithmetic keeps the result
    // bit-equal to the pairwise count.
    std::uint64_t half_wins = 0;
    for (double s : pop.id_scores) {
        const auto lower = std::lower_bound(ood_sorted.begin(), ood_sorted.end(), s);
        const auto upper = std::upper_bound(ood_sorted.begin(), ood_sorted.end(), s);
        const auto strictly_below = static_cast<std::uint64_t>(lower - ood_sorted.begin());
        const auto tied = static_cast<std::uint64_t>(upper - lower);
        half_wins += 2 * strictly_below + tied;
    }
    return static_cast<double>(half_wins) /
           (2.0 * static_cast<double>(pop.id_scores.size()) *
            static_cast<double>(pop.ood_scores.size()));
}

std::size_t false_positive_count(const ScoredPopulations& pop) {
    check_populations(pop, "false_positive_count");
    std::vector<double> id_sorted = pop.id_scores;
    std::vector<double> ood_sorted = pop.ood_scores;
    std::sort(id_sorted.begin(), id_sorted.end(), std::greater<>());
    std::sort(ood_sorted.begin(), ood_sorted.end(), std::greater<>());

    // Walk the merged order without materializing it; on equal scores the
    // OoD entry is taken first (pessimistic cutoff rule).
    const std::size_t budget = id_sorted.size();
    std::size_t taken = 0;
    std::size_t i = 0;
    std::size_t o = 0;
    std::size_t false_positives = 0;
    while (taken < budget) {
        if (o < ood_sorted.size() && (i >= id_sorted.size() || ood_sorted[o] >= id_sorted[i])) {
            ++false_positives;
            ++o;
        } else {
            ++i;
        }
        ++taken;
    }
    return false_positives;
}

std::vector<double> softmax_max_score(const Matrix& logits) {
    if (!all_finite(logits)) {
        throw InvalidInputError("softmax_max_score: non-finite logits");
    }
    std::vector<double> scores(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double row_max = logits.row(i).maxCoeff();
        const double denom = (logits.row(i).array() - row_max).exp().sum();
        scores[static_cast<std::size_t>(i)] = 1.0 / denom;
    }
    return scores;
}

SpectrumProjection svd_spectrum_projection(const Matrix& train_features,
                                           const Matrix& probe_features) {
    if (train_features.cols() != probe_features.cols()) {
        throw InvalidInputError("svd_spectrum_projection: feature widths disagree");
    }
    if (train_features.rows() == 0 || probe_features.rows() == 0) {
        throw InvalidInputError("svd_spectrum_projection: empty feature set");
    }
    const Eigen::RowVectorXd train_mean = train_features.colwise().mean();

    Matrix centered_train = train_features;
    centered_train.rowwise() -= train_mean;
    const SvdResult decomposition = svd(centered_train);

    // The probe is centered by the train mean: the basis belongs to the
    // train distribution, not the probe.
    Matrix centered_probe = probe_features;
    centered_probe.rowwise() -= train_mean;
    const Matrix projected = centered_probe * decomposition.v;

    const double scale = std::sqrt(static_cast<double>(train_features.rows()) /
                                   static_cast<double>(probe_features.rows()));
    SpectrumProjection result;
    result.train_singular_values = decomposition.singular_values;
    result.probe_projected_magnitudes = scale * projected.colwise().norm().transpose();
    return result;
}

double classification_accuracy(const Matrix& logits, const std::vector<int>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
        throw InvalidInputError("classification_accuracy: label count mismatch");
    }
    if (logits.rows() == 0) {
        throw InvalidInputError("classification_accuracy: empty batch");
    }
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const int label = labels[static_cast<std::size_t>(i)];
        if (label < 0 || label >= logits.cols()) {
            throw InvalidInputError("classification_accuracy: label out of range");
        }
        Eigen::Index best = 0;
        for (Eigen::Index j = 1; j < logits.cols(); ++j) {
            if (logits(i, j) > logits(i, best)) best = j;
        }
        if (best == label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw InvalidInputError("pearson_r: need two equal-length series of size >= 2");
    }
    const auto n = static_cast<Eigen::Index>(x.size());
    const Eigen::Map<const Vector> xv(x.data(), n);
    const Eigen::Map<const Vector> yv(y.data(), n);
    const Vector xc = xv.array() - xv.mean();
    const Vector yc = yv.array() - yv.mean();
    const double sx = xc.norm();
    const double sy = yc.norm();
    if (sx == 0.0 || sy == 0.0) {
        throw DegenerateInputError("pearson_r: constant input series");
    }
    return xc.dot(yc) / (sx * sy);
}

} // namespace ncood
