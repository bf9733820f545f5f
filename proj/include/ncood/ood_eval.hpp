#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ncood/linalg.hpp"

namespace ncood {

enum class ScoreSource { GmmFeature, GmmLogit, SoftmaxMax };

std::string to_string(ScoreSource source);

// Higher score = more in-distribution, for both populations.
struct ScoredPopulations {
    std::vector<double> id_scores;
    std::vector<double> ood_scores;
    ScoreSource score_source = ScoreSource::GmmFeature;
};

// P(random ID score > random OoD score), ties worth 0.5. Rank-based,
// O((n+m) log(n+m)), bit-equal to the pairwise count because both reduce to
// the same integer numerator over 2*n*m.
double auroc(const ScoredPopulations& pop);

// How many OoD samples land in the top |id_scores| of the merged
// population. Ties at the cutoff count OoD first (pessimistic).
std::size_t false_positive_count(const ScoredPopulations& pop);

// Per-row max softmax probability, max-subtracted for stability.
std::vector<double> softmax_max_score(const Matrix& logits);

struct SpectrumProjection {
    Vector train_singular_values;
    Vector probe_projected_magnitudes;
};

// SVD of train features centered by their mean; probe rows are centered by
// the same mean, projected onto the train right-singular basis, and reported
// as per-direction root-sum-square magnitudes scaled by
// sqrt(N_train/N_probe). probe = train reproduces the singular values.
SpectrumProjection svd_spectrum_projection(const Matrix& train_features,
                                           const Matrix& probe_features);

// Fraction of rows whose argmax (ties to smallest index) equals the label.
double classification_accuracy(const Matrix& logits, const std::vector<int>& labels);

// Sample Pearson correlation. Throws DegenerateInputError if either series
// is constant.
double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

} // namespace ncood
