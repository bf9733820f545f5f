#pragma once

#include <vector>

#include "ncood/linalg.hpp"

namespace ncood {

// Mean over the batch of -log softmax(logits)[label], max-subtracted.
double cross_entropy(const Matrix& logits, const std::vector<int>& labels);

// d(cross_entropy)/d(logits) = (softmax - onehot) / B.
Matrix cross_entropy_gradient(const Matrix& logits, const std::vector<int>& labels);

// Unweighted sum NC1 + EN_means + EN_classifier + EA_means + EA_classifier
// + NC3 over batch-level statistics. Every class must appear in the batch.
// The nearest-mean error is excluded: no useful gradient exists through an
// argmin.
double nc_loss(const Matrix& features, const std::vector<int>& labels, const Matrix& classifier);

struct NcLossGradients {
    double loss = 0.0;
    Matrix features;   // B x d
    Matrix classifier; // C x d
};

// Value and exact analytic gradients in one pass. The feature gradient
// flows through batch class means, the global mean, and both covariance
// pseudoinverse paths.
NcLossGradients nc_loss_gradients(const Matrix& features, const std::vector<int>& labels,
                                  const Matrix& classifier);

} // namespace ncood
