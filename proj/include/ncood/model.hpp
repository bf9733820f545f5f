#pragma once

#include <string>
#include <vector>

#include "ncood/linalg.hpp"
#include "ncood/rng.hpp"

namespace ncood {

enum class Activation { Rectifier, LeakyRectifier };

struct MlpOptions {
    Activation activation = Activation::Rectifier;
    double leaky_slope = 0.01;
    bool l2_normalize_features = false;
    double l2_epsilon = 1e-12;
    bool spectral_normalize = false;
    int spectral_iterations = 1;
};

// Feed-forward classifier: hidden layers with bias and activation, then a
// bias-free C x d linear classifier on the (optionally L2-normalized)
// feature output. Hidden weight W_l maps layer_dims[l] -> layer_dims[l+1].
struct MlpClassifier {
    std::vector<int> layer_dims; // input -> hidden... -> feature dim d
    int num_classes = 0;
    MlpOptions options;

    std::vector<Matrix> hidden_weights;
    std::vector<Vector> hidden_biases;
    Matrix classifier_weights; // C x d, no bias

    // Persistent power-iteration state, one pair per hidden layer. Kept in
    // checkpoints so continued training is bit-reproducible.
    std::vector<Vector> power_u;
    std::vector<Vector> power_v;

    int input_dim() const { return layer_dims.front(); }
    int feature_dim() const { return layer_dims.back(); }
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases drawn
// row-major from rng, then one normalized vector pair per hidden layer for
// the power iteration. The draw order is fixed and independent of the
// option flags.
MlpClassifier make_mlp(std::vector<int> layer_dims, int num_classes, MlpOptions options,
                       Rng& rng);
void reinitialize_weights(MlpClassifier& model, Rng& rng);

struct ForwardCache {
    std::vector<Matrix> layer_inputs;    // input to each hidden layer
    std::vector<Matrix> pre_activations; // affine outputs before activation
    Matrix pre_norm_features;            // feature rows before optional L2 normalization
    Matrix features;
    Matrix logits;
};

struct ForwardResult {
    Matrix features;
    Matrix logits;
};

ForwardResult forward(const MlpClassifier& model, const Matrix& inputs);
ForwardCache forward_cached(const MlpClassifier& model, const Matrix& inputs);

struct ModelGradients {
    std::vector<Matrix> hidden_weights;
    std::vector<Vector> hidden_biases;
    Matrix classifier_weights;
};

// Backpropagates a direct feature-space gradient plus a logit gradient
// through the cached forward pass. Either input may be empty (treated as
// zero). The classifier gradient covers only the logit path; losses that
// touch classifier rows directly add their own term.
ModelGradients backward(const MlpClassifier& model, const ForwardCache& cache,
                        const Matrix& d_features, const Matrix& d_logits);

void apply_sgd_step(MlpClassifier& model, const ModelGradients& grads, double learning_rate);

// One power-iteration refinement per hidden matrix, then W /= max(1, sigma).
// Keeps every estimated top singular value within 1.05 after a step.
void spectral_project(MlpClassifier& model);
std::vector<double> spectral_norm_estimates(const MlpClassifier& model);

// Versioned binary checkpoint, magic "NCCK". Round-trip is bit-exact.
std::string encode_checkpoint(const MlpClassifier& model);
MlpClassifier decode_checkpoint(std::string_view bytes);
void save_checkpoint(const MlpClassifier& model, const std::string& path);
MlpClassifier load_checkpoint(const std::string& path);

} // namespace ncood
