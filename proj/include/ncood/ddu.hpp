#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "ncood/feature_stats.hpp"
#include "ncood/linalg.hpp"

namespace ncood {

enum class SpaceTag { FeatureSpace, LogitSpace };

std::string to_string(SpaceTag tag);
SpaceTag parse_space_tag(const std::string& text);

// Class-conditional Gaussian mixture fitted from labeled vectors. The
// effective covariance of class y is class_covariances[y] + jitter * I;
// exp(class_log_priors) sums to 1.
struct GaussianMixtureDensity {
    Matrix class_means;                    // C x d
    std::vector<Matrix> class_covariances; // C of d x d
    Vector class_log_priors;               // C
    double jitter = 0.0;
    SpaceTag space_tag = SpaceTag::FeatureSpace;

    int num_components() const { return static_cast<int>(class_means.rows()); }
    Eigen::Index dim() const { return class_means.cols(); }
};

// mu_y = class mean, Sigma_y = class covariance (divide by n_y), prior
// n_y/N. Jitter is the smallest rung of {0, 1e-12, 1e-11, ..., 1e-1} under
// which every class covariance factors; throws FitFailedError if none does.
// Requires >= 2 samples per class.
GaussianMixtureDensity fit_gmm(const FeatureBank& bank, SpaceTag space_tag);

// log sum_y exp(log N(z; mu_y, Sigma_y + jitter I) + log prior_y), via
// log-sum-exp with Cholesky solves.
double log_density(const GaussianMixtureDensity& gmm, const Vector& z);

// Batch variant; factors each class covariance once.
std::vector<double> log_density(const GaussianMixtureDensity& gmm, const Matrix& zs);

// JSON round-trip is exact to the last bit (17-digit decimal serialization).
nlohmann::json gmm_to_json(const GaussianMixtureDensity& gmm);
GaussianMixtureDensity gmm_from_json(const nlohmann::json& j);

} // namespace ncood
