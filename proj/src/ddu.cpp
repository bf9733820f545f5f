#include "ncood/ddu.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "ncood/errors.hpp"

namespace ncood {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

// Ladder of diagonal boosts tried in order; index 0 is no jitter at all.
std::vector<double> jitter_ladder() {
    std::vector<double> ladder{0.0};
    for (int e = -12; e <= -1; ++e) ladder.push_back(std::pow(10.0, e));
    return ladder;
}

struct CholeskyComponent {
    Eigen::LLT<Matrix> llt;
    double log_norm_const; // -0.5 (d log 2pi + log det Sigma) + log prior
};

std::vector<CholeskyComponent> factor_components(const GaussianMixtureDensity& gmm) {
    const auto d = static_cast<double>(gmm.dim());
    std::vector<CholeskyComponent> components;
    components.reserve(gmm.class_covariances.size());
    for (int y = 0; y < gmm.num_components(); ++y) {
        Matrix sigma = gmm.class_covariances[static_cast<std::size_t>(y)];
        sigma.diagonal().array() += gmm.jitter;
        CholeskyComponent comp;
        comp.llt.compute(sigma);
        if (comp.llt.info() != Eigen::Success) {
            throw FitFailedError("log_density: covariance of component " + std::to_string(y) +
                                 " is not positive definite under stored jitter");
        }
        const double log_det =
            2.0 * comp.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        comp.log_norm_const = -0.5 * (d * kLog2Pi + log_det) + gmm.class_log_priors(y);
        components.push_back(std::move(comp));
    }
    return components;
}

double score_point(const std::vector<CholeskyComponent>& components,
                   const GaussianMixtureDensity& gmm, const Vector& z) {
    double max_term = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(components.size());
    for (std::size_t y = 0; y < components.size(); ++y) {
        const Vector residual = z - gmm.class_means.row(static_cast<Eigen::Index>(y)).transpose();
        const Vector whitened = components[y].llt.matrixL().solve(residual);
        terms[y] = components[y].log_norm_const - 0.5 * whitened.squaredNorm();
        if (terms[y] > max_term) max_term = terms[y];
    }
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - max_term);
    return max_term + std::log(sum);
}

} // namespace

std::string to_string(SpaceTag tag) {
    return tag == SpaceTag::FeatureSpace ? "feature-space" : "logit-space";
}

SpaceTag parse_space_tag(const std::string& text) {
    if (text == "feature-space") return SpaceTag::FeatureSpace;
    if (text == "logit-space") return SpaceTag::LogitSpace;
    throw InvalidInputError("unknown space tag '" + text + "'");
}

GaussianMixtureDensity fit_gmm(const FeatureBank& bank, SpaceTag space_tag) {
    const int c = bank.num_classes;
    const Eigen::Index d = bank.dim();
    const Eigen::Index n = bank.size();

    std::vector<Eigen::Index> counts(static_cast<std::size_t>(c), 0);
    for (int label : bank.labels) counts[static_cast<std::size_t>(label)] += 1;
    for (int y = 0; y < c; ++y) {
        if (counts[static_cast<std::size_t>(y)] < 2) {
            throw InvalidInputError("fit_gmm: class " + std::to_string(y) +
                                    " has fewer than 2 samples");
        }
    }

    GaussianMixtureDensity gmm;
    gmm.space_tag = space_tag;
    gmm.class_means = Matrix::Zero(c, d);
    gmm.class_covariances.assign(static_cast<std::size_t>(c), Matrix::Zero(d, d));
    gmm.class_log_priors = Vector::Zero(c);

    for (Eigen::Index i = 0; i < n; ++i) {
        gmm.class_means.row(bank.labels[static_cast<std::size_t>(i)]) += bank.features.row(i);
    }
    for (int y = 0; y < c; ++y) {
        gmm.class_means.row(y) /= static_cast<double>(counts[static_cast<std::size_t>(y)]);
        gmm.class_log_priors(y) = std::log(static_cast<double>(counts[static_cast<std::size_t>(y)]) /
                                           static_cast<double>(n));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = bank.labels[static_cast<std::size_t>(i)];
        const Vector r = bank.features.row(i).transpose() - gmm.class_means.row(y).transpose();
        gmm.class_covariances[static_cast<std::size_t>(y)].noalias() += r * r.transpose();
    }
    for (int y = 0; y < c; ++y) {
        gmm.class_covariances[static_cast<std::size_t>(y)] /=
            static_cast<double>(counts[static_cast<std::size_t>(y)]);
    }

    for (double jitter : jitter_ladder()) {
        bool all_factorable = true;
        for (int y = 0; y < c && all_factorable; ++y) {
            Matrix sigma = gmm.class_covariances[static_cast<std::size_t>(y)];
            sigma.diagonal().array() += jitter;
            Eigen::LLT<Matrix> llt(sigma);
            all_factorable = llt.info() == Eigen::Success;
        }
        if (all_factorable) {
            gmm.jitter = jitter;
            return gmm;
        }
    }
    throw FitFailedError("fit_gmm: no jitter value up to 1e-1 makes every class covariance "
                         "positive definite");
}

double log_density(const GaussianMixtureDensity& gmm, const Vector& z) {
    if (z.size() != gmm.dim()) {
        throw InvalidInputError("log_density: query width " + std::to_string(z.size()) +
                                " does not match mixture dim " + std::to_string(gmm.dim()));
    }
    if (!all_finite(z)) throw InvalidInputError("log_density: non-finite query");
    const auto components = factor_components(gmm);
    return score_point(components, gmm, z);
}

std::vector<double> log_density(const GaussianMixtureDensity& gmm, const Matrix& zs) {
    if (zs.cols() != gmm.dim()) {
        throw InvalidInputError("log_density: query width " + std::to_string(zs.cols()) +
                                " does not match mixture dim " + std::to_string(gmm.dim()));
    }
    if (!all_finite(zs)) throw InvalidInputError("log_density: non-finite query");
    const auto components = factor_components(gmm);
    std::vector<double> scores(static_cast<std::size_t>(zs.rows()));
    for (Eigen::Index i = 0; i < zs.rows(); ++i) {
        scores[static_cast<std::size_t>(i)] = score_point(components, gmm, zs.row(i).transpose());
    }
    return scores;
}

nlohmann::json gmm_to_json(const GaussianMixtureDensity& gmm) {
    nlohmann::json j;
    j["space_tag"] = to_string(gmm.space_tag);
    j["jitter"] = gmm.jitter;
    j["num_classes"] = gmm.num_components();
    j["dim"] = gmm.dim();

    auto matrix_rows = [](const Matrix& m) {
        std::vector<std::vector<double>> rows;
        rows.reserve(static_cast<std::size_t>(m.rows()));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            rows.emplace_back(m.row(r).begin(), m.row(r).end());
        }
        return rows;
    };
    j["class_means"] = matrix_rows(gmm.class_means);
    j["class_log_priors"] = std::vector<double>(gmm.class_log_priors.begin(),
                                                gmm.class_log_priors.end());
    std::vector<std::vector<std::vector<double>>> covs;
    for (const Matrix& sigma : gmm.class_covariances) covs.push_back(matrix_rows(sigma));
    j["class_covariances"] = covs;
    return j;
}

GaussianMixtureDensity gmm_from_json(const nlohmann::json& j) {
    GaussianMixtureDensity gmm;
    try {
        gmm.space_tag = parse_space_tag(j.at("space_tag").get<std::string>());
        gmm.jitter = j.at("jitter").get<double>();
        const int c = j.at("num_classes").get<int>();
        const auto d = j.at("dim").get<Eigen::Index>();
        if (c < 1 || d < 1) throw InvalidInputError("gmm_from_json: non-positive dimensions");

        const auto& means = j.at("class_means");
        const auto& priors = j.at("class_log_priors");
        const auto& covs = j.at("class_covariances");
        if (static_cast<int>(means.size()) != c || static_cast<int>(priors.size()) != c ||
            static_cast<int>(covs.size()) != c) {
            throw InvalidInputError("gmm_from_json: component count mismatch");
        }

        gmm.class_means = Matrix(c, d);
        gmm.class_log_priors = Vector(c);
        gmm.class_covariances.assign(static_cast<std::size_t>(c), Matrix(d, d));
        for (int y = 0; y < c; ++y) {
            const auto row = means[static_cast<std::size_t>(y)].get<std::vector<double>>();
            if (static_cast<Eigen::Index>(row.size()) != d) {
                throw InvalidInputError("gmm_from_json: mean width mismatch");
            }
            for (Eigen::Index k = 0; k < d; ++k) gmm.class_means(y, k) = row[static_cast<std::size_t>(k)];
            gmm.class_log_priors(y) = priors[static_cast<std::size_t>(y)].get<double>();
            const auto& cov = covs[static_cast<std::size_t>(y)];
            if (static_cast<Eigen::Index>(cov.size()) != d) {
                throw InvalidInputError("gmm_from_json: covariance height mismatch");
            }
            for (Eigen::Index r = 0; r < d; ++r) {
                const auto cov_row = cov[static_cast<std::size_t>(r)].get<std::vector<double>>();
                if (static_cast<Eigen::Index>(cov_row.size()) != d) {
                    throw InvalidInputError("gmm_from_json: covariance width mismatch");
                }
                for (Eigen::Index k = 0; k < d; ++k) {
                    gmm.class_covariances[static_cast<std::size_t>(y)](r, k) =
                        cov_row[static_cast<std::size_t>(k)];
                }
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInputError(std::string("gmm_from_json: malformed document: ") + e.what());
    }

    const double prior_mass = gmm.class_log_priors.array().exp().sum();
    if (std::abs(prior_mass - 1.0) > 1e-12) {
        throw InvalidInputError("gmm_from_json: priors sum to " + std::to_string(prior_mass));
    }
    return gmm;
}

} // namespace ncood
