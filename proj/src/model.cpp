#include "ncood/model.hpp"

#include <cmath>

#include "ncood/errors.hpp"
#include "ncood/io.hpp"

namespace ncood {

namespace {

void check_architecture(const std::vector<int>& layer_dims, int num_classes) {
    if (layer_dims.size() < 2) {
        throw InvalidInputError("MlpClassifier: layer_dims needs input and feature dims");
    }
    for (int dim : layer_dims) {
        if (dim <= 0) throw InvalidInputError("MlpClassifier: non-positive layer dim");
    }
    if (num_classes < 2) {
        throw InvalidInputError("MlpClassifier: need at least 2 classes");
    }
}

Matrix activated(const Matrix& pre, const MlpOptions& options) {
    if (options.activation == Activation::Rectifier) {
        return pre.cwiseMax(0.0);
    }
    const double slope = options.leaky_slope;
    return pre.unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
}

Matrix activation_slope(const Matrix& pre, const MlpOptions& options) {
    const double below = options.activation == Activation::Rectifier ? 0.0 : options.leaky_slope;
    return pre.unaryExpr([below](double x) { return x > 0.0 ? 1.0 : below; });
}

Vector drawn_unit_vector(Eigen::Index size, Rng& rng) {
    Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = rng.normal();
    const double norm = v.norm();
    return norm > 0.0 ? Vector(v / norm) : v;
}

} // namespace

void reinitialize_weights(MlpClassifier& model, Rng& rng) {
    const auto layers = model.hidden_weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix& w = model.hidden_weights[l];
        Vector& b = model.hidden_biases[l];
        const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-bound, bound);
        }
        for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = rng.uniform(-bound, bound);
    }
    const double cls_bound = 1.0 / std::sqrt(static_cast<double>(model.feature_dim()));
    for (Eigen::Index r = 0; r < model.classifier_weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < model.classifier_weights.cols(); ++c) {
            model.classifier_weights(r, c) = rng.uniform(-cls_bound, cls_bound);
        }
    }
    // Power-iteration vectors are drawn unconditionally so that the weight
    // stream is identical across all option toggles for one seed.
    for (std::size_t l = 0; l < layers; ++l) {
        model.power_u[l] = drawn_unit_vector(model.hidden_weights[l].rows(), rng);
        model.power_v[l] = drawn_unit_vector(model.hidden_weights[l].cols(), rng);
    }
}

MlpClassifier make_mlp(std::vector<int> layer_dims, int num_classes, MlpOptions options,
                       Rng& rng) {
    check_architecture(layer_dims, num_classes);
    if (options.l2_epsilon <= 0.0) {
        throw InvalidInputError("MlpClassifier: l2_epsilon must be positive");
    }
    if (options.spectral_iterations < 1) {
        throw InvalidInputError("MlpClassifier: spectral_iterations must be >= 1");
    }

    MlpClassifier model;
    model.layer_dims = std::move(layer_dims);
    model.num_classes = num_classes;
    model.options = options;

    const std::size_t layers = model.layer_dims.size() - 1;
    model.hidden_weights.reserve(layers);
    model.hidden_biases.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        model.hidden_weights.emplace_back(model.layer_dims[l + 1], model.layer_dims[l]);
        model.hidden_biases.emplace_back(model.layer_dims[l + 1]);
    }
    model.classifier_weights.resize(num_classes, model.feature_dim());
    model.power_u.resize(layers);
    model.power_v.resize(layers);
    reinitialize_weights(model, rng);
    return model;
}

ForwardCache forward_cached(const MlpClassifier& model, const Matrix& inputs) {
    if (inputs.cols() != model.input_dim()) {
        throw InvalidInputError("forward: input width " + std::to_string(inputs.cols()) +
                                " does not match layer_dims[0] = " +
                                std::to_string(model.input_dim()));
    }
    ForwardCache cache;
    const std::size_t layers = model.hidden_weights.size();
    cache.layer_inputs.reserve(layers);
    cache.pre_activations.reserve(layers);

    Matrix h = inputs;
    for (std::size_t l = 0; l < layers; ++l) {
        cache.layer_inputs.push_back(h);
        Matrix pre = h * model.hidden_weights[l].transpose();
        pre.rowwise() += model.hidden_biases[l].transpose();
        h = activated(pre, model.options);
        cache.pre_activations.push_back(std::move(pre));
    }
    cache.pre_norm_features = std::move(h);
    cache.features = model.options.l2_normalize_features
                         ? l2_normalize_rows(cache.pre_norm_features, model.options.l2_epsilon)
                         : cache.pre_norm_features;
    cache.logits = cache.features * model.classifier_weights.transpose();
    return cache;
}

ForwardResult forward(const MlpClassifier& model, const Matrix& inputs) {
    ForwardCache cache = forward_cached(model, inputs);
    return {std::move(cache.features), std::move(cache.logits)};
}

ModelGradients backward(const MlpClassifier& model, const ForwardCache& cache,
                        const Matrix& d_features, const Matrix& d_logits) {
    const Eigen::Index batch = cache.features.rows();
    ModelGradients grads;
    grads.classifier_weights = Matrix::Zero(model.num_classes, model.feature_dim());

    Matrix df;
    if (d_features.size() > 0) {
        df = d_features;
    } else {
        df = Matrix::Zero(batch, model.feature_dim());
    }
    if (d_logits.size() > 0) {
        grads.classifier_weights.noalias() += d_logits.transpose() * cache.features;
        df.noalias() += d_logits * model.classifier_weights;
    }

    if (model.options.l2_normalize_features) {
        const double eps = model.options.l2_epsilon;
        for (Eigen::Index i = 0; i < batch; ++i) {
            const double norm = cache.pre_norm_features.row(i).norm();
            if (norm >= eps) {
                // d(z/||z||) pulls out the radial component.
                const double radial = df.row(i).dot(cache.features.row(i));
                df.row(i) = (df.row(i) - radial * cache.features.row(i)) / norm;
            } else {
                df.row(i) /= eps;
            }
        }
    }

    const std::size_t layers = model.hidden_weights.size();
    grads.hidden_weights.resize(layers);
    grads.hidden_biases.resize(layers);
    Matrix dh = std::move(df);
    for (std::size_t l = layers; l-- > 0;) {
        const Matrix d_pre =
            dh.cwiseProduct(activation_slope(cache.pre_activations[l], model.options));
        grads.hidden_weights[l].noalias() = d_pre.transpose() * cache.layer_inputs[l];
        grads.hidden_biases[l] = d_pre.colwise().sum().transpose();
        if (l > 0) dh.noalias() = d_pre * model.hidden_weights[l];
    }
    return grads;
}

void apply_sgd_step(MlpClassifier& model, const ModelGradients& grads, double learning_rate) {
    for (std::size_t l = 0; l < model.hidden_weights.size(); ++l) {
        model.hidden_weights[l] -= learning_rate * grads.hidden_weights[l];
        model.hidden_biases[l] -= learning_rate * grads.hidden_biases[l];
    }
    model.classifier_weights -= learning_rate * grads.classifier_weights;
}

void spectral_project(MlpClassifier& model) {
    for (std::size_t l = 0; l < model.hidden_weights.size(); ++l) {
        Matrix& w = model.hidden_weights[l];
        Vector& u = model.power_u[l];
        Vector& v = model.power_v[l];
        bool degenerate = false;
        for (int it = 0; it < model.options.spectral_iterations && !degenerate; ++it) {
            Vector v_next = w.transpose() * u;
            const double v_norm = v_next.norm();
            if (v_norm == 0.0) {
                degenerate = true;
                break;
            }
            v = v_next / v_norm;
            Vector u_next = w * v;
            const double u_norm = u_next.norm();
            if (u_norm == 0.0) {
                degenerate = true;
                break;
            }
            u = u_next / u_norm;
        }
        if (degenerate) continue;
        const double sigma = u.dot(w * v);
        if (sigma > 1.0) w /= sigma;
    }
}

std::vector<double> spectral_norm_estimates(const MlpClassifier& model) {
    std::vector<double> estimates;
    estimates.reserve(model.hidden_weights.size());
    for (const Matrix& w : model.hidden_weights) {
        estimates.push_back(svd(w).singular_values(0));
    }
    return estimates;
}

// ---------------------------------------------------------------------------
// NCCK checkpoint format, version 1.

namespace {

constexpr std::uint8_t kCheckpointVersion = 1;

void append_matrix(std::string& buf, const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) append_f64le(buf, m(r, c));
    }
}

void append_vector(std::string& buf, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) append_f64le(buf, v(i));
}

Matrix read_matrix(ByteReader& reader, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = reader.read_f64le();
    }
    return m;
}

Vector read_vector(ByteReader& reader, Eigen::Index size) {
    Vector v(size);
    for (Eigen::Index i = 0; i < size; ++i) v(i) = reader.read_f64le();
    return v;
}

} // namespace

std::string encode_checkpoint(const MlpClassifier& model) {
    std::string buf;
    buf += "NCCK";
    append_u8(buf, kCheckpointVersion);
    append_u32le(buf, static_cast<std::uint32_t>(model.layer_dims.size()));
    for (int dim : model.layer_dims) append_u32le(buf, static_cast<std::uint32_t>(dim));
    append_u32le(buf, static_cast<std::uint32_t>(model.num_classes));
    append_u8(buf, model.options.activation == Activation::LeakyRectifier ? 1 : 0);
    append_f64le(buf, model.options.leaky_slope);
    append_u8(buf, model.options.l2_normalize_features ? 1 : 0);
    append_f64le(buf, model.options.l2_epsilon);
    append_u8(buf, model.options.spectral_normalize ? 1 : 0);
    append_u32le(buf, static_cast<std::uint32_t>(model.options.spectral_iterations));

    for (std::size_t l = 0; l < model.hidden_weights.size(); ++l) {
        append_matrix(buf, model.hidden_weights[l]);
        append_vector(buf, model.hidden_biases[l]);
    }
    append_matrix(buf, model.classifier_weights);
    for (std::size_t l = 0; l < model.hidden_weights.size(); ++l) {
        append_vector(buf, model.power_u[l]);
        append_vector(buf, model.power_v[l]);
    }
    return buf;
}

MlpClassifier decode_checkpoint(std::string_view bytes) {
    ByteReader reader(bytes);
    reader.expect_magic("NCCK", "NCCK");
    const std::uint8_t version = reader.read_u8();
    if (version != kCheckpointVersion) {
        throw InvalidInputError("NCCK: unsupported version " + std::to_string(version));
    }

    MlpClassifier model;
    const std::uint32_t num_dims = reader.read_u32le();
    if (num_dims < 2) throw InvalidInputError("NCCK: fewer than two layer dims");
    model.layer_dims.resize(num_dims);
    for (std::uint32_t i = 0; i < num_dims; ++i) {
        model.layer_dims[i] = static_cast<int>(reader.read_u32le());
    }
    model.num_classes = static_cast<int>(reader.read_u32le());
    model.options.activation =
        reader.read_u8() == 1 ? Activation::LeakyRectifier : Activation::Rectifier;
    model.options.leaky_slope = reader.read_f64le();
    model.options.l2_normalize_features = reader.read_u8() == 1;
    model.options.l2_epsilon = reader.read_f64le();
    model.options.spectral_normalize = reader.read_u8() == 1;
    model.options.spectral_iterations = static_cast<int>(reader.read_u32le());
    check_architecture(model.layer_dims, model.num_classes);

    const std::size_t layers = model.layer_dims.size() - 1;
    model.hidden_weights.reserve(layers);
    model.hidden_biases.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        model.hidden_weights.push_back(
            read_matrix(reader, model.layer_dims[l + 1], model.layer_dims[l]));
        model.hidden_biases.push_back(read_vector(reader, model.layer_dims[l + 1]));
    }
    model.classifier_weights = read_matrix(reader, model.num_classes, model.feature_dim());
    model.power_u.reserve(layers);
    model.power_v.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        model.power_u.push_back(read_vector(reader, model.layer_dims[l + 1]));
        model.power_v.push_back(read_vector(reader, model.layer_dims[l]));
    }
    if (reader.remaining() != 0) throw InvalidInputError("NCCK: trailing bytes");
    return model;
}

void save_checkpoint(const MlpClassifier& model, const std::string& path) {
    write_file_bytes(path, encode_checkpoint(model));
}

MlpClassifier load_checkpoint(const std::string& path) {
    return decode_checkpoint(read_file_bytes(path));
}

} // namespace ncood
