// Acceptance gate: eleven end-to-end criteria, one pass/fail line each.
// Tolerances and runtime budgets are pinned in the criterion functions; a
// criterion fails if its predicate fails or its budget is exceeded.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ncood/datagen.hpp"
#include "ncood/ddu.hpp"
#include "ncood/experiment.hpp"
#include "ncood/io.hpp"
#include "ncood/losses.hpp"
#include "ncood/model.hpp"
#include "ncood/nc_metrics.hpp"
#include "ncood/ood_eval.hpp"
#include "ncood/rng.hpp"
#include "ncood/train.hpp"

namespace fs = std::filesystem;
using ncood::FeatureBank;
using ncood::Matrix;
using ncood::Vector;

namespace {

struct CriterionResult {
    bool pass = false;
    std::vector<std::string> notes;

    void note(std::string line) { notes.push_back(std::move(line)); }
};

std::string fmt(const char* pattern, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, args...);
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// 1. A perfect simplex configuration is a fixed point of every collapse
//    metric: all seven report fields <= 1e-9 for C in 2..10.

CriterionResult criterion_simplex_fixed_point() {
    CriterionResult r;
    r.pass = true;
    double worst = 0.0;
    for (int c = 2; c <= 10; ++c) {
        const Matrix verts = ncood::simplex_etf_vertices(c);
        const int copies = 3;
        Matrix features(copies * c, c);
        std::vector<int> labels(static_cast<std::size_t>(copies) * c);
        for (int k = 0; k < c; ++k) {
            for (int s = 0; s < copies; ++s) {
                features.row(copies * k + s) = verts.row(k);
                labels[static_cast<std::size_t>(copies * k + s)] = k;
            }
        }
        // The frame has zero centroid, so the centered means equal the
        // vertices themselves; use them directly as the classifier.
        const FeatureBank bank(features, labels, c);
        const ncood::NcReport rep = ncood::nc_report(bank, verts);
        const double fields[7] = {rep.nc1,           rep.en_means, rep.en_classifier,
                                  rep.ea_means,      rep.ea_classifier,
                                  rep.nc3,           rep.nc4_error};
        for (const double f : fields) {
            worst = std::max(worst, f);
            if (!(f <= 1e-9)) r.pass = false;
        }
    }
    r.note(fmt("largest report field over C=2..10: %.3e (tolerance 1e-9)", worst));
    return r;
}

// ---------------------------------------------------------------------------
// 2. Equiangularity target: for C=10 the frame's pairwise cosines equal
//    -1/9 within 1e-12, in both the full and the reduced coordinates.

CriterionResult criterion_cosine_target() {
    CriterionResult r;
    const double target = -1.0 / 9.0;
    double worst = 0.0;
    for (const Matrix& verts :
         {ncood::simplex_etf_vertices(10), ncood::simplex_etf_vertices_reduced(10)}) {
        for (int i = 0; i < 10; ++i) {
            for (int j = 0; j < 10; ++j) {
                if (i == j) continue;
                const double cosine = verts.row(i).dot(verts.row(j)) /
                                      (verts.row(i).norm() * verts.row(j).norm());
                worst = std::max(worst, std::abs(cosine - target));
            }
        }
    }
    r.pass = worst <= 1e-12;
    r.note(fmt("largest |cosine + 1/9| over both frames: %.3e (tolerance 1e-12)", worst));
    return r;
}

// ---------------------------------------------------------------------------
// 3. Analytic gradients of both losses match central finite differences
//    (step 1e-5) with relative error < 1e-4 on a 3-class, d=4, B=12
//    instance whose model includes the feature-normalization layer.

double loss_value(const ncood::MlpClassifier& model, const Matrix& inputs,
                  const std::vector<int>& labels, ncood::LossMode mode) {
    const ncood::ForwardResult out = ncood::forward(model, inputs);
    if (mode == ncood::LossMode::CrossEntropy) return ncood::cross_entropy(out.logits, labels);
    return ncood::nc_loss(out.features, labels, model.classifier_weights);
}

ncood::ModelGradients analytic_gradients(const ncood::MlpClassifier& model,
                                         const Matrix& inputs, const std::vector<int>& labels,
                                         ncood::LossMode mode) {
    const ncood::ForwardCache cache = ncood::forward_cached(model, inputs);
    if (mode == ncood::LossMode::CrossEntropy) {
        const Matrix d_logits = ncood::cross_entropy_gradient(cache.logits, labels);
        return ncood::backward(model, cache, Matrix(), d_logits);
    }
    const ncood::NcLossGradients nc =
        ncood::nc_loss_gradients(cache.features, labels, model.classifier_weights);
    ncood::ModelGradients grads = ncood::backward(model, cache, nc.features, Matrix());
    grads.classifier_weights += nc.classifier;
    return grads;
}

double max_rel_error(ncood::MlpClassifier model, const Matrix& inputs,
                     const std::vector<int>& labels, ncood::LossMode mode) {
    constexpr double step = 1e-5;
    const ncood::ModelGradients grads = analytic_gradients(model, inputs, labels, mode);
    double worst = 0.0;
    const auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + step;
        const double up = loss_value(model, inputs, labels, mode);
        param = saved - step;
        const double down = loss_value(model, inputs, labels, mode);
        param = saved;
        const double fd = (up - down) / (2.0 * step);
        const double scale = std::max({std::abs(fd), std::abs(analytic), 1e-6});
        worst = std::max(worst, std::abs(fd - analytic) / scale);
    };
    for (std::size_t l = 0; l < model.hidden_weights.size(); ++l) {
        for (Eigen::Index i = 0; i < model.hidden_weights[l].size(); ++i)
            probe(model.hidden_weights[l].data()[i], grads.hidden_weights[l].data()[i]);
        for (Eigen::Index i = 0; i < model.hidden_biases[l].size(); ++i)
            probe(model.hidden_biases[l].data()[i], grads.hidden_biases[l].data()[i]);
    }
    for (Eigen::Index i = 0; i < model.classifier_weights.size(); ++i)
        probe(model.classifier_weights.data()[i], grads.classifier_weights.data()[i]);
    return worst;
}

CriterionResult criterion_gradient_oracle() {
    CriterionResult r;
    ncood::MlpOptions options;
    options.l2_normalize_features = true;
    ncood::Rng rng(2026);
    ncood::MlpClassifier model = ncood::make_mlp({4, 6, 4}, 3, options, rng);

    Matrix inputs(12, 4);
    for (Eigen::Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = rng.normal();
    std::vector<int> labels(12);
    for (int i = 0; i < 12; ++i) labels[static_cast<std::size_t>(i)] = i % 3;

    const double ce = max_rel_error(model, inputs, labels, ncood::LossMode::CrossEntropy);
    const double nc = max_rel_error(model, inputs, labels, ncood::LossMode::NcLoss);
    r.pass = ce < 1e-4 && nc < 1e-4;
    r.note(fmt("max relative error: cross-entropy %.3e, collapse loss %.3e (tolerance 1e-4)",
               ce, nc));
    return r;
}

// ---------------------------------------------------------------------------
// 4. The rank-based AUROC is bit-equal to the O(n*m) pairwise oracle on 50
//    random (n=200, m=100) score populations with deliberate ties.

double pairwise_auroc_oracle(const std::vector<double>& id_scores,
                             const std::vector<double>& ood_scores) {
    std::uint64_t half_wins = 0;
    for (const double a : id_scores) {
        for (const double b : ood_scores) {
            if (a > b) half_wins += 2;
            else if (a == b) half_wins += 1;
        }
    }
    return static_cast<double>(half_wins) /
           static_cast<double>(2 * id_scores.size() * ood_scores.size());
}

CriterionResult criterion_auroc_oracle() {
    CriterionResult r;
    r.pass = true;
    ncood::Rng rng(404);
    int exact = 0;
    for (int rep = 0; rep < 50; ++rep) {
        ncood::ScoredPopulations pop;
        const auto draw = [&](double shift) {
            double v = rng.normal() + shift;
            // Quantizing a third of the draws to halves manufactures ties
            // inside and across the two populations.
            if (rng.uniform01() < 0.34) v = std::round(v * 2.0) / 2.0;
            return v;
        };
        for (int i = 0; i < 200; ++i) pop.id_scores.push_back(draw(0.6));
        for (int i = 0; i < 100; ++i) pop.ood_scores.push_back(draw(-0.6));
        const double fast = ncood::auroc(pop);
        const double oracle = pairwise_auroc_oracle(pop.id_scores, pop.ood_scores);
        if (fast == oracle) ++exact;
        else r.pass = false;
    }
    r.note(fmt("bit-equal populations: %d / 50", exact));
    return r;
}

// ---------------------------------------------------------------------------
// 5. Mixture log densities match the naive inverse/determinant formula
//    within 1e-9 on 100 random mixtures (C <= 5, d <= 8); the 2-D
//    standard-normal mode value equals -log(2*pi) within 1e-12.

double naive_log_density(const ncood::GaussianMixtureDensity& gmm, const Vector& z) {
    const Eigen::Index d = gmm.dim();
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    for (int c = 0; c < gmm.num_components(); ++c) {
        const Matrix cov =
            gmm.class_covariances[static_cast<std::size_t>(c)] + gmm.jitter * Matrix::Identity(d, d);
        const Vector diff = z - gmm.class_means.row(c).transpose();
        const double quad = diff.dot(cov.inverse() * diff);
        const double log_norm = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) +
                                        std::log(cov.determinant()));
        terms.push_back(gmm.class_log_priors(c) + log_norm - 0.5 * quad);
        best = std::max(best, terms.back());
    }
    double acc = 0.0;
    for (const double t : terms) acc += std::exp(t - best);
    return best + std::log(acc);
}

CriterionResult criterion_density_oracle() {
    CriterionResult r;
    ncood::Rng rng(505);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const int c = 1 + static_cast<int>(rng.bounded(5));
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.bounded(8));
        ncood::GaussianMixtureDensity gmm;
        gmm.class_means = Matrix(c, d);
        for (Eigen::Index i = 0; i < gmm.class_means.size(); ++i)
            gmm.class_means.data()[i] = 2.0 * rng.normal();
        for (int k = 0; k < c; ++k) {
            Matrix a(d, d);
            for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
            gmm.class_covariances.push_back(a * a.transpose() + 0.5 * Matrix::Identity(d, d));
        }
        Vector raw(c);
        for (int k = 0; k < c; ++k) raw(k) = rng.uniform01() + 0.1;
        gmm.class_log_priors = (raw / raw.sum()).array().log().matrix();
        for (int probe = 0; probe < 3; ++probe) {
            Vector z(d);
            for (Eigen::Index i = 0; i < d; ++i) z(i) = 3.0 * rng.normal();
            worst = std::max(worst,
                             std::abs(ncood::log_density(gmm, z) - naive_log_density(gmm, z)));
        }
    }

    ncood::GaussianMixtureDensity unit;
    unit.class_means = Matrix::Zero(1, 2);
    unit.class_covariances = {Matrix::Identity(2, 2)};
    unit.class_log_priors = Vector::Zero(1);
    const double mode_err =
        std::abs(ncood::log_density(unit, Vector(Vector::Zero(2))) +
                 std::log(2.0 * std::numbers::pi));

    r.pass = worst <= 1e-9 && mode_err <= 1e-12;
    r.note(fmt("largest |density - oracle|: %.3e (tolerance 1e-9); mode error %.3e "
               "(tolerance 1e-12)",
               worst, mode_err));
    return r;
}

// ---------------------------------------------------------------------------
// Shared desk-scale training helpers for the replication criteria.

ncood::MlpClassifier trained_model(const FeatureBank& train, std::vector<int> layer_dims,
                                   ncood::MlpOptions options, std::uint64_t seed,
                                   ncood::TrainConfig tc,
                                   ncood::TrainTrace* trace_out = nullptr,
                                   const ncood::EpochCallback& callback = {}) {
    ncood::Rng model_rng(ncood::derive_seed(seed, "model"));
    ncood::MlpClassifier model =
        ncood::make_mlp(std::move(layer_dims), train.num_classes, options, model_rng);
    tc.seed = ncood::derive_seed(seed, "train");
    ncood::TrainTrace trace =
        ncood::train(model, train, tc, ncood::WeightInit::FromSeed, callback);
    if (trace_out) *trace_out = std::move(trace);
    return model;
}

struct ScorerAurocs {
    double gmm_feature = 0.0;
    double gmm_logit = 0.0;
    double softmax = 0.0;
    std::size_t false_positives = 0;
};

ScorerAurocs score_model(const ncood::MlpClassifier& model, const ncood::SyntheticData& data) {
    const ncood::ForwardResult train_out = ncood::forward(model, data.train.features);
    const ncood::ForwardResult id_out = ncood::forward(model, data.id_test.features);
    const ncood::ForwardResult ood_out = ncood::forward(model, data.ood_test);

    const FeatureBank feature_bank(train_out.features, data.train.labels,
                                   data.train.num_classes);
    const FeatureBank logit_bank(train_out.logits, data.train.labels, data.train.num_classes);
    const ncood::GaussianMixtureDensity gmm_feature =
        ncood::fit_gmm(feature_bank, ncood::SpaceTag::FeatureSpace);
    const ncood::GaussianMixtureDensity gmm_logit =
        ncood::fit_gmm(logit_bank, ncood::SpaceTag::LogitSpace);

    ScorerAurocs out;
    ncood::ScoredPopulations feature_pop{ncood::log_density(gmm_feature, id_out.features),
                                         ncood::log_density(gmm_feature, ood_out.features),
                                         ncood::ScoreSource::GmmFeature};
    out.gmm_feature = ncood::auroc(feature_pop);
    out.false_positives = ncood::false_positive_count(feature_pop);
    out.gmm_logit = ncood::auroc({ncood::log_density(gmm_logit, id_out.logits),
                                  ncood::log_density(gmm_logit, ood_out.logits),
                                  ncood::ScoreSource::GmmLogit});
    out.softmax = ncood::auroc({ncood::softmax_max_score(id_out.logits),
                                ncood::softmax_max_score(ood_out.logits),
                                ncood::ScoreSource::SoftmaxMax});
    return out;
}

// ---------------------------------------------------------------------------
// 6. On an 8-class, 16-D task where plain cross-entropy training reaches
//    NC1 < 0.5 within 200 epochs, the feature-normalized model reaches the
//    same threshold in at most half the epochs, in >= 4 of 5 seeds.

std::optional<int> epochs_to_collapse(const ncood::TrainTrace& trace, double threshold) {
    for (std::size_t e = 0; e < trace.epochs.size(); ++e) {
        if (trace.epochs[e].nc.nc1 < threshold) return static_cast<int>(e) + 1;
    }
    return std::nullopt;
}

CriterionResult criterion_faster_collapse() {
    CriterionResult r;
    ncood::SyntheticSpec spec;
    spec.num_classes = 8;
    spec.input_dim = 16;
    spec.samples_per_class = 80;
    spec.cluster_spread = 1.25;
    spec.class_separation = 3.5;
    spec.ood_kind = ncood::OodKind::UniformBox;
    spec.ood_samples = 8;

    ncood::TrainConfig tc;
    tc.epochs = 200;
    tc.batch_size = 64;
    tc.initial_lr = 0.08;

    ncood::MlpOptions plain;
    ncood::MlpOptions normalized;
    normalized.l2_normalize_features = true;

    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        spec.seed = ncood::derive_seed(seed, "data");
        const ncood::SyntheticData data = ncood::generate(spec);
        ncood::TrainTrace plain_trace;
        ncood::TrainTrace norm_trace;
        trained_model(data.train, {16, 128, 16}, plain, seed, tc, &plain_trace);
        trained_model(data.train, {16, 128, 16}, normalized, seed, tc, &norm_trace);
        const std::optional<int> plain_epochs = epochs_to_collapse(plain_trace, 0.5);
        const std::optional<int> norm_epochs = epochs_to_collapse(norm_trace, 0.5);
        const bool win =
            plain_epochs && norm_epochs && 2 * *norm_epochs <= *plain_epochs;
        wins += win ? 1 : 0;
        r.note(fmt("seed %llu: epochs to NC1<0.5, plain %s vs normalized %s -> %s",
                   static_cast<unsigned long long>(seed),
                   plain_epochs ? fmt("%d", *plain_epochs).c_str() : ">200",
                   norm_epochs ? fmt("%d", *norm_epochs).c_str() : ">200",
                   win ? "at least 2x faster" : "not 2x faster"));
    }
    r.pass = wins >= 4;
    r.note(fmt("seeds with a >=2x speedup: %d / 5 (need >= 4)", wins));
    return r;
}

// ---------------------------------------------------------------------------
// 7. On a shifted-clusters benchmark the feature-space mixture scorer beats
//    both the softmax-confidence and logit-space mixture scorers by a mean
//    AUROC margin >= 0.01 over 5 seeds.

CriterionResult criterion_scorer_ordering() {
    CriterionResult r;
    ncood::SyntheticSpec spec;
    spec.num_classes = 5;
    spec.input_dim = 8;
    spec.samples_per_class = 100;
    spec.cluster_spread = 1.1;
    spec.class_separation = 3.0;
    spec.ood_kind = ncood::OodKind::ShiftedClusters;
    spec.ood_samples = 250;
    spec.ood_shift_factor = 1.2;

    ncood::TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 50;
    tc.initial_lr = 0.05;

    double sum_feature = 0.0;
    double sum_logit = 0.0;
    double sum_softmax = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        spec.seed = ncood::derive_seed(seed, "data");
        const ncood::SyntheticData data = ncood::generate(spec);
        const ncood::MlpClassifier model =
            trained_model(data.train, {8, 32, 16}, ncood::MlpOptions{}, seed, tc);
        const ScorerAurocs aurocs = score_model(model, data);
        sum_feature += aurocs.gmm_feature;
        sum_logit += aurocs.gmm_logit;
        sum_softmax += aurocs.softmax;
        r.note(fmt("seed %llu: feature-density %.4f, logit-density %.4f, softmax %.4f",
                   static_cast<unsigned long long>(seed), aurocs.gmm_feature,
                   aurocs.gmm_logit, aurocs.softmax));
    }
    const double mean_feature = sum_feature / 5.0;
    const double mean_logit = sum_logit / 5.0;
    const double mean_softmax = sum_softmax / 5.0;
    r.pass = mean_feature >= mean_softmax + 0.01 && mean_feature >= mean_logit + 0.01;
    r.note(fmt("means: feature-density %.4f vs softmax %.4f and logit-density %.4f "
               "(margins %.4f, %.4f; need >= 0.01)",
               mean_feature, mean_softmax, mean_logit, mean_feature - mean_softmax,
               mean_feature - mean_logit));
    return r;
}

// ---------------------------------------------------------------------------
// 8. Branching a half-trained checkpoint: the collapse-loss arm halves NC1
//    within 5 epochs while the cross-entropy arm's NC1 moves < 20%, and
//    after >= 15 further epochs the collapse arm's false-positive count
//    ends strictly above its minimum along the arm. >= 4 of 5 seeds.

CriterionResult criterion_intervention() {
    CriterionResult r;
    ncood::SyntheticSpec spec;
    spec.num_classes = 5;
    spec.input_dim = 8;
    spec.samples_per_class = 100;
    spec.cluster_spread = 1.1;
    spec.class_separation = 3.0;
    spec.ood_kind = ncood::OodKind::ShiftedClusters;
    spec.ood_samples = 250;
    spec.ood_shift_factor = 1.2;

    ncood::TrainConfig base_tc;
    base_tc.epochs = 6; // half of a nominal 12-epoch schedule
    base_tc.batch_size = 50;
    base_tc.initial_lr = 0.05;

    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        spec.seed = ncood::derive_seed(seed, "data");
        const ncood::SyntheticData data = ncood::generate(spec);
        ncood::TrainTrace base_trace;
        const ncood::MlpClassifier checkpoint =
            trained_model(data.train, {8, 32, 16}, ncood::MlpOptions{}, seed, base_tc,
                          &base_trace);
        const double nc1_start = base_trace.epochs.back().nc.nc1;

        ncood::TrainConfig control_tc = base_tc;
        control_tc.seed = ncood::derive_seed(seed, "control");
        control_tc.epochs = 20;
        control_tc.initial_lr = base_tc.initial_lr * 0.3;
        control_tc.class_balanced_batches = true;
        ncood::TrainConfig collapse_tc = control_tc;
        collapse_tc.seed = ncood::derive_seed(seed, "intervention");
        collapse_tc.loss_mode = ncood::LossMode::NcLoss;
        // Small balanced batches give the collapse objective many steps per
        // epoch, which is what moves the variability ratio quickly.
        collapse_tc.initial_lr = 0.2;
        collapse_tc.batch_size = 10;

        std::vector<std::size_t> collapse_fp;
        const auto fp_probe = [&](int, const ncood::MlpClassifier& model,
                                  const ncood::EpochRecord&) {
            collapse_fp.push_back(score_model(model, data).false_positives);
        };
        const auto [control_trace, collapse_trace] =
            ncood::intervene(checkpoint, data.train, control_tc, collapse_tc, {}, fp_probe);

        double collapse_nc1_early = nc1_start;
        for (int e = 0; e < 5; ++e) {
            collapse_nc1_early =
                std::min(collapse_nc1_early, collapse_trace.epochs[static_cast<std::size_t>(e)].nc.nc1);
        }
        const double control_nc1_after = control_trace.epochs[4].nc.nc1;
        const double control_change = std::abs(control_nc1_after - nc1_start) / nc1_start;
        const std::size_t fp_min = *std::min_element(collapse_fp.begin(), collapse_fp.end());
        const std::size_t fp_final = collapse_fp.back();

        const bool halved = collapse_nc1_early <= 0.5 * nc1_start;
        const bool control_stable = control_change < 0.2;
        const bool fp_rises = fp_final > fp_min;
        const bool win = halved && control_stable && fp_rises;
        wins += win ? 1 : 0;
        r.note(fmt("seed %llu: NC1 %.3f -> collapse-arm min(5) %.3f (%s), control moves "
                   "%.1f%% (%s); fp final %zu vs min %zu (%s)",
                   static_cast<unsigned long long>(seed), nc1_start, collapse_nc1_early,
                   halved ? "halved" : "not halved", 100.0 * control_change,
                   control_stable ? "stable" : "moved", fp_final, fp_min,
                   fp_rises ? "rises" : "flat"));
    }
    r.pass = wins >= 4;
    r.note(fmt("seeds passing all three checks: %d / 5 (need >= 4)", wins));
    return r;
}

// ---------------------------------------------------------------------------
// 9. Over all (seed x checkpoint-epoch) points of a 5-seed plain run, the
//    Pearson correlation between the class-mean equiangularity gap and the
//    feature-density AUROC is below -0.5.

CriterionResult criterion_collapse_detection_correlation() {
    CriterionResult r;
    ncood::SyntheticSpec spec;
    spec.num_classes = 5;
    spec.input_dim = 8;
    spec.samples_per_class = 100;
    spec.cluster_spread = 1.1;
    spec.class_separation = 3.0;
    spec.ood_kind = ncood::OodKind::ShiftedClusters;
    spec.ood_samples = 250;
    spec.ood_shift_factor = 1.2;

    ncood::TrainConfig tc;
    tc.epochs = 64;
    tc.batch_size = 50;
    tc.initial_lr = 0.05;
    const std::vector<int> probes = {0, 1, 2, 4, 8, 16, 24, 32, 48, 63};

    std::vector<double> ea_series;
    std::vector<double> auroc_series;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        spec.seed = ncood::derive_seed(seed, "data");
        const ncood::SyntheticData data = ncood::generate(spec);
        const auto probe = [&](int epoch, const ncood::MlpClassifier& model,
                               const ncood::EpochRecord& record) {
            if (std::find(probes.begin(), probes.end(), epoch) == probes.end()) return;
            ea_series.push_back(record.nc.ea_means);
            auroc_series.push_back(score_model(model, data).gmm_feature);
        };
        trained_model(data.train, {8, 64, 16}, ncood::MlpOptions{}, seed, tc, nullptr, probe);
    }
    const double correlation = ncood::pearson_r(ea_series, auroc_series);
    r.pass = correlation < -0.5;
    r.note(fmt("Pearson r over %zu points: %.4f (need < -0.5)", ea_series.size(),
               correlation));
    return r;
}

// ---------------------------------------------------------------------------
// 10. With 8 classes, the summed projected magnitudes beyond index 8 of the
//     train-feature singular basis are strictly larger for the OoD probe
//     than for the ID test probe, in 5 of 5 seeds.

CriterionResult criterion_spectrum_tail() {
    CriterionResult r;
    ncood::SyntheticSpec spec;
    spec.num_classes = 8;
    spec.input_dim = 16;
    spec.samples_per_class = 60;
    spec.cluster_spread = 1.0;
    spec.class_separation = 5.0;
    spec.ood_kind = ncood::OodKind::ShiftedClusters;
    spec.ood_samples = 200;

    ncood::TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 60;
    tc.initial_lr = 0.05;

    const auto tail_sum = [](const Vector& magnitudes) {
        double acc = 0.0;
        for (Eigen::Index i = 8; i < magnitudes.size(); ++i) acc += magnitudes(i);
        return acc;
    };

    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        spec.seed = ncood::derive_seed(seed, "data");
        const ncood::SyntheticData data = ncood::generate(spec);
        const ncood::MlpClassifier model =
            trained_model(data.train, {16, 32, 16}, ncood::MlpOptions{}, seed, tc);
        const Matrix train_features = ncood::forward(model, data.train.features).features;
        const Matrix id_features = ncood::forward(model, data.id_test.features).features;
        const Matrix ood_features = ncood::forward(model, data.ood_test).features;
        const double id_tail =
            tail_sum(ncood::svd_spectrum_projection(train_features, id_features)
                         .probe_projected_magnitudes);
        const double ood_tail =
            tail_sum(ncood::svd_spectrum_projection(train_features, ood_features)
                         .probe_projected_magnitudes);
        const bool win = ood_tail > id_tail;
        wins += win ? 1 : 0;
        r.note(fmt("seed %llu: tail beyond index 8, ID %.4f vs OoD %.4f (%s)",
                   static_cast<unsigned long long>(seed), id_tail, ood_tail,
                   win ? "OoD higher" : "not higher"));
    }
    r.pass = wins == 5;
    r.note(fmt("seeds with a strictly higher OoD tail: %d / 5 (need 5)", wins));
    return r;
}

// ---------------------------------------------------------------------------
// 11. Rerunning an experiment with an identical config reproduces every
//     artifact byte for byte, under both 1 and 4 worker threads.

std::map<std::string, std::string> snapshot_directory(const fs::path& dir) {
    std::map<std::string, std::string> bytes;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) {
            bytes[fs::relative(entry.path(), dir).string()] =
                ncood::read_file_bytes(entry.path().string());
        }
    }
    return bytes;
}

CriterionResult criterion_determinism() {
    CriterionResult r;
    const fs::path out_dir = fs::temp_directory_path() / "ncood_acceptance_rerun";
    fs::remove_all(out_dir);

    ncood::ExperimentConfig config;
    config.kind = ncood::ExperimentKind::TrainEval;
    config.data.num_classes = 3;
    config.data.input_dim = 4;
    config.data.samples_per_class = 30;
    config.data.cluster_spread = 0.5;
    config.data.class_separation = 8.0;
    config.data.ood_kind = ncood::OodKind::UniformBox;
    config.data.ood_samples = 40;
    config.layer_dims = {4, 8, 4};
    config.train_template.epochs = 4;
    config.train_template.batch_size = 15;
    config.train_template.initial_lr = 0.05;
    config.seeds = {11, 12};
    config.checkpoint_epochs = {0, 2};
    config.output_dir = out_dir.string();
    ncood::validate_config(config);

    ncood::run_experiment(config, 1);
    const auto first = snapshot_directory(out_dir);
    ncood::run_experiment(config, 4);
    const auto second = snapshot_directory(out_dir);
    ncood::run_experiment(config, 1);
    const auto third = snapshot_directory(out_dir);

    std::size_t mismatched = 0;
    r.pass = first.size() == second.size() && first.size() == third.size();
    for (const auto& [name, content] : first) {
        const auto in_second = second.find(name);
        const auto in_third = third.find(name);
        if (in_second == second.end() || in_third == third.end() ||
            in_second->second != content || in_third->second != content) {
            r.pass = false;
            ++mismatched;
        }
    }
    r.note(fmt("%zu artifacts compared across jobs=1, jobs=4 and a rerun; %zu mismatched",
               first.size(), mismatched));
    fs::remove_all(out_dir);
    return r;
}

struct Criterion {
    const char* name;
    double budget_seconds; // <= 0 means no pinned budget
    CriterionResult (*run)();
};

} // namespace

int main() {
    const Criterion criteria[] = {
        {"perfect simplex zeroes all seven collapse metrics (C=2..10, tol 1e-9)", 1.0,
         criterion_simplex_fixed_point},
        {"C=10 pairwise cosines equal -1/9 (tol 1e-12)", 0.0, criterion_cosine_target},
        {"analytic gradients match finite differences (step 1e-5, rel tol 1e-4)", 5.0,
         criterion_gradient_oracle},
        {"rank-based AUROC bit-equal to pairwise oracle (50 tied populations)", 1.0,
         criterion_auroc_oracle},
        {"mixture log density matches naive oracle (100 mixtures, tol 1e-9)", 1.0,
         criterion_density_oracle},
        {"feature normalization at least halves epochs to NC1<0.5 (>=4/5 seeds)", 120.0,
         criterion_faster_collapse},
        {"feature-density AUROC beats softmax and logit-density by >=0.01", 120.0,
         criterion_scorer_ordering},
        {"collapse-loss arm halves NC1, control stays, false positives rise (>=4/5)", 180.0,
         criterion_intervention},
        {"Pearson r(equiangularity gap, detection AUROC) < -0.5", 120.0,
         criterion_collapse_detection_correlation},
        {"OoD spectrum tail beyond index 8 exceeds ID tail (5/5 seeds)", 60.0,
         criterion_spectrum_tail},
        {"experiment reruns are bit-identical under jobs=1 and jobs=4", 0.0,
         criterion_determinism},
    };

    int failures = 0;
    int index = 0;
    for (const Criterion& criterion : criteria) {
        ++index;
        const auto start = std::chrono::steady_clock::now();
        const CriterionResult result = criterion.run();
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_budget = criterion.budget_seconds <= 0.0 ||
                               elapsed < criterion.budget_seconds;
        const bool pass = result.pass && in_budget;
        failures += pass ? 0 : 1;
        std::printf("[%2d/11] %s  %s  (%.2fs%s)\n", index, pass ? "PASS" : "FAIL",
                    criterion.name, elapsed,
                    criterion.budget_seconds > 0.0
                        ? fmt(" of %.0fs budget%s", criterion.budget_seconds,
                              in_budget ? "" : ", EXCEEDED")
                              .c_str()
                        : "");
        for (const std::string& note : result.notes) {
            std::printf("        %s\n", note.c_str());
        }
    }
    std::printf("acceptance: %d/11 criteria passed\n", 11 - failures);
    return failures == 0 ? 0 : 1;
}
