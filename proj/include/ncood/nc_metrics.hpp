#pragma once

#include "ncood/feature_stats.hpp"
#include "ncood/linalg.hpp"

namespace ncood {

// One measurement pass over features + classifier. All fields are >= 0;
// nc4_error lies in [0,1].
struct NcReport {
    double nc1 = 0.0;
    double en_means = 0.0;
    double en_classifier = 0.0;
    double ea_means = 0.0;
    double ea_classifier = 0.0;
    double nc3 = 0.0;
    double nc4_error = 0.0;
};

// Tr{Sigma_W pinv(Sigma_B)} / C.
double nc1(const ClassStatistics& stats, int num_classes);

// Coefficient of variation of ||v_c - center||. Population std. Pass the
// global mean as center for class means, a zero vector for classifier rows.
// Throws DegenerateInputError when the average norm is zero.
double equinormality(const Matrix& vectors, const Vector& center);

// L1 deviation of the centered cosine Gram matrix from the ETF target
// -1/(C-1), diagonal excluded, divided by C*(C-1). Throws
// DegenerateInputError on a zero centered row.
double equiangularity(const Matrix& vectors, const Vector& center);

// Squared Frobenius distance between row-normalized classifier and
// row-normalized centered class means.
double self_duality(const Matrix& classifier, const Matrix& class_means,
                    const Vector& global_mean);

// Fraction of samples misclassified by the nearest-class-mean rule.
// Distance ties go to the smallest class index.
double ncc_error(const FeatureBank& bank, const ClassStatistics& stats);

// All seven metrics from one statistics pass. Field-by-field identical to
// the standalone operations.
NcReport nc_report(const FeatureBank& bank, const Matrix& classifier);
NcReport nc_report(const FeatureBank& bank, const Matrix& classifier,
                   const ClassStatistics& stats);

// C unit vectors in R^C with all pairwise cosines -1/(C-1) and zero
// centroid: rows of sqrt(C/(C-1)) * (I - ones/C).
Matrix simplex_etf_vertices(int num_classes);

// Same frame expressed in its natural (C-1)-dimensional span, built from a
// Helmert orthonormal basis. Rows are unit vectors with cosines -1/(C-1).
Matrix simplex_etf_vertices_reduced(int num_classes);

} // namespace ncood
