#pragma once

#include <Eigen/Dense>

#include "ncood/errors.hpp"

namespace ncood {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

bool all_finite(const Matrix& a);
bool all_finite(const Vector& v);

struct SvdResult {
    Matrix u;                // rows x k, orthonormal columns
    Vector singular_values;  // k, descending, nonnegative
    Matrix v;                // cols x k, orthonormal columns
};

// Thin SVD, a = u * diag(s) * v^T with k = min(rows, cols).
// Throws InvalidInputError on non-finite entries.
SvdResult svd(const Matrix& a);

// Moore-Penrose pseudoinverse. Singular values at or below
// max(rows, cols) * machine-epsilon * sigma_max are treated as zero.
Matrix pseudo_inverse(const Matrix& a);

// Per-row r / max(||r||_2, epsilon). Rows with norm below epsilon are
// divided by epsilon instead, so the zero row maps to itself.
Matrix l2_normalize_rows(const Matrix& a, double epsilon);

} // namespace ncood
