#include "ncood/linalg.hpp"

#include <Eigen/SVD>

#include <limits>

namespace ncood {

bool all_finite(const Matrix& a) { return a.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

SvdResult svd(const Matrix& a) {
    if (!all_finite(a)) {
        throw InvalidInputError("svd: input has non-finite entries");
    }
    Eigen::BDCSVD<Matrix> dec(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return SvdResult{dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

Matrix pseudo_inverse(const Matrix& a) {
    const SvdResult dec = svd(a);
    const double sigma_max =
        dec.singular_values.size() > 0 ? dec.singular_values(0) : 0.0;
    const double cutoff = static_cast<double>(std::max(a.rows(), a.cols())) *
                          std::numeric_limits<double>::epsilon() * sigma_max;
    Vector inv = Vector::Zero(dec.singular_values.size());
    for (Eigen::Index i = 0; i < dec.singular_values.size(); ++i) {
        if (dec.singular_values(i) > cutoff) {
            inv(i) = 1.0 / dec.singular_values(i);
        }
    }
    return dec.v * inv.asDiagonal() * dec.u.transpose();
}

Matrix l2_normalize_rows(const Matrix& a, double epsilon) {
    if (!(epsilon > 0.0)) {
        throw InvalidInputError("l2_normalize_rows: epsilon must be positive");
    }
    Matrix out(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        const double norm = a.row(i).norm();
        out.row(i) = a.row(i) / std::max(norm, epsilon);
    }
    return out;
}

} // namespace ncood
