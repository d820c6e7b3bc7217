#pragma once

#include "drr/common.hpp"

#include <Eigen/Eigenvalues>

namespace drr {

/// Orthonormal PCA transform. Rows of `basis` are principal directions, so
/// scores are alpha = basis * (x - mean).
struct PcaModel {
    Vector mean;
    Matrix basis;
    Vector eigenvalues;

    Index dim() const noexcept { return mean.size(); }
};

namespace detail {

// Flip each direction so its largest-magnitude entry is positive.
inline void canonicalize_signs(Matrix& basis)
{
    for (Index r = 0; r < basis.rows(); ++r) {
        Index arg = 0;
        basis.row(r).cwiseAbs().maxCoeff(&arg);
        if (basis(r, arg) < 0.0) basis.row(r) *= -1.0;
    }
}

} // namespace detail

inline PcaModel fit_pca(const Matrix& X)
{
    require(X.rows() >= 1 && X.cols() >= 1, "fit_pca: empty input");
    require_finite(X, "fit_pca");

    const Index n = X.rows();
    const Index d = X.cols();
    PcaModel m;
    m.mean = X.colwise().mean().transpose();
    Matrix centered = X.rowwise() - m.mean.transpose();
    Matrix cov = (centered.transpose() * centered) / static_cast<double>(n > 1 ? n - 1 : 1);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    if (eig.info() != Eigen::Success) throw SolveError("fit_pca: eigendecomposition failed");

    // Eigen sorts ascending; reverse into descending order.
    m.eigenvalues.resize(d);
    m.basis.resize(d, d);
    for (Index i = 0; i < d; ++i) {
        m.eigenvalues(i) = std::max(0.0, eig.eigenvalues()(d - 1 - i));
        m.basis.row(i) = eig.eigenvectors().col(d - 1 - i).transpose();
    }
    detail::canonicalize_signs(m.basis);
    return m;
}

inline Matrix pca_forward(const PcaModel& m, const Matrix& X)
{
    require_columns(X, m.dim(), "pca_forward");
    return (X.rowwise() - m.mean.transpose()) * m.basis.transpose();
}

inline Matrix pca_inverse(const PcaModel& m, const Matrix& scores)
{
    require_columns(scores, m.dim(), "pca_inverse");
    return (scores * m.basis).rowwise() + m.mean.transpose();
}

inline Matrix pca_truncate_reconstruct(const PcaModel& m, const Matrix& X, Index k)
{
    if (k < 1 || k > m.dim())
        throw ArgumentError("pca_truncate_reconstruct: k must lie in [1, " + std::to_string(m.dim()) + "]");
    Matrix scores = pca_forward(m, X);
    scores.rightCols(m.dim() - k).setZero();
    return pca_inverse(m, scores);
}

} // namespace drr
