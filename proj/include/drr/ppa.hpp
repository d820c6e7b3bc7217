#pragma once

#include "drr/common.hpp"
#include "drr/pca.hpp"

#include <Eigen/QR>

namespace drr {

/// One deflation step acting on an m-dimensional residual.
struct PpaStage {
    Vector leading;    ///< unit vector e in R^m
    Matrix complement; ///< (m-1) x m orthonormal rows spanning the complement of e
    Matrix coeffs;     ///< (m-1) x (degree+1), powers of (alpha / scale)
    double scale = 1.0;
    int effective_degree = 0;
};

struct PpaModel {
    Vector mean;
    std::vector<PpaStage> stages;
    int degree = 3;

    Index dim() const noexcept { return mean.size(); }
};

namespace detail {

inline Matrix vandermonde(const Vector& alpha, double scale, int degree)
{
    Matrix V(alpha.size(), degree + 1);
    V.col(0).setOnes();
    const Vector a = alpha / scale;
    for (int p = 1; p <= degree; ++p) V.col(p) = V.col(p - 1).cwiseProduct(a);
    return V;
}

// Polynomial predictions for every complement coordinate, N x (m-1).
inline Matrix stage_prediction(const PpaStage& s, const Vector& alpha)
{
    return vandermonde(alpha, s.scale, static_cast<int>(s.coeffs.cols()) - 1) * s.coeffs.transpose();
}

} // namespace detail

/// Deflationary fit: each stage projects the residual onto its leading
/// principal direction and removes a least-squares polynomial prediction of the
/// orthogonal coordinates. Stages whose design matrix is rank deficient use
/// the largest degree that is still full rank (see `effective_degree`).
inline PpaModel fit_ppa(const Matrix& X, int degree = 3)
{
    require(degree >= 1, "fit_ppa: degree must be >= 1");
    require(X.cols() >= 2, "fit_ppa: need d >= 2");
    require(X.rows() >= degree + 1, "fit_ppa: need at least degree + 1 samples");
    require_finite(X, "fit_ppa");

    PpaModel m;
    m.degree = degree;
    m.mean = X.colwise().mean().transpose();
    Matrix residual = X.rowwise() - m.mean.transpose();

    while (residual.cols() > 0) {
        const Index dim = residual.cols();
        PpaStage s;
        if (dim == 1) {
            s.leading = Vector::Ones(1);
            s.complement.resize(0, 1);
            s.coeffs.resize(0, degree + 1);
            m.stages.push_back(std::move(s));
            break;
        }
        const PcaModel local = fit_pca(residual);
        s.leading = local.basis.row(0).transpose();
        s.complement = local.basis.bottomRows(dim - 1);

        const Vector alpha = residual * s.leading;
        const Matrix orth = residual * s.complement.transpose();
        const double amax = alpha.cwiseAbs().maxCoeff();
        s.scale = amax > 0.0 ? amax : 1.0;

        s.coeffs = Matrix::Zero(dim - 1, degree + 1);
        int deg = degree;
        for (; deg >= 0; --deg) {
            const Matrix V = detail::vandermonde(alpha, s.scale, deg);
            Eigen::ColPivHouseholderQR<Matrix> qr(V);
            if (qr.rank() == V.cols() || deg == 0) {
                s.coeffs.leftCols(deg + 1) = qr.solve(orth).transpose();
                break;
            }
        }
        s.effective_degree = deg;
        residual = orth - detail::stage_prediction(s, alpha);
        m.stages.push_back(std::move(s));
    }
    return m;
}

/// Stage scores (alpha_1, ..., alpha_d).
inline Matrix ppa_forward(const PpaModel& m, const Matrix& X)
{
    require_columns(X, m.dim(), "ppa_forward");
    Matrix out(X.rows(), m.dim());
    Matrix residual = X.rowwise() - m.mean.transpose();
    for (std::size_t i = 0; i < m.stages.size(); ++i) {
        const auto& s = m.stages[i];
        const Vector alpha = residual * s.leading;
        out.col(static_cast<Index>(i)) = alpha;
        residual = residual * s.complement.transpose() - detail::stage_prediction(s, alpha);
    }
    return out;
}

namespace detail {

// Undoes stages keep-1 .. 0. The residual entering stage `keep` starts at
// zero, its training mean, so dropped stages contribute nothing.
inline Matrix ppa_inverse_leading(const PpaModel& m, const Matrix& A, Index keep)
{
    Matrix residual = Matrix::Zero(A.rows(), m.dim() - keep);
    for (Index i = keep - 1; i >= 0; --i) {
        const auto& s = m.stages[static_cast<std::size_t>(i)];
        const Vector alpha = A.col(i);
        Matrix x = alpha * s.leading.transpose();
        if (s.complement.rows() > 0) x += (residual + stage_prediction(s, alpha)) * s.complement;
        residual = std::move(x);
    }
    return residual.rowwise() + m.mean.transpose();
}

} // namespace detail

/// Undoes the stages from last to first: x_{i-1} = alpha_i e + E^T (x_i + f_i(alpha_i)).
inline Matrix ppa_inverse(const PpaModel& m, const Matrix& A)
{
    require_columns(A, m.dim(), "ppa_inverse");
    return detail::ppa_inverse_leading(m, A, m.dim());
}

/// Keeps alpha_1..alpha_k and replaces the residual left after stage k by its
/// mean (zero), so the reconstruction lies on the fitted polynomial path.
inline Matrix ppa_truncate_reconstruct(const PpaModel& m, const Matrix& X, Index k)
{
    if (k < 1 || k > m.dim())
        throw ArgumentError("ppa_truncate_reconstruct: k must lie in [1, " + std::to_string(m.dim()) + "]");
    return detail::ppa_inverse_leading(m, ppa_forward(m, X), k);
}

} // namespace drr
