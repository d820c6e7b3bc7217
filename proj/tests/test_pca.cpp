#include "drr/pca.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace drr;

TEST(Pca, LineThroughOriginHasKnownSpectrum)
{
    // Rows (t, 2t) for t = -2..2: covariance (N-1 denominator) is
    // [[2.5, 5], [5, 10]], eigenvalues 12.5 and 0, direction (1, 2)/sqrt(5).
    Matrix X(5, 2);
    for (int i = 0; i < 5; ++i) X.row(i) << i - 2, 2 * (i - 2);
    auto m = fit_pca(X);
    EXPECT_NEAR(m.eigenvalues(0), 12.5, 1e-12);
    EXPECT_NEAR(m.eigenvalues(1), 0.0, 1e-12);
    EXPECT_NEAR(m.basis(0, 0), 1.0 / std::sqrt(5.0), 1e-12);
    EXPECT_NEAR(m.basis(0, 1), 2.0 / std::sqrt(5.0), 1e-12);
    const Matrix A = pca_forward(m, X);
    EXPECT_NEAR(A.col(1).norm(), 0.0, 1e-12);
    EXPECT_NEAR(A(4, 0), 2.0 * std::sqrt(5.0), 1e-12);
}

TEST(Pca, BasisIsOrthonormalAndSpectrumSorted)
{
    const Matrix X = drr::test::gaussian(300, 6, 1) * drr::test::gaussian(6, 6, 2);
    auto m = fit_pca(X);
    EXPECT_LT(drr::test::max_abs(m.basis * m.basis.transpose() - Matrix::Identity(6, 6)), 1e-12);
    for (Index i = 1; i < 6; ++i) EXPECT_GE(m.eigenvalues(i - 1), m.eigenvalues(i));
    // Scores are uncorrelated with variances equal to the eigenvalues.
    const Matrix A = pca_forward(m, X);
    const Matrix C = A.transpose() * A / 299.0;
    EXPECT_LT(drr::test::max_abs(C - Matrix(m.eigenvalues.asDiagonal())), 1e-9 * m.eigenvalues(0));
}

TEST(Pca, RoundTripAndFullRankReconstruction)
{
    const Matrix X = drr::test::gaussian(50, 4, 9, 3.0);
    auto m = fit_pca(X);
    EXPECT_LT(drr::test::max_abs(pca_inverse(m, pca_forward(m, X)) - X), 1e-12);
    EXPECT_LT(drr::test::max_abs(pca_truncate_reconstruct(m, X, 4) - X), 1e-12);
}

TEST(Pca, TruncationErrorEqualsTailEigenvalues)
{
    const Matrix X = drr::test::gaussian(400, 5, 4) * drr::test::gaussian(5, 5, 8);
    auto m = fit_pca(X);
    for (Index k = 1; k <= 5; ++k) {
        const Matrix E = pca_truncate_reconstruct(m, X, k) - X;
        const double per_sample = E.rowwise().squaredNorm().sum() / 399.0;
        EXPECT_NEAR(per_sample, m.eigenvalues.tail(5 - k).sum(), 1e-9 * m.eigenvalues.sum());
    }
}

TEST(Pca, SignConventionIsDeterministic)
{
    const Matrix X = drr::test::gaussian(80, 3, 5);
    auto a = fit_pca(X);
    auto b = fit_pca(X);
    EXPECT_EQ(a.basis, b.basis);
    for (Index i = 0; i < 3; ++i) {
        Index arg;
        a.basis.row(i).cwiseAbs().maxCoeff(&arg);
        EXPECT_GT(a.basis(i, arg), 0.0);
    }
}

TEST(Pca, InvalidArguments)
{
    const Matrix X = drr::test::gaussian(10, 3, 1);
    auto m = fit_pca(X);
    EXPECT_THROW(pca_truncate_reconstruct(m, X, 0), ArgumentError);
    EXPECT_THROW(pca_truncate_reconstruct(m, X, 4), ArgumentError);
    EXPECT_THROW(pca_forward(m, Matrix::Zero(2, 2)), DimensionError);
}
