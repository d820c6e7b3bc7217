#include "drr/manifolds.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace drr;
using Eigen::Vector3d;

namespace {

// Rotation of w about the unit axis k by angle a.
Vector3d rodrigues(const Vector3d& w, const Vector3d& k, double a)
{
    return w * std::cos(a) + k.cross(w) * std::sin(a) + k * k.dot(w) * (1.0 - std::cos(a));
}

} // namespace

TEST(Manifold, CornerPointMatchesRotatedCircleConstruction)
{
    ManifoldSpec s = difficult_manifold();
    const double u = s.u_max();
    const double v = s.v_min();
    const double theta = u / s.radius1;
    const double phi = v / s.radius2;
    const Vector3d tangent(-std::sin(theta), std::cos(theta), 0.0);
    const Vector3d backbone = s.radius1 * Vector3d(std::cos(theta), std::sin(theta), 0.0);
    // Untilted secondary circle: centre one radius inside the backbone, in
    // the plane spanned by the radial direction and z.
    const Vector3d radial = backbone / s.radius1;
    const Vector3d up(0.0, 0.0, 1.0);
    const Vector3d offset = s.radius2 * (std::sin(phi) * up + std::cos(phi) * radial) - s.radius2 * radial;
    const Vector3d expected = backbone + rodrigues(offset, tangent, s.tilt * u);
    EXPECT_LT((manifold_point(s, u, v) - expected).norm(), 1e-12);
}

TEST(Manifold, ParametersAreArcLengths)
{
    for (const ManifoldSpec& s : {easy_manifold(), difficult_manifold()}) {
        const double h = 1e-6;
        for (double u : {s.u_min(), 0.0, 1.3}) {
            for (double v : {s.v_min(), 0.0, 0.7}) {
                const double dv = (manifold_point(s, u, v + h) - manifold_point(s, u, v - h)).norm() / (2 * h);
                EXPECT_NEAR(dv, 1.0, 1e-6);
            }
            const double du = (manifold_point(s, u + h, 0.0) - manifold_point(s, u - h, 0.0)).norm() / (2 * h);
            EXPECT_NEAR(du, 1.0, 1e-6);
        }
    }
}

TEST(Manifold, UntiltedSecondaryArcsStayInRadialPlane)
{
    const ManifoldSpec s = easy_manifold();
    for (double u : {-2.0, 0.5, 2.5}) {
        const double theta = u / s.radius1;
        const Vector3d tangent(-std::sin(theta), std::cos(theta), 0.0);
        const Vector3d base = manifold_point(s, u, 0.0);
        for (double v : {-1.5, 1.0})
            EXPECT_NEAR((manifold_point(s, u, v) - base).dot(tangent), 0.0, 1e-12);
    }
}

TEST(Manifold, GenerationIsSeededAndWithinRanges)
{
    ManifoldSpec s = difficult_manifold(3);
    s.n_samples = 500;
    const auto a = generate_manifold(s);
    const auto b = generate_manifold(s);
    EXPECT_EQ(a.data, b.data);
    EXPECT_GE(a.latent.col(0).minCoeff(), s.u_min());
    EXPECT_LE(a.latent.col(0).maxCoeff(), s.u_max());
    EXPECT_GE(a.latent.col(1).minCoeff(), s.v_min());
    EXPECT_LE(a.latent.col(1).maxCoeff(), s.v_max());
    s.seed = 4;
    EXPECT_NE(generate_manifold(s).data, a.data);
}

TEST(Manifold, NoiseHasRequestedScale)
{
    ManifoldSpec s = easy_manifold(5);
    s.n_samples = 20000;
    const auto sample = generate_manifold(s);
    Matrix clean(s.n_samples, 3);
    for (Index i = 0; i < s.n_samples; ++i)
        clean.row(i) = manifold_point(s, sample.latent(i, 0), sample.latent(i, 1)).transpose();
    const Matrix noise = sample.data - clean;
    const double sd = std::sqrt(noise.squaredNorm() / static_cast<double>(noise.size()));
    EXPECT_NEAR(sd, s.noise_std, 0.01 * s.noise_std * 3);
}

TEST(Manifold, InvalidSpecsRejected)
{
    ManifoldSpec s;
    s.radius2 = 4.0;
    EXPECT_THROW(generate_manifold(s), ArgumentError);
    s = ManifoldSpec{};
    s.noise_std = -1.0;
    EXPECT_THROW(generate_manifold(s), ArgumentError);
    s = ManifoldSpec{};
    s.n_samples = 0;
    EXPECT_THROW(generate_manifold(s), ArgumentError);
}

TEST(Grid, LayoutAndSize)
{
    const ManifoldSpec s = easy_manifold();
    const auto g = default_grid(s);
    EXPECT_EQ(g.size(), 17 * 13);
    const Matrix P = grid_points(s, g);
    EXPECT_LT((P.row(3 * 13 + 5).transpose() - manifold_point(s, g.u(3), g.v(5))).norm(), 1e-15);
    EXPECT_DOUBLE_EQ(g.u(0), s.u_min());
    EXPECT_DOUBLE_EQ(g.v(12), s.v_max());
}

TEST(Metrics, MeanSquaredDistance)
{
    Matrix A = Matrix::Zero(2, 3), B(2, 3);
    B << 1, 2, 2, 0, 0, 0;
    EXPECT_DOUBLE_EQ(mean_squared_distance(A, B), 4.5);
    EXPECT_THROW(mean_squared_distance(A, Matrix::Zero(3, 3)), ArgumentError);
}

TEST(Metrics, FullDimensionReconstructionIsExact)
{
    const ManifoldSpec s = easy_manifold();
    const Matrix truth = grid_points(s, default_grid(s));
    const AnyModel p = fit_pca(truth);
    EXPECT_LT(mse_dr(p, truth, 3), 1e-20);
    EXPECT_GT(mse_dr(p, truth, 2), 0.0);
}

TEST(Metrics, FeatureErrorRecoversKnownAffineScaling)
{
    // A flat sheet z = 0 whose PCA coordinates are an exact affine image of
    // the latent grid: the optimal scaling drives the feature error to zero.
    LatentGrid g{Vector::LinSpaced(9, -3.0, 3.0), Vector::LinSpaced(7, -1.0, 1.0)};
    Matrix truth(g.size(), 3);
    Rng rng(1);
    std::normal_distribution<double> n(0.0, 0.02);
    for (Index j = 0; j < g.u.size(); ++j)
        for (Index l = 0; l < g.v.size(); ++l) truth.row(j * g.v.size() + l) << 2.0 * g.u(j) + 1.0, 0.5 * g.v(l) - 2.0, n(rng);
    const AnyModel p = fit_pca(truth);
    const auto fe = mse_features(p, g, truth);
    EXPECT_LT(fe.mse, 1e-3);
    EXPECT_NEAR(std::abs(fe.scaling.gain_u), 2.0, 1e-2);
    EXPECT_NEAR(std::abs(fe.scaling.gain_v), 0.5, 1e-2);
    EXPECT_GT(mse_features_unscaled(p, g, truth), 1.0);
}

TEST(Metrics, ScaledFeatureErrorNeverExceedsUnscaled)
{
    ManifoldSpec s = difficult_manifold(2);
    s.n_samples = 1500;
    const Matrix X = generate_manifold(s).data;
    const auto g = default_grid(s);
    const Matrix truth = grid_points(s, g);
    for (const AnyModel& m : {AnyModel(fit_pca(X)), AnyModel(fit_ppa(X, 3))})
        EXPECT_LE(mse_features(m, g, truth).mse, mse_features_unscaled(m, g, truth));
}

TEST(Benchmark, ProducesOneRowPerSeedAndMethod)
{
    ManifoldSpec s = easy_manifold();
    s.n_samples = 300;
    FitOptions o;
    o.drr.krr.max_train = 200;
    o.drr.krr.cv_max_rows = 100;
    const auto rows = benchmark_manifold("easy", s, {0, 1}, {Method::pca, Method::drr}, o);
    ASSERT_EQ(rows.size(), 4u);
    for (const auto& r : rows) {
        EXPECT_EQ(r.manifold, "easy");
        EXPECT_TRUE(std::isfinite(r.mse_dr) && r.mse_dr >= 0.0);
        EXPECT_TRUE(std::isfinite(r.mse_f) && r.mse_f >= 0.0);
    }
    EXPECT_EQ(rows[2].seed, 1u);
    EXPECT_EQ(rows[3].method, Method::drr);
}
