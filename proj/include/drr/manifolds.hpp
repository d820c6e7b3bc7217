#pragma once

#include "drr/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace drr {

/// Curved two-dimensional manifold in R^3. The first principal curve is a
/// circular arc of radius R1 in the z = 0 plane; at every point of it hangs a
/// secondary arc of radius R2 lying in the local normal plane, rotated about
/// the backbone tangent by tilt * u (u = arc length along the backbone).
struct ManifoldSpec {
    Index n_samples = 10000;
    double tilt = 0.0;        ///< radians of secondary-arc rotation per unit backbone arc length
    double noise_std = 0.15;  ///< isotropic Gaussian noise (default 0.05 * R1)
    double radius1 = 3.0;
    double radius2 = 1.5;
    std::array<double, 2> theta_range{-1.0, 1.0}; ///< backbone angle
    std::array<double, 2> phi_range{-1.2, 1.2};   ///< secondary-arc angle
    std::uint64_t seed = 0;

    double u_min() const { return radius1 * theta_range[0]; }
    double u_max() const { return radius1 * theta_range[1]; }
    double v_min() const { return radius2 * phi_range[0]; }
    double v_max() const { return radius2 * phi_range[1]; }

    void validate() const
    {
        require(n_samples >= 1, "ManifoldSpec: n_samples must be >= 1");
        require(radius1 > radius2 && radius2 > 0.0, "ManifoldSpec: radii must satisfy R1 > R2 > 0");
        require(noise_std >= 0.0, "ManifoldSpec: noise_std must be non-negative");
        require(theta_range[0] < theta_range[1] && phi_range[0] < phi_range[1],
                "ManifoldSpec: latent ranges must be increasing");
        require(std::isfinite(tilt), "ManifoldSpec: tilt must be finite");
    }
};

/// Secondary arc stays in the plane spanned by the backbone radial direction
/// and the vertical axis.
inline ManifoldSpec easy_manifold(std::uint64_t seed = 0)
{
    ManifoldSpec s;
    s.seed = seed;
    return s;
}

/// Secondary arc twists about the backbone as u advances, so no single
/// polynomial-in-projection model captures it.
inline ManifoldSpec difficult_manifold(std::uint64_t seed = 0)
{
    ManifoldSpec s;
    s.tilt = 0.2;
    s.seed = seed;
    return s;
}

/// Noise-free embedding g(u, v); u and v are arc lengths along the backbone and
/// the secondary arc.
inline Eigen::Vector3d manifold_point(const ManifoldSpec& s, double u, double v)
{
    const double theta = u / s.radius1;
    const double phi = v / s.radius2;
    const double tau = s.tilt * u;
    const Eigen::Vector3d backbone(s.radius1 * std::cos(theta), s.radius1 * std::sin(theta), 0.0);
    const Eigen::Vector3d radial(std::cos(theta), std::sin(theta), 0.0);
    const Eigen::Vector3d vertical(0.0, 0.0, 1.0);
    // Normal-plane frame rotated about the tangent by tau.
    const Eigen::Vector3d along = std::cos(tau) * vertical + std::sin(tau) * radial;
    const Eigen::Vector3d bend = std::cos(tau) * radial - std::sin(tau) * vertical;
    return backbone + s.radius2 * std::sin(phi) * along - s.radius2 * (1.0 - std::cos(phi)) * bend;
}

struct ManifoldSample {
    Matrix data;   ///< N x 3
    Matrix latent; ///< N x 2 columns (u, v)
};

inline ManifoldSample generate_manifold(const ManifoldSpec& s)
{
    s.validate();
    Rng rng(s.seed);
    std::uniform_real_distribution<double> du(s.u_min(), s.u_max());
    std::uniform_real_distribution<double> dv(s.v_min(), s.v_max());
    std::normal_distribution<double> noise(0.0, 1.0);
    ManifoldSample out{Matrix(s.n_samples, 3), Matrix(s.n_samples, 2)};
    for (Index i = 0; i < s.n_samples; ++i) {
        const double u = du(rng);
        const double v = dv(rng);
        Eigen::Vector3d p = manifold_point(s, u, v);
        if (s.noise_std > 0.0)
            for (int c = 0; c < 3; ++c) p(c) += s.noise_std * noise(rng);
        out.data.row(i) = p.transpose();
        out.latent(i, 0) = u;
        out.latent(i, 1) = v;
    }
    return out;
}

struct LatentGrid {
    Vector u; ///< first-curve parameters
    Vector v; ///< secondary-curve parameters

    Index size() const noexcept { return u.size() * v.size(); }
};

/// Evenly spaced 17 x 13 grid spanning the latent ranges.
inline LatentGrid default_grid(const ManifoldSpec& s, Index nu = 17, Index nv = 13)
{
    return {Vector::LinSpaced(nu, s.u_min(), s.u_max()), Vector::LinSpaced(nv, s.v_min(), s.v_max())};
}

/// Noise-free images of the grid nodes; node (j, l) is row j * |v| + l.
inline Matrix grid_points(const ManifoldSpec& s, const LatentGrid& g)
{
    Matrix out(g.size(), 3);
    for (Index j = 0; j < g.u.size(); ++j)
        for (Index l = 0; l < g.v.size(); ++l) out.row(j * g.v.size() + l) = manifold_point(s, g.u(j), g.v(l)).transpose();
    return out;
}

/// Mean squared Euclidean distance between matching rows.
inline double mean_squared_distance(const Matrix& A, const Matrix& B)
{
    require(A.rows() == B.rows() && A.cols() == B.cols(), "mean_squared_distance: shape mismatch");
    return (A - B).rowwise().squaredNorm().mean();
}

/// Dimensionality-reduction error: reconstruct the grid keeping k coordinates.
inline double mse_dr(const AnyModel& model, const Matrix& grid_X, Index k = 2)
{
    return mean_squared_distance(truncate_reconstruct(model, grid_X, k), grid_X);
}

/// Per-axis affine map (gain, offset) applied to the latent grid before it is
/// placed in transform coordinates 1 and 2.
struct GridScaling {
    double gain_u = 1.0, offset_u = 0.0;
    double gain_v = 1.0, offset_v = 0.0;
};

/// Inverts a cartesian grid laid out in transform coordinates 1 and 2
/// (remaining coordinates zero).
inline Matrix identified_features(const AnyModel& model, const LatentGrid& g, const GridScaling& sc)
{
    const Index d = model_dim(model);
    require(d >= 2, "identified_features: model must have at least two dimensions");
    Matrix R = Matrix::Zero(g.size(), d);
    for (Index j = 0; j < g.u.size(); ++j) {
        for (Index l = 0; l < g.v.size(); ++l) {
            R(j * g.v.size() + l, 0) = sc.gain_u * g.u(j) + sc.offset_u;
            R(j * g.v.size() + l, 1) = sc.gain_v * g.v(l) + sc.offset_v;
        }
    }
    return inverse(model, R);
}

inline double mse_features_unscaled(const AnyModel& model, const LatentGrid& g, const Matrix& truth)
{
    return mean_squared_distance(identified_features(model, g, {}), truth);
}

namespace detail {

// Least-squares line y ~ gain * x + offset.
inline std::pair<double, double> fit_line(const Vector& x, const Vector& y)
{
    const double mx = x.mean();
    const double my = y.mean();
    const double sxx = (x.array() - mx).square().sum();
    const double gain = sxx > 0.0 ? ((x.array() - mx) * (y.array() - my)).sum() / sxx : 0.0;
    return {gain, my - gain * mx};
}

// Downhill simplex over the four scaling parameters. Never returns a point
// worse than the best starting vertex.
template <class F>
std::array<double, 4> nelder_mead(F&& f, const std::array<double, 4>& start, const std::array<double, 4>& step,
                                  int iterations)
{
    constexpr int n = 4;
    std::array<std::array<double, n>, n + 1> simplex;
    std::array<double, n + 1> value;
    simplex[0] = start;
    for (int i = 0; i < n; ++i) {
        simplex[i + 1] = start;
        simplex[i + 1][i] += step[i];
    }
    for (int i = 0; i <= n; ++i) value[i] = f(simplex[i]);

    for (int it = 0; it < iterations; ++it) {
        std::array<int, n + 1> order;
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return value[a] < value[b]; });
        const int best = order[0], worst = order[n], second = order[n - 1];

        std::array<double, n> centroid{};
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < n; ++c) centroid[c] += simplex[order[i]][c] / n;
        auto along = [&](double t) {
            std::array<double, n> p;
            for (int c = 0; c < n; ++c) p[c] = centroid[c] + t * (simplex[worst][c] - centroid[c]);
            return p;
        };
        auto reflected = along(-1.0);
        const double fr = f(reflected);
        if (fr < value[best]) {
            auto expanded = along(-2.0);
            const double fe = f(expanded);
            if (fe < fr) simplex[worst] = expanded, value[worst] = fe;
            else simplex[worst] = reflected, value[worst] = fr;
        } else if (fr < value[second]) {
            simplex[worst] = reflected, value[worst] = fr;
        } else {
            auto contracted = along(0.5);
            const double fc = f(contracted);
            if (fc < value[worst]) {
                simplex[worst] = contracted, value[worst] = fc;
            } else {
                for (int i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (int c = 0; c < n; ++c) simplex[i][c] = simplex[best][c] + 0.5 * (simplex[i][c] - simplex[best][c]);
                    value[i] = f(simplex[i]);
                }
            }
        }
    }
    int arg = static_cast<int>(std::min_element(value.begin(), value.end()) - value.begin());
    return simplex[arg];
}

} // namespace detail

struct FeatureError {
    double mse = 0.0;
    GridScaling scaling;
};

/// Mean squared distance between the inverted transform-domain grid and the
/// true curvilinear grid, after choosing the per-axis affine scaling that
/// minimizes it. The search starts from the better of the closed-form fit
/// (latent grid regressed onto the forward-transformed truth) and the
/// unscaled grid, then refines with a simplex search.
inline FeatureError mse_features(const AnyModel& model, const LatentGrid& g, const Matrix& truth, int iterations = 200)
{
    require(truth.rows() == g.size(), "mse_features: truth must hold one row per grid node");
    const Matrix R = forward(model, truth);
    Vector u(g.size()), v(g.size());
    for (Index j = 0; j < g.u.size(); ++j)
        for (Index l = 0; l < g.v.size(); ++l) {
            u(j * g.v.size() + l) = g.u(j);
            v(j * g.v.size() + l) = g.v(l);
        }
    auto [gu, ou] = detail::fit_line(u, R.col(0));
    auto [gv, ov] = detail::fit_line(v, R.col(1));

    auto cost = [&](const std::array<double, 4>& p) {
        const double e = mean_squared_distance(identified_features(model, g, {p[0], p[1], p[2], p[3]}), truth);
        return std::isfinite(e) ? e : std::numeric_limits<double>::max();
    };
    std::array<double, 4> start{gu, ou, gv, ov};
    const std::array<double, 4> unit{1.0, 0.0, 1.0, 0.0};
    if (cost(unit) < cost(start)) start = unit;
    // Initial simplex: 5% of each gain, offsets by 5% of the mapped axis span.
    const double span_u = std::max(std::abs(start[0]), 1e-3) * (g.u.maxCoeff() - g.u.minCoeff());
    const double span_v = std::max(std::abs(start[2]), 1e-3) * (g.v.maxCoeff() - g.v.minCoeff());
    const std::array<double, 4> step{0.05 * std::max(std::abs(start[0]), 1e-3), 0.05 * span_u,
                                     0.05 * std::max(std::abs(start[2]), 1e-3), 0.05 * span_v};
    const auto best = detail::nelder_mead(cost, start, step, iterations);
    FeatureError out;
    out.scaling = {best[0], best[1], best[2], best[3]};
    out.mse = cost(best);
    return out;
}

struct BenchmarkRow {
    std::string manifold;
    std::uint64_t seed = 0;
    Method method = Method::pca;
    double mse_dr = 0.0;
    double mse_f = 0.0;
};

/// Fits every method on one noisy realization per seed and scores it on the
/// noise-free latent grid.
inline std::vector<BenchmarkRow> benchmark_manifold(const std::string& name, ManifoldSpec spec,
                                                    const std::vector<std::uint64_t>& seeds,
                                                    const std::vector<Method>& methods, const FitOptions& opts)
{
    std::vector<BenchmarkRow> rows;
    const LatentGrid grid = default_grid(spec);
    const Matrix truth = grid_points(spec, grid);
    for (auto seed : seeds) {
        spec.seed = seed;
        const Matrix X = generate_manifold(spec).data;
        for (Method method : methods) {
            FitOptions o = opts;
            o.drr.krr.seed = opts.drr.krr.seed + seed * 1000;
            const AnyModel model = fit_model(method, X, o);
            rows.push_back({name, seed, method, mse_dr(model, truth, 2), mse_features(model, grid, truth).mse});
        }
    }
    return rows;
}

} // namespace drr
