#pragma once

#include "drr/common.hpp"
#include "drr/krr.hpp"
#include "drr/pca.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <limits>
#include <variant>
#include <vector>

namespace drr {

/// Predicts exactly zero; used for dimensions left linear.
struct ZeroRegressor {};

/// Ordinary least squares without intercept (inputs are centered PC scores).
struct LinearRegressor {
    Vector coef;
};

using Regressor = std::variant<ZeroRegressor, LinearRegressor, KrrModel>;

enum class RegressorKind { krr, linear };

struct DrrConfig {
    KrrOptions krr;
    /// Residualized dimensions, 1-based inclusive. 0 for `last` means d.
    Index first_residualized = 2;
    Index last_residualized = 0;
    /// Cross-validate once (on the first residualized dimension) and reuse the
    /// chosen (sigma, gamma) for every regression.
    bool share_hyperparameters = false;
    RegressorKind kind = RegressorKind::krr;
    unsigned threads = 0;
};

/// PCA followed by per-dimension residualization. regressors[i - 2] predicts
/// score i (1-based) from scores 1..i-1.
struct DrrModel {
    PcaModel pca;
    std::vector<Regressor> regressors;
    /// Cross-validated MSE per regressor (NaN where no search was run).
    std::vector<double> cv_mse;

    Index dim() const noexcept { return pca.dim(); }
};

inline Vector predict(const Regressor& reg, const Matrix& inputs, unsigned threads = 1)
{
    return std::visit(
        [&](const auto& r) -> Vector {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, ZeroRegressor>) {
                return Vector::Zero(inputs.rows());
            } else if constexpr (std::is_same_v<T, LinearRegressor>) {
                require_columns(inputs, r.coef.size(), "linear regressor");
                return inputs * r.coef;
            } else {
                return predict_krr(r, inputs, threads);
            }
        },
        reg);
}

/// Gradient of a regressor at a single input point z.
inline Vector gradient(const Regressor& reg, const Vector& z)
{
    return std::visit(
        [&](const auto& r) -> Vector {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, ZeroRegressor>) {
                return Vector::Zero(z.size());
            } else if constexpr (std::is_same_v<T, LinearRegressor>) {
                return r.coef;
            } else {
                // d/dz sum_j beta_j k(z, z_j) = sum_j beta_j k(z, z_j) (z_j - z) / sigma^2
                const Matrix diff = r.train_inputs.rowwise() - z.transpose();
                const Vector k = (diff.rowwise().squaredNorm().array() * (-0.5 / (r.sigma * r.sigma))).exp();
                const Vector w = k.cwiseProduct(r.beta.col(0));
                return diff.transpose() * w / (r.sigma * r.sigma);
            }
        },
        reg);
}

inline LinearRegressor fit_linear_regressor(const Matrix& inputs, const Vector& target)
{
    return {inputs.colPivHouseholderQr().solve(target)};
}

inline DrrModel fit_drr(const Matrix& X, const DrrConfig& cfg = {})
{
    require_finite(X, "fit_drr");
    require(X.rows() >= 2, "fit_drr: need at least two samples");

    DrrModel m;
    m.pca = fit_pca(X);
    const Index d = m.dim();
    if (d == 1) return m;

    const Index first = cfg.first_residualized;
    const Index last = cfg.last_residualized == 0 ? d : cfg.last_residualized;
    require(first >= 2 && last <= d && first <= last + 1,
            "fit_drr: residualized range must satisfy 2 <= first <= last <= d");

    const Matrix scores = pca_forward(m.pca, X);
    m.regressors.assign(static_cast<std::size_t>(d - 1), ZeroRegressor{});
    m.cv_mse.assign(static_cast<std::size_t>(d - 1), std::numeric_limits<double>::quiet_NaN());

    auto options_for = [&](Index dim) {
        KrrOptions o = cfg.krr;
        o.seed = cfg.krr.seed + static_cast<std::uint64_t>(dim);
        return o;
    };

    std::optional<CvResult> shared;
    if (cfg.kind == RegressorKind::krr && cfg.share_hyperparameters && first <= last) {
        auto fit = fit_krr_cv(scores.leftCols(first - 1), scores.col(first - 1), options_for(first));
        shared = fit.cv;
    }

    parallel_for(last - first + 1, cfg.threads, [&](Index offset) {
        const Index dim = first + offset; // 1-based
        const auto slot = static_cast<std::size_t>(dim - 2);
        const Matrix inputs = scores.leftCols(dim - 1);
        const Vector target = scores.col(dim - 1);
        if (cfg.kind == RegressorKind::linear) {
            m.regressors[slot] = fit_linear_regressor(inputs, target);
            return;
        }
        auto fit = fit_krr_cv(inputs, target, options_for(dim), shared);
        m.cv_mse[slot] = fit.cv.cv_mse;
        m.regressors[slot] = std::move(fit.model);
    });
    return m;
}

/// r = (alpha_1, y_2, ..., y_d) with y_i = alpha_i - f_i(alpha_1..alpha_{i-1}).
/// The d-1 predictions only read PC scores, so they run concurrently.
inline Matrix drr_forward(const DrrModel& m, const Matrix& X, unsigned threads = 1)
{
    require_columns(X, m.dim(), "drr_forward");
    const Matrix scores = pca_forward(m.pca, X);
    Matrix r = scores;
    parallel_for(static_cast<Index>(m.regressors.size()), threads, [&](Index j) {
        const Index col = j + 1;
        r.col(col) = scores.col(col) - predict(m.regressors[static_cast<std::size_t>(j)], scores.leftCols(col));
    });
    return r;
}

/// Sequential inverse: alpha_i = f_i(alpha_1..alpha_{i-1}) + y_i for i = 2..d,
/// then the PCA inverse. Rows are independent and may be split across threads.
inline Matrix drr_inverse(const DrrModel& m, const Matrix& R, unsigned threads = 1)
{
    require_columns(R, m.dim(), "drr_inverse");
    Matrix scores = R;
    for (std::size_t j = 0; j < m.regressors.size(); ++j) {
        const auto col = static_cast<Index>(j) + 1;
        scores.col(col) = R.col(col) + predict(m.regressors[j], scores.leftCols(col), threads);
    }
    return pca_inverse(m.pca, scores);
}

/// Zeroes residual coordinates k+1..d and inverts; the trailing scores are
/// filled in by the regressors' predictions.
inline Matrix drr_truncate_reconstruct(const DrrModel& m, const Matrix& X, Index k, unsigned threads = 1)
{
    if (k < 1 || k > m.dim())
        throw ArgumentError("drr_truncate_reconstruct: k must lie in [1, " + std::to_string(m.dim()) + "]");
    Matrix r = drr_forward(m, X, threads);
    r.rightCols(m.dim() - k).setZero();
    return drr_inverse(m, r, threads);
}

/// Central finite-difference Jacobian of x -> r, with per-coordinate step
/// eps * (1 + |x_j|).
inline Matrix jacobian_fd(const DrrModel& m, const Vector& x, double eps = 1e-5)
{
    require(eps > 0.0, "jacobian_fd: eps must be positive");
    const Index d = m.dim();
    require(x.size() == d, "jacobian_fd: point has wrong dimension");
    Matrix J(d, d);
    for (Index j = 0; j < d; ++j) {
        const double h = eps * (1.0 + std::abs(x(j)));
        Matrix pts = x.transpose().replicate(2, 1);
        pts(0, j) += h;
        pts(1, j) -= h;
        const Matrix f = drr_forward(m, pts);
        // Divide by the step actually taken after rounding.
        J.col(j) = ((f.row(0) - f.row(1)) / (pts(0, j) - pts(1, j))).transpose();
    }
    return J;
}

/// Closed-form Jacobian: a unit lower-triangular matrix of negated regressor
/// gradients times the PCA basis.
inline Matrix jacobian(const DrrModel& m, const Vector& x)
{
    const Index d = m.dim();
    require(x.size() == d, "jacobian: point has wrong dimension");
    const Vector alpha = m.pca.basis * (x - m.pca.mean);
    Matrix L = Matrix::Identity(d, d);
    for (std::size_t j = 0; j < m.regressors.size(); ++j) {
        const auto row = static_cast<Index>(j) + 1;
        L.row(row).head(row) = -gradient(m.regressors[j], alpha.head(row)).transpose();
    }
    return L * m.pca.basis;
}

struct DimensionReport {
    Index dim = 0; ///< 1-based
    double score_variance = 0.0;
    double residual_variance = 0.0;
    double sigma = 0.0;
    double gamma = 0.0;
    double cv_mse = 0.0;
};

/// Per-dimension variance of PC scores against DRR residuals on X.
inline std::vector<DimensionReport> residual_report(const DrrModel& m, const Matrix& X)
{
    const Matrix scores = pca_forward(m.pca, X);
    const Matrix r = drr_forward(m, X);
    std::vector<DimensionReport> out;
    for (Index i = 0; i < m.dim(); ++i) {
        DimensionReport rep;
        rep.dim = i + 1;
        rep.score_variance = sample_variance(scores.col(i));
        rep.residual_variance = sample_variance(r.col(i));
        rep.cv_mse = std::numeric_limits<double>::quiet_NaN();
        rep.sigma = rep.gamma = std::numeric_limits<double>::quiet_NaN();
        if (i > 0) {
            const auto& reg = m.regressors[static_cast<std::size_t>(i - 1)];
            if (const auto* k = std::get_if<KrrModel>(&reg)) {
                rep.sigma = k->sigma;
                rep.gamma = k->gamma;
            }
            rep.cv_mse = m.cv_mse[static_cast<std::size_t>(i - 1)];
        }
        out.push_back(rep);
    }
    return out;
}

} // namespace drr
