#pragma once

#include "drr/common.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace drr {

/// Kernel ridge regressor with the squared-exponential kernel
/// k(a, b) = exp(-|a - b|^2 / (2 sigma^2)).
struct KrrModel {
    Matrix train_inputs; ///< M x p stored regression inputs
    Matrix beta;         ///< M x q dual weights (q = 1 for single-output fits)
    double sigma = 1.0;
    double gamma = 0.0;
    bool jitter_applied = false;

    Index input_dim() const noexcept { return train_inputs.cols(); }
    Index size() const noexcept { return train_inputs.rows(); }
    Index outputs() const noexcept { return beta.cols(); }
};

/// Pairwise squared distances, laid out as (rows of A) x (rows of B). Each
/// entry is accumulated coordinate by coordinate in a fixed order, so an entry
/// does not depend on what else is in the batch.
inline Matrix squared_distances(const Matrix& A, const Matrix& B)
{
    if (A.cols() != B.cols())
        throw DimensionError("squared_distances: inputs have " + std::to_string(A.cols()) + " and " +
                             std::to_string(B.cols()) + " columns");
    Matrix D = Matrix::Zero(A.rows(), B.rows());
    for (Index j = 0; j < B.rows(); ++j)
        for (Index p = 0; p < A.cols(); ++p) D.col(j).array() += (A.col(p).array() - B(j, p)).square();
    return D;
}

inline Matrix kernel_from_distances(const Matrix& sqdist, double sigma)
{
    return (sqdist.array() * (-0.5 / (sigma * sigma))).exp().matrix();
}

inline Matrix kernel_matrix(const Matrix& Z1, const Matrix& Z2, double sigma)
{
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ArgumentError("kernel_matrix: sigma must be positive");
    return kernel_from_distances(squared_distances(Z1, Z2), sigma);
}

namespace detail {

struct RidgeSolve {
    Matrix beta;
    bool jitter_applied = false;
    bool ok = false;
};

// Solves (K + gamma I) beta = T with a Cholesky factorization. On failure a
// jitter of 1e-10 * trace(K) / M is added once. One step of iterative
// refinement tightens the residual when gamma is tiny.
inline RidgeSolve ridge_solve(const Matrix& K, const Matrix& T, double gamma)
{
    RidgeSolve out;
    const Index m = K.rows();
    Matrix A = K;
    A.diagonal().array() += gamma;
    Eigen::LLT<Matrix> llt(A);
    if (llt.info() != Eigen::Success) {
        A.diagonal().array() += 1e-10 * K.trace() / static_cast<double>(m);
        llt.compute(A);
        out.jitter_applied = true;
        if (llt.info() != Eigen::Success) return out;
    }
    out.beta = llt.solve(T);
    Matrix residual = T - A * out.beta;
    out.beta += llt.solve(residual);
    out.ok = out.beta.allFinite();
    return out;
}

} // namespace detail

/// Fits the dual weights for several target columns with one shared
/// factorization.
inline KrrModel fit_krr(const Matrix& Z, const Matrix& T, double sigma, double gamma)
{
    require(Z.rows() >= 1 && Z.cols() >= 1, "fit_krr: need at least one sample and one input column");
    require(T.rows() == Z.rows(), "fit_krr: target count differs from sample count");
    require(sigma > 0.0 && std::isfinite(sigma), "fit_krr: sigma must be positive");
    require(gamma >= 0.0 && std::isfinite(gamma), "fit_krr: gamma must be non-negative");
    require_finite(Z, "fit_krr inputs");
    require_finite(T, "fit_krr targets");

    Matrix K = kernel_matrix(Z, Z, sigma);
    auto solved = detail::ridge_solve(K, T, gamma);
    if (!solved.ok) {
        throw SolveError("fit_krr: kernel system (K + gamma I) is singular at gamma = " + std::to_string(gamma) +
                         "; use a nonzero gamma");
    }
    KrrModel m;
    m.train_inputs = Z;
    m.beta = std::move(solved.beta);
    m.sigma = sigma;
    m.gamma = gamma;
    m.jitter_applied = solved.jitter_applied;
    return m;
}

inline KrrModel fit_krr(const Matrix& Z, const Vector& t, double sigma, double gamma)
{
    return fit_krr(Z, Matrix(t), sigma, gamma);
}

/// Predictions for all outputs, Q x q. Each query row is evaluated
/// independently, so results are identical regardless of batching or threads.
/// Kernel values and sums are formed in extended precision. Near-interpolating
/// fits carry dual weights of 1e6 and more whose contributions cancel, and
/// double rounding there is enough to spoil finite-difference Jacobians.
inline Matrix predict_krr_multi(const KrrModel& m, const Matrix& Zq, unsigned threads = 1)
{
    require_columns(Zq, m.input_dim(), "predict_krr");
    const Index q = Zq.rows();
    const Index n = m.size();
    const Index dim = m.input_dim();
    const Index outs = m.outputs();
    Matrix out(q, outs);
    constexpr Index block = 256;
    const Index blocks = (q + block - 1) / block;
    const long double scale = -0.5L / (static_cast<long double>(m.sigma) * m.sigma);
    parallel_for(blocks, threads, [&](Index b) {
        const Index begin = b * block;
        const Index end = std::min(q, begin + block);
        std::vector<long double> acc(static_cast<std::size_t>(outs));
        for (Index r = begin; r < end; ++r) {
            std::fill(acc.begin(), acc.end(), 0.0L);
            for (Index i = 0; i < n; ++i) {
                long double dist = 0.0L;
                for (Index p = 0; p < dim; ++p) {
                    const long double diff = static_cast<long double>(m.train_inputs(i, p)) - Zq(r, p);
                    dist += diff * diff;
                }
                const long double k = std::exp(dist * scale);
                for (Index o = 0; o < outs; ++o) acc[static_cast<std::size_t>(o)] += k * m.beta(i, o);
            }
            for (Index o = 0; o < outs; ++o) out(r, o) = static_cast<double>(acc[static_cast<std::size_t>(o)]);
        }
    });
    return out;
}

inline Vector predict_krr(const KrrModel& m, const Matrix& Zq, unsigned threads = 1)
{
    if (m.outputs() != 1) throw DimensionError("predict_krr: model has multiple outputs; use predict_krr_multi");
    return predict_krr_multi(m, Zq, threads).col(0);
}

struct CvResult {
    double sigma = 0.0;
    double gamma = 0.0;
    double cv_mse = std::numeric_limits<double>::infinity();
};

/// Grid search over (sigma, gamma) by k-fold cross-validation. Folds come from
/// a permutation seeded by `seed`. Among equal scores the larger gamma wins,
/// then the larger sigma.
inline CvResult cross_validate_krr(const Matrix& Z, const Vector& t, const std::vector<double>& sigma_grid,
                                   const std::vector<double>& gamma_grid, int folds, std::uint64_t seed)
{
    require(!sigma_grid.empty() && !gamma_grid.empty(), "cross_validate_krr: empty hyperparameter grid");
    require(folds >= 2, "cross_validate_krr: folds must be >= 2");
    require(Z.rows() >= folds, "cross_validate_krr: more folds than samples");
    require(t.size() == Z.rows(), "cross_validate_krr: target count differs from sample count");
    for (double s : sigma_grid) require(s > 0.0 && std::isfinite(s), "cross_validate_krr: sigma must be positive");
    for (double g : gamma_grid) require(g >= 0.0 && std::isfinite(g), "cross_validate_krr: gamma must be non-negative");

    const Index n = Z.rows();
    auto perm = permutation(n, seed);
    std::vector<std::vector<Index>> train_idx(static_cast<std::size_t>(folds));
    std::vector<std::vector<Index>> val_idx(static_cast<std::size_t>(folds));
    for (Index j = 0; j < n; ++j) {
        const auto f = static_cast<std::size_t>(j % folds);
        val_idx[f].push_back(perm[static_cast<std::size_t>(j)]);
    }
    for (int f = 0; f < folds; ++f) {
        for (int g = 0; g < folds; ++g)
            if (g != f) train_idx[f].insert(train_idx[f].end(), val_idx[g].begin(), val_idx[g].end());
        std::sort(train_idx[f].begin(), train_idx[f].end());
    }

    const Matrix D = squared_distances(Z, Z);
    const std::size_t ns = sigma_grid.size();
    const std::size_t ng = gamma_grid.size();
    std::vector<double> sse(ns * ng, 0.0);

    for (std::size_t si = 0; si < ns; ++si) {
        const Matrix K = kernel_from_distances(D, sigma_grid[si]);
        for (int f = 0; f < folds; ++f) {
            const auto& tr = train_idx[static_cast<std::size_t>(f)];
            const auto& va = val_idx[static_cast<std::size_t>(f)];
            const auto ntr = static_cast<Index>(tr.size());
            const auto nva = static_cast<Index>(va.size());
            Matrix Ktr(ntr, ntr);
            Matrix Kva(nva, ntr);
            for (Index c = 0; c < ntr; ++c) {
                for (Index r = 0; r < ntr; ++r) Ktr(r, c) = K(tr[r], tr[c]);
                for (Index r = 0; r < nva; ++r) Kva(r, c) = K(va[r], tr[c]);
            }
            const Vector ttr = select_rows(t, tr);
            const Vector tva = select_rows(t, va);
            for (std::size_t gi = 0; gi < ng; ++gi) {
                auto solved = detail::ridge_solve(Ktr, ttr, gamma_grid[gi]);
                double& acc = sse[si * ng + gi];
                if (!solved.ok) {
                    acc = std::numeric_limits<double>::infinity();
                    continue;
                }
                acc += (tva - Kva * solved.beta).squaredNorm();
            }
        }
    }

    std::vector<std::size_t> sigma_order(ns), gamma_order(ng);
    std::iota(sigma_order.begin(), sigma_order.end(), std::size_t{0});
    std::iota(gamma_order.begin(), gamma_order.end(), std::size_t{0});
    std::stable_sort(sigma_order.begin(), sigma_order.end(),
                     [&](auto a, auto b) { return sigma_grid[a] > sigma_grid[b]; });
    std::stable_sort(gamma_order.begin(), gamma_order.end(),
                     [&](auto a, auto b) { return gamma_grid[a] > gamma_grid[b]; });

    CvResult best;
    bool found = false;
    for (auto gi : gamma_order) {
        for (auto si : sigma_order) {
            const double mse = sse[si * ng + gi] / static_cast<double>(n);
            if (!found || mse < best.cv_mse) {
                best = {sigma_grid[si], gamma_grid[gi], mse};
                found = true;
            }
        }
    }
    if (!std::isfinite(best.cv_mse)) throw SolveError("cross_validate_krr: every grid point failed to factorize");
    return best;
}

/// Median pairwise Euclidean distance over a seeded subsample of at most
/// `max_rows` rows. Falls back to 1 when all points coincide.
inline double median_pairwise_distance(const Matrix& Z, std::uint64_t seed, Index max_rows = 1000)
{
    const Matrix S = select_rows(Z, subsample_indices(Z.rows(), max_rows, seed));
    const Matrix D = squared_distances(S, S);
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(S.rows() * (S.rows() - 1) / 2));
    for (Index c = 0; c < S.rows(); ++c)
        for (Index r = c + 1; r < S.rows(); ++r) dist.push_back(std::sqrt(D(r, c)));
    if (dist.empty()) return 1.0;
    auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
    std::nth_element(dist.begin(), mid, dist.end());
    return *mid > 0.0 ? *mid : 1.0;
}

struct KrrOptions {
    std::vector<double> sigma_multipliers{0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    std::vector<double> gamma_grid{1e-6, 1e-4, 1e-2, 1.0, 1e2};
    int folds = 5;
    std::uint64_t seed = 0;
    /// Training rows kept for the final fit (M_max).
    Index max_train = 2000;
    /// Rows used for the hyperparameter search; drawn from the fit subsample.
    Index cv_max_rows = 1000;
};

struct KrrFit {
    KrrModel model;
    CvResult cv;
};

/// Selects (sigma, gamma) on a subsample, then fits on up to `max_train` rows.
/// When `fixed` is given the search is skipped.
inline KrrFit fit_krr_cv(const Matrix& Z, const Vector& t, const KrrOptions& opts,
                         std::optional<CvResult> fixed = std::nullopt)
{
    require(opts.max_train >= 1 && opts.cv_max_rows >= 2, "fit_krr_cv: invalid subsample caps");
    const auto fit_rows = subsample_indices(Z.rows(), opts.max_train, opts.seed);
    const Matrix Zfit = select_rows(Z, fit_rows);
    const Vector tfit = select_rows(t, fit_rows);

    CvResult cv;
    if (fixed) {
        cv = *fixed;
    } else {
        const auto cv_rows = subsample_indices(Zfit.rows(), opts.cv_max_rows, opts.seed ^ 0x9e3779b97f4a7c15ULL);
        const Matrix Zcv = select_rows(Zfit, cv_rows);
        const Vector tcv = select_rows(tfit, cv_rows);
        const double anchor = median_pairwise_distance(Zcv, opts.seed);
        std::vector<double> sigmas;
        for (double mult : opts.sigma_multipliers) sigmas.push_back(anchor * mult);
        const int folds = static_cast<int>(std::min<Index>(opts.folds, Zcv.rows()));
        cv = cross_validate_krr(Zcv, tcv, sigmas, opts.gamma_grid, folds, opts.seed);
    }
    return {fit_krr(Zfit, tfit, cv.sigma, cv.gamma), cv};
}

} // namespace drr
