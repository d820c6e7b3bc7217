#pragma once

#include "drr/dataset.hpp"
#include "drr/model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <optional>

namespace drr {

// ---------------------------------------------------------------------------
// Reconstruction curves

struct ReconstructionCurve {
    std::string method;
    std::vector<double> mae; ///< index k-1
    std::vector<double> mse;
    /// 100 * error / PCA error; empty until a PCA reference is applied.
    std::vector<double> relative_mae;
    std::vector<double> relative_mse;
};

/// Truncation error at every k = 1..d, averaged over all matrix entries.
inline ReconstructionCurve reconstruction_curve(const AnyModel& model, const Matrix& X, std::string name = {},
                                                unsigned threads = 1)
{
    ReconstructionCurve c;
    c.method = name.empty() ? to_string(method_of(model)) : std::move(name);
    const Index d = model_dim(model);
    require_columns(X, d, "reconstruction_curve");
    const auto entries = static_cast<double>(X.size());
    for (Index k = 1; k <= d; ++k) {
        const Matrix diff = truncate_reconstruct(model, X, k, threads) - X;
        c.mae.push_back(diff.cwiseAbs().sum() / entries);
        c.mse.push_back(diff.squaredNorm() / entries);
    }
    return c;
}

inline void apply_reference(ReconstructionCurve& c, const ReconstructionCurve& pca)
{
    require(c.mae.size() == pca.mae.size(), "apply_reference: curves have different lengths");
    c.relative_mae.resize(c.mae.size());
    c.relative_mse.resize(c.mse.size());
    for (std::size_t i = 0; i < c.mae.size(); ++i) {
        c.relative_mae[i] = 100.0 * c.mae[i] / pca.mae[i];
        c.relative_mse[i] = 100.0 * c.mse[i] / pca.mse[i];
    }
}

// ---------------------------------------------------------------------------
// Linear discriminant analysis

struct LdaModel {
    Matrix means;        ///< C x d class means
    Matrix covariance;   ///< pooled within-class covariance, ridge included
    Vector priors;       ///< C
    Matrix weights;      ///< d x C, covariance^{-1} * mean_c
    Vector bias;         ///< C, -0.5 mean_c' covariance^{-1} mean_c + log prior_c

    int num_classes() const noexcept { return static_cast<int>(means.rows()); }
};

/// Equal-covariance Gaussian discriminant. `ridge` adds
/// ridge * trace(S) / d * I to the pooled covariance S.
inline LdaModel lda_fit(const Matrix& X, const std::vector<int>& labels, double ridge = 1e-6)
{
    require(static_cast<Index>(labels.size()) == X.rows(), "lda_fit: label count differs from sample count");
    require(ridge >= 0.0, "lda_fit: ridge must be non-negative");
    require_finite(X, "lda_fit");
    const int C = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
    require(C >= 2, "lda_fit: need at least two classes");
    const Index d = X.cols();

    LdaModel m;
    m.means = Matrix::Zero(C, d);
    std::vector<Index> counts(static_cast<std::size_t>(C), 0);
    for (Index i = 0; i < X.rows(); ++i) {
        const int c = labels[static_cast<std::size_t>(i)];
        require(c >= 0, "lda_fit: labels must be non-negative");
        m.means.row(c) += X.row(i);
        ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < C; ++c) {
        require(counts[static_cast<std::size_t>(c)] >= 2, "lda_fit: every class needs at least two samples");
        m.means.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }

    Matrix centered = X;
    for (Index i = 0; i < X.rows(); ++i) centered.row(i) -= m.means.row(labels[static_cast<std::size_t>(i)]);
    m.covariance = centered.transpose() * centered / static_cast<double>(X.rows() - C);
    const double shrink = ridge * m.covariance.trace() / static_cast<double>(d);
    m.covariance.diagonal().array() += shrink;

    Eigen::LLT<Matrix> llt(m.covariance);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
        throw SolveError("lda_fit: pooled covariance is singular; use a nonzero ridge");

    m.priors.resize(C);
    for (int c = 0; c < C; ++c)
        m.priors(c) = static_cast<double>(counts[static_cast<std::size_t>(c)]) / static_cast<double>(X.rows());
    m.weights = llt.solve(m.means.transpose());
    m.bias.resize(C);
    for (int c = 0; c < C; ++c)
        m.bias(c) = -0.5 * m.means.row(c).dot(m.weights.col(c)) + std::log(m.priors(c));
    return m;
}

inline std::vector<int> lda_predict(const LdaModel& m, const Matrix& X)
{
    require_columns(X, m.means.cols(), "lda_predict");
    const Matrix scores = (X * m.weights).rowwise() + m.bias.transpose();
    std::vector<int> out(static_cast<std::size_t>(X.rows()));
    for (Index i = 0; i < X.rows(); ++i) {
        Index arg = 0;
        scores.row(i).maxCoeff(&arg);
        out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
}

inline double classification_error(const std::vector<int>& predicted, const std::vector<int>& truth)
{
    require(predicted.size() == truth.size() && !truth.empty(), "classification_error: size mismatch");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) wrong += predicted[i] != truth[i];
    return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------
// Multi-output linear retrieval

struct OlsMap {
    Matrix weights;      ///< k x q
    RowVector intercept; ///< q
    bool rank_deficient = false;
};

/// Least squares with intercept. Rank-deficient designs fall back to the
/// minimum-norm (pseudo-inverse) solution and set `rank_deficient`.
inline OlsMap ols_multioutput_fit(const Matrix& F, const Matrix& Y)
{
    require(F.rows() == Y.rows(), "ols_multioutput_fit: row counts differ");
    require(F.rows() > F.cols(), "ols_multioutput_fit: need more samples than features");
    require_finite(F, "ols_multioutput_fit features");
    require_finite(Y, "ols_multioutput_fit targets");
    const RowVector fmean = F.colwise().mean();
    const RowVector ymean = Y.colwise().mean();
    const Matrix Fc = F.rowwise() - fmean;
    const Matrix Yc = Y.rowwise() - ymean;

    OlsMap m;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Fc);
    m.rank_deficient = cod.rank() < F.cols();
    m.weights = cod.solve(Yc);
    m.intercept = ymean - fmean * m.weights;
    return m;
}

inline Matrix ols_predict(const OlsMap& m, const Matrix& F)
{
    require_columns(F, m.weights.rows(), "ols_predict");
    return (F * m.weights).rowwise() + m.intercept;
}

/// Mean absolute error over all outputs and samples.
inline double retrieval_mae(const OlsMap& m, const Matrix& F, const Matrix& Y)
{
    require(F.rows() == Y.rows() && Y.cols() == m.weights.cols(), "retrieval_mae: shape mismatch");
    return (ols_predict(m, F) - Y).cwiseAbs().mean();
}

// ---------------------------------------------------------------------------
// Synthetic retrieval task

struct RetrievalTaskSpec {
    Index n_samples = 4000;
    Index input_dim = 40;
    Index latent_dim = 6;
    Index output_dim = 12;
    /// Smooth functions of the leading latent added along their own directions.
    Index harmonics = 8;
    double leading_scale = 3.0;
    /// Half-width of the uniform law of every other latent.
    double secondary_scale = 1.0;
    double harmonic_amplitude = 1.2;
    double noise_std = 0.05;
    /// Seed for the mixing matrices; fixed across realizations so every seed
    /// draws from the same task.
    std::uint64_t task_seed = 1234;
    std::uint64_t seed = 0;
};

struct RetrievalData {
    Matrix inputs;  ///< N x input_dim
    Matrix targets; ///< N x output_dim
    Matrix latent;  ///< N x latent_dim
};

/// Curved-backbone mixture: the leading latent s_1 traces a bent curve (it
/// enters the inputs linearly and through `harmonics` cosine terms), while the
/// remaining latents add weaker linear directions. Every term gets its own
/// random unit direction in input space. Targets are smooth, mostly linear
/// functions of all latents.
inline RetrievalData generate_retrieval_task(const RetrievalTaskSpec& spec)
{
    require(spec.latent_dim >= 2 && spec.input_dim >= spec.latent_dim + spec.harmonics && spec.output_dim >= 1,
            "generate_retrieval_task: invalid dimensions");
    require(spec.n_samples >= 2, "generate_retrieval_task: need at least two samples");
    const Index L = spec.latent_dim;
    const Index H = spec.harmonics;
    constexpr double pi = 3.14159265358979323846;

    Rng task_rng(spec.task_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto random_matrix = [&](Index r, Index c) {
        Matrix M(r, c);
        for (Index j = 0; j < c; ++j)
            for (Index i = 0; i < r; ++i) M(i, j) = gauss(task_rng);
        return M;
    };
    Matrix mixing = random_matrix(spec.input_dim, L + H);
    mixing.colwise().normalize();
    const Matrix target_linear = random_matrix(spec.output_dim, L);
    const Matrix target_freq = 0.5 * random_matrix(spec.output_dim, L);

    Vector scales(L);
    scales(0) = spec.leading_scale;
    for (Index l = 1; l < L; ++l) scales(l) = spec.secondary_scale;

    Rng rng(spec.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    RetrievalData out{Matrix(spec.n_samples, spec.input_dim), Matrix(spec.n_samples, spec.output_dim),
                      Matrix(spec.n_samples, L)};
    Vector terms(L + H);
    for (Index i = 0; i < spec.n_samples; ++i) {
        Vector s(L);
        for (Index l = 0; l < L; ++l) s(l) = scales(l) * unif(rng);
        const double t = s(0) / spec.leading_scale;
        terms.head(L) = s;
        for (Index m = 0; m < H; ++m)
            terms(L + m) = spec.harmonic_amplitude * std::cos(static_cast<double>(m + 1) * pi * (t + 1.0) / 2.0);
        Vector x = mixing * terms;
        for (Index c = 0; c < spec.input_dim; ++c) x(c) += spec.noise_std * gauss(rng);
        const Vector y = target_linear * s + 0.3 * (target_freq * s).array().sin().matrix();
        out.inputs.row(i) = x.transpose();
        out.targets.row(i) = y.transpose();
        out.latent.row(i) = s.transpose();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Protocols

struct ResultRow {
    std::uint64_t seed = 0;
    std::string method;
    Index k = 0;
    std::string metric;
    double value = 0.0;
};

inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows)
{
    out << "seed,method,k,metric,value\n";
    out.precision(17);
    for (const auto& r : rows) out << r.seed << ',' << r.method << ',' << r.k << ',' << r.metric << ',' << r.value << '\n';
}

struct ClassificationProtocol {
    std::vector<Method> methods{Method::pca, Method::ppa, Method::drr};
    std::vector<Index> ks; ///< empty = 1..d
    std::vector<std::uint64_t> seeds{0};
    Index train_size = 3200;
    Index test_size = 3200; ///< 0 = every row not used for training
    double lda_ridge = 1e-6;
    FitOptions fit;
    unsigned threads = 1;
};

/// Per seed: draw disjoint train/test sets, fit each method on the training
/// inputs, reconstruct both sets keeping k coordinates, train LDA on the
/// reconstructed training set and score the reconstructed test set. Also
/// reports test reconstruction MAE and a raw-data LDA baseline (method "raw").
inline std::vector<ResultRow> run_classification_protocol(const LabeledDataset& ds, const ClassificationProtocol& p)
{
    require(ds.has_labels(), "classification protocol: dataset has no labels");
    const Index n = ds.size();
    const Index d = ds.data.cols();
    require(p.train_size >= 2 && p.train_size < n, "classification protocol: invalid train size");
    const Index test_size = p.test_size == 0 ? n - p.train_size : p.test_size;
    require(test_size >= 1 && p.train_size + test_size <= n, "classification protocol: train + test exceeds N");
    std::vector<Index> ks = p.ks;
    if (ks.empty())
        for (Index k = 1; k <= d; ++k) ks.push_back(k);

    std::vector<ResultRow> rows;
    for (auto seed : p.seeds) {
        const auto perm = permutation(n, seed);
        std::vector<Index> tr(perm.begin(), perm.begin() + p.train_size);
        std::vector<Index> te(perm.begin() + p.train_size, perm.begin() + p.train_size + test_size);
        const LabeledDataset train = subset(ds, tr);
        const LabeledDataset test = subset(ds, te);

        const LdaModel raw = lda_fit(train.data, train.labels, p.lda_ridge);
        rows.push_back({seed, "raw", d, "classification_error",
                        classification_error(lda_predict(raw, test.data), test.labels)});

        for (Method method : p.methods) {
            FitOptions fo = p.fit;
            fo.drr.krr.seed = p.fit.drr.krr.seed + seed * 1000;
            const AnyModel model = fit_model(method, train.data, fo);
            for (Index k : ks) {
                const Matrix rtr = truncate_reconstruct(model, train.data, k, p.threads);
                const Matrix rte = truncate_reconstruct(model, test.data, k, p.threads);
                rows.push_back({seed, to_string(method), k, "mae", (rte - test.data.values()).cwiseAbs().mean()});
                const LdaModel lda = lda_fit(rtr, train.labels, p.lda_ridge);
                rows.push_back({seed, to_string(method), k, "classification_error",
                                classification_error(lda_predict(lda, rte), test.labels)});
            }
        }
    }
    return rows;
}

struct RetrievalProtocol {
    std::vector<Method> methods{Method::pca, Method::ppa, Method::drr};
    std::vector<Index> ks;
    FitOptions fit;
    unsigned threads = 1;
};

/// Features are the leading k transform coordinates; OLS maps them to the
/// targets; MAE is measured on the test pair.
inline std::vector<ResultRow> run_retrieval_protocol(const Matrix& Xtr, const Matrix& Ytr, const Matrix& Xte,
                                                     const Matrix& Yte, const RetrievalProtocol& p,
                                                     std::uint64_t seed = 0)
{
    require(Xtr.rows() == Ytr.rows() && Xte.rows() == Yte.rows(), "retrieval protocol: input/target rows differ");
    require(!p.ks.empty(), "retrieval protocol: no k values");
    std::vector<ResultRow> rows;
    for (Method method : p.methods) {
        const AnyModel model = fit_model(method, Xtr, p.fit);
        const Matrix Ftr = forward(model, Xtr, p.threads);
        const Matrix Fte = forward(model, Xte, p.threads);
        for (Index k : p.ks) {
            require(k >= 1 && k <= Ftr.cols(), "retrieval protocol: k out of range");
            const OlsMap map = ols_multioutput_fit(Ftr.leftCols(k), Ytr);
            rows.push_back({seed, to_string(method), k, "mae", retrieval_mae(map, Fte.leftCols(k), Yte)});
        }
    }
    return rows;
}

} // namespace drr
