#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace drr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or non-numeric input (CSV cells, config values).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Column/row count does not match what a model or operation expects.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Argument outside its documented domain.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A linear solve or factorization could not be completed.
class SolveError : public Error {
public:
    using Error::Error;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition) throw ArgumentError(message);
}

inline void require_columns(const Matrix& X, Index expected, const char* what)
{
    if (X.cols() != expected) {
        throw DimensionError(std::string(what) + ": expected " + std::to_string(expected) +
                             " columns (d = " + std::to_string(expected) + "), got " +
                             std::to_string(X.cols()));
    }
}

inline void require_finite(const Matrix& X, const char* what)
{
    if (!X.allFinite()) throw ArgumentError(std::string(what) + ": input contains NaN or Inf");
}

using Rng = std::mt19937_64;

/// Deterministic permutation of 0..n-1.
inline std::vector<Index> permutation(Index n, std::uint64_t seed)
{
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

/// Uniform subsample of m distinct indices out of n, returned in ascending order.
inline std::vector<Index> subsample_indices(Index n, Index m, std::uint64_t seed)
{
    if (m >= n) {
        std::vector<Index> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), Index{0});
        return all;
    }
    auto perm = permutation(n, seed);
    perm.resize(static_cast<std::size_t>(m));
    std::sort(perm.begin(), perm.end());
    return perm;
}

inline Matrix select_rows(const Matrix& X, const std::vector<Index>& rows)
{
    Matrix out(static_cast<Index>(rows.size()), X.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Index>(r)) = X.row(rows[r]);
    return out;
}

inline Vector select_rows(const Vector& v, const std::vector<Index>& rows)
{
    Vector out(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) out(static_cast<Index>(r)) = v(rows[r]);
    return out;
}

inline unsigned resolve_threads(unsigned requested)
{
    if (requested != 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Runs body(i) for i in [0, count) on up to `threads` workers (0 = hardware
/// concurrency). Work is split into contiguous blocks; body must not depend on
/// which worker executes it.
inline void parallel_for(Index count, unsigned threads, const std::function<void(Index)>& body)
{
    unsigned workers = std::min<unsigned>(resolve_threads(threads),
                                          static_cast<unsigned>(std::max<Index>(count, 1)));
    if (workers <= 1) {
        for (Index i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        Index block = (count + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            Index begin = static_cast<Index>(w) * block;
            Index end = std::min(count, begin + block);
            pool.emplace_back([&, w, begin, end] {
                try {
                    for (Index i = begin; i < end; ++i) body(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Sample variance with the N-1 denominator (N when there is a single sample).
inline double sample_variance(const Vector& v)
{
    const Index n = v.size();
    if (n == 0) return 0.0;
    const double mean = v.mean();
    const double ss = (v.array() - mean).square().sum();
    return ss / static_cast<double>(n > 1 ? n - 1 : 1);
}

} // namespace drr
