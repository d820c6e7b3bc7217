#pragma once

#include "drr/drr.hpp"
#include "drr/pca.hpp"
#include "drr/ppa.hpp"

#include <string>
#include <variant>

namespace drr {

enum class Method { pca, ppa, drr };

inline std::string to_string(Method m)
{
    switch (m) {
    case Method::pca: return "pca";
    case Method::ppa: return "ppa";
    case Method::drr: return "drr";
    }
    return "?";
}

inline Method parse_method(const std::string& s)
{
    if (s == "pca") return Method::pca;
    if (s == "ppa") return Method::ppa;
    if (s == "drr") return Method::drr;
    throw ArgumentError("unknown method '" + s + "' (expected pca, ppa or drr)");
}

/// Any fitted invertible transform.
using AnyModel = std::variant<PcaModel, PpaModel, DrrModel>;

inline Method method_of(const AnyModel& m)
{
    return static_cast<Method>(m.index());
}

inline Index model_dim(const AnyModel& m)
{
    return std::visit([](const auto& x) { return x.dim(); }, m);
}

inline Matrix forward(const AnyModel& m, const Matrix& X, unsigned threads = 1)
{
    return std::visit(
        [&](const auto& x) -> Matrix {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, PcaModel>) return pca_forward(x, X);
            else if constexpr (std::is_same_v<T, PpaModel>) return ppa_forward(x, X);
            else return drr_forward(x, X, threads);
        },
        m);
}

inline Matrix inverse(const AnyModel& m, const Matrix& R, unsigned threads = 1)
{
    return std::visit(
        [&](const auto& x) -> Matrix {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, PcaModel>) return pca_inverse(x, R);
            else if constexpr (std::is_same_v<T, PpaModel>) return ppa_inverse(x, R);
            else return drr_inverse(x, R, threads);
        },
        m);
}

inline Matrix truncate_reconstruct(const AnyModel& m, const Matrix& X, Index k, unsigned threads = 1)
{
    return std::visit(
        [&](const auto& x) -> Matrix {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, PcaModel>) return pca_truncate_reconstruct(x, X, k);
            else if constexpr (std::is_same_v<T, PpaModel>) return ppa_truncate_reconstruct(x, X, k);
            else return drr_truncate_reconstruct(x, X, k, threads);
        },
        m);
}

struct FitOptions {
    DrrConfig drr;
    int ppa_degree = 3;
};

inline AnyModel fit_model(Method method, const Matrix& X, const FitOptions& opts = {})
{
    switch (method) {
    case Method::pca: return fit_pca(X);
    case Method::ppa: return fit_ppa(X, opts.ppa_degree);
    case Method::drr: return fit_drr(X, opts.drr);
    }
    throw ArgumentError("fit_model: unknown method");
}

} // namespace drr
