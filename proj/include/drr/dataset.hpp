#pragma once

#include "drr/common.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string_view>
#include <utility>

namespace drr {

/// Dense N x d sample matrix. Construction validates N, d >= 1 and finiteness,
/// so every DataMatrix that exists is usable by the transforms.
class DataMatrix {
public:
    DataMatrix() = default;

    explicit DataMatrix(Matrix values) : values_(std::move(values))
    {
        if (values_.rows() < 1 || values_.cols() < 1)
            throw ArgumentError("DataMatrix: need at least one row and one column");
        require_finite(values_, "DataMatrix");
    }

    const Matrix& values() const noexcept { return values_; }
    operator const Matrix&() const noexcept { return values_; }
    Index rows() const noexcept { return values_.rows(); }
    Index cols() const noexcept { return values_.cols(); }

private:
    Matrix values_;
};

/// Samples plus either class labels (contiguous 0..C-1) or real-valued targets.
struct LabeledDataset {
    DataMatrix data;
    std::vector<int> labels;
    /// Original label value for each contiguous class id.
    std::vector<double> class_values;
    Matrix targets;

    Index size() const noexcept { return data.rows(); }
    int num_classes() const noexcept { return static_cast<int>(class_values.size()); }
    bool has_labels() const noexcept { return !labels.empty(); }
};

struct SplitSpec {
    double train_fraction = 0.5;
    std::uint64_t seed = 0;
};

struct CsvOptions {
    bool has_header = false;
    /// Column holding class labels. Negative values count from the end (-1 = last).
    std::optional<int> label_column;
    /// ',' for CSV; ' ' splits on any run of whitespace.
    char delimiter = ',';
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, char delimiter)
{
    std::vector<std::string_view> out;
    if (delimiter == ' ') {
        std::size_t i = 0;
        while (i < line.size()) {
            while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
            if (i >= line.size()) break;
            std::size_t j = i;
            while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
            out.push_back(line.substr(i, j - i));
            i = j;
        }
        return out;
    }
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = line.find(delimiter, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline double parse_cell(std::string_view cell, std::size_t row, std::size_t col)
{
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
        throw ParseError("non-numeric or non-finite cell '" + std::string(cell) + "' at row " +
                         std::to_string(row) + ", column " + std::to_string(col));
    }
    return value;
}

} // namespace detail

/// Parses a numeric table. Rows and columns in error messages are 1-based and
/// count the header line when present.
inline std::vector<std::vector<double>> parse_table(std::istream& in, const CsvOptions& opts)
{
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t arity = 0;
    bool header_pending = opts.has_header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        if (header_pending) {
            header_pending = false;
            continue;
        }
        auto fields = detail::split_fields(line, opts.delimiter);
        if (arity == 0) arity = fields.size();
        if (fields.size() != arity) {
            throw ParseError("ragged row " + std::to_string(line_no) + ": expected " + std::to_string(arity) +
                             " fields, found " + std::to_string(fields.size()));
        }
        std::vector<double> values(fields.size());
        for (std::size_t c = 0; c < fields.size(); ++c) values[c] = detail::parse_cell(fields[c], line_no, c + 1);
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw ParseError("empty file: no data rows");
    return rows;
}

inline Matrix to_matrix(const std::vector<std::vector<double>>& rows)
{
    Matrix M(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) M(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    return M;
}

/// Maps arbitrary numeric labels onto contiguous ids 0..C-1 (sorted by value).
inline std::pair<std::vector<int>, std::vector<double>> encode_labels(const Vector& raw)
{
    std::map<double, int> ids;
    for (Index i = 0; i < raw.size(); ++i) ids.emplace(raw(i), 0);
    std::vector<double> class_values;
    int next = 0;
    for (auto& [value, id] : ids) {
        id = next++;
        class_values.push_back(value);
    }
    std::vector<int> labels(static_cast<std::size_t>(raw.size()));
    for (Index i = 0; i < raw.size(); ++i) labels[static_cast<std::size_t>(i)] = ids.at(raw(i));
    return {std::move(labels), std::move(class_values)};
}

inline LabeledDataset load_csv(const std::string& path, const CsvOptions& opts = {})
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    Matrix all = to_matrix(parse_table(in, opts));

    LabeledDataset ds;
    if (!opts.label_column) {
        ds.data = DataMatrix(std::move(all));
        return ds;
    }
    const Index ncols = all.cols();
    Index lc = *opts.label_column < 0 ? ncols + *opts.label_column : *opts.label_column;
    if (lc < 0 || lc >= ncols) throw ArgumentError("label column " + std::to_string(*opts.label_column) + " out of range");
    if (ncols < 2) throw ArgumentError("label column requested but file has a single column");

    Matrix features(all.rows(), ncols - 1);
    for (Index c = 0, out = 0; c < ncols; ++c) {
        if (c == lc) continue;
        features.col(out++) = all.col(c);
    }
    auto [labels, class_values] = encode_labels(all.col(lc));
    ds.data = DataMatrix(std::move(features));
    ds.labels = std::move(labels);
    ds.class_values = std::move(class_values);
    return ds;
}

inline void write_csv(std::ostream& out, const Matrix& X, const std::vector<std::string>& header = {})
{
    if (!header.empty()) {
        for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
        out << '\n';
    }
    char buf[32];
    for (Index r = 0; r < X.rows(); ++r) {
        for (Index c = 0; c < X.cols(); ++c) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), X(r, c));
            if (c) out << ',';
            out.write(buf, ptr - buf);
        }
        out << '\n';
    }
}

/// Writes X with shortest round-trip formatting, so load_csv recovers it exactly.
inline void save_csv(const std::string& path, const Matrix& X, const std::vector<std::string>& header = {})
{
    std::ofstream out(path);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_csv(out, X, header);
    if (!out) throw Error("write failed for '" + path + "'");
}

struct Centered {
    Matrix data;
    Vector mean;
};

inline Centered center(const Matrix& X)
{
    require_finite(X, "center");
    Vector mean = X.colwise().mean().transpose();
    return {X.rowwise() - mean.transpose(), mean};
}

/// Row partition of a dataset: floor(train_fraction * N) rows go to train, the rest to test.
inline std::pair<std::vector<Index>, std::vector<Index>> split_indices(Index n, const SplitSpec& spec)
{
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw ArgumentError("split: train_fraction must lie in (0, 1)");
    const auto n_train = static_cast<Index>(std::floor(spec.train_fraction * static_cast<double>(n)));
    if (n_train < 1 || n_train > n - 1)
        throw ArgumentError("split: train size " + std::to_string(n_train) + " leaves an empty side (N = " +
                            std::to_string(n) + ")");
    auto perm = permutation(n, spec.seed);
    std::vector<Index> train(perm.begin(), perm.begin() + n_train);
    std::vector<Index> test(perm.begin() + n_train, perm.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {std::move(train), std::move(test)};
}

inline LabeledDataset subset(const LabeledDataset& ds, const std::vector<Index>& rows)
{
    LabeledDataset out;
    out.data = DataMatrix(select_rows(ds.data.values(), rows));
    out.class_values = ds.class_values;
    if (ds.has_labels()) {
        out.labels.reserve(rows.size());
        for (Index r : rows) out.labels.push_back(ds.labels[static_cast<std::size_t>(r)]);
    }
    if (ds.targets.size() > 0) out.targets = select_rows(ds.targets, rows);
    return out;
}

inline std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, const SplitSpec& spec)
{
    auto [train, test] = split_indices(ds.size(), spec);
    return {subset(ds, train), subset(ds, test)};
}

} // namespace drr
