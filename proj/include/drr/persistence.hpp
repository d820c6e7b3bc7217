#pragma once

// Model file layout (version 1):
//
//   DRRMODEL\n
//   version 1\n
//   method <pca|ppa|drr>\n
//   dim <d>\n
//   <structural lines: degree, regressor kinds>\n
//   meta <key> <value>\n              (zero or more, free text)
//   array <name> <rows> <cols>\n      (one per stored array, payload order)
//   payload_bytes <n>\n
//   checksum crc32 <8 hex digits>\n
//   end\n
//   <payload: every array in column-major order, IEEE-754 binary64, little-endian>
//
// The checksum covers the payload bytes only.

#include "drr/model.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace drr {

class FormatError : public Error {
public:
    using Error::Error;
};

class ChecksumError : public FormatError {
public:
    using FormatError::FormatError;
};

class VersionError : public FormatError {
public:
    using FormatError::FormatError;
};

inline constexpr int kModelFormatVersion = 1;

using Metadata = std::map<std::string, std::string>;

namespace detail {

struct NamedArray {
    std::string name;
    Matrix values;
};

class ArrayWriter {
public:
    void add(std::string name, const Matrix& m) { arrays_.push_back({std::move(name), m}); }
    void add_scalars(std::string name, std::initializer_list<double> xs)
    {
        Matrix m(static_cast<Index>(xs.size()), 1);
        Index i = 0;
        for (double x : xs) m(i++, 0) = x;
        add(std::move(name), m);
    }
    const std::vector<NamedArray>& arrays() const { return arrays_; }

private:
    std::vector<NamedArray> arrays_;
};

class ArrayReader {
public:
    explicit ArrayReader(std::map<std::string, Matrix> arrays) : arrays_(std::move(arrays)) {}
    const Matrix& get(const std::string& name) const
    {
        auto it = arrays_.find(name);
        if (it == arrays_.end()) throw FormatError("model file: missing array '" + name + "'");
        return it->second;
    }
    Vector vec(const std::string& name) const
    {
        const Matrix& m = get(name);
        if (m.cols() != 1) throw FormatError("model file: array '" + name + "' is not a column");
        return m.col(0);
    }

private:
    std::map<std::string, Matrix> arrays_;
};

inline void put_le64(std::string& out, double v)
{
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

inline double get_le64(const unsigned char* p)
{
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    return std::bit_cast<double>(bits);
}

inline std::uint32_t crc32_of(const std::string& bytes)
{
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

inline void write_pca(ArrayWriter& w, const PcaModel& m)
{
    w.add("pca.mean", m.mean);
    w.add("pca.basis", m.basis);
    w.add("pca.eigenvalues", m.eigenvalues);
}

inline PcaModel read_pca(const ArrayReader& r)
{
    PcaModel m;
    m.mean = r.vec("pca.mean");
    m.basis = r.get("pca.basis");
    m.eigenvalues = r.vec("pca.eigenvalues");
    if (m.basis.rows() != m.dim() || m.basis.cols() != m.dim() || m.eigenvalues.size() != m.dim())
        throw FormatError("model file: inconsistent PCA array shapes");
    return m;
}

} // namespace detail

inline void save_model(const AnyModel& model, std::ostream& out, const Metadata& meta = {})
{
    detail::ArrayWriter w;
    std::ostringstream structure;
    structure << "dim " << model_dim(model) << '\n';

    if (const auto* pca = std::get_if<PcaModel>(&model)) {
        detail::write_pca(w, *pca);
    } else if (const auto* ppa = std::get_if<PpaModel>(&model)) {
        structure << "degree " << ppa->degree << '\n';
        structure << "stages " << ppa->stages.size() << '\n';
        w.add("ppa.mean", ppa->mean);
        for (std::size_t i = 0; i < ppa->stages.size(); ++i) {
            const auto& s = ppa->stages[i];
            const std::string p = "stage" + std::to_string(i + 1) + ".";
            w.add(p + "leading", s.leading);
            w.add(p + "complement", s.complement);
            w.add(p + "coeffs", s.coeffs);
            w.add_scalars(p + "params", {s.scale, static_cast<double>(s.effective_degree)});
        }
    } else {
        const auto& drr = std::get<DrrModel>(model);
        detail::write_pca(w, drr.pca);
        for (std::size_t j = 0; j < drr.regressors.size(); ++j) {
            const std::string p = "reg" + std::to_string(j + 2) + ".";
            structure << "regressor " << j + 2 << ' ';
            std::visit(
                [&](const auto& reg) {
                    using T = std::decay_t<decltype(reg)>;
                    if constexpr (std::is_same_v<T, ZeroRegressor>) {
                        structure << "zero\n";
                    } else if constexpr (std::is_same_v<T, LinearRegressor>) {
                        structure << "linear\n";
                        w.add(p + "coef", reg.coef);
                    } else {
                        structure << "krr\n";
                        w.add(p + "inputs", reg.train_inputs);
                        w.add(p + "beta", reg.beta);
                        w.add_scalars(p + "params", {reg.sigma, reg.gamma, reg.jitter_applied ? 1.0 : 0.0});
                    }
                },
                drr.regressors[j]);
            w.add_scalars(p + "cv_mse", {drr.cv_mse[j]});
        }
    }

    std::string payload;
    std::ostringstream arrays;
    for (const auto& a : w.arrays()) {
        arrays << "array " << a.name << ' ' << a.values.rows() << ' ' << a.values.cols() << '\n';
        for (Index c = 0; c < a.values.cols(); ++c)
            for (Index r = 0; r < a.values.rows(); ++r) detail::put_le64(payload, a.values(r, c));
    }

    out << "DRRMODEL\n"
        << "version " << kModelFormatVersion << '\n'
        << "method " << to_string(method_of(model)) << '\n'
        << structure.str();
    for (const auto& [key, value] : meta) {
        std::string flat = value;
        std::replace(flat.begin(), flat.end(), '\n', ' ');
        out << "meta " << key << ' ' << flat << '\n';
    }
    out << arrays.str() << "payload_bytes " << payload.size() << '\n'
        << "checksum crc32 " << std::hex << std::setw(8) << std::setfill('0') << detail::crc32_of(payload)
        << std::dec << '\n'
        << "end\n";
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

inline void save_model(const AnyModel& model, const std::string& path, const Metadata& meta = {})
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    save_model(model, out, meta);
    if (!out) throw Error("write failed for '" + path + "'");
}

struct LoadedModel {
    AnyModel model;
    Metadata meta;
};

inline LoadedModel load_model_with_meta(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line) || line != "DRRMODEL") throw FormatError("not a model file (bad magic line)");

    std::map<std::string, std::string> fields;
    std::vector<std::pair<std::string, std::pair<Index, Index>>> layout;
    std::map<Index, std::string> regressor_kinds;
    Metadata meta;
    bool ended = false;
    while (std::getline(in, line)) {
        if (line == "end") {
            ended = true;
            break;
        }
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "array") {
            std::string name;
            Index rows = -1, cols = -1;
            if (!(ls >> name >> rows >> cols) || rows < 0 || cols < 0)
                throw FormatError("model file: malformed array line '" + line + "'");
            layout.push_back({name, {rows, cols}});
        } else if (key == "regressor") {
            Index dim = 0;
            std::string kind;
            if (!(ls >> dim >> kind)) throw FormatError("model file: malformed regressor line '" + line + "'");
            regressor_kinds[dim] = kind;
        } else if (key == "meta") {
            std::string mkey, rest;
            ls >> mkey;
            std::getline(ls >> std::ws, rest);
            meta[mkey] = rest;
        } else {
            std::string rest;
            std::getline(ls >> std::ws, rest);
            fields[key] = rest;
        }
        if (key == "version") {
            int version = 0;
            try {
                version = std::stoi(fields[key]);
            } catch (const std::exception&) {
                throw FormatError("model file: unreadable version '" + fields[key] + "'");
            }
            if (version > kModelFormatVersion || version < 1) {
                throw VersionError("model file format version " + std::to_string(version) +
                                   " is not supported (this build reads version " +
                                   std::to_string(kModelFormatVersion) + ")");
            }
        }
    }
    if (!ended) throw ChecksumError("model file truncated inside the header; checksum cannot be verified");
    for (const char* required : {"version", "method", "dim", "payload_bytes", "checksum"})
        if (!fields.count(required)) throw FormatError(std::string("model file: missing header field '") + required + "'");

    const auto expected_bytes = std::stoull(fields["payload_bytes"]);
    std::string payload(expected_bytes, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(expected_bytes));
    if (static_cast<std::size_t>(in.gcount()) != expected_bytes) {
        throw ChecksumError("model file truncated: payload has " + std::to_string(in.gcount()) + " of " +
                            std::to_string(expected_bytes) + " bytes; checksum mismatch");
    }
    std::istringstream cs(fields["checksum"]);
    std::string algo, hex;
    cs >> algo >> hex;
    std::ostringstream actual;
    actual << std::hex << std::setw(8) << std::setfill('0') << detail::crc32_of(payload);
    if (algo != "crc32" || hex != actual.str())
        throw ChecksumError("model file checksum mismatch (stored " + hex + ", computed " + actual.str() + ")");

    std::map<std::string, Matrix> arrays;
    std::size_t offset = 0;
    for (const auto& [name, shape] : layout) {
        const auto count = static_cast<std::size_t>(shape.first * shape.second);
        if (offset + count * 8 > payload.size()) throw FormatError("model file: array layout exceeds payload");
        Matrix m(shape.first, shape.second);
        const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data()) + offset;
        std::size_t i = 0;
        for (Index c = 0; c < shape.second; ++c)
            for (Index r = 0; r < shape.first; ++r, ++i) m(r, c) = detail::get_le64(bytes + 8 * i);
        offset += count * 8;
        arrays.emplace(name, std::move(m));
    }
    detail::ArrayReader reader(std::move(arrays));

    const Method method = parse_method(fields["method"]);
    const Index d = std::stol(fields["dim"]);
    LoadedModel out{PcaModel{}, std::move(meta)};
    if (method == Method::pca) {
        out.model = detail::read_pca(reader);
    } else if (method == Method::ppa) {
        PpaModel m;
        m.degree = std::stoi(fields.at("degree"));
        m.mean = reader.vec("ppa.mean");
        const auto nstages = std::stoul(fields.at("stages"));
        for (std::size_t i = 0; i < nstages; ++i) {
            const std::string p = "stage" + std::to_string(i + 1) + ".";
            PpaStage s;
            s.leading = reader.vec(p + "leading");
            s.complement = reader.get(p + "complement");
            s.coeffs = reader.get(p + "coeffs");
            const Vector params = reader.vec(p + "params");
            s.scale = params(0);
            s.effective_degree = static_cast<int>(params(1));
            m.stages.push_back(std::move(s));
        }
        out.model = std::move(m);
    } else {
        DrrModel m;
        m.pca = detail::read_pca(reader);
        for (Index dim = 2; dim <= d; ++dim) {
            const std::string p = "reg" + std::to_string(dim) + ".";
            auto it = regressor_kinds.find(dim);
            if (it == regressor_kinds.end()) throw FormatError("model file: no regressor entry for dimension " + std::to_string(dim));
            if (it->second == "zero") {
                m.regressors.emplace_back(ZeroRegressor{});
            } else if (it->second == "linear") {
                m.regressors.emplace_back(LinearRegressor{reader.vec(p + "coef")});
            } else if (it->second == "krr") {
                KrrModel k;
                k.train_inputs = reader.get(p + "inputs");
                k.beta = reader.get(p + "beta");
                const Vector params = reader.vec(p + "params");
                k.sigma = params(0);
                k.gamma = params(1);
                k.jitter_applied = params(2) != 0.0;
                m.regressors.emplace_back(std::move(k));
            } else {
                throw FormatError("model file: unknown regressor kind '" + it->second + "'");
            }
            m.cv_mse.push_back(reader.vec(p + "cv_mse")(0));
        }
        out.model = std::move(m);
    }
    if (model_dim(out.model) != d) throw FormatError("model file: dim field disagrees with stored arrays");
    return out;
}

inline LoadedModel load_model_with_meta(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    return load_model_with_meta(in);
}

inline AnyModel load_model(const std::string& path)
{
    return load_model_with_meta(path).model;
}

} // namespace drr
