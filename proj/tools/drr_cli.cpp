// Command-line front end: fit, apply and evaluate PCA / PPA / DRR transforms.

#include "drr/all.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace {

using namespace drr;

struct Settings {
    std::string input;
    std::vector<std::string> models;
    std::string output;
    std::string report;
    std::string write_config;

    std::string method = "drr";
    std::vector<std::string> methods{"pca", "ppa", "drr"};
    int k = 0;
    std::vector<Index> ks;
    std::uint64_t seed = 0;
    int seeds = 1;
    unsigned threads = 0;

    int folds = 5;
    int degree = 3;
    Index max_train = 2000;
    Index cv_max_rows = 1000;
    std::vector<double> gamma_grid{1e-6, 1e-4, 1e-2, 1.0, 1e2};
    std::vector<double> sigma_multipliers{0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
    bool share_hyperparameters = false;
    std::string regressor = "krr";
    Index first_residualized = 2;
    Index last_residualized = 0;

    bool header = false;
    std::optional<int> label_column;
    std::string delimiter = ",";

    Index train_size = 3200;
    Index test_size = 3200;
    double lda_ridge = 1e-6;

    std::string targets;
    std::string test_input;
    std::string test_targets;
    std::optional<Index> samples;

    std::string manifold = "both";
    std::optional<double> tilt;
    double noise = 0.15;
    std::string latent_output;
};

// Writes to `path`, or to stdout when it is empty.
class Sink {
public:
    explicit Sink(const std::string& path)
    {
        if (path.empty()) return;
        file_.open(path);
        if (!file_) throw Error("cannot open '" + path + "' for writing");
    }
    std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
    void close()
    {
        if (!file_.is_open()) return;
        file_.close();
        if (!file_) throw Error("write failed");
    }

private:
    std::ofstream file_;
};

CsvOptions csv_options(const Settings& s, std::optional<int> label_column)
{
    CsvOptions o;
    o.has_header = s.header;
    o.label_column = label_column;
    if (s.delimiter == "space" || s.delimiter == "whitespace" || s.delimiter == " ") o.delimiter = ' ';
    else if (s.delimiter == "tab" || s.delimiter == "\\t") o.delimiter = '\t';
    else if (s.delimiter.size() == 1) o.delimiter = s.delimiter[0];
    else throw ArgumentError("delimiter must be a single character, 'space' or 'tab'");
    return o;
}

Matrix read_features(const Settings& s, const std::string& path)
{
    if (path.empty()) throw ArgumentError("missing --input");
    return load_csv(path, csv_options(s, s.label_column)).data.values();
}

FitOptions fit_options(const Settings& s)
{
    FitOptions o;
    o.ppa_degree = s.degree;
    o.drr.krr.folds = s.folds;
    o.drr.krr.seed = s.seed;
    o.drr.krr.max_train = s.max_train;
    o.drr.krr.cv_max_rows = s.cv_max_rows;
    o.drr.krr.gamma_grid = s.gamma_grid;
    o.drr.krr.sigma_multipliers = s.sigma_multipliers;
    o.drr.share_hyperparameters = s.share_hyperparameters;
    o.drr.first_residualized = s.first_residualized;
    o.drr.last_residualized = s.last_residualized;
    o.drr.threads = s.threads;
    if (s.regressor == "krr") o.drr.kind = RegressorKind::krr;
    else if (s.regressor == "linear") o.drr.kind = RegressorKind::linear;
    else throw ArgumentError("regressor must be krr or linear");
    return o;
}

std::vector<Method> parse_methods(const std::vector<std::string>& names)
{
    std::vector<Method> out;
    for (const auto& n : names) out.push_back(parse_method(n));
    if (out.empty()) throw ArgumentError("no methods given");
    return out;
}

std::vector<std::uint64_t> seed_list(const Settings& s)
{
    std::vector<std::uint64_t> out;
    for (int i = 0; i < s.seeds; ++i) out.push_back(s.seed + static_cast<std::uint64_t>(i));
    return out;
}

void validate(const Settings& s)
{
    require(s.folds >= 2, "folds must be >= 2");
    require(s.degree >= 1, "degree must be >= 1");
    require(s.max_train >= 1, "max-train must be >= 1");
    require(s.cv_max_rows >= 2, "cv-max-rows must be >= 2");
    require(s.seeds >= 1, "seeds must be >= 1");
    require(!s.gamma_grid.empty() && !s.sigma_multipliers.empty(), "hyperparameter grids must not be empty");
    for (double g : s.gamma_grid) require(g >= 0.0, "gamma-grid values must be non-negative");
    for (double m : s.sigma_multipliers) require(m > 0.0, "sigma-multipliers must be positive");
    require(s.noise >= 0.0, "noise must be non-negative");
    parse_method(s.method);
    parse_methods(s.methods);
}

std::string format_double(double v)
{
    std::ostringstream o;
    o.precision(17);
    o << v;
    return o.str();
}

// ---------------------------------------------------------------------------

void cmd_fit(const Settings& s)
{
    if (s.models.size() != 1) throw ArgumentError("fit needs exactly one --model output path");
    const Matrix X = read_features(s, s.input);
    const Method method = parse_method(s.method);
    const AnyModel model = fit_model(method, X, fit_options(s));

    Metadata meta{{"source", s.input},
                  {"samples", std::to_string(X.rows())},
                  {"seed", std::to_string(s.seed)},
                  {"folds", std::to_string(s.folds)},
                  {"degree", std::to_string(s.degree)},
                  {"max_train", std::to_string(s.max_train)},
                  {"cv_max_rows", std::to_string(s.cv_max_rows)},
                  {"regressor", s.regressor}};
    save_model(model, s.models.front(), meta);

    Sink sink(s.report);
    auto& out = sink.stream();
    out << "dim,score_variance,residual_variance,sigma,gamma,cv_mse\n";
    out.precision(10);
    if (const auto* d = std::get_if<DrrModel>(&model)) {
        for (const auto& r : residual_report(*d, X))
            out << r.dim << ',' << r.score_variance << ',' << r.residual_variance << ',' << r.sigma << ','
                << r.gamma << ',' << r.cv_mse << '\n';
    } else {
        const Matrix scores = pca_forward(fit_pca(X), X);
        const Matrix coords = forward(model, X);
        for (Index i = 0; i < X.cols(); ++i)
            out << i + 1 << ',' << sample_variance(scores.col(i)) << ',' << sample_variance(coords.col(i))
                << ",nan,nan,nan\n";
    }
    sink.close();
}

enum class Apply { forward, inverse, reconstruct };

void cmd_apply(const Settings& s, Apply what)
{
    if (s.models.size() != 1) throw ArgumentError("exactly one --model is required");
    const AnyModel model = load_model(s.models.front());
    const Matrix X = read_features(s, s.input);
    Matrix out;
    switch (what) {
    case Apply::forward: out = forward(model, X, s.threads); break;
    case Apply::inverse: out = inverse(model, X, s.threads); break;
    case Apply::reconstruct:
        if (s.k == 0) throw ArgumentError("reconstruct needs --k");
        out = truncate_reconstruct(model, X, s.k, s.threads);
        break;
    }
    Sink sink(s.output);
    write_csv(sink.stream(), out);
    sink.close();
}

void cmd_eval_reconstruction(const Settings& s)
{
    if (s.models.empty()) throw ArgumentError("eval-reconstruction needs at least one --model");
    const Matrix X = read_features(s, s.input);
    std::vector<ReconstructionCurve> curves;
    std::optional<ReconstructionCurve> reference;
    for (const auto& path : s.models) {
        const AnyModel model = load_model(path);
        curves.push_back(reconstruction_curve(model, X, {}, s.threads));
        if (method_of(model) == Method::pca && !reference) reference = curves.back();
    }
    if (!reference) std::cerr << "note: no PCA model given; relative columns left empty\n";

    Sink sink(s.output);
    auto& out = sink.stream();
    out << "model,method,k,mae,mse,relative_mae,relative_mse\n";
    for (std::size_t m = 0; m < curves.size(); ++m) {
        auto& c = curves[m];
        if (reference) apply_reference(c, *reference);
        for (std::size_t i = 0; i < c.mae.size(); ++i) {
            out << s.models[m] << ',' << c.method << ',' << i + 1 << ',' << format_double(c.mae[i]) << ','
                << format_double(c.mse[i]) << ',';
            if (reference) out << format_double(c.relative_mae[i]) << ',' << format_double(c.relative_mse[i]);
            else out << ',';
            out << '\n';
        }
    }
    sink.close();
}

void cmd_eval_classify(const Settings& s)
{
    if (s.input.empty()) throw ArgumentError("missing --input");
    const LabeledDataset ds = load_csv(s.input, csv_options(s, s.label_column.value_or(-1)));
    ClassificationProtocol p;
    p.methods = parse_methods(s.methods);
    p.ks = s.ks;
    p.seeds = seed_list(s);
    p.train_size = s.train_size;
    p.test_size = s.test_size;
    p.lda_ridge = s.lda_ridge;
    p.fit = fit_options(s);
    p.threads = s.threads;
    const auto rows = run_classification_protocol(ds, p);
    Sink sink(s.output);
    write_results_csv(sink.stream(), rows);
    sink.close();
}

void cmd_eval_retrieve(const Settings& s)
{
    RetrievalProtocol p;
    p.methods = parse_methods(s.methods);
    p.fit = fit_options(s);
    p.threads = s.threads;
    p.ks = s.ks;

    std::vector<ResultRow> rows;
    auto run = [&](const Matrix& Xtr, const Matrix& Ytr, const Matrix& Xte, const Matrix& Yte, std::uint64_t seed) {
        if (p.ks.empty())
            for (Index k = 1; k <= Xtr.cols(); ++k) p.ks.push_back(k);
        const Index kmax = *std::max_element(p.ks.begin(), p.ks.end());
        // Features up to kmax only read regressors up to kmax.
        if (p.fit.drr.last_residualized == 0 && kmax >= 2) p.fit.drr.last_residualized = kmax;
        auto r = run_retrieval_protocol(Xtr, Ytr, Xte, Yte, p, seed);
        rows.insert(rows.end(), r.begin(), r.end());
    };

    if (!s.input.empty()) {
        if (s.targets.empty() || s.test_input.empty() || s.test_targets.empty())
            throw ArgumentError("--input needs --targets, --test-input and --test-targets");
        const auto opts = csv_options(s, std::nullopt);
        run(load_csv(s.input, opts).data.values(), load_csv(s.targets, opts).data.values(),
            load_csv(s.test_input, opts).data.values(), load_csv(s.test_targets, opts).data.values(), s.seed);
    } else {
        // Built-in task: each seed draws 2n samples, first half trains.
        const Index n = s.samples.value_or(4000);
        for (auto seed : seed_list(s)) {
            RetrievalTaskSpec spec;
            spec.n_samples = 2 * n;
            spec.seed = seed;
            const auto data = generate_retrieval_task(spec);
            run(data.inputs.topRows(n), data.targets.topRows(n), data.inputs.bottomRows(n),
                data.targets.bottomRows(n), seed);
        }
    }
    Sink sink(s.output);
    write_results_csv(sink.stream(), rows);
    sink.close();
}

ManifoldSpec manifold_spec(const Settings& s, bool tilted)
{
    ManifoldSpec spec = tilted ? difficult_manifold(s.seed) : easy_manifold(s.seed);
    if (tilted && s.tilt) spec.tilt = *s.tilt;
    spec.noise_std = s.noise;
    spec.n_samples = s.samples.value_or(10000);
    return spec;
}

void cmd_gen_manifold(const Settings& s)
{
    if (s.manifold != "easy" && s.manifold != "difficult")
        throw ArgumentError("gen-manifold needs --manifold easy or difficult");
    ManifoldSpec spec = manifold_spec(s, s.manifold == "difficult");
    if (s.tilt) spec.tilt = *s.tilt;
    const auto sample = generate_manifold(spec);
    Sink sink(s.output);
    write_csv(sink.stream(), sample.data, {"x", "y", "z"});
    sink.close();
    if (!s.latent_output.empty()) save_csv(s.latent_output, sample.latent, {"u", "v"});
}

void cmd_benchmark_manifolds(const Settings& s)
{
    std::vector<std::pair<std::string, bool>> which;
    if (s.manifold == "easy" || s.manifold == "both") which.push_back({"easy", false});
    if (s.manifold == "difficult" || s.manifold == "both") which.push_back({"difficult", true});
    if (which.empty()) throw ArgumentError("manifold must be easy, difficult or both");

    const auto methods = parse_methods(s.methods);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < s.seeds; ++i) seeds.push_back(s.seed + static_cast<std::uint64_t>(i));
    FitOptions fo = fit_options(s);
    fo.drr.krr.seed = 0;

    Sink sink(s.output);
    auto& out = sink.stream();
    out << "manifold,seed,method,mse_dr,mse_f\n";
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> sums;
    for (const auto& [name, tilted] : which) {
        const auto rows = benchmark_manifold(name, manifold_spec(s, tilted), seeds, methods, fo);
        for (const auto& r : rows) {
            out << r.manifold << ',' << r.seed << ',' << to_string(r.method) << ',' << format_double(r.mse_dr) << ','
                << format_double(r.mse_f) << '\n';
            auto& acc = sums[{r.manifold, to_string(r.method)}];
            acc.first += r.mse_dr;
            acc.second += r.mse_f;
        }
    }
    sink.close();
    for (const auto& [key, acc] : sums)
        std::cerr << key.first << ' ' << key.second << ": mean mse_dr " << acc.first / s.seeds << ", mean mse_f "
                  << acc.second / s.seeds << '\n';
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Invertible nonlinear dimensionality reduction: fit, apply and evaluate PCA, PPA and DRR."};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_config("--config", "", "Flat 'key = value' file; keys are long flag names, flags win");

    Settings s;
    app.add_option("--input,-i", s.input, "Input CSV (features; training inputs for eval-retrieve)");
    app.add_option("--model,-m", s.models, "Model file (output of fit; repeatable for eval-reconstruction)");
    app.add_option("--output,-o", s.output, "Output CSV (stdout when omitted)");
    app.add_option("--report", s.report, "Fit report CSV (stdout when omitted)");
    app.add_option("--write-config", s.write_config, "Write the effective configuration to this file");

    app.add_option("--method", s.method, "pca, ppa or drr")->capture_default_str();
    app.add_option("--methods", s.methods, "Methods compared by evaluation commands")->delimiter(',')->capture_default_str();
    app.add_option("--k", s.k, "Retained coordinates for reconstruct");
    app.add_option("--ks", s.ks, "Comma-separated k values for evaluations (default 1..d)")->delimiter(',');
    app.add_option("--seed", s.seed, "Base random seed")->capture_default_str();
    app.add_option("--seeds", s.seeds, "Number of consecutive seeds for protocols")->capture_default_str();
    app.add_option("--threads", s.threads, "Worker threads (0 = hardware concurrency)")->capture_default_str();

    app.add_option("--folds", s.folds, "Cross-validation folds")->capture_default_str();
    app.add_option("--degree", s.degree, "PPA polynomial degree")->capture_default_str();
    app.add_option("--max-train", s.max_train, "Rows kept per kernel regression")->capture_default_str();
    app.add_option("--cv-max-rows", s.cv_max_rows, "Rows used by the hyperparameter search")->capture_default_str();
    app.add_option("--gamma-grid", s.gamma_grid, "Ridge penalties searched")->delimiter(',')->capture_default_str();
    app.add_option("--sigma-multipliers", s.sigma_multipliers, "Kernel widths searched, as multiples of the median distance")
        ->delimiter(',')
        ->capture_default_str();
    app.add_flag("--share-hyperparameters", s.share_hyperparameters, "Reuse one (sigma, gamma) for every dimension");
    app.add_option("--regressor", s.regressor, "krr or linear")->capture_default_str();
    app.add_option("--first-residualized", s.first_residualized, "First residualized dimension (>= 2)")->capture_default_str();
    app.add_option("--last-residualized", s.last_residualized, "Last residualized dimension (0 = d)")->capture_default_str();

    app.add_flag("--header", s.header, "Input CSVs start with a header line");
    app.add_option("--label-column", s.label_column, "Label column, negative counts from the end");
    app.add_option("--delimiter", s.delimiter, "Field separator: a character, 'space' or 'tab'")->capture_default_str();

    app.add_option("--train-size", s.train_size, "Training rows per seed (eval-classify)")->capture_default_str();
    app.add_option("--test-size", s.test_size, "Test rows per seed, 0 = the rest (eval-classify)")->capture_default_str();
    app.add_option("--lda-ridge", s.lda_ridge, "LDA covariance ridge")->capture_default_str();

    app.add_option("--targets", s.targets, "Training targets CSV (eval-retrieve)");
    app.add_option("--test-input", s.test_input, "Test inputs CSV (eval-retrieve)");
    app.add_option("--test-targets", s.test_targets, "Test targets CSV (eval-retrieve)");
    app.add_option("--samples", s.samples, "Generated sample count (manifolds: 10000; retrieval: 4000 per side)");

    app.add_option("--manifold", s.manifold, "easy, difficult or both")->capture_default_str();
    app.add_option("--tilt", s.tilt, "Secondary-arc rotation rate of the difficult manifold (default 0.2)");
    app.add_option("--noise", s.noise, "Manifold noise standard deviation")->capture_default_str();
    app.add_option("--latent-output", s.latent_output, "gen-manifold: also write latent (u, v) here");

    std::map<std::string, std::function<void()>> commands{
        {"fit", [&] { cmd_fit(s); }},
        {"transform", [&] { cmd_apply(s, Apply::forward); }},
        {"invert", [&] { cmd_apply(s, Apply::inverse); }},
        {"reconstruct", [&] { cmd_apply(s, Apply::reconstruct); }},
        {"eval-reconstruction", [&] { cmd_eval_reconstruction(s); }},
        {"eval-classify", [&] { cmd_eval_classify(s); }},
        {"eval-retrieve", [&] { cmd_eval_retrieve(s); }},
        {"gen-manifold", [&] { cmd_gen_manifold(s); }},
        {"benchmark-manifolds", [&] { cmd_benchmark_manifolds(s); }},
    };
    const std::map<std::string, std::string> help{
        {"fit", "Fit a model on --input and write it to --model, plus a per-dimension report"},
        {"transform", "Forward transform of --input with --model"},
        {"invert", "Inverse transform of --input coordinates with --model"},
        {"reconstruct", "Keep --k coordinates, then invert"},
        {"eval-reconstruction", "Truncation error curves of one or more models on --input"},
        {"eval-classify", "Reconstruct at each k, train LDA, report test error"},
        {"eval-retrieve", "Leading-k features, OLS to targets, report test MAE"},
        {"gen-manifold", "Sample the easy or tilted curved manifold"},
        {"benchmark-manifolds", "MSE_DR / MSE_F of every method over seeds"},
    };
    for (const auto& [name, text] : help) app.add_subcommand(name, text);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        validate(s);
        if (!s.write_config.empty()) {
            std::ofstream cfg(s.write_config);
            if (!cfg) throw Error("cannot open '" + s.write_config + "' for writing");
            cfg << app.config_to_str(true, false);
        }
        commands.at(app.get_subcommands().front()->get_name())();
    } catch (const std::exception& e) {
        std::cerr << "drr_cli: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
