// nrpose command-line tool: solve, classify, experiment, sweep, diagnose, synth.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nrpose/classifier.hpp"
#include "nrpose/data.hpp"
#include "nrpose/harness.hpp"
#include "nrpose/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nrpose;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kNumerical = 4, kInternal = 1 };

struct Options {
    std::string config;
    std::string mode = "l2";
    std::vector<double> lambdas;
    std::vector<double> etas;
    std::vector<double> mus;
    double epsilon = 1e-6;
    int max_iters = 500;
    std::vector<double> occlusions;
    double fill = 0.0;
    std::string residual = "plain";
    bool normalize = false;
    double intensity_scale = 255.0;
    std::uint64_t seed = 1;
    int jobs = 1;
    std::string out;

    std::string manifest;
    int classes = 7;
    int train_per_class = 50;
    std::optional<int> test_per_class;  ///< manifest value, or 20 for synthetic data
    std::string dims = "64x64";
    double noise = 0.03;

    // solve / classify
    std::vector<std::string> images;
    int test_index = 0;

    // diagnose
    std::string occluded_path;
    std::string clean_path;
    int bins = 32;
    std::string diag_class = "0";

    // experiment / sweep
    bool plot = false;
};

Penalty mode_of(const Options& o) { return parse_penalty(o.mode); }

/// Parameter defaults depend on the mode: the l1 variant uses a much smaller
/// coefficient weight.
SolverConfig base_config(const Options& o) {
    SolverConfig c = mode_of(o) == Penalty::L2 ? SolverConfig::nr() : SolverConfig::l1_nr();
    c.epsilon = o.epsilon;
    c.max_iters = o.max_iters;
    return c;
}

double single(const std::vector<double>& v, double fallback, const char* name) {
    if (v.empty())
        return fallback;
    if (v.size() > 1)
        throw ConfigError(std::string("--") + name + " takes a single value for this command");
    return v.front();
}

SolverConfig solver_config(const Options& o) {
    SolverConfig c = base_config(o);
    c.lambda = single(o.lambdas, c.lambda, "lambda");
    c.eta = single(o.etas, c.eta, "eta");
    c.mu = single(o.mus, c.mu, "mu");
    c.validate();
    return c;
}

ClassifierOptions classifier_options(const Options& o) {
    ClassifierOptions c;
    c.variant = parse_residual_variant(o.residual);
    c.normalize_atoms = o.normalize;
    c.intensity_scale = o.intensity_scale;
    c.validate();
    return c;
}

SyntheticSpec synthetic_spec(const Options& o) {
    SyntheticSpec s;
    s.seed = o.seed;
    s.n_classes = o.classes;
    s.train_per_class = o.train_per_class;
    s.test_per_class = o.test_per_class.value_or(20);
    s.dims = parse_dims(o.dims);
    s.noise_sigma = o.noise;
    s.validate();
    return s;
}

ExperimentConfig experiment_config(const Options& o, bool sweep) {
    const SolverConfig base = base_config(o);
    ExperimentConfig e;
    if (!o.manifest.empty())
        e.manifest = fs::path(o.manifest);
    e.synthetic = synthetic_spec(o);
    e.mode = base.mode;
    e.lambdas = o.lambdas.empty() ? std::vector<double>{base.lambda} : o.lambdas;
    e.etas = o.etas.empty() ? std::vector<double>{base.eta} : o.etas;
    e.mus = o.mus.empty() ? std::vector<double>{base.mu} : o.mus;
    e.epsilon = o.epsilon;
    e.max_iters = o.max_iters;
    if (!o.occlusions.empty())
        e.occlusions = o.occlusions;
    else if (sweep)
        e.occlusions = {0.25};
    e.fill_value = o.fill;
    e.residual = parse_residual_variant(o.residual);
    e.normalize_atoms = o.normalize;
    e.intensity_scale = o.intensity_scale;
    e.test_per_class = o.test_per_class;
    e.seed = o.seed;
    e.jobs = o.jobs;
    e.validate();
    return e;
}

ExperimentData load_data(const Options& o) {
    ExperimentConfig e;
    if (!o.manifest.empty())
        e.manifest = fs::path(o.manifest);
    e.synthetic = synthetic_spec(o);
    e.test_per_class = o.test_per_class;
    e.seed = o.seed;
    return load_experiment_data(e);
}

double occlusion_of(const Options& o) {
    const double f = single(o.occlusions, 0.0, "occlusion");
    if (!(f >= 0.0 && f <= 1.0))
        throw ConfigError("occlusion must lie in [0, 1]");
    return f;
}

/// Test inputs for solve/classify: files given with --image, otherwise one
/// image from the data source's test split. Occlusion is applied if asked.
std::vector<LabeledImage> query_images(const Options& o, const ExperimentData& data) {
    std::vector<LabeledImage> out;
    const Dims dims{data.train.rows(), data.train.cols()};
    if (!o.images.empty()) {
        for (const auto& p : o.images) {
            LabeledImage li;
            li.image = load_image(p, dims);
            li.source = p;
            out.push_back(std::move(li));
        }
    } else {
        if (o.test_index < 0 || static_cast<std::size_t>(o.test_index) >= data.test.size())
            throw ConfigError("--test-index " + std::to_string(o.test_index) + " is outside the test set of " +
                              std::to_string(data.test.size()) + " images");
        out.push_back(data.test[static_cast<std::size_t>(o.test_index)]);
    }
    const double f = occlusion_of(o);
    if (f > 0.0) {
        const OcclusionSpec occ{f, o.fill, occlusion_seed(o.seed, f)};
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i].image = apply_block_occlusion(out[i].image, occ,
                                                 o.images.empty() ? static_cast<std::size_t>(o.test_index) : i);
    }
    return out;
}

json residuals_json(const ResidualMap& r) {
    json j = json::object();
    for (const auto& [c, v] : r)
        j[c.to_string()] = v;
    return j;
}

json solve_json(const SolveResult& s) {
    return {{"iterations", s.iterations},
            {"converged", s.converged},
            {"constraint_residual", s.constraint_residual},
            {"objective", s.objective},
            {"jittered", s.jittered}};
}

json config_json(const SolverConfig& c) {
    return {{"mode", to_string(c.mode)}, {"lambda", c.lambda},       {"eta", c.eta},
            {"mu", c.mu},                {"epsilon", c.epsilon},     {"max_iters", c.max_iters}};
}

void emit(const Options& o, const json& j, const std::string& name) {
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    if (!o.out.empty()) {
        fs::create_directories(o.out);
        std::ofstream f(fs::path(o.out) / name);
        f << text;
        if (!f)
            throw DataError("cannot write " + (fs::path(o.out) / name).string());
    }
}

int run_solve(const Options& o) {
    const ExperimentData data = load_data(o);
    const PoseClassifier clf(data.train, solver_config(o), classifier_options(o));
    const auto queries = query_images(o, data);
    const auto result = clf.classify(queries.front().image);
    json j = solve_json(result.solve);
    j["source"] = queries.front().source;
    j["x"] = std::vector<double>(result.solve.x.data(), result.solve.x.data() + result.solve.x.size());
    j["residuals"] = residuals_json(result.residuals);
    j["predicted"] = result.predicted.degrees();
    j["config"] = config_json(solver_config(o));
    emit(o, j, "solve.json");
    return kOk;
}

int run_classify(const Options& o) {
    const ExperimentData data = load_data(o);
    const PoseClassifier clf(data.train, solver_config(o), classifier_options(o));
    const auto queries = query_images(o, data);
    std::vector<ImageMatrix> ys;
    for (const auto& q : queries)
        ys.push_back(q.image);
    const auto results = clf.classify_batch(ys);
    json arr = json::array();
    for (std::size_t i = 0; i < results.size(); ++i) {
        json j = solve_json(results[i].solve);
        j["source"] = queries[i].source;
        j["predicted"] = results[i].predicted.degrees();
        j["residuals"] = residuals_json(results[i].residuals);
        if (o.images.empty())
            j["truth"] = queries[i].label.degrees();
        arr.push_back(std::move(j));
    }
    emit(o, arr, "classify.json");
    return kOk;
}

void print_rows(const ExperimentReport& r) {
    std::printf("%-10s %12s %12s %8s %10s %9s %10s %9s\n", "varied", "lambda", "eta", "mu", "occlusion", "accuracy",
                "mean_iter", "seconds");
    for (const auto& row : r.rows)
        std::printf("%-10s %12.6g %12.6g %8.4g %10.3g %8.2f%% %10.1f %9.2f\n", row.varied.c_str(), row.lambda,
                    row.eta, row.mu, row.occlusion, row.accuracy_pct, row.mean_iterations, row.wall_seconds);
}

int run_report(const Options& o, bool sweep) {
    const ExperimentConfig cfg = experiment_config(o, sweep);
    if (sweep)
        sweep_parameter(cfg);
    const fs::path out = o.out.empty() ? fs::path(sweep ? "nrpose-sweep" : "nrpose-experiment") : fs::path(o.out);
    const ExperimentData data = load_experiment_data(cfg);
    // rewrite the report after every row so an abort leaves partial results
    const RowCallback flush = [&](const ExperimentReport& partial) {
        write_report(partial, out, o.plot);
        const auto& row = partial.rows.back();
        std::fprintf(stderr, "[%s=%g occlusion=%g] accuracy %.2f%% (%d/%d), %.1f iterations, %.1fs\n",
                     row.varied.c_str(),
                     row.varied == "eta" ? row.eta : row.varied == "mu" ? row.mu : row.lambda, row.occlusion,
                     row.accuracy_pct, row.correct, row.total, row.mean_iterations, row.wall_seconds);
    };
    const ExperimentReport report =
        sweep ? sweep_parameters(cfg, data, flush) : run_experiment(cfg, data, flush);
    write_report(report, out, o.plot);
    print_rows(report);
    std::printf("reports written to %s\n", out.string().c_str());
    return kOk;
}

int run_diagnose(const Options& o) {
    ImageMatrix occluded, clean;
    if (!o.occluded_path.empty() || !o.clean_path.empty()) {
        if (o.occluded_path.empty() || o.clean_path.empty())
            throw ConfigError("diagnose needs both --occluded and --clean, or neither");
        // keep native resolution: any size is accepted here
        const Raster ro = read_netpbm(o.occluded_path), rc = read_netpbm(o.clean_path);
        occluded = raster_to_image(ro, {ro.height, ro.width}, o.occluded_path);
        clean = raster_to_image(rc, {rc.height, rc.width}, o.clean_path);
    } else {
        // synthetic: clean prototype against an occluded noisy sample of it
        SyntheticSpec s = synthetic_spec(o);
        s.test_per_class = std::max(s.test_per_class, o.test_index + 1);
        const SyntheticDataset ds = generate_synthetic_dataset(s);
        const PoseLabel c = PoseLabel::parse(o.diag_class);
        clean = ds.prototype(c);
        std::size_t pos = 0;
        int seen = 0;
        for (; pos < ds.test.size(); ++pos)
            if (ds.test[pos].label == c && seen++ == o.test_index)
                break;
        const double f = o.occlusions.empty() ? 0.4 : occlusion_of(o);
        occluded = apply_block_occlusion(ds.test[pos].image, {f, o.fill, occlusion_seed(o.seed, f)}, pos);
    }
    const ErrorDiagnostics d = diagnose_error(occluded, clean, o.bins);
    const std::string csv = diagnostics_csv(d);
    if (!o.out.empty()) {
        fs::create_directories(o.out);
        detail::write_text(fs::path(o.out) / "diagnostics.csv", csv);
    } else {
        std::cout << csv;
    }
    std::printf("error %ldx%ld, numerical rank %ld (full rank %s), largest singular value %.6g\n",
                static_cast<long>(d.error.rows()), static_cast<long>(d.error.cols()),
                static_cast<long>(d.numerical_rank),
                d.numerical_rank == std::min(d.error.rows(), d.error.cols()) ? "yes" : "no",
                d.singular_values.size() ? d.singular_values(0) : 0.0);
    return kOk;
}

int run_synth(const Options& o) {
    if (o.out.empty())
        throw ConfigError("synth needs --out DIR");
    const SyntheticDataset ds = generate_synthetic_dataset(synthetic_spec(o));
    const fs::path manifest = write_synthetic_dataset(ds, o.out);
    std::printf("wrote %zu training and %zu test images; manifest %s; min prototype distance %.4f\n",
                ds.train.size(), ds.test.size(), manifest.string().c_str(), ds.min_prototype_distance);
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nuclear-norm regularized regression for occluded head-pose classification"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Flat key = value file; command-line flags take precedence");
    Options o;

    app.add_option("--mode", o.mode, "Coefficient penalty")->check(CLI::IsMember({"l2", "l1"}));
    app.add_option("--lambda", o.lambdas, "Nuclear-norm weight (comma list for sweeps)")->delimiter(',');
    app.add_option("--eta", o.etas, "Coefficient penalty weight (comma list for sweeps)")->delimiter(',');
    app.add_option("--mu", o.mus, "ADMM penalty (comma list for sweeps)")->delimiter(',');
    app.add_option("--epsilon", o.epsilon, "Stopping tolerance, in [0,1] intensity units");
    app.add_option("--max-iters", o.max_iters, "Iteration cap per solve");
    app.add_option("--occlusion", o.occlusions, "Per-axis block fraction(s)")->delimiter(',');
    app.add_option("--fill", o.fill, "Intensity written into the occluding block");
    app.add_option("--residual", o.residual, "Class residual")->check(CLI::IsMember({"plain", "compensated"}));
    app.add_flag("--normalize", o.normalize, "Scale atoms to unit Frobenius norm");
    app.add_option("--intensity-scale", o.intensity_scale, "Factor applied to [0,1] images before solving");
    app.add_option("--seed", o.seed, "Master seed for synthetic data and occlusion");
    app.add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", o.out, "Output directory");
    app.add_option("--manifest", o.manifest, "Dataset manifest; synthetic data is used when absent");
    app.add_option("--classes", o.classes, "Synthetic class count (1-7)");
    app.add_option("--train-per-class", o.train_per_class, "Synthetic training images per class");
    app.add_option("--test-per-class", o.test_per_class, "Test images per class");
    app.add_option("--dims", o.dims, "Synthetic image size, ROWSxCOLS");
    app.add_option("--noise", o.noise, "Synthetic noise standard deviation");

    auto* solve = app.add_subcommand("solve", "Solve for one image; print coefficients and residuals as JSON");
    auto* classify = app.add_subcommand("classify", "Classify images; print labels and residuals as JSON");
    for (auto* sub : {solve, classify}) {
        sub->add_option("--test-index", o.test_index, "Test-set image used when no --image is given");
    }
    solve->add_option("--image", o.images, "Image file")->expected(1);
    classify->add_option("--image", o.images, "Image file (repeatable)");
    auto* experiment = app.add_subcommand("experiment", "Accuracy at each occlusion level");
    auto* sweep = app.add_subcommand("sweep", "Accuracy over a lambda, eta or mu grid");
    for (auto* sub : {experiment, sweep})
        sub->add_flag("--plot", o.plot, "Also write a gnuplot script");
    auto* diagnose = app.add_subcommand("diagnose", "Histograms of an error image and its singular values");
    diagnose->add_option("--occluded", o.occluded_path, "Occluded image file");
    diagnose->add_option("--clean", o.clean_path, "Clean image file");
    diagnose->add_option("--bins", o.bins, "Histogram bins")->check(CLI::Range(2, 100000));
    diagnose->add_option("--class", o.diag_class, "Synthetic class (yaw) when no files are given");
    diagnose->add_option("--test-index", o.test_index, "Synthetic sample index within the class");
    auto* synth = app.add_subcommand("synth", "Write a synthetic dataset and manifest to --out");
    for (auto* sub : {solve, classify, experiment, sweep, diagnose, synth})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (*solve)
            return run_solve(o);
        if (*classify)
            return run_classify(o);
        if (*experiment)
            return run_report(o, false);
        if (*sweep)
            return run_report(o, true);
        if (*diagnose)
            return run_diagnose(o);
        if (*synth)
            return run_synth(o);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kNumerical;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kData;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kData;
    } catch (const LookupError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kData;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kInternal;
    }
    return kInternal;
}
