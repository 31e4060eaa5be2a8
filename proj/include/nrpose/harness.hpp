#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nrpose/classifier.hpp"
#include "nrpose/data.hpp"
#include "nrpose/mathcore.hpp"
#include "nrpose/solver.hpp"

namespace nrpose {

inline constexpr const char* kAccuracySchema = "nrpose-accuracy/1";
inline constexpr const char* kConfusionSchema = "nrpose-confusion/1";
inline constexpr const char* kTimingSchema = "nrpose-timing/1";
inline constexpr const char* kDiagnosticsSchema = "nrpose-diagnostics/1";

/// Images solved together in one lockstep batch. The partition of the test
/// set into batches is fixed, so results do not depend on the thread count.
inline constexpr std::size_t kBatchSize = 16;

enum class SweepParameter { Lambda, Eta, Mu };

inline std::string to_string(SweepParameter p) {
    switch (p) {
    case SweepParameter::Lambda: return "lambda";
    case SweepParameter::Eta: return "eta";
    case SweepParameter::Mu: return "mu";
    }
    return "?";
}

/// Decimal powers of ten from 10^lo to 10^hi times `mantissa`.
inline std::vector<double> powers_of_ten(int lo, int hi, double mantissa = 1.0) {
    std::vector<double> out;
    for (int e = lo; e <= hi; ++e)
        out.push_back(mantissa * std::pow(10.0, e));
    return out;
}

/// Per-axis occlusion fractions 0.1, 0.2, ..., 0.8.
inline std::vector<double> default_occlusion_grid() {
    std::vector<double> out;
    for (int k = 1; k <= 8; ++k)
        out.push_back(k / 10.0);
    return out;
}

struct ExperimentConfig {
    /// When set, data comes from this manifest; otherwise from `synthetic`.
    std::optional<std::filesystem::path> manifest;
    SyntheticSpec synthetic;

    Penalty mode = Penalty::L2;
    std::vector<double> lambdas{100.0};
    std::vector<double> etas{40000.0};
    std::vector<double> mus{1.0};
    double epsilon = 1e-6;
    int max_iters = 500;

    std::vector<double> occlusions = default_occlusion_grid();
    double fill_value = 0.0;
    ResidualVariant residual = ResidualVariant::Plain;
    bool normalize_atoms = false;
    double intensity_scale = 255.0;

    /// Test images per class. For manifests, overrides test_per_class there.
    std::optional<int> test_per_class;
    std::uint64_t seed = 1;
    int jobs = 1;

    void validate() const {
        if (lambdas.empty() || etas.empty() || mus.empty())
            throw ConfigError("parameter grids must be non-empty");
        if (occlusions.empty())
            throw ConfigError("occlusion list must be non-empty");
        for (double f : occlusions)
            if (!(f >= 0.0 && f <= 1.0))
                throw ConfigError("occlusion fractions must lie in [0, 1]");
        if (!(fill_value >= 0.0 && fill_value <= 1.0))
            throw ConfigError("fill value must lie in [0, 1]");
        if (test_per_class && *test_per_class < 1)
            throw ConfigError("test count per class must be >= 1");
        if (jobs < 1)
            throw ConfigError("jobs must be >= 1");
        for (double l : lambdas)
            solver_config(l, etas.front(), mus.front()).validate();
        for (double e : etas)
            solver_config(lambdas.front(), e, mus.front()).validate();
        for (double m : mus)
            solver_config(lambdas.front(), etas.front(), m).validate();
        classifier_options().validate();
        if (!manifest)
            synthetic.validate();
    }

    SolverConfig solver_config(double lambda, double eta, double mu) const {
        SolverConfig c;
        c.lambda = lambda;
        c.eta = eta;
        c.mu = mu;
        c.epsilon = epsilon;
        c.max_iters = max_iters;
        c.mode = mode;
        return c;
    }

    ClassifierOptions classifier_options() const {
        ClassifierOptions o;
        o.variant = residual;
        o.normalize_atoms = normalize_atoms;
        o.intensity_scale = intensity_scale;
        return o;
    }

    /// Stable key/value echo written next to every report.
    std::vector<std::pair<std::string, std::string>> echo() const {
        auto num = [](double v) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.10g", v);
            return std::string(buf);
        };
        auto list = [&](const std::vector<double>& v) {
            std::string s;
            for (std::size_t i = 0; i < v.size(); ++i)
                s += (i ? "," : "") + num(v[i]);
            return s;
        };
        std::vector<std::pair<std::string, std::string>> kv;
        if (manifest) {
            kv.emplace_back("manifest", manifest->generic_string());
        } else {
            kv.emplace_back("synthetic_classes", std::to_string(synthetic.n_classes));
            kv.emplace_back("synthetic_train_per_class", std::to_string(synthetic.train_per_class));
            kv.emplace_back("synthetic_dims", to_string(synthetic.dims));
            kv.emplace_back("synthetic_noise", num(synthetic.noise_sigma));
        }
        kv.emplace_back("mode", to_string(mode));
        kv.emplace_back("lambda", list(lambdas));
        kv.emplace_back("eta", list(etas));
        kv.emplace_back("mu", list(mus));
        kv.emplace_back("epsilon", num(epsilon));
        kv.emplace_back("max_iters", std::to_string(max_iters));
        kv.emplace_back("occlusion", list(occlusions));
        kv.emplace_back("fill", num(fill_value));
        kv.emplace_back("residual", to_string(residual));
        kv.emplace_back("normalize_atoms", normalize_atoms ? "true" : "false");
        kv.emplace_back("intensity_scale", num(intensity_scale));
        kv.emplace_back("test_per_class", test_per_class ? std::to_string(*test_per_class) : "default");
        kv.emplace_back("seed", std::to_string(seed));
        return kv;
    }
};

struct ReportRow {
    std::string varied;  ///< "occlusion", "lambda", "eta" or "mu"
    double lambda = 0.0;
    double eta = 0.0;
    double mu = 0.0;
    double occlusion = 0.0;
    int correct = 0;
    int total = 0;
    double accuracy_pct = 0.0;
    double mean_iterations = 0.0;
    int converged = 0;
    /// confusion[t][p]: test images of class t predicted as class p, indices
    /// into ExperimentReport::classes.
    std::vector<std::vector<int>> confusion;
    double wall_seconds = 0.0;
};

struct ExperimentReport {
    std::string kind;  ///< "experiment" or "sweep"
    std::vector<PoseLabel> classes;
    std::vector<int> test_counts;  ///< per class, parallel to classes
    std::vector<ReportRow> rows;
    std::vector<std::pair<std::string, std::string>> config;
    std::uint64_t seed = 0;
};

struct ExperimentData {
    TrainingDictionary train;
    std::vector<LabeledImage> test;  ///< ascending class, then index
};

inline ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
    ExperimentData d;
    if (cfg.manifest) {
        DatasetManifest m = read_manifest(*cfg.manifest);
        if (cfg.test_per_class)
            m.test_per_class = *cfg.test_per_class;
        d.train = build_dictionary(m);
        d.test = load_test_set(m);
    } else {
        SyntheticSpec s = cfg.synthetic;
        s.seed = cfg.seed;
        s.test_per_class = cfg.test_per_class.value_or(20);
        SyntheticDataset ds = generate_synthetic_dataset(s);
        d.train = std::move(ds.train);
        d.test = std::move(ds.test);
    }
    std::stable_sort(d.test.begin(), d.test.end(),
                     [](const LabeledImage& a, const LabeledImage& b) { return a.label < b.label; });
    if (d.test.empty())
        throw DataError("test set is empty");
    return d;
}

/// Seed of the occlusion generator for one occlusion level. Each test image
/// then draws from its own stream, keyed by its position in the test set.
inline std::uint64_t occlusion_seed(std::uint64_t master, double fraction) {
    return mix64(master ^ mix64(static_cast<std::uint64_t>(std::llround(fraction * 1e6)) + 0x0CC1ULL));
}

namespace detail {

/// Runs fn(i) for i in [0, n) on `jobs` threads. The first exception thrown
/// by any task is rethrown after all threads finish.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                    next = n;
                }
            }
        });
    }
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

} // namespace detail

/// Outcome for one test image at one grid point.
struct ImageOutcome {
    PoseLabel truth;
    PoseLabel predicted;
    int iterations = 0;
    bool converged = false;
    Vector x;
};

/// Occludes every test image at `fraction`, classifies them all and returns
/// outcomes in test-set order.
inline std::vector<ImageOutcome> evaluate_images(const PoseClassifier& clf, const std::vector<LabeledImage>& test,
                                                 double fraction, double fill, std::uint64_t master_seed, int jobs) {
    const OcclusionSpec occ{fraction, fill, occlusion_seed(master_seed, fraction)};
    std::vector<ImageOutcome> outcomes(test.size());
    const std::size_t batches = (test.size() + kBatchSize - 1) / kBatchSize;
    detail::parallel_for(batches, jobs, [&](std::size_t b) {
        const std::size_t begin = b * kBatchSize, end = std::min(test.size(), begin + kBatchSize);
        std::vector<ImageMatrix> ys;
        for (std::size_t i = begin; i < end; ++i)
            ys.push_back(apply_block_occlusion(test[i].image, occ, i));
        auto results = clf.classify_batch(ys);
        for (std::size_t i = begin; i < end; ++i) {
            auto& r = results[i - begin];
            outcomes[i] = {test[i].label, r.predicted, r.solve.iterations, r.solve.converged, std::move(r.solve.x)};
        }
    });
    return outcomes;
}

inline ReportRow tally(const std::vector<ImageOutcome>& outcomes, const std::vector<PoseLabel>& classes) {
    auto index_of = [&](PoseLabel c) {
        return static_cast<std::size_t>(std::find(classes.begin(), classes.end(), c) - classes.begin());
    };
    ReportRow row;
    row.confusion.assign(classes.size(), std::vector<int>(classes.size(), 0));
    long iterations = 0;
    for (const auto& o : outcomes) {
        row.correct += o.truth == o.predicted;
        row.converged += o.converged;
        iterations += o.iterations;
        row.confusion[index_of(o.truth)][index_of(o.predicted)]++;
    }
    row.total = static_cast<int>(outcomes.size());
    row.accuracy_pct = row.total ? 100.0 * row.correct / row.total : 0.0;
    row.mean_iterations = row.total ? static_cast<double>(iterations) / row.total : 0.0;
    return row;
}

/// Called with the report after each finished row.
using RowCallback = std::function<void(const ExperimentReport&)>;

namespace detail {

struct GridPoint {
    std::string varied;
    double lambda, eta, mu;
};

inline ExperimentReport run_grid(const ExperimentConfig& cfg, const ExperimentData& data,
                                 const std::vector<GridPoint>& points, std::string kind, const RowCallback& on_row) {
    ExperimentReport report;
    report.kind = std::move(kind);
    report.classes = data.train.classes();
    report.config = cfg.echo();
    report.seed = cfg.seed;
    for (PoseLabel c : report.classes)
        report.test_counts.push_back(static_cast<int>(
            std::count_if(data.test.begin(), data.test.end(), [&](const LabeledImage& t) { return t.label == c; })));
    for (const auto& t : data.test)
        if (std::find(report.classes.begin(), report.classes.end(), t.label) == report.classes.end())
            throw DataError("test image " + t.source + " has class " + t.label.to_string() +
                            " which the dictionary lacks");

    const ClassifierOptions opts = cfg.classifier_options();
    const auto sys = std::make_shared<const LinearSystem>(assemble_system(data.train, opts));
    for (const GridPoint& p : points) {
        const PoseClassifier clf(sys, cfg.solver_config(p.lambda, p.eta, p.mu), opts);
        for (double fraction : cfg.occlusions) {
            const auto start = std::chrono::steady_clock::now();
            const auto outcomes = evaluate_images(clf, data.test, fraction, cfg.fill_value, cfg.seed, cfg.jobs);
            ReportRow row = tally(outcomes, report.classes);
            row.varied = p.varied;
            row.lambda = p.lambda;
            row.eta = p.eta;
            row.mu = p.mu;
            row.occlusion = fraction;
            row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            report.rows.push_back(std::move(row));
            if (on_row)
                on_row(report);
        }
    }
    return report;
}

} // namespace detail

/// Accuracy for every occlusion level at one fixed (lambda, eta, mu).
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                                       const RowCallback& on_row = {}) {
    cfg.validate();
    if (cfg.lambdas.size() != 1 || cfg.etas.size() != 1 || cfg.mus.size() != 1)
        throw ConfigError("run_experiment needs single lambda, eta and mu values; use a sweep for grids");
    return detail::run_grid(cfg, data, {{"occlusion", cfg.lambdas[0], cfg.etas[0], cfg.mus[0]}}, "experiment",
                            on_row);
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const RowCallback& on_row = {}) {
    cfg.validate();
    return run_experiment(cfg, load_experiment_data(cfg), on_row);
}

/// Which parameter a sweep varies: the one with more than one value. With
/// all three single-valued the sweep degenerates to lambda with one row.
inline SweepParameter sweep_parameter(const ExperimentConfig& cfg) {
    const int grids = (cfg.lambdas.size() > 1) + (cfg.etas.size() > 1) + (cfg.mus.size() > 1);
    if (grids > 1)
        throw ConfigError("a sweep varies exactly one of lambda, eta, mu; the others must be single values");
    if (cfg.etas.size() > 1)
        return SweepParameter::Eta;
    if (cfg.mus.size() > 1)
        return SweepParameter::Mu;
    return SweepParameter::Lambda;
}

/// One-at-a-time sweep: one row per grid value (per occlusion level), all
/// other parameters held fixed.
inline ExperimentReport sweep_parameters(const ExperimentConfig& cfg, const ExperimentData& data,
                                         const RowCallback& on_row = {}) {
    cfg.validate();
    const SweepParameter which = sweep_parameter(cfg);
    std::vector<detail::GridPoint> points;
    const std::string name = to_string(which);
    switch (which) {
    case SweepParameter::Lambda:
        for (double v : cfg.lambdas)
            points.push_back({name, v, cfg.etas[0], cfg.mus[0]});
        break;
    case SweepParameter::Eta:
        for (double v : cfg.etas)
            points.push_back({name, cfg.lambdas[0], v, cfg.mus[0]});
        break;
    case SweepParameter::Mu:
        for (double v : cfg.mus)
            points.push_back({name, cfg.lambdas[0], cfg.etas[0], v});
        break;
    }
    return detail::run_grid(cfg, data, points, "sweep", on_row);
}

inline ExperimentReport sweep_parameters(const ExperimentConfig& cfg, const RowCallback& on_row = {}) {
    cfg.validate();
    sweep_parameter(cfg);
    return sweep_parameters(cfg, load_experiment_data(cfg), on_row);
}

// ---------------------------------------------------------------------------
// CSV output

namespace detail {

inline std::string fmt(const char* spec, double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << text;
    if (!out)
        throw DataError("write failed: " + path.string());
}

} // namespace detail

/// accuracy.csv: one line per row. Deterministic for a fixed config.
inline std::string accuracy_csv(const ExperimentReport& r) {
    using detail::fmt;
    std::string s = std::string("# schema=") + kAccuracySchema + " kind=" + r.kind + " seed=" + std::to_string(r.seed) +
                    "\nvaried,lambda,eta,mu,occlusion,correct,total,accuracy_pct,mean_iterations,converged\n";
    for (const auto& row : r.rows) {
        s += row.varied + "," + fmt("%.10g", row.lambda) + "," + fmt("%.10g", row.eta) + "," + fmt("%.10g", row.mu) +
             "," + fmt("%.10g", row.occlusion) + "," + std::to_string(row.correct) + "," + std::to_string(row.total) +
             "," + fmt("%.4f", row.accuracy_pct) + "," + fmt("%.4f", row.mean_iterations) + "," +
             std::to_string(row.converged) + "\n";
    }
    return s;
}

/// confusion.csv: one line per (row, true class) with predicted counts.
inline std::string confusion_csv(const ExperimentReport& r) {
    using detail::fmt;
    std::string s = std::string("# schema=") + kConfusionSchema + " kind=" + r.kind + "\nvaried,lambda,eta,mu,occlusion,true_yaw";
    for (PoseLabel c : r.classes)
        s += ",pred_" + c.to_string();
    s += "\n";
    for (const auto& row : r.rows) {
        for (std::size_t t = 0; t < r.classes.size(); ++t) {
            s += row.varied + "," + fmt("%.10g", row.lambda) + "," + fmt("%.10g", row.eta) + "," +
                 fmt("%.10g", row.mu) + "," + fmt("%.10g", row.occlusion) + "," + r.classes[t].to_string();
            for (int n : row.confusion[t])
                s += "," + std::to_string(n);
            s += "\n";
        }
    }
    return s;
}

/// timing.csv: wall-clock seconds per row. Kept apart so the other files are
/// reproducible byte for byte.
inline std::string timing_csv(const ExperimentReport& r) {
    using detail::fmt;
    std::string s = std::string("# schema=") + kTimingSchema + "\nvaried,lambda,eta,mu,occlusion,wall_seconds\n";
    for (const auto& row : r.rows)
        s += row.varied + "," + fmt("%.10g", row.lambda) + "," + fmt("%.10g", row.eta) + "," + fmt("%.10g", row.mu) +
             "," + fmt("%.10g", row.occlusion) + "," + fmt("%.3f", row.wall_seconds) + "\n";
    return s;
}

inline std::string config_echo(const ExperimentReport& r) {
    std::string s;
    for (const auto& [k, v] : r.config)
        s += k + " = " + v + "\n";
    return s;
}

/// gnuplot script plotting accuracy against the varied quantity.
inline std::string gnuplot_script(const ExperimentReport& r) {
    const bool occlusion = r.kind == "experiment";
    const std::string xcol = occlusion ? "5" : (r.rows.empty() ? "2" : r.rows.front().varied == "eta" ? "3"
                                                                     : r.rows.front().varied == "mu"  ? "4"
                                                                                                      : "2");
    std::string s = "set datafile separator ','\nset key off\nset ylabel 'accuracy (%)'\nset yrange [0:100]\n";
    if (occlusion)
        s += "set xlabel 'occlusion (fraction of each axis)'\n";
    else
        s += "set logscale x\nset xlabel '" + (r.rows.empty() ? std::string("value") : r.rows.front().varied) + "'\n";
    s += "plot 'accuracy.csv' every ::2 using " + xcol + ":8 with linespoints\n";
    return s;
}

struct ReportFiles {
    std::filesystem::path accuracy, confusion, timing, config, plot;
};

/// Writes accuracy.csv, confusion.csv, timing.csv, config.txt and, if asked,
/// plot.gp into `dir`.
inline ReportFiles write_report(const ExperimentReport& r, const std::filesystem::path& dir, bool with_plot = false) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw DataError("cannot create " + dir.string() + ": " + ec.message());
    ReportFiles f{dir / "accuracy.csv", dir / "confusion.csv", dir / "timing.csv", dir / "config.txt", {}};
    detail::write_text(f.accuracy, accuracy_csv(r));
    detail::write_text(f.confusion, confusion_csv(r));
    detail::write_text(f.timing, timing_csv(r));
    detail::write_text(f.config, config_echo(r));
    if (with_plot) {
        f.plot = dir / "plot.gp";
        detail::write_text(f.plot, gnuplot_script(r));
    }
    return f;
}

// ---------------------------------------------------------------------------
// Error diagnostics

struct Histogram {
    std::vector<double> edges;         ///< bins + 1 ascending edges
    std::vector<std::size_t> counts;   ///< bins

    /// Index of the half-open bin [edge_k, edge_k+1) containing v; the last
    /// bin is closed on the right.
    std::size_t bin_of(double v) const {
        const std::size_t bins = counts.size();
        if (v <= edges.front())
            return 0;
        if (v >= edges.back())
            return bins - 1;
        const auto it = std::upper_bound(edges.begin(), edges.end(), v);
        return std::min<std::size_t>(static_cast<std::size_t>(it - edges.begin()) - 1, bins - 1);
    }
};

inline Histogram make_histogram(const std::vector<double>& values, double lo, double hi, int bins) {
    Histogram h;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    for (int k = 0; k <= bins; ++k)
        h.edges.push_back(lo + (hi - lo) * k / bins);
    for (double v : values)
        h.counts[h.bin_of(v)]++;
    return h;
}

struct ErrorDiagnostics {
    ImageMatrix error;         ///< occluded - clean
    Vector singular_values;    ///< of `error`, non-increasing
    Histogram pixels;          ///< symmetric range [-a, a], a = max |error|
    Histogram singular;        ///< range [0, s_max]
    Index numerical_rank = 0;  ///< singular values above 1e-10 * s_max
};

inline constexpr double kRankTolerance = 1e-10;

/// Distribution of the error image and of its singular values.
inline ErrorDiagnostics diagnose_error(const ImageMatrix& occluded, const ImageMatrix& clean, int bins) {
    if (occluded.rows() != clean.rows() || occluded.cols() != clean.cols())
        throw ShapeError("diagnose_error: images are " + std::to_string(occluded.rows()) + "x" +
                         std::to_string(occluded.cols()) + " and " + std::to_string(clean.rows()) + "x" +
                         std::to_string(clean.cols()));
    if (bins < 2)
        throw ConfigError("diagnose_error needs at least 2 bins");
    check_image(occluded, "occluded image");
    check_image(clean, "clean image");

    ErrorDiagnostics d;
    d.error = occluded - clean;
    d.singular_values = singular_values(d.error);

    const double a = d.error.cwiseAbs().maxCoeff();
    const double half = a > 0.0 ? a : 1.0;
    std::vector<double> pixels(d.error.data(), d.error.data() + d.error.size());
    d.pixels = make_histogram(pixels, -half, half, bins);

    const double s_max = d.singular_values.size() ? d.singular_values(0) : 0.0;
    std::vector<double> sv(d.singular_values.data(), d.singular_values.data() + d.singular_values.size());
    d.singular = make_histogram(sv, 0.0, s_max > 0.0 ? s_max : 1.0, bins);
    d.numerical_rank = s_max > 0.0 ? static_cast<Index>((d.singular_values.array() > kRankTolerance * s_max).count()) : 0;
    return d;
}

/// histogram,bin,lo,hi,count for both histograms.
inline std::string diagnostics_csv(const ErrorDiagnostics& d) {
    using detail::fmt;
    std::string s = std::string("# schema=") + kDiagnosticsSchema + " rows=" + std::to_string(d.error.rows()) +
                    " cols=" + std::to_string(d.error.cols()) + " numerical_rank=" + std::to_string(d.numerical_rank) +
                    "\nhistogram,bin,lo,hi,count\n";
    auto emit = [&](const char* name, const Histogram& h) {
        for (std::size_t k = 0; k < h.counts.size(); ++k)
            s += std::string(name) + "," + std::to_string(k) + "," + fmt("%.10g", h.edges[k]) + "," +
                 fmt("%.10g", h.edges[k + 1]) + "," + std::to_string(h.counts[k]) + "\n";
    };
    emit("pixel", d.pixels);
    emit("singular", d.singular);
    return s;
}

} // namespace nrpose
