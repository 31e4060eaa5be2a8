#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>

#include "nrpose/dictionary.hpp"
#include "nrpose/solver.hpp"

namespace nrpose {

/// How per-class residuals are measured.
///  - plain:       ||Y - F_c(x)||_F
///  - compensated: ||(Y + E) - F_c(x)||_F. The solver's E estimates F(x) - Y,
///    so Y + E is the test image with the estimated occlusion removed.
enum class ResidualVariant { Plain, Compensated };

inline std::string to_string(ResidualVariant v) { return v == ResidualVariant::Plain ? "plain" : "compensated"; }

inline ResidualVariant parse_residual_variant(const std::string& s) {
    if (s == "plain")
        return ResidualVariant::Plain;
    if (s == "compensated" || s == "error_compensated")
        return ResidualVariant::Compensated;
    throw ConfigError("unknown residual variant '" + s + "' (expected plain or compensated)");
}

using ResidualMap = std::map<PoseLabel, double>;

struct ClassificationResult {
    PoseLabel predicted;
    ResidualMap residuals;
    SolveResult solve;
};

/// F_c(x) = sum over atoms j of class c of x_j A_j.
inline ImageMatrix reconstruct_class(const TrainingDictionary& dict, const Vector& x, PoseLabel c) {
    if (static_cast<std::size_t>(x.size()) != dict.size())
        throw ShapeError("coefficient vector has length " + std::to_string(x.size()) + ", dictionary has " +
                         std::to_string(dict.size()) + " atoms");
    if (!dict.contains(c))
        throw LookupError("pose class " + c.to_string() + " is not in the dictionary");
    ImageMatrix out = ImageMatrix::Zero(dict.rows(), dict.cols());
    for (std::size_t j = 0; j < dict.size(); ++j)
        if (dict.labels[j] == c)
            out += x(static_cast<Index>(j)) * dict.atoms[j];
    return out;
}

inline ImageMatrix reconstruct_class(const LinearSystem& sys, const Vector& x, PoseLabel c) {
    Vector masked = Vector::Zero(x.size());
    bool found = false;
    for (Index j = 0; j < x.size(); ++j) {
        if (sys.class_of_column[static_cast<std::size_t>(j)] == c) {
            masked(j) = x(j);
            found = true;
        }
    }
    if (!found)
        throw LookupError("pose class " + c.to_string() + " is not in the dictionary");
    return sys.combine(masked);
}

/// ||Y - F_c(x)||_F for every class c in the dictionary.
inline ResidualMap class_residuals(const TrainingDictionary& dict, const Vector& x, const ImageMatrix& Y) {
    if (Y.rows() != dict.rows() || Y.cols() != dict.cols())
        throw ShapeError("test image and dictionary atoms differ in shape");
    ResidualMap out;
    for (PoseLabel c : dict.classes())
        out[c] = (Y - reconstruct_class(dict, x, c)).norm();
    return out;
}

/// Minimum-residual label. Exact ties go to the smaller |yaw|, then to the
/// negative angle.
inline PoseLabel argmin_residual(const ResidualMap& residuals) {
    if (residuals.empty())
        throw LookupError("no class residuals to choose from");
    auto best = residuals.begin();
    for (auto it = residuals.begin(); it != residuals.end(); ++it) {
        if (it->second < best->second ||
            (it->second == best->second && it->first.tie_rank() < best->first.tie_rank()))
            best = it;
    }
    return best->first;
}

struct ClassifierOptions {
    ResidualVariant variant = ResidualVariant::Plain;
    /// Scale every atom to unit Frobenius norm before assembling H.
    bool normalize_atoms = false;
    /// Images are stored in [0, 1]; the solver sees them multiplied by this
    /// factor. The default parameter values are calibrated for 8-bit levels.
    double intensity_scale = 255.0;

    void validate() const {
        if (!(intensity_scale > 0.0) || !std::isfinite(intensity_scale))
            throw ConfigError("intensity scale must be finite and > 0");
    }
};

inline TrainingDictionary scaled(TrainingDictionary dict, double factor) {
    if (factor != 1.0)
        for (auto& a : dict.atoms)
            a *= factor;
    return dict;
}

inline TrainingDictionary normalized(TrainingDictionary dict) {
    for (auto& a : dict.atoms) {
        const double n = a.norm();
        if (n > 0.0)
            a /= n;
    }
    return dict;
}

/// Builds the solver-side system: optional unit normalization, then the
/// intensity scale.
inline LinearSystem assemble_system(const TrainingDictionary& dict, const ClassifierOptions& opts) {
    opts.validate();
    return assemble_system(scaled(opts.normalize_atoms ? normalized(dict) : dict, opts.intensity_scale));
}

/// Minimum-residual pose classifier over a fixed dictionary. Construction
/// assembles H and factors the normal equations once; classify() is const
/// and safe to call from several threads.
///
/// Solve diagnostics (E, objective, residual) are in solver units, i.e. the
/// input intensities times options().intensity_scale. Class residuals and the
/// stopping tolerance cfg.epsilon are in input units.
class PoseClassifier {
public:
    PoseClassifier(const TrainingDictionary& dict, const SolverConfig& cfg, ClassifierOptions opts = {})
        : opts_(opts),
          solver_(std::make_shared<const LinearSystem>(assemble_system(dict, opts)), solver_config(cfg, opts)),
          classes_(dict.classes()) {}

    /// Shares a system built by assemble_system(dict, opts) with the same opts.
    PoseClassifier(std::shared_ptr<const LinearSystem> sys, const SolverConfig& cfg, ClassifierOptions opts = {})
        : opts_(opts), solver_(std::move(sys), solver_config(cfg, opts)) {
        classes_ = solver_.system().class_of_column;
        std::sort(classes_.begin(), classes_.end());
        classes_.erase(std::unique(classes_.begin(), classes_.end()), classes_.end());
    }

    const AdmmSolver& solver() const noexcept { return solver_; }
    const std::vector<PoseLabel>& classes() const noexcept { return classes_; }
    const ClassifierOptions& options() const noexcept { return opts_; }

    /// Residuals for input-unit Y given solver-unit coefficients and error.
    ResidualMap residuals(const Vector& x, const ImageMatrix& E, const ImageMatrix& Y) const {
        const LinearSystem& sys = solver_.system();
        const double s = opts_.intensity_scale;
        const ImageMatrix target = opts_.variant == ResidualVariant::Plain ? ImageMatrix(s * Y) : ImageMatrix(s * Y + E);
        ResidualMap out;
        for (PoseLabel c : classes_)
            out[c] = (target - reconstruct_class(sys, x, c)).norm() / s;
        return out;
    }

    /// Solves for the coefficients, then picks the class with the smallest
    /// residual. A solve that hit max_iters still yields a label from the
    /// last iterate; check result.solve.converged.
    ClassificationResult classify(const ImageMatrix& Y) const {
        return std::move(classify_batch(std::span(&Y, 1)).front());
    }

    /// Classifies several images with one lockstep solve.
    std::vector<ClassificationResult> classify_batch(std::span<const ImageMatrix> Ys) const {
        std::vector<ImageMatrix> scaled_inputs;
        scaled_inputs.reserve(Ys.size());
        for (const ImageMatrix& Y : Ys)
            scaled_inputs.push_back(opts_.intensity_scale * Y);
        std::vector<SolveResult> solves = solver_.solve_batch(scaled_inputs);
        std::vector<ClassificationResult> out(Ys.size());
        for (std::size_t b = 0; b < Ys.size(); ++b) {
            out[b].solve = std::move(solves[b]);
            out[b].residuals = residuals(out[b].solve.x, out[b].solve.E, Ys[b]);
            out[b].predicted = argmin_residual(out[b].residuals);
        }
        return out;
    }

private:
    static SolverConfig solver_config(SolverConfig cfg, const ClassifierOptions& opts) {
        opts.validate();
        cfg.epsilon *= opts.intensity_scale;
        return cfg;
    }

    ClassifierOptions opts_;
    AdmmSolver solver_;
    std::vector<PoseLabel> classes_;
};

inline ClassificationResult classify(const TrainingDictionary& dict, const ImageMatrix& Y, const SolverConfig& cfg,
                                     ResidualVariant variant = ResidualVariant::Plain, ClassifierOptions opts = {}) {
    opts.variant = variant;
    return PoseClassifier(dict, cfg, opts).classify(Y);
}

} // namespace nrpose
