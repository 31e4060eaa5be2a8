#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nrpose/dictionary.hpp"
#include "nrpose/error.hpp"
#include "nrpose/mathcore.hpp"

namespace nrpose {

/// Penalty on the coefficient vector: (eta/2)||x||_2^2 or (eta/2)||x||_1.
enum class Penalty { L2, L1 };

inline std::string to_string(Penalty p) { return p == Penalty::L2 ? "l2" : "l1"; }

inline Penalty parse_penalty(const std::string& s) {
    if (s == "l2" || s == "L2")
        return Penalty::L2;
    if (s == "l1" || s == "L1")
        return Penalty::L1;
    throw ConfigError("unknown mode '" + s + "' (expected l2 or l1)");
}

/// Defaults are the reference values for the ridge variant, calibrated for
/// intensities on the 0..255 scale.
struct SolverConfig {
    double lambda = 100.0;  ///< nuclear-norm weight
    double eta = 40000.0;   ///< coefficient penalty weight
    double mu = 1.0;        ///< ADMM penalty, fixed for the whole solve
    double epsilon = 1e-6;  ///< stopping tolerance
    int max_iters = 500;
    Penalty mode = Penalty::L2;

    /// Nuclear-norm regression with ridge penalty.
    static SolverConfig nr() { return {}; }

    /// The l1-penalized variant.
    static SolverConfig l1_nr() {
        SolverConfig c;
        c.eta = 0.1;
        c.mode = Penalty::L1;
        return c;
    }

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw ConfigError("lambda must be finite and >= 0");
        if (!(eta >= 0.0) || !std::isfinite(eta))
            throw ConfigError("eta must be finite and >= 0");
        if (!(mu > 0.0) || !std::isfinite(mu))
            throw ConfigError("mu must be finite and > 0");
        if (!(epsilon > 0.0))
            throw ConfigError("epsilon must be > 0");
        if (max_iters < 1)
            throw ConfigError("max_iters must be >= 1");
    }
};

/// Column-stacked system matrix H = [vec(A_1), ..., vec(A_l)] with its Gram
/// matrix H^T H, computed once and shared by every solve on this dictionary.
struct LinearSystem {
    Matrix H;
    Matrix gram;
    Index rows = 0;
    Index cols = 0;
    std::vector<PoseLabel> class_of_column;

    Index atoms() const noexcept { return H.cols(); }

    /// F(x) = sum_i x_i A_i as an image.
    ImageMatrix combine(const Vector& x) const {
        if (x.size() != H.cols())
            throw ShapeError("coefficient vector has length " + std::to_string(x.size()) + ", dictionary has " +
                             std::to_string(H.cols()) + " atoms");
        return (H * x).reshaped(rows, cols);
    }

    void check_image_shape(const ImageMatrix& m, std::string_view what) const {
        if (m.rows() != rows || m.cols() != cols)
            throw ShapeError(std::string(what) + " is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                             ", dictionary atoms are " + std::to_string(rows) + "x" + std::to_string(cols));
    }
};

inline LinearSystem assemble_system(const TrainingDictionary& dict) {
    dict.validate();
    LinearSystem sys;
    sys.rows = dict.rows();
    sys.cols = dict.cols();
    sys.H.resize(sys.rows * sys.cols, static_cast<Index>(dict.size()));
    for (std::size_t j = 0; j < dict.size(); ++j)
        sys.H.col(static_cast<Index>(j)) = vectorize(dict.atoms[j]);
    sys.gram = sys.H.transpose() * sys.H;
    sys.class_of_column = dict.labels;
    return sys;
}

struct SolverState {
    Vector x;
    ImageMatrix E;
    ImageMatrix Z;
    int iteration = 0;
    /// Least-squares intermediate of the l1 x-update; empty until then.
    Vector alpha;

    /// x = 0, E = 0, Z = 0.
    static SolverState initial(const LinearSystem& sys) {
        SolverState s;
        s.x = Vector::Zero(sys.atoms());
        s.E = ImageMatrix::Zero(sys.rows, sys.cols);
        s.Z = ImageMatrix::Zero(sys.rows, sys.cols);
        return s;
    }
};

struct SolveResult {
    Vector x;
    ImageMatrix E;
    int iterations = 0;
    bool converged = false;
    double constraint_residual = 0.0;  ///< ||F(x) - E - Y||_F
    /// max(||x_k - x_{k-1}||, ||E_k - E_{k-1}||) at the last iteration.
    double iterate_change = std::numeric_limits<double>::infinity();
    double objective = 0.0;
    bool jittered = false;             ///< normal equations needed diagonal jitter
};

/// g = vec(E + Y - Z / mu).
inline Vector compute_g(const ImageMatrix& E, const ImageMatrix& Y, const ImageMatrix& Z, double mu) {
    if (E.rows() != Y.rows() || E.cols() != Y.cols() || Z.rows() != Y.rows() || Z.cols() != Y.cols())
        throw ShapeError("compute_g: E, Y and Z must share dimensions");
    if (!(mu > 0.0))
        throw ConfigError("mu must be > 0");
    return vectorize(E + Y - Z / mu);
}

/// ||E||_F^2 + lambda ||E||_* + (eta/2) ||x||_2^2 (L2) or (eta/2) ||x||_1 (L1).
inline double objective(const Vector& x, const ImageMatrix& E, const SolverConfig& cfg) {
    const double penalty = cfg.mode == Penalty::L2 ? x.squaredNorm() : x.lpNorm<1>();
    return E.squaredNorm() + cfg.lambda * nuclear_norm(E) + 0.5 * cfg.eta * penalty;
}

inline double objective(const LinearSystem& sys, const Vector& x, const ImageMatrix& E, const SolverConfig& cfg) {
    if (x.size() != sys.atoms())
        throw ShapeError("coefficient vector length does not match dictionary");
    sys.check_image_shape(E, "E");
    return objective(x, E, cfg);
}

/// L_mu(x, E, Z) = objective + tr(Z^T (F(x) - E - Y)) + (mu/2) ||F(x) - E - Y||_F^2.
inline double augmented_lagrangian(const LinearSystem& sys, const Vector& x, const ImageMatrix& E,
                                   const ImageMatrix& Z, const ImageMatrix& Y, const SolverConfig& cfg) {
    const ImageMatrix r = sys.combine(x) - E - Y;
    return objective(sys, x, E, cfg) + (Z.array() * r.array()).sum() + 0.5 * cfg.mu * r.squaredNorm();
}

/// x-update for the ridge penalty using a prebuilt factorization of
/// H^T H + (eta/mu) I.
inline Vector update_x_l2(const LinearSystem& sys, const RidgeFactorization& factor, const SolverState& state,
                          const ImageMatrix& Y, double mu) {
    return factor.solve(sys.H.transpose() * compute_g(state.E, Y, state.Z, mu));
}

/// x = (H^T H + (eta/mu) I)^{-1} H^T g.
inline Vector update_x_l2(const LinearSystem& sys, const SolverState& state, const ImageMatrix& Y,
                          const SolverConfig& cfg) {
    if (cfg.mode != Penalty::L2)
        throw ConfigError("update_x_l2 requires L2 mode");
    cfg.validate();
    sys.check_image_shape(Y, "Y");
    const RidgeFactorization factor(sys.gram, cfg.eta / cfg.mu);
    return update_x_l2(sys, factor, state, Y, cfg.mu);
}

/// x-update for the l1 penalty using a prebuilt factorization of H^T H.
/// alpha = (H^T H)^{-1} H^T g is written to `alpha`, then soft-thresholded at
/// eta / (2 mu). This is the closed form applied as written; it coincides with
/// the exact lasso step only when H^T H is a multiple of the identity.
inline Vector update_x_l1(const LinearSystem& sys, const RidgeFactorization& factor, const SolverState& state,
                          const ImageMatrix& Y, double mu, double eta, Vector& alpha) {
    alpha = factor.solve(sys.H.transpose() * compute_g(state.E, Y, state.Z, mu));
    return soft_threshold(alpha, eta / (2.0 * mu));
}

/// Stores alpha in state.alpha.
inline Vector update_x_l1(const LinearSystem& sys, SolverState& state, const ImageMatrix& Y,
                          const SolverConfig& cfg) {
    if (cfg.mode != Penalty::L1)
        throw ConfigError("update_x_l1 requires L1 mode");
    cfg.validate();
    sys.check_image_shape(Y, "Y");
    const RidgeFactorization factor(sys.gram, 0.0);
    return update_x_l1(sys, factor, state, Y, cfg.mu, cfg.eta, state.alpha);
}

/// E = svt((mu / (mu + 2)) (F(x) - Y + Z / mu), lambda / (mu + 2)), given F(x).
inline ImageMatrix update_E_from_fit(const ImageMatrix& fit, const ImageMatrix& Y, const ImageMatrix& Z,
                                     const SolverConfig& cfg, std::string_view context = {}) {
    const double mu = cfg.mu;
    const ImageMatrix m = (mu / (mu + 2.0)) * (fit - Y + Z / mu);
    return svt(m, cfg.lambda / (mu + 2.0), context);
}

inline ImageMatrix update_E(const LinearSystem& sys, const Vector& x, const ImageMatrix& Y, const ImageMatrix& Z,
                            const SolverConfig& cfg) {
    cfg.validate();
    sys.check_image_shape(Y, "Y");
    sys.check_image_shape(Z, "Z");
    return update_E_from_fit(sys.combine(x), Y, Z, cfg);
}

/// Z + mu (F(x) - E - Y).
inline ImageMatrix update_Z(const ImageMatrix& Z, const Vector& x, const ImageMatrix& E, const ImageMatrix& Y,
                            const LinearSystem& sys, double mu) {
    sys.check_image_shape(Y, "Y");
    sys.check_image_shape(E, "E");
    sys.check_image_shape(Z, "Z");
    return Z + mu * (sys.combine(x) - E - Y);
}

/// ADMM solver bound to one dictionary and one configuration. The system and
/// the factorization used by the x-update are built once and shared read-only,
/// so solve() may be called concurrently.
class AdmmSolver {
public:
    /// Residual growth factor, relative to ||Y||_F, treated as divergence.
    static constexpr double kDivergenceFactor = 1e6;

    AdmmSolver(std::shared_ptr<const LinearSystem> sys, const SolverConfig& cfg)
        : sys_(std::move(sys)), cfg_(cfg) {
        if (!sys_ || sys_->atoms() == 0)
            throw ShapeError("solver needs a non-empty linear system");
        cfg_.validate();
        const double rho = cfg_.mode == Penalty::L2 ? cfg_.eta / cfg_.mu : 0.0;
        factor_ = std::make_shared<const RidgeFactorization>(sys_->gram, rho);
    }

    AdmmSolver(const TrainingDictionary& dict, const SolverConfig& cfg)
        : AdmmSolver(std::make_shared<const LinearSystem>(assemble_system(dict)), cfg) {}

    const LinearSystem& system() const noexcept { return *sys_; }
    std::shared_ptr<const LinearSystem> shared_system() const noexcept { return sys_; }
    const SolverConfig& config() const noexcept { return cfg_; }
    const RidgeFactorization& factorization() const noexcept { return *factor_; }

    /// One x, E, Z sweep. Returns the constraint residual after the sweep.
    double step(SolverState& state, const ImageMatrix& Y) const {
        const LinearSystem& sys = *sys_;
        state.x = cfg_.mode == Penalty::L2 ? update_x_l2(sys, *factor_, state, Y, cfg_.mu)
                                           : update_x_l1(sys, *factor_, state, Y, cfg_.mu, cfg_.eta, state.alpha);
        const ImageMatrix fit = sys.combine(state.x);
        state.E = update_E_from_fit(fit, Y, state.Z, cfg_, "E-update of iteration " + std::to_string(state.iteration + 1));
        const ImageMatrix violation = fit - state.E - Y;
        state.Z += cfg_.mu * violation;
        ++state.iteration;
        return violation.norm();
    }

    SolveResult solve(const ImageMatrix& Y) const { return std::move(solve_batch(std::span(&Y, 1)).front()); }

    /// Solves several independent problems against the same dictionary in
    /// lockstep, so the H products become matrix-matrix products. Each problem
    /// stops on its own criteria. Results are deterministic for a given batch;
    /// the last bits may differ from solving the same image in another batch.
    std::vector<SolveResult> solve_batch(std::span<const ImageMatrix> Ys) const {
        const LinearSystem& sys = *sys_;
        const std::size_t count = Ys.size();
        for (const ImageMatrix& Y : Ys) {
            sys.check_image_shape(Y, "Y");
            check_image(Y, "Y");
        }

        std::vector<SolverState> states(count, SolverState::initial(sys));
        std::vector<SolveResult> out(count);
        std::vector<double> blowup(count);
        std::vector<std::size_t> active;
        for (std::size_t b = 0; b < count; ++b) {
            blowup[b] = kDivergenceFactor * std::max(Ys[b].norm(), cfg_.epsilon);
            out[b].constraint_residual = Ys[b].norm();
            out[b].jittered = factor_->jittered();
            active.push_back(b);
        }

        const Index pixels = sys.rows * sys.cols;
        const double mu = cfg_.mu;
        for (int iter = 1; iter <= cfg_.max_iters && !active.empty(); ++iter) {
            const Index width = static_cast<Index>(active.size());
            Matrix G(pixels, width);
            for (Index a = 0; a < width; ++a) {
                const SolverState& st = states[active[static_cast<std::size_t>(a)]];
                const ImageMatrix& Y = Ys[active[static_cast<std::size_t>(a)]];
                G.col(a) = (st.E + Y - st.Z / mu).reshaped();
            }
            const Matrix X = factor_->solve(sys.H.transpose() * G);
            Matrix coefficients = X;
            if (cfg_.mode == Penalty::L1)
                for (Index a = 0; a < width; ++a)
                    coefficients.col(a) = soft_threshold(X.col(a), cfg_.eta / (2.0 * mu));
            const Matrix fits = sys.H * coefficients;

            std::vector<std::size_t> still_active;
            for (Index a = 0; a < width; ++a) {
                const std::size_t b = active[static_cast<std::size_t>(a)];
                SolverState& st = states[b];
                const ImageMatrix& Y = Ys[b];
                const Vector x_prev = std::move(st.x);
                const ImageMatrix E_prev = st.E;
                st.x = coefficients.col(a);
                if (cfg_.mode == Penalty::L1)
                    st.alpha = X.col(a);
                const ImageMatrix fit = fits.col(a).reshaped(sys.rows, sys.cols);
                st.E = update_E_from_fit(fit, Y, st.Z, cfg_, "E-update of iteration " + std::to_string(iter));
                const ImageMatrix violation = fit - st.E - Y;
                st.Z += mu * violation;
                st.iteration = iter;
                const double residual = violation.norm();
                if (!st.x.allFinite() || !st.E.allFinite() || !st.Z.allFinite() || !std::isfinite(residual))
                    throw DivergenceError("non-finite ADMM iterate", iter);
                if (residual > blowup[b])
                    throw DivergenceError("constraint residual exceeded 1e6 times its initial value", iter);
                const double change = std::max((st.x - x_prev).norm(), (st.E - E_prev).norm());
                out[b].constraint_residual = residual;
                out[b].iterate_change = change;
                if (residual <= cfg_.epsilon || change <= cfg_.epsilon)
                    out[b].converged = true;
                else
                    still_active.push_back(b);
            }
            active = std::move(still_active);
        }

        for (std::size_t b = 0; b < count; ++b) {
            out[b].x = std::move(states[b].x);
            out[b].E = std::move(states[b].E);
            out[b].iterations = states[b].iteration;
            out[b].objective = objective(out[b].x, out[b].E, cfg_);
        }
        return out;
    }

private:
    std::shared_ptr<const LinearSystem> sys_;
    SolverConfig cfg_;
    std::shared_ptr<const RidgeFactorization> factor_;
};

/// Solves the nuclear-norm regression problem (ridge or l1 penalty) for Y.
inline SolveResult solve(const TrainingDictionary& dict, const ImageMatrix& Y, const SolverConfig& cfg) {
    return AdmmSolver(dict, cfg).solve(Y);
}

} // namespace nrpose
