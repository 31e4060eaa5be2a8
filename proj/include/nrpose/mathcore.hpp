#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/SVD>

#include "nrpose/error.hpp"

namespace nrpose {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Dense m x n real image. Plays the role of test images, dictionary atoms
/// and error matrices alike. Entries are intensities, nominally in [0, 1].
using ImageMatrix = Eigen::MatrixXd;

/// Throws unless `m` is non-empty and every entry is finite.
template <class Derived>
void check_image(const Eigen::MatrixBase<Derived>& m, std::string_view what = "image") {
    if (m.rows() < 1 || m.cols() < 1)
        throw ShapeError(std::string(what) + " must have at least one row and one column");
    if (!m.allFinite())
        throw NumericalError(std::string(what) + " contains non-finite entries");
}

/// Column-major stacking. Every H column and every g vector in the solver
/// uses this ordering, so entry (i, j) lands at index i + j * rows.
template <class Derived>
Vector vectorize(const Eigen::MatrixBase<Derived>& m) {
    return m.derived().reshaped();
}

/// Inverse of vectorize().
template <class Derived>
ImageMatrix unvectorize(const Eigen::MatrixBase<Derived>& v, Index rows, Index cols) {
    if (v.size() != rows * cols)
        throw ShapeError("cannot reshape vector of length " + std::to_string(v.size()) + " to " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    return v.derived().reshaped(rows, cols);
}

template <class Derived>
double frobenius_norm(const Eigen::MatrixBase<Derived>& m) {
    return m.norm();
}

/// Thin SVD factors, singular values sorted non-increasing.
struct SingularTriple {
    Matrix U;
    Vector S;
    Matrix V;

    Index rank(double tolerance = 0.0) const {
        return static_cast<Index>((S.array() > tolerance).count());
    }
    Matrix reconstruct() const { return U * S.asDiagonal() * V.transpose(); }
};

namespace detail {

inline std::string svd_context(std::string_view context) {
    return context.empty() ? std::string() : " at " + std::string(context);
}

inline SingularTriple thin_svd(const Matrix& a, bool vectors, std::string_view context) {
    if (!a.allFinite())
        throw NumericalError("SVD input contains non-finite entries" + svd_context(context));
    Eigen::BDCSVD<Matrix> svd(a, vectors ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : 0);
    if (svd.info() != Eigen::Success)
        throw NumericalError("SVD failed to converge" + svd_context(context));
    SingularTriple t;
    t.S = svd.singularValues();
    if (vectors) {
        t.U = svd.matrixU();
        t.V = svd.matrixV();
    }
    return t;
}

} // namespace detail

template <class Derived>
SingularTriple singular_triple(const Eigen::MatrixBase<Derived>& m, std::string_view context = {}) {
    return detail::thin_svd(m.derived().eval(), true, context);
}

template <class Derived>
Vector singular_values(const Eigen::MatrixBase<Derived>& m) {
    return detail::thin_svd(m.derived().eval(), false, {}).S;
}

/// Sum of singular values.
template <class Derived>
double nuclear_norm(const Eigen::MatrixBase<Derived>& m) {
    return singular_values(m).sum();
}

/// Singular value thresholding: U diag(max(0, s - tau)) V^T, the proximal
/// operator of tau * ||.||_*. `context` names the iterate in error messages.
///
/// When tau is not tiny relative to the largest singular value, the result is
/// computed as M V diag(1 - tau/s) V^T from the eigendecomposition of the
/// smaller Gram matrix, which is several times faster than a full SVD at the
/// sizes used here. Eigenvalue errors of order eps * s_max^2 only perturb
/// singular values near tau by eps * s_max^2 / tau, so the route is taken only
/// when tau >= kGramRouteMinRatio * s_max; otherwise a full SVD is used.
inline constexpr double kGramRouteMinRatio = 1e-4;

template <class Derived>
ImageMatrix svt(const Eigen::MatrixBase<Derived>& m, double tau, std::string_view context = {}) {
    if (!(tau >= 0.0))
        throw ConfigError("svt threshold must be non-negative");
    const Matrix a = m.derived().eval();
    if (!a.allFinite())
        throw NumericalError("SVD input contains non-finite entries" + detail::svd_context(context));
    if (tau == 0.0)
        return a;

    const bool tall = a.rows() >= a.cols();
    const Matrix gram = tall ? Matrix(a.transpose() * a) : Matrix(a * a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() == Eigen::Success) {
        const Vector& ev = eig.eigenvalues();  // ascending
        const double s_max = std::sqrt(std::max(ev(ev.size() - 1), 0.0));
        if (s_max <= tau)
            return ImageMatrix::Zero(a.rows(), a.cols());
        if (tau >= kGramRouteMinRatio * s_max) {
            Index keep = 0;
            while (keep < ev.size() && ev(ev.size() - 1 - keep) > tau * tau)
                ++keep;
            const Matrix basis = eig.eigenvectors().rightCols(keep);
            Vector weight(keep);
            for (Index k = 0; k < keep; ++k)
                weight(k) = 1.0 - tau / std::sqrt(ev(ev.size() - keep + k));
            return tall ? Matrix(a * basis * weight.asDiagonal() * basis.transpose())
                        : Matrix(basis * weight.asDiagonal() * basis.transpose() * a);
        }
    }

    SingularTriple t = detail::thin_svd(a, true, context);
    const Vector shrunk = (t.S.array() - tau).cwiseMax(0.0).matrix();
    const Index keep = static_cast<Index>((shrunk.array() > 0.0).count());
    if (keep == 0)
        return ImageMatrix::Zero(a.rows(), a.cols());
    // singular values are sorted, so the surviving ones are a prefix
    return t.U.leftCols(keep) * shrunk.head(keep).asDiagonal() * t.V.leftCols(keep).transpose();
}

/// Reference SVT through a full SVD, without the Gram shortcut.
template <class Derived>
ImageMatrix svt_full(const Eigen::MatrixBase<Derived>& m, double tau) {
    if (!(tau >= 0.0))
        throw ConfigError("svt threshold must be non-negative");
    SingularTriple t = singular_triple(m);
    const Vector shrunk = (t.S.array() - tau).cwiseMax(0.0).matrix();
    return t.U * shrunk.asDiagonal() * t.V.transpose();
}

/// Componentwise shrinkage toward zero, the proximal operator of tau * ||.||_1.
template <class Derived>
Vector soft_threshold(const Eigen::MatrixBase<Derived>& v, double tau) {
    if (!(tau >= 0.0))
        throw ConfigError("soft threshold must be non-negative");
    Vector out(v.size());
    for (Index i = 0; i < v.size(); ++i) {
        const double a = v(i);
        if (a > tau)
            out(i) = a - tau;
        else if (a < -tau)
            out(i) = a + tau;
        else
            out(i) = 0.0;
    }
    return out;
}

/// Cholesky factorization of (G + rho I) for a Gram matrix G = H^T H.
///
/// With rho = 0 the Gram matrix may be singular or badly conditioned. In that
/// case, if jitter is allowed, 1e-10 * trace(G) / l is added to the diagonal
/// and the factorization retried; jittered() reports whether that happened.
/// Otherwise a ConditioningError carrying the condition estimate is thrown.
class RidgeFactorization {
public:
    static constexpr double kJitterScale = 1e-10;
    static constexpr double kMinReciprocalCondition = 1e-14;

    RidgeFactorization() = default;

    RidgeFactorization(const Matrix& gram, double rho, bool allow_jitter = true) : rho_(rho) {
        if (gram.rows() != gram.cols() || gram.rows() == 0)
            throw ShapeError("Gram matrix must be square and non-empty");
        if (!(rho >= 0.0) || !std::isfinite(rho))
            throw ConfigError("ridge weight must be finite and non-negative");
        const Index l = gram.rows();
        Matrix system = gram;
        system.diagonal().array() += rho;
        llt_.compute(system);
        if (usable())
            return;
        const double cond = condition_estimate();
        if (rho > 0.0 || !allow_jitter)
            throw ConditioningError("normal equations are singular or ill-conditioned (condition estimate " +
                                        std::to_string(cond) + ")",
                                    cond);
        jitter_ = kJitterScale * gram.trace() / static_cast<double>(l);
        system.diagonal().array() += jitter_;
        llt_.compute(system);
        if (!usable() || jitter_ <= 0.0) {
            const double jittered_cond = condition_estimate();
            throw ConditioningError("normal equations remain singular after jitter (condition estimate " +
                                        std::to_string(jittered_cond) + ")",
                                    jittered_cond);
        }
    }

    /// Solves (G + rho I) X = rhs column by column; rhs is typically H^T g.
    template <class Derived>
    typename Derived::PlainObject solve(const Eigen::MatrixBase<Derived>& rhs) const {
        return llt_.solve(rhs.derived());
    }

    bool jittered() const noexcept { return jitter_ > 0.0; }
    double jitter() const noexcept { return jitter_; }
    double rho() const noexcept { return rho_; }
    Index size() const noexcept { return llt_.rows(); }

    double condition_estimate() const {
        if (llt_.info() != Eigen::Success)
            return std::numeric_limits<double>::infinity();
        const double rc = llt_.rcond();
        return rc > 0.0 ? 1.0 / rc : std::numeric_limits<double>::infinity();
    }

private:
    bool usable() const {
        return llt_.info() == Eigen::Success && llt_.rcond() > kMinReciprocalCondition;
    }

    Eigen::LLT<Matrix> llt_;
    double rho_ = 0.0;
    double jitter_ = 0.0;
};

/// (H^T H + rho I)^{-1} H^T g through a Cholesky factorization.
inline Vector ridge_solve(const Matrix& H, const Vector& g, double rho, bool allow_jitter = true) {
    if (H.rows() != g.size())
        throw ShapeError("ridge_solve: H has " + std::to_string(H.rows()) + " rows but g has length " +
                         std::to_string(g.size()));
    const Matrix gram = H.transpose() * H;
    RidgeFactorization factor(gram, rho, allow_jitter);
    return factor.solve(H.transpose() * g);
}

} // namespace nrpose
