#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace scalefit {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class Termination {
    gradient,       // residual nearly orthogonal to the Jacobian's range
    zero_residual,  // residual vanished exactly
    small_step,     // undamped relative step below machine resolution
    max_iterations,
    stalled,        // damping blew up without any decrease
};

template <typename Scalar = double>
struct LevMarOptions {
    int max_iterations = 200;
    Scalar gradient_tolerance = Scalar(1e-12);
    Scalar initial_damping = Scalar(1e-3);
    Scalar damping_factor = Scalar(10);
    Scalar min_damping = Scalar(1e-30);
    Scalar max_damping = Scalar(1e32);
    Scalar step_tolerance = Scalar(4) * std::numeric_limits<Scalar>::epsilon();
};

template <typename Scalar = double>
struct LevMarResult {
    VectorX<Scalar> x;
    VectorX<Scalar> residual;
    MatrixX<Scalar> jacobian;
    Scalar chi_square = 0;
    Scalar scaled_gradient = 0;
    int iterations = 0;
    Termination termination = Termination::max_iterations;

    bool converged() const {
        return termination == Termination::gradient || termination == Termination::zero_residual ||
               termination == Termination::small_step;
    }
};

namespace detail {

// Rows reordered by decreasing norm. Householder QR stays accurate on the
// strongly graded rows that a 1e-15 sigma produces when big rows come first.
template <typename Scalar>
void sort_rows(MatrixX<Scalar>& a, VectorX<Scalar>& b) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(a.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const VectorX<Scalar> norms = a.rowwise().norm();
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return norms[i] > norms[j]; });
    MatrixX<Scalar> sa(a.rows(), a.cols());
    VectorX<Scalar> sb(b.size());
    for (Eigen::Index k = 0; k < a.rows(); ++k) {
        sa.row(k) = a.row(order[static_cast<std::size_t>(k)]);
        sb[k] = b[order[static_cast<std::size_t>(k)]];
    }
    a.swap(sa);
    b.swap(sb);
}

}  // namespace detail

/// Least-squares solution of a x = b for a weighted design (rows already
/// multiplied by 1/sigma), robust to weights spanning many decades.
template <typename Scalar>
VectorX<Scalar> weighted_lstsq(MatrixX<Scalar> a, VectorX<Scalar> b) {
    detail::sort_rows(a, b);
    return a.colPivHouseholderQr().solve(b);
}

/// Cosine between the residual and the column space of the Jacobian, i.e.
/// sqrt of the fraction of chi-square a full Gauss-Newton step could remove.
/// Invariant to reparametrization and to how the rows are weighted.
template <typename Scalar>
Scalar scaled_gradient(MatrixX<Scalar> jacobian, VectorX<Scalar> residual) {
    const Scalar rnorm = residual.norm();
    if (rnorm == Scalar(0)) return Scalar(0);
    detail::sort_rows(jacobian, residual);
    const Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(jacobian);
    residual.applyOnTheLeft(qr.householderQ().adjoint());
    return residual.head(qr.rank()).norm() / rnorm;
}

/// Damped Gauss-Newton (Levenberg-Marquardt with Marquardt diagonal scaling).
///
/// `model(x, r, J)` fills the residual vector and its Jacobian at x. The
/// returned Jacobian and residual are those at the accepted solution.
template <typename Scalar, typename Model>
LevMarResult<Scalar> levenberg_marquardt(Model&& model, VectorX<Scalar> x,
                                         const LevMarOptions<Scalar>& options = {}) {
    LevMarResult<Scalar> out;
    VectorX<Scalar> r;
    MatrixX<Scalar> jac;
    model(x, r, jac);
    Scalar chi2 = r.squaredNorm();
    Scalar lambda = options.initial_damping;

    VectorX<Scalar> trial_r;
    MatrixX<Scalar> trial_jac;
    int it = 0;
    out.termination = Termination::max_iterations;
    while (true) {
        if (chi2 == Scalar(0)) {
            out.termination = Termination::zero_residual;
            break;
        }
        if (scaled_gradient<Scalar>(jac, r) <= options.gradient_tolerance) {
            out.termination = Termination::gradient;
            break;
        }
        if (it >= options.max_iterations) break;

        // Marquardt scaling by the squared column norms, floored so a vanishing
        // column cannot switch the damping off.
        VectorX<Scalar> diag = jac.colwise().squaredNorm().transpose();
        const Scalar floor = diag.maxCoeff() * std::numeric_limits<Scalar>::epsilon();
        for (Eigen::Index i = 0; i < diag.size(); ++i) diag[i] = std::max(diag[i], floor);

        const Eigen::Index n = jac.rows();
        const Eigen::Index p = jac.cols();
        bool accepted = false;
        bool tiny_step = false;
        bool undamped_tried = false;
        while (it < options.max_iterations) {
            ++it;
            // Damped step as the least-squares solution of [J; sqrt(lambda D)] s = [-r; 0],
            // which avoids squaring the condition number of J.
            MatrixX<Scalar> aug(n + p, p);
            aug.topRows(n) = jac;
            aug.bottomRows(p) = (lambda * diag).cwiseSqrt().asDiagonal();
            VectorX<Scalar> rhs = VectorX<Scalar>::Zero(n + p);
            rhs.head(n) = -r;
            detail::sort_rows(aug, rhs);
            const VectorX<Scalar> step = aug.colPivHouseholderQr().solve(rhs);
            if (!step.allFinite()) {
                lambda *= options.damping_factor;
                if (lambda > options.max_damping) break;
                continue;
            }
            if (step.norm() <= options.step_tolerance * (x.norm() + options.step_tolerance)) {
                // Heavy damping alone can shrink the step, so retry once undamped.
                // A second tiny step means the iterate cannot move any further.
                if (lambda <= options.min_damping || undamped_tried) {
                    tiny_step = true;
                    break;
                }
                lambda = options.min_damping;
                undamped_tried = true;
                continue;
            }
            const VectorX<Scalar> candidate = x + step;
            model(candidate, trial_r, trial_jac);
            const Scalar trial_chi2 = trial_r.squaredNorm();
            if (std::isfinite(trial_chi2) && trial_chi2 < chi2) {
                x = candidate;
                r.swap(trial_r);
                jac.swap(trial_jac);
                chi2 = trial_chi2;
                lambda = std::max(lambda / options.damping_factor, options.min_damping);
                accepted = true;
                break;
            }
            lambda *= options.damping_factor;
            if (lambda > options.max_damping) break;
        }
        if (tiny_step) {
            out.termination = Termination::small_step;
            break;
        }
        if (!accepted) {
            if (it < options.max_iterations) out.termination = Termination::stalled;
            break;
        }
    }
    out.x = std::move(x);
    out.residual = std::move(r);
    out.jacobian = std::move(jac);
    out.chi_square = chi2;
    out.scaled_gradient = scaled_gradient<Scalar>(out.jacobian, out.residual);
    out.iterations = it;
    return out;
}

/// Parameter covariance (J^T J)^{-1} scaled by the reduced chi-square, the
/// relative-sigma convention, computed from the R factor of J. Rank-deficient
/// problems yield +inf everywhere.
template <typename Scalar>
MatrixX<Scalar> relative_covariance(MatrixX<Scalar> jacobian, Scalar chi_square) {
    const Eigen::Index n = jacobian.rows();
    const Eigen::Index p = jacobian.cols();
    MatrixX<Scalar> cov = MatrixX<Scalar>::Constant(p, p, std::numeric_limits<Scalar>::infinity());
    if (n <= p) return cov;

    // Column equilibration keeps the solve sane when T^alpha spans 1e9.
    VectorX<Scalar> scale(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const Scalar c = jacobian.col(j).norm();
        scale[j] = c > Scalar(0) ? c : Scalar(1);
    }
    jacobian = jacobian * scale.cwiseInverse().asDiagonal();
    VectorX<Scalar> unused = VectorX<Scalar>::Zero(n);
    detail::sort_rows(jacobian, unused);
    const Eigen::ColPivHouseholderQR<MatrixX<Scalar>> qr(jacobian);
    if (qr.rank() < p) return cov;

    // (J^T J)^{-1} = P R^{-1} R^{-T} P^T
    const MatrixX<Scalar> r = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
    const MatrixX<Scalar> r_inv =
        r.template triangularView<Eigen::Upper>().solve(MatrixX<Scalar>::Identity(p, p));
    const MatrixX<Scalar> inv = qr.colsPermutation() * (r_inv * r_inv.transpose()) *
                                qr.colsPermutation().transpose();
    cov = scale.cwiseInverse().asDiagonal() * inv * scale.cwiseInverse().asDiagonal();
    cov *= chi_square / Scalar(n - p);
    return cov;
}

}  // namespace scalefit
