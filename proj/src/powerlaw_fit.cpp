#include "scalefit/powerlaw_fit.hpp"

#include "scalefit/error.hpp"
#include "scalefit/least_squares.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace scalefit {

std::string_view to_string(LawTarget t) {
    switch (t) {
        case LawTarget::eta_crit: return "eta_crit";
        case LawTarget::b_crit: return "b_crit";
        case LawTarget::b_star: return "b_star";
    }
    return "unknown";
}

LawTarget parse_target(std::string_view name) {
    if (name == "eta_crit" || name == "eta") return LawTarget::eta_crit;
    if (name == "b_crit" || name == "B" || name == "b") return LawTarget::b_crit;
    if (name == "b_star") return LawTarget::b_star;
    throw DataError("unknown law target '" + std::string(name) + "'");
}

double eval_powerlaw(const PowerLawParams& params, double tokens) {
    if (!(tokens > 0.0)) throw DataError("eval_powerlaw: tokens must be positive");
    if (params.a == 0.0) return params.b;
    return params.a * std::pow(tokens, params.alpha) + params.b;
}

namespace {

using Vec = VectorX<double>;
using Mat = MatrixX<double>;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Points normalized to x = T / T_ref (T_ref the geometric mean) so x^alpha
// stays O(1) over the whole exponent scan.
struct Prepared {
    Vec x;
    Vec y;
    Vec w;  // 1 / sigma
    double t_ref = 1.0;
};

Prepared prepare(std::span<const LawPoint> points, FitVariant policy) {
    Prepared p;
    const auto n = static_cast<Eigen::Index>(points.size());
    std::vector<double> raw;
    double log_sum = 0.0;
    std::set<double> distinct;
    for (const auto& pt : points) {
        if (!(pt.tokens > 0.0)) throw DataError("power-law fit: tokens must be positive");
        if (!std::isfinite(pt.value)) throw DataError("power-law fit: values must be finite");
        if (!distinct.insert(pt.tokens).second) throw DataError("power-law fit: token values must be distinct");
        raw.push_back(std::isfinite(pt.sigma) ? pt.sigma : 0.0);
        log_sum += std::log(pt.tokens);
    }
    const auto sigma = effective_sigmas(raw, policy);
    p.t_ref = std::exp(log_sum / static_cast<double>(n));
    p.x.resize(n);
    p.y.resize(n);
    p.w.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        p.x[i] = points[k].tokens / p.t_ref;
        p.y[i] = points[k].value;
        p.w[i] = 1.0 / sigma[k];
    }
    return p;
}

struct LinearSolution {
    double scale = 0.0;   // A in A * x^alpha
    double offset = 0.0;  // b
    double chi2 = kInf;
};

// Weighted least squares for (A, b) at a fixed exponent; b pinned when given.
LinearSolution solve_linear(const Prepared& p, double alpha, std::optional<double> fixed_b) {
    const auto n = p.x.size();
    LinearSolution s;
    if (fixed_b) {
        Vec col(n), rhs(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            col[i] = std::pow(p.x[i], alpha) * p.w[i];
            rhs[i] = (p.y[i] - *fixed_b) * p.w[i];
        }
        const double denom = col.squaredNorm();
        s.scale = denom > 0.0 ? col.dot(rhs) / denom : 0.0;
        s.offset = *fixed_b;
        s.chi2 = (rhs - s.scale * col).squaredNorm();
        return s;
    }
    Mat design(n, 2);
    Vec rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design(i, 0) = std::pow(p.x[i], alpha) * p.w[i];
        design(i, 1) = p.w[i];
        rhs[i] = p.y[i] * p.w[i];
    }
    const Vec coef = weighted_lstsq<double>(design, rhs);
    s.scale = coef[0];
    s.offset = coef[1];
    s.chi2 = (rhs - design * coef).squaredNorm();
    return s;
}

// Initial guess of the classic recipe: b0 just below min(p), alpha0 from the
// log-log slope of p - b0, a0 through the first point.
Vec classic_start(const Prepared& p, std::optional<double> fixed_b) {
    const auto n = p.x.size();
    const double min_y = p.y.minCoeff();
    const double b0 = fixed_b ? *fixed_b : (min_y > 0.0 ? 0.9 * min_y : 1.1 * min_y);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = p.y[i] - b0;
        if (d <= 0.0) continue;
        const double lx = std::log(p.x[i]);
        const double ly = std::log(d);
        sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
        ++m;
    }
    double alpha0 = 0.0;
    if (m >= 2 && m * sxx - sx * sx > 0.0) alpha0 = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    const double a0 = (p.y[0] - b0) / std::pow(p.x[0], alpha0);
    Vec start(fixed_b ? 2 : 3);
    start[0] = a0;
    start[1] = alpha0;
    if (!fixed_b) start[2] = b0;
    return start;
}

}  // namespace

PowerLawParams fit_powerlaw(std::span<const LawPoint> points, LawTarget target, const PowerLawFitOptions& options) {
    const std::size_t n_free = options.fixed_b ? 2 : 3;
    const std::size_t needed = options.allow_exact ? n_free : n_free + 1;
    if (points.size() < needed) {
        throw DataError("fit_powerlaw: need at least " + std::to_string(needed) + " points, got " +
                        std::to_string(points.size()));
    }
    const Prepared p = prepare(points, options.sigma_policy);
    const auto n = p.x.size();
    const Vec start_classic = classic_start(p, options.fixed_b);

    // Profile the exponent: (A, b) are linear given alpha.
    constexpr double kStep = 0.02;
    const int steps = static_cast<int>(std::lround((options.alpha_max - options.alpha_min) / kStep));
    double best_alpha = start_classic[1];
    LinearSolution best = solve_linear(p, best_alpha, options.fixed_b);
    for (int k = 0; k <= steps; ++k) {
        const double alpha = options.alpha_min + kStep * k;
        const auto s = solve_linear(p, alpha, options.fixed_b);
        const double tie = 1e-12 * std::max(best.chi2, 1e-300);
        if (s.chi2 < best.chi2 - tie ||
            (std::abs(s.chi2 - best.chi2) <= tie && std::abs(alpha - start_classic[1]) < std::abs(best_alpha - start_classic[1]))) {
            best = s;
            best_alpha = alpha;
        }
    }
    // Golden-section refinement inside the bracketing scan cell.
    {
        double lo = best_alpha - kStep;
        double hi = best_alpha + kStep;
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double c = hi - g * (hi - lo);
        double d = lo + g * (hi - lo);
        double fc = solve_linear(p, c, options.fixed_b).chi2;
        double fd = solve_linear(p, d, options.fixed_b).chi2;
        for (int it = 0; it < 80 && hi - lo > 1e-14; ++it) {
            if (fc < fd) {
                hi = d, d = c, fd = fc;
                c = hi - g * (hi - lo);
                fc = solve_linear(p, c, options.fixed_b).chi2;
            } else {
                lo = c, c = d, fc = fd;
                d = lo + g * (hi - lo);
                fd = solve_linear(p, d, options.fixed_b).chi2;
            }
        }
        const double mid = 0.5 * (lo + hi);
        const auto s = solve_linear(p, mid, options.fixed_b);
        if (s.chi2 <= best.chi2) {
            best = s;
            best_alpha = mid;
        }
    }

    const std::optional<double> fixed_b = options.fixed_b;
    auto model = [&](const Vec& q, Vec& r, Mat& jac) {
        const double scale = q[0];
        const double alpha = q[1];
        const double offset = fixed_b ? *fixed_b : q[2];
        r.resize(n);
        jac.resize(n, q.size());
        for (Eigen::Index i = 0; i < n; ++i) {
            const double xa = std::pow(p.x[i], alpha);
            r[i] = (p.y[i] - scale * xa - offset) * p.w[i];
            jac(i, 0) = -xa * p.w[i];
            jac(i, 1) = -scale * xa * std::log(p.x[i]) * p.w[i];
            if (!fixed_b) jac(i, 2) = -p.w[i];
        }
    };

    Vec start_profile(n_free);
    start_profile[0] = best.scale;
    start_profile[1] = best_alpha;
    if (!fixed_b) start_profile[2] = best.offset;

    LevMarOptions<double> lm;
    auto result = levenberg_marquardt<double>(model, start_profile, lm);
    const auto alt = levenberg_marquardt<double>(model, start_classic, lm);
    if (alt.x.allFinite() && alt.chi_square < result.chi_square) result = alt;

    const double scale = result.x[0];
    const double alpha = result.x[1];
    PowerLawParams out;
    out.target = target;
    out.alpha = alpha;
    out.a = scale * std::pow(p.t_ref, -alpha);
    out.b = fixed_b ? *fixed_b : result.x[2];
    out.fixed_b = fixed_b.has_value();
    out.variant = options.sigma_policy;

    const Mat cov_q = relative_covariance<double>(result.jacobian, result.chi_square);
    if (!cov_q.allFinite()) {
        out.sigma_a = out.sigma_alpha = kInf;
        out.sigma_b = fixed_b ? 0.0 : kInf;
    } else {
        // a = A * T_ref^-alpha
        Mat g = Mat::Identity(static_cast<Eigen::Index>(n_free), static_cast<Eigen::Index>(n_free));
        g(0, 0) = std::pow(p.t_ref, -alpha);
        g(0, 1) = -out.a * std::log(p.t_ref);
        const Mat cov = g * cov_q * g.transpose();
        out.sigma_a = std::sqrt(std::max(cov(0, 0), 0.0));
        out.sigma_alpha = std::sqrt(std::max(cov(1, 1), 0.0));
        out.sigma_b = fixed_b ? 0.0 : std::sqrt(std::max(cov(2, 2), 0.0));
    }
    out.diagnostics.residual_norm = std::sqrt(result.chi_square);
    out.diagnostics.n_points = static_cast<int>(n);
    out.diagnostics.converged = result.converged();
    out.diagnostics.iterations = result.iterations;
    return out;
}

PowerLawParams refit_fixed_exponent(std::span<const LawPoint> points, LawTarget target, double alpha_fixed,
                                    FitVariant sigma_policy) {
    if (points.size() < 3) {
        throw DataError("refit_fixed_exponent: need at least 3 points, got " + std::to_string(points.size()));
    }
    const Prepared p = prepare(points, sigma_policy);
    const auto n = p.x.size();
    Mat design(n, 2);
    Vec rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        design(i, 0) = std::pow(p.x[i], alpha_fixed) * p.w[i];
        design(i, 1) = p.w[i];
        rhs[i] = p.y[i] * p.w[i];
    }
    const Vec coef = weighted_lstsq<double>(design, rhs);
    const Vec resid = rhs - design * coef;
    const double chi2 = resid.squaredNorm();

    PowerLawParams out;
    out.target = target;
    out.alpha = alpha_fixed;
    out.fixed_alpha = true;
    out.variant = sigma_policy;
    const double back = std::pow(p.t_ref, -alpha_fixed);
    out.a = coef[0] * back;
    out.b = coef[1];
    // The jacobian of the weighted residuals is -design.
    const Mat cov = relative_covariance<double>(design, chi2);
    out.sigma_a = cov.allFinite() ? back * std::sqrt(std::max(cov(0, 0), 0.0)) : kInf;
    out.sigma_b = cov.allFinite() ? std::sqrt(std::max(cov(1, 1), 0.0)) : kInf;
    out.sigma_alpha = 0.0;
    out.diagnostics.residual_norm = std::sqrt(chi2);
    out.diagnostics.n_points = static_cast<int>(n);
    out.diagnostics.converged = cov.allFinite();
    out.diagnostics.iterations = 1;
    return out;
}

ConsolidatedExponent consolidate_exponent(std::span<const PowerLawParams> per_variant) {
    if (per_variant.empty()) throw DataError("consolidate_exponent: no fits given");
    ConsolidatedExponent out;
    out.target = per_variant.front().target;
    double sum = 0.0;
    double sigma_sum = 0.0;
    for (const auto& p : per_variant) {
        if (p.target != out.target) throw DataError("consolidate_exponent: fits target different parameters");
        out.contributing.push_back({p.alpha, p.sigma_alpha});
        sum += p.alpha;
        sigma_sum += p.sigma_alpha;
    }
    const double k = static_cast<double>(per_variant.size());
    out.alpha_hat = sum / k;
    double var = 0.0;
    for (const auto& p : per_variant) var += (p.alpha - out.alpha_hat) * (p.alpha - out.alpha_hat);
    var /= k;
    const double mean_sigma = sigma_sum / k;
    out.sigma = std::sqrt(var + mean_sigma * mean_sigma);
    return out;
}

std::vector<LawPoint> law_points(const SurgeFitSet& fits, FitVariant variant, LawTarget target) {
    std::vector<LawPoint> out;
    for (const auto& [tokens, list] : fits.fits) {
        for (const auto& f : list) {
            if (f.variant != variant) continue;
            if (target == LawTarget::b_crit) {
                out.push_back({static_cast<double>(tokens), f.b_crit, f.sigma_b_crit});
            } else {
                out.push_back({static_cast<double>(tokens), f.eta_crit, f.sigma_eta_crit});
            }
        }
    }
    return out;
}

}  // namespace scalefit
