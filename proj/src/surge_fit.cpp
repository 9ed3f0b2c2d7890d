#include "scalefit/surge_fit.hpp"

#include "scalefit/error.hpp"
#include "scalefit/least_squares.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace scalefit {

std::string_view to_string(FitVariant v) {
    switch (v) {
        case FitVariant::no_error: return "no_error";
        case FitVariant::eps_floor: return "eps_floor";
        case FitVariant::mean_sigma: return "mean_sigma";
    }
    return "unknown";
}

FitVariant parse_variant(std::string_view name) {
    if (name == "no_error" || name == "no-error") return FitVariant::no_error;
    if (name == "eps_floor" || name == "eps") return FitVariant::eps_floor;
    if (name == "mean_sigma" || name == "mean-sigma") return FitVariant::mean_sigma;
    throw DataError("unknown fit variant '" + std::string(name) + "'");
}

std::string_view sigma_policy(FitVariant v) {
    switch (v) {
        case FitVariant::no_error: return "unweighted; point uncertainties ignored";
        case FitVariant::eps_floor: return "weighted by 1/sigma^2; zero sigmas replaced by 1e-15";
        case FitVariant::mean_sigma: return "weighted by 1/sigma^2; zero sigmas replaced by the mean nonzero sigma";
    }
    return "";
}

std::vector<double> effective_sigmas(std::span<const double> sigmas, FitVariant variant) {
    std::vector<double> out(sigmas.begin(), sigmas.end());
    for (double s : out) {
        if (!(s >= 0.0)) throw DataError("point uncertainties must be non-negative");
    }
    switch (variant) {
        case FitVariant::no_error:
            std::fill(out.begin(), out.end(), 1.0);
            break;
        case FitVariant::eps_floor:
            for (double& s : out) {
                if (s == 0.0) s = kEpsilonSigma;
            }
            break;
        case FitVariant::mean_sigma: {
            double sum = 0.0;
            int n = 0;
            for (double s : out) {
                if (s > 0.0 && std::isfinite(s)) {
                    sum += s;
                    ++n;
                }
            }
            const double fill = n > 0 ? sum / n : 1.0;
            if (n == 0) {
                std::fill(out.begin(), out.end(), 1.0);
            } else {
                for (double& s : out) {
                    if (s == 0.0) s = fill;
                }
            }
            break;
        }
    }
    for (double s : out) {
        if (!std::isfinite(s)) throw DataError("point uncertainties must be finite");
    }
    return out;
}

double eval_surge(double eta_crit, double b_crit, double batch_size) {
    if (!(eta_crit > 0.0) || !(b_crit > 0.0) || !(batch_size > 0.0)) {
        throw DataError("eval_surge: arguments must be positive");
    }
    return eta_crit / (std::sqrt(batch_size / b_crit) + std::sqrt(b_crit / batch_size));
}

namespace {

using Vec = VectorX<double>;
using Mat = MatrixX<double>;

}  // namespace

SurgeParams fit_surge(std::span<const SurgePoint> points, FitVariant variant, const SurgeFitOptions& options,
                      std::int64_t tokens) {
    if (points.size() < 3) throw DataError("fit_surge: need at least 3 points, got " + std::to_string(points.size()));
    std::set<double> distinct;
    for (const auto& p : points) {
        if (!(p.batch_size > 0.0) || !(p.eta_star > 0.0)) {
            throw DataError("fit_surge: batch sizes and optima must be positive");
        }
        distinct.insert(p.batch_size);
    }
    if (distinct.size() < 3) throw DataError("fit_surge: need at least 3 distinct batch sizes");

    const auto n = static_cast<Eigen::Index>(points.size());
    std::vector<double> raw;
    for (const auto& p : points) raw.push_back(p.sigma);
    std::vector<double> sigma = effective_sigmas(raw, variant);
    Vec batch(n), target(n), weight(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        batch[i] = p.batch_size;
        if (options.log_residuals) {
            target[i] = std::log(p.eta_star);
            const double s = variant == FitVariant::no_error ? 1.0 : sigma[static_cast<std::size_t>(i)] / p.eta_star;
            weight[i] = 1.0 / s;
        } else {
            target[i] = p.eta_star;
            weight[i] = 1.0 / sigma[static_cast<std::size_t>(i)];
        }
    }

    // theta = (ln eta_crit, ln B_crit) keeps both parameters positive.
    auto model = [&](const Vec& theta, Vec& r, Mat& jac) {
        const double eta_c = std::exp(theta[0]);
        const double b_c = std::exp(theta[1]);
        r.resize(n);
        jac.resize(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = std::sqrt(batch[i] / b_c);
            const double denom = u + 1.0 / u;
            const double f = eta_c / denom;
            const double dlogf_dlogb = (u - 1.0 / u) / (2.0 * denom);
            if (options.log_residuals) {
                r[i] = (target[i] - std::log(f)) * weight[i];
                jac(i, 0) = -weight[i];
                jac(i, 1) = -dlogf_dlogb * weight[i];
            } else {
                r[i] = (target[i] - f) * weight[i];
                jac(i, 0) = -f * weight[i];
                jac(i, 1) = -f * dlogf_dlogb * weight[i];
            }
        }
    };

    // Profile ln B_crit: for fixed B_crit the scale parameter has a closed form.
    // Scanning the profile avoids the narrow curved valleys that a 1e-15 sigma
    // carves into the full two-parameter surface.
    auto profile = [&](double log_bc, double& log_eta) {
        const double b_c = std::exp(log_bc);
        double num = 0.0;
        double den = 0.0;
        Vec shape(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = std::sqrt(batch[i] / b_c);
            shape[i] = 1.0 / (u + 1.0 / u);
            const double w2 = weight[i] * weight[i];
            if (options.log_residuals) {
                num += w2 * (target[i] - std::log(shape[i]));
                den += w2;
            } else {
                num += w2 * target[i] * shape[i];
                den += w2 * shape[i] * shape[i];
            }
        }
        log_eta = options.log_residuals ? num / den : std::log(std::max(num / den, 1e-300));
        double chi2 = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double fit = options.log_residuals ? log_eta + std::log(shape[i]) : std::exp(log_eta) * shape[i];
            const double r = (target[i] - fit) * weight[i];
            chi2 += r * r;
        }
        return chi2;
    };

    const double lo_edge = std::log(batch.minCoeff()) - 8.0 * std::numbers::ln2;
    const double hi_edge = std::log(batch.maxCoeff()) + 8.0 * std::numbers::ln2;
    const double step = 0.05 * std::numbers::ln2;
    double best_log_bc = lo_edge;
    double best_log_eta = 0.0;
    double best_chi2 = profile(lo_edge, best_log_eta);
    for (double l = lo_edge + step; l <= hi_edge + 0.5 * step; l += step) {
        double le = 0.0;
        const double c = profile(l, le);
        if (c < best_chi2) best_chi2 = c, best_log_bc = l, best_log_eta = le;
    }
    {
        double lo = best_log_bc - step;
        double hi = best_log_bc + step;
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double unused = 0.0;
        double c = hi - g * (hi - lo);
        double d = lo + g * (hi - lo);
        double fc = profile(c, unused);
        double fd = profile(d, unused);
        for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
            if (fc < fd) {
                hi = d, d = c, fd = fc;
                c = hi - g * (hi - lo);
                fc = profile(c, unused);
            } else {
                lo = c, c = d, fc = fd;
                d = lo + g * (hi - lo);
                fd = profile(d, unused);
            }
        }
        double le = 0.0;
        const double mid = 0.5 * (lo + hi);
        const double cm = profile(mid, le);
        if (cm <= best_chi2) best_chi2 = cm, best_log_bc = mid, best_log_eta = le;
    }

    LevMarOptions<double> lm;
    lm.max_iterations = options.max_iterations;
    Vec theta_profile(2);
    theta_profile << best_log_eta, best_log_bc;
    auto result = levenberg_marquardt<double>(model, theta_profile, lm);
    // Second start at the classic guess: twice the highest optimum at its batch size.
    const auto peak = std::max_element(points.begin(), points.end(),
                                       [](const auto& a, const auto& b) { return a.eta_star < b.eta_star; });
    Vec theta_peak(2);
    theta_peak << std::log(2.0 * peak->eta_star), std::log(peak->batch_size);
    const auto alt = levenberg_marquardt<double>(model, theta_peak, lm);
    if (alt.x.allFinite() && alt.chi_square < result.chi_square) result = alt;

    SurgeParams out;
    out.variant = variant;
    out.tokens = tokens;
    out.eta_crit = std::exp(result.x[0]);
    out.b_crit = std::exp(result.x[1]);
    const Mat cov = relative_covariance<double>(result.jacobian, result.chi_square);
    // d(exp(theta)) = exp(theta) d(theta)
    out.sigma_eta_crit = out.eta_crit * std::sqrt(std::max(cov(0, 0), 0.0));
    out.sigma_b_crit = out.b_crit * std::sqrt(std::max(cov(1, 1), 0.0));
    out.diagnostics.residual_norm = std::sqrt(result.chi_square);
    out.diagnostics.n_points = static_cast<int>(n);
    out.diagnostics.converged = result.converged();
    out.diagnostics.iterations = result.iterations;
    return out;
}

std::vector<SurgePoint> surge_points(const OptimumTable& table, std::int64_t tokens) {
    std::vector<SurgePoint> pts;
    for (const auto& [key, cell] : table.entries) {
        if (key.second != tokens) continue;
        pts.push_back({static_cast<double>(key.first), cell.eta_star(), cell.eta_star_sigma()});
    }
    return pts;
}

SurgeFitSet fit_all_budgets(const OptimumTable& table, std::span<const FitVariant> variants,
                            const SurgeFitOptions& options) {
    SurgeFitSet out;
    for (std::int64_t t : table.budgets()) {
        const auto pts = surge_points(table, t);
        if (pts.size() < 3) {
            out.diagnostics.push_back("skipped budget tokens=" + std::to_string(t) + ": only " +
                                      std::to_string(pts.size()) + " batch sizes with optima, need 3");
            continue;
        }
        std::vector<SurgeParams> fits;
        for (FitVariant v : variants) {
            auto fit = fit_surge(pts, v, options, t);
            if (!fit.diagnostics.converged) {
                out.diagnostics.push_back("surge fit tokens=" + std::to_string(t) + " variant=" +
                                          std::string(to_string(v)) + " did not converge");
            }
            fits.push_back(fit);
        }
        out.fits.emplace(t, std::move(fits));
    }
    return out;
}

}  // namespace scalefit
