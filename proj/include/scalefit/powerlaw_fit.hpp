#pragma once

#include "scalefit/surge_fit.hpp"

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace scalefit {

enum class LawTarget { eta_crit, b_crit, b_star };

std::string_view to_string(LawTarget t);
LawTarget parse_target(std::string_view name);

/// p(T) = a * T^alpha + b with one-sigma uncertainties.
struct PowerLawParams {
    LawTarget target = LawTarget::b_crit;
    double a = 0.0;
    double alpha = 0.0;
    double b = 0.0;
    double sigma_a = 0.0;
    double sigma_alpha = 0.0;
    double sigma_b = 0.0;
    bool fixed_alpha = false;
    bool fixed_b = false;
    std::optional<FitVariant> variant;
    FitDiagnostics diagnostics;
};

double eval_powerlaw(const PowerLawParams& params, double tokens);

struct LawPoint {
    double tokens;
    double value;
    double sigma;
};

struct PowerLawFitOptions {
    /// Weighting of the points' sigmas; see effective_sigmas.
    FitVariant sigma_policy = FitVariant::mean_sigma;
    /// Pin the offset (the B* drift uses b = 0).
    std::optional<double> fixed_b;
    /// Permit an exactly determined fit (as many points as free parameters);
    /// sigmas are then reported as +inf.
    bool allow_exact = false;
    double alpha_min = -6.0;
    double alpha_max = 6.0;
};

PowerLawParams fit_powerlaw(std::span<const LawPoint> points, LawTarget target,
                            const PowerLawFitOptions& options = {});

/// Two-parameter weighted linear solve for (a, b) in the (T^alpha, 1) basis.
PowerLawParams refit_fixed_exponent(std::span<const LawPoint> points, LawTarget target, double alpha_fixed,
                                    FitVariant sigma_policy = FitVariant::mean_sigma);

struct ConsolidatedExponent {
    LawTarget target = LawTarget::b_crit;
    double alpha_hat = 0.0;
    double sigma = 0.0;
    struct Contribution {
        double alpha;
        double sigma;
    };
    std::vector<Contribution> contributing;
};

/// Mean exponent; sigma^2 = population variance across variants plus the
/// square of the mean per-fit sigma.
ConsolidatedExponent consolidate_exponent(std::span<const PowerLawParams> per_variant);

/// Extract the (T, p, sigma) series of one critical parameter from per-budget fits.
std::vector<LawPoint> law_points(const SurgeFitSet& fits, FitVariant variant, LawTarget target);

}  // namespace scalefit
