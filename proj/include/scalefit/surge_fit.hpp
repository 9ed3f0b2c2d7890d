#pragma once

#include "scalefit/run_store.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scalefit {

/// How points without an uncertainty are weighted in a fit.
enum class FitVariant {
    no_error,    // every point weighted 1, sigmas ignored
    eps_floor,   // zero sigmas replaced by 1e-15
    mean_sigma,  // zero sigmas replaced by the mean of the nonzero ones
};

inline constexpr std::array<FitVariant, 3> kAllVariants{FitVariant::no_error, FitVariant::eps_floor,
                                                        FitVariant::mean_sigma};
inline constexpr double kEpsilonSigma = 1e-15;

std::string_view to_string(FitVariant v);
/// Accepts the canonical names and the CLI spellings (no-error, eps, mean-sigma).
FitVariant parse_variant(std::string_view name);
std::string_view sigma_policy(FitVariant v);

/// Per-point sigmas to divide residuals by. When no point carries a nonzero
/// sigma under mean_sigma, all points fall back to weight 1.
std::vector<double> effective_sigmas(std::span<const double> sigmas, FitVariant variant);

struct FitDiagnostics {
    double residual_norm = 0.0;  // norm of the weighted residual vector
    int n_points = 0;
    bool converged = false;
    int iterations = 0;
};

/// Fitted surge-curve parameters for one token budget and one variant.
struct SurgeParams {
    double eta_crit = 0.0;
    double b_crit = 0.0;
    double sigma_eta_crit = 0.0;
    double sigma_b_crit = 0.0;
    FitVariant variant = FitVariant::no_error;
    std::int64_t tokens = 0;
    FitDiagnostics diagnostics;
};

/// eta*(B) = eta_crit / (sqrt(B/B_crit) + sqrt(B_crit/B)); peak eta_crit/2 at B_crit.
double eval_surge(double eta_crit, double b_crit, double batch_size);

struct SurgePoint {
    double batch_size;
    double eta_star;
    double sigma;
};

struct SurgeFitOptions {
    /// Residuals in log(eta*) instead of eta*; sigmas become sigma/eta*.
    bool log_residuals = false;
    int max_iterations = 200;
};

SurgeParams fit_surge(std::span<const SurgePoint> points, FitVariant variant, const SurgeFitOptions& options = {},
                      std::int64_t tokens = 0);

struct SurgeFitSet {
    /// tokens -> one fit per requested variant, in kAllVariants order.
    std::map<std::int64_t, std::vector<SurgeParams>> fits;
    std::vector<std::string> diagnostics;
};

std::vector<SurgePoint> surge_points(const OptimumTable& table, std::int64_t tokens);

SurgeFitSet fit_all_budgets(const OptimumTable& table, std::span<const FitVariant> variants = kAllVariants,
                            const SurgeFitOptions& options = {});

}  // namespace scalefit
