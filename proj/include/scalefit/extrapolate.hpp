#pragma once

#include "scalefit/powerlaw_fit.hpp"

#include <span>
#include <string>
#include <string_view>
#include <utility>

namespace scalefit {

enum class Regime { sub_critical, critical, super_critical };

std::string_view to_string(Regime r);

struct RegimeInfo {
    Regime regime;
    /// Which limiting rule of the surge curve applies on this side.
    std::string rule;
};

/// critical iff |log2(B / B_crit)| <= tolerance_log2.
RegimeInfo classify_regime(double batch_size, double b_crit, double tolerance_log2 = 1.0);

struct DriftPoint {
    double tokens;
    double b_star;
};

struct BStarDriftOptions {
    /// Pure power law B* = a T^alpha; false adds a free offset.
    bool zero_offset = true;
    /// Allow the exactly determined two-point fit.
    bool allow_exact = false;
};

PowerLawParams fit_bstar_drift(std::span<const DriftPoint> history, const BStarDriftOptions& options = {});

struct Recommendation {
    double t_target = 0.0;
    double b_star_target = 0.0;
    double b_crit_target = 0.0;
    double eta_crit_target = 0.0;
    double eta_star_target = 0.0;
    Regime regime = Regime::critical;
    std::string rule;
    PowerLawParams b_crit_law;
    PowerLawParams eta_crit_law;
    std::string b_star_source;
};

struct RecommendOptions {
    /// Snap B* to the nearest power of two before correcting eta.
    bool grid_snap = false;
    /// Regime label tolerance; 0 labels critical only at B* == B_crit.
    double regime_tolerance_log2 = 0.0;
    std::string b_star_source = "input";
};

Recommendation recommend(double b_star_target, const PowerLawParams& b_crit_law,
                         const PowerLawParams& eta_crit_law, double t_target,
                         const RecommendOptions& options = {});

}  // namespace scalefit
