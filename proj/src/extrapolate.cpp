#include "scalefit/extrapolate.hpp"

#include "scalefit/error.hpp"

#include <cmath>

namespace scalefit {

std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::sub_critical: return "sub_critical";
        case Regime::critical: return "critical";
        case Regime::super_critical: return "super_critical";
    }
    return "unknown";
}

namespace {

const char* rule_for(Regime r) {
    switch (r) {
        case Regime::sub_critical: return "eta* ~ sqrt(B): grow the learning rate with the batch size";
        case Regime::critical: return "eta* tracks eta_crit: batch size follows B_crit";
        case Regime::super_critical: return "eta* ~ 1/sqrt(B): surge side, larger batches need smaller rates";
    }
    return "";
}

}  // namespace

RegimeInfo classify_regime(double batch_size, double b_crit, double tolerance_log2) {
    if (!(batch_size > 0.0) || !(b_crit > 0.0)) throw DataError("classify_regime: arguments must be positive");
    const double offset = std::log2(batch_size / b_crit);
    Regime regime = Regime::critical;
    if (std::abs(offset) > tolerance_log2) {
        regime = offset < 0.0 ? Regime::sub_critical : Regime::super_critical;
    }
    return {regime, rule_for(regime)};
}

PowerLawParams fit_bstar_drift(std::span<const DriftPoint> history, const BStarDriftOptions& options) {
    const std::size_t minimum = options.allow_exact ? 2 : 3;
    if (history.size() < minimum) {
        throw DataError("fit_bstar_drift: need at least " + std::to_string(minimum) + " (T, B*) points, got " +
                        std::to_string(history.size()));
    }
    std::vector<LawPoint> pts;
    for (const auto& h : history) {
        if (!(h.b_star > 0.0)) throw DataError("fit_bstar_drift: B* values must be positive");
        pts.push_back({h.tokens, h.b_star, 0.0});
    }
    PowerLawFitOptions fit;
    fit.sigma_policy = FitVariant::no_error;
    fit.allow_exact = options.allow_exact;
    if (options.zero_offset) fit.fixed_b = 0.0;
    auto law = fit_powerlaw(pts, LawTarget::b_star, fit);
    law.variant.reset();
    return law;
}

Recommendation recommend(double b_star_target, const PowerLawParams& b_crit_law, const PowerLawParams& eta_crit_law,
                         double t_target, const RecommendOptions& options) {
    if (!(t_target > 0.0)) throw DataError("recommend: target tokens must be positive");
    if (!(b_star_target > 0.0)) throw DataError("recommend: B* target must be positive");
    Recommendation rec;
    rec.t_target = t_target;
    rec.b_star_target = options.grid_snap ? std::exp2(std::round(std::log2(b_star_target))) : b_star_target;
    rec.b_crit_target = eval_powerlaw(b_crit_law, t_target);
    rec.eta_crit_target = eval_powerlaw(eta_crit_law, t_target);
    if (!(rec.b_crit_target > 0.0)) {
        throw DataError("recommend: b_crit law extrapolates to a non-positive value at T=" + std::to_string(t_target));
    }
    if (!(rec.eta_crit_target > 0.0)) {
        throw DataError("recommend: eta_crit law extrapolates to a non-positive value at T=" + std::to_string(t_target));
    }
    if (rec.b_star_target <= rec.b_crit_target) {
        rec.eta_star_target = rec.eta_crit_target * std::sqrt(rec.b_star_target / rec.b_crit_target);
    } else {
        rec.eta_star_target = rec.eta_crit_target * std::sqrt(rec.b_crit_target / rec.b_star_target);
    }
    const auto info = classify_regime(rec.b_star_target, rec.b_crit_target, options.regime_tolerance_log2);
    rec.regime = info.regime;
    rec.rule = info.rule;
    rec.b_crit_law = b_crit_law;
    rec.eta_crit_law = eta_crit_law;
    rec.b_star_source = options.b_star_source;
    return rec;
}

}  // namespace scalefit
