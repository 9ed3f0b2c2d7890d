#include "scalefit/profile.hpp"

#include "scalefit/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace scalefit {

LossProfile build_profile(const RunSet& runs, const ProfileContext& context) {
    // lr -> (loss sum, count); averaging seeds happens here when seed is unset.
    std::map<double, std::pair<double, int>> by_lr;
    for (const auto& r : runs) {
        if (r.batch_size != context.batch_size || r.tokens != context.tokens || r.d_model != context.d_model ||
            r.d_model_base != context.d_model_base) {
            continue;
        }
        if (context.seed && r.seed != *context.seed) continue;
        auto& [sum, n] = by_lr[r.lr];
        sum += r.val_loss;
        ++n;
    }
    if (by_lr.size() < 2) {
        throw DataError("profile (batch_size=" + std::to_string(context.batch_size) +
                        ", tokens=" + std::to_string(context.tokens) + ", d_model=" + std::to_string(context.d_model) +
                        ", d_model_base=" + std::to_string(context.d_model_base) + ") has " +
                        std::to_string(by_lr.size()) + " distinct learning rates, need at least 2");
    }
    LossProfile profile{context, {}};
    profile.points.reserve(by_lr.size());
    for (const auto& [lr, acc] : by_lr) profile.points.push_back({lr, acc.first / acc.second});
    return profile;
}

OptimumEstimate find_optimum(const LossProfile& profile, bool refine) {
    const auto& pts = profile.points;
    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        if (pts[i].val_loss < pts[best].val_loss) best = i;
    }
    OptimumEstimate out;
    out.eta_star = pts[best].lr;
    out.loss_min = pts[best].val_loss;

    const double here = std::log2(pts[best].lr);
    double resolution = std::numeric_limits<double>::infinity();
    if (best > 0) resolution = std::min(resolution, here - std::log2(pts[best - 1].lr));
    if (best + 1 < pts.size()) resolution = std::min(resolution, std::log2(pts[best + 1].lr) - here);
    out.grid_resolution = resolution;

    if (refine && best > 0 && best + 1 < pts.size()) {
        const double x0 = std::log2(pts[best - 1].lr);
        const double x2 = std::log2(pts[best + 1].lr);
        const double y0 = pts[best - 1].val_loss;
        const double y1 = pts[best].val_loss;
        const double y2 = pts[best + 1].val_loss;
        const double d0 = here - x0;
        const double d2 = here - x2;
        const double num = d0 * d0 * (y1 - y2) - d2 * d2 * (y1 - y0);
        const double den = d0 * (y1 - y2) - d2 * (y1 - y0);
        // den < 0 means the three points open upward (here is a strict-ish minimum).
        if (den < 0.0) {
            const double vertex = std::clamp(here - 0.5 * num / den, x0, x2);
            out.eta_star = std::exp2(vertex);
            out.refined = true;
        }
    }
    return out;
}

SensitivityCurve sensitivity_curve(const LossProfile& profile) {
    const auto opt = find_optimum(profile);
    SensitivityCurve curve;
    curve.eta_star = opt.eta_star;
    curve.loss_min = opt.loss_min;
    for (const auto& p : profile.points) {
        const double delta = p.val_loss - opt.loss_min;
        curve.normalized.push_back({p.lr / opt.eta_star, delta});
        curve.raw.push_back({p.lr, delta});
    }
    return curve;
}

BestLossTable best_loss_per_batch(const RunSet& runs, std::int64_t tokens) {
    std::set<std::pair<std::int64_t, std::int64_t>> models;
    std::set<std::int64_t> batches;
    for (const auto& r : runs) {
        if (r.tokens != tokens) continue;
        models.emplace(r.d_model, r.d_model_base);
        batches.insert(r.batch_size);
    }
    if (models.size() > 1) {
        throw DataError("best_loss_per_batch: records at tokens=" + std::to_string(tokens) +
                        " span several models; filter to one (d_model, d_model_base)");
    }
    BestLossTable table;
    if (models.empty()) return table;
    const auto [d_model, base] = *models.begin();
    for (std::int64_t b : batches) {
        LossProfile profile;
        try {
            profile = build_profile(runs, ProfileContext{b, tokens, d_model, base, std::nullopt});
        } catch (const DataError&) {
            continue;
        }
        const auto opt = find_optimum(profile);
        table.emplace(b, BestLossRow{opt.loss_min, opt.eta_star});
    }
    return table;
}

BatchOptimum optimal_batch(const BestLossTable& table) {
    if (table.empty()) throw DataError("optimal_batch: empty best-loss table");
    // Map iteration is ascending in batch size, so strict < keeps the smaller on ties.
    auto best = table.begin();
    for (auto it = std::next(table.begin()); it != table.end(); ++it) {
        if (it->second.loss_min < best->second.loss_min) best = it;
    }
    return {best->first, best->second.loss_min};
}

}  // namespace scalefit
