#pragma once

#include "scalefit/run_store.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace scalefit {

struct ProfileContext {
    std::int64_t batch_size = 0;
    std::int64_t tokens = 0;
    std::int64_t d_model = 0;
    std::int64_t d_model_base = 0;
    /// Unset: losses at a shared learning rate are averaged across seeds.
    std::optional<std::int64_t> seed;
};

struct ProfilePoint {
    double lr;
    double val_loss;
};

/// Validation loss against peak learning rate, strictly increasing in lr.
struct LossProfile {
    ProfileContext context;
    std::vector<ProfilePoint> points;
};

struct OptimumEstimate {
    double eta_star = 0.0;
    double loss_min = 0.0;
    /// Smallest log2 distance from the optimum to a neighbouring grid point.
    double grid_resolution = 0.0;
    /// True when eta_star came from the parabola refinement.
    bool refined = false;
};

struct SensitivityPoint {
    double x;  // eta/eta* (normalized) or eta (raw)
    double delta_loss;
};

struct SensitivityCurve {
    double eta_star = 0.0;
    double loss_min = 0.0;
    std::vector<SensitivityPoint> normalized;
    std::vector<SensitivityPoint> raw;
};

LossProfile build_profile(const RunSet& runs, const ProfileContext& context);

/// Grid argmin, ties toward the smaller learning rate. With `refine` set and
/// an interior argmin, the vertex of the parabola through the three points
/// around it (in log2 eta) replaces eta_star; loss_min stays the grid minimum.
OptimumEstimate find_optimum(const LossProfile& profile, bool refine = false);

SensitivityCurve sensitivity_curve(const LossProfile& profile);

struct BestLossRow {
    double loss_min;
    double eta_star;
};

/// batch_size -> best loss over the learning-rate grid.
using BestLossTable = std::map<std::int64_t, BestLossRow>;

/// The set must hold a single (d_model, d_model_base) model at `tokens`;
/// batch sizes with fewer than two learning rates are left out.
BestLossTable best_loss_per_batch(const RunSet& runs, std::int64_t tokens);

struct BatchOptimum {
    std::int64_t batch_size;
    double loss;
};

/// Argmin over batch sizes, ties toward the smaller batch.
BatchOptimum optimal_batch(const BestLossTable& table);

}  // namespace scalefit
