#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scalefit {

/// Parameter classes of the muP table.
enum class ParamClass { embedding, hidden, output, vector_like };

std::string_view to_string(ParamClass c);

struct Multipliers {
    double lr = 1.0;
    double init_std = 1.0;
    double output = 1.0;

    friend bool operator==(const Multipliers&, const Multipliers&) = default;
};

struct MupModelSpec {
    std::int64_t d_model = 0;
    std::int64_t d_model_base = 0;
    double width_ratio = 1.0;
    double init_sigma_base = 0.0;
    std::map<ParamClass, Multipliers> multipliers;
    static constexpr std::int64_t kHeadDim = 128;
    /// d_model / 128 when divisible (heads scale with width).
    std::optional<std::int64_t> n_heads;
};

MupModelSpec width_multipliers(std::int64_t d_model, std::int64_t d_model_base);

/// 1 / sqrt(d_model_base).
double init_sigma_base(std::int64_t d_model_base);

struct GridPoint {
    double lr;
    std::int64_t batch_size;
    std::int64_t tokens;
    std::int64_t d_model;
    std::int64_t d_model_base;
};

struct GridAxes {
    /// Learning-rate axis per base width.
    std::map<std::int64_t, std::vector<double>> lr_by_base;
    std::vector<std::int64_t> batch_sizes;
    std::vector<std::int64_t> tokens;
    std::vector<std::int64_t> d_models;
    std::vector<std::int64_t> bases;

    static GridAxes defaults();
};

/// Order: base, d_model, batch size, lr, tokens (innermost), so snapshots of
/// one continued run are adjacent.
std::vector<GridPoint> enumerate_grid(const GridAxes& axes = GridAxes::defaults());

/// Geometric axis 2^lo, 2^(lo+step), ..., 2^hi.
std::vector<double> pow2_axis(double lo_exp, double hi_exp, double step);

/// Stable id shared by all token snapshots of one run.
std::string run_id_for(const GridPoint& p, std::int64_t seed = 0);

}  // namespace scalefit
