#include "scalefit/mup.hpp"

#include "scalefit/error.hpp"
#include "scalefit/format.hpp"

#include <cmath>

namespace scalefit {

std::string_view to_string(ParamClass c) {
    switch (c) {
        case ParamClass::embedding: return "embedding";
        case ParamClass::hidden: return "hidden";
        case ParamClass::output: return "output";
        case ParamClass::vector_like: return "vector_like";
    }
    return "unknown";
}

double init_sigma_base(std::int64_t d_model_base) {
    if (d_model_base < 1) throw DataError("d_model_base must be positive");
    return 1.0 / std::sqrt(static_cast<double>(d_model_base));
}

// Adam rules of the muP table, relative to the base width (m = d / d_base):
//   embedding and vector-like (biases, norms): unchanged
//   hidden matrices: lr / m, init std / sqrt(m)
//   output logits: forward multiplier 1 / m
// With d_head fixed the attention scale does not depend on m.
MupModelSpec width_multipliers(std::int64_t d_model, std::int64_t d_model_base) {
    if (d_model < 1 || d_model_base < 1) throw DataError("widths must be positive");
    MupModelSpec spec;
    spec.d_model = d_model;
    spec.d_model_base = d_model_base;
    spec.width_ratio = static_cast<double>(d_model) / static_cast<double>(d_model_base);
    spec.init_sigma_base = init_sigma_base(d_model_base);
    const double m = spec.width_ratio;
    spec.multipliers[ParamClass::embedding] = {1.0, 1.0, 1.0};
    spec.multipliers[ParamClass::hidden] = {1.0 / m, 1.0 / std::sqrt(m), 1.0};
    spec.multipliers[ParamClass::output] = {1.0, 1.0, 1.0 / m};
    spec.multipliers[ParamClass::vector_like] = {1.0, 1.0, 1.0};
    if (d_model % MupModelSpec::kHeadDim == 0) spec.n_heads = d_model / MupModelSpec::kHeadDim;
    return spec;
}

std::vector<double> pow2_axis(double lo_exp, double hi_exp, double step) {
    if (!(step > 0.0)) throw DataError("axis step must be positive");
    std::vector<double> out;
    const auto count = static_cast<int>(std::floor((hi_exp - lo_exp) / step + 1e-9)) + 1;
    for (int i = 0; i < count; ++i) out.push_back(std::exp2(lo_exp + step * i));
    return out;
}

GridAxes GridAxes::defaults() {
    GridAxes axes;
    axes.lr_by_base[1024] = pow2_axis(-12.0, -7.0, 0.5);
    axes.lr_by_base[256] = pow2_axis(-11.0, -6.0, 1.0);
    for (int e = 16; e <= 26; e += 2) axes.batch_sizes.push_back(std::int64_t{1} << e);
    for (int e = 30; e <= 35; ++e) axes.tokens.push_back(std::int64_t{1} << e);
    axes.d_models = {256, 512, 1024};
    axes.bases = {256, 1024};
    return axes;
}

std::vector<GridPoint> enumerate_grid(const GridAxes& axes) {
    std::vector<GridPoint> out;
    for (std::int64_t base : axes.bases) {
        auto it = axes.lr_by_base.find(base);
        if (it == axes.lr_by_base.end()) {
            throw DataError("grid: no learning-rate axis for base width " + std::to_string(base));
        }
        for (std::int64_t d : axes.d_models) {
            for (std::int64_t b : axes.batch_sizes) {
                for (double lr : it->second) {
                    for (std::int64_t t : axes.tokens) out.push_back({lr, b, t, d, base});
                }
            }
        }
    }
    return out;
}

std::string run_id_for(const GridPoint& p, std::int64_t seed) {
    std::string id = "d" + std::to_string(p.d_model) + "-base" + std::to_string(p.d_model_base) + "-bs" +
                     std::to_string(p.batch_size) + "-lr";
    const double e = std::log2(p.lr);
    // Half-integer exponents (the default axes) read better as 2^e.
    if (std::exp2(std::round(e * 2.0) / 2.0) == p.lr) {
        id += "2^" + format_shortest(std::round(e * 2.0) / 2.0);
    } else {
        id += format_shortest(p.lr);
    }
    if (seed != 0) id += "-s" + std::to_string(seed);
    return id;
}

}  // namespace scalefit
