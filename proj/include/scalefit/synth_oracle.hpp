#pragma once

#include "scalefit/mup.hpp"
#include "scalefit/powerlaw_fit.hpp"
#include "scalefit/run_store.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace scalefit {

/// L(T) = c0 + c1 * T^c2 with c2 < 0.
struct BaseLossLaw {
    double c0 = 2.5;
    double c1 = 3.5e3;
    double c2 = -0.4;

    double operator()(double tokens) const;
};

enum class NoiseKind { lognormal, additive };

/// Ground-truth laws of a synthetic loss surface.
///
/// val_loss = L(T) + curvature_eta (log2 eta - log2 eta*(T,B))^2
///                 + curvature_b (log2 B - log2 B*(T))^2,
/// then multiplied by exp(eps) (lognormal) or shifted by eps (additive),
/// eps ~ Normal(0, noise_sigma).
struct OracleSpec {
    PowerLawParams eta_crit_law;
    PowerLawParams b_crit_law;
    PowerLawParams b_star_law;
    BaseLossLaw base_loss;
    double curvature_eta = 0.5;
    double curvature_b = 0.05;
    double noise_sigma = 0.0;
    NoiseKind noise_kind = NoiseKind::lognormal;
    std::uint64_t seed = 0;

    /// Final laws of the reference fits: eta_crit = 2e9 T^-1.3 + 3.1e-3,
    /// B_crit = 8e-5 T + 3e5, and B* = 8 sqrt(T) (2^18 at T = 2^30).
    static OracleSpec reference();
};

struct SynthPoint {
    double lr;
    std::int64_t batch_size;
    std::int64_t tokens;
    std::int64_t d_model;
    std::int64_t d_model_base;
    std::int64_t seed = 0;
};

double ground_truth_eta_star(const OracleSpec& spec, double tokens, double batch_size);
double ground_truth_b_star(const OracleSpec& spec, double tokens);

/// Noiseless surface value.
double surface_loss(const OracleSpec& spec, const SynthPoint& point);

/// splitmix64 finalizer; per-point noise streams are seeded with
/// mix64(spec.seed ^ mix64(index)).
std::uint64_t mix64(std::uint64_t x);

RunSet gen_surface(const OracleSpec& spec, std::span<const SynthPoint> grid);

/// Expands muP grid points across the given training seeds.
std::vector<SynthPoint> synth_points(std::span<const GridPoint> grid, std::span<const std::int64_t> seeds);

}  // namespace scalefit
