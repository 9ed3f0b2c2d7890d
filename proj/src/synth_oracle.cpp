#include "scalefit/synth_oracle.hpp"

#include "scalefit/error.hpp"
#include "scalefit/surge_fit.hpp"

#include <cmath>
#include <numbers>

namespace scalefit {

double BaseLossLaw::operator()(double tokens) const { return c0 + c1 * std::pow(tokens, c2); }

OracleSpec OracleSpec::reference() {
    OracleSpec s;
    s.eta_crit_law.target = LawTarget::eta_crit;
    s.eta_crit_law.a = 2.0e9;
    s.eta_crit_law.alpha = -1.3;
    s.eta_crit_law.b = 3.1e-3;
    s.b_crit_law.target = LawTarget::b_crit;
    s.b_crit_law.a = 8.0e-5;
    s.b_crit_law.alpha = 1.0;
    s.b_crit_law.b = 3.0e5;
    s.b_star_law.target = LawTarget::b_star;
    s.b_star_law.a = 8.0;
    s.b_star_law.alpha = 0.5;
    s.b_star_law.b = 0.0;
    return s;
}

double ground_truth_eta_star(const OracleSpec& spec, double tokens, double batch_size) {
    return eval_surge(eval_powerlaw(spec.eta_crit_law, tokens), eval_powerlaw(spec.b_crit_law, tokens), batch_size);
}

double ground_truth_b_star(const OracleSpec& spec, double tokens) { return eval_powerlaw(spec.b_star_law, tokens); }

double surface_loss(const OracleSpec& spec, const SynthPoint& p) {
    const double tokens = static_cast<double>(p.tokens);
    const double batch = static_cast<double>(p.batch_size);
    const double base = spec.base_loss(tokens);
    if (!(base > 0.0)) throw DataError("oracle: base loss law is not positive at T=" + std::to_string(p.tokens));
    const double eta_off = std::log2(p.lr) - std::log2(ground_truth_eta_star(spec, tokens, batch));
    const double b_star = ground_truth_b_star(spec, tokens);
    if (!(b_star > 0.0)) throw DataError("oracle: B* law is not positive at T=" + std::to_string(p.tokens));
    const double b_off = std::log2(batch) - std::log2(b_star);
    return base + spec.curvature_eta * eta_off * eta_off + spec.curvature_b * b_off * b_off;
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {

// Box-Muller on two splitmix64 draws; portable bit-for-bit, unlike
// std::normal_distribution whose algorithm is implementation-defined.
double standard_normal(std::uint64_t state) {
    const std::uint64_t a = mix64(state);
    const std::uint64_t b = mix64(state + 0x9e3779b97f4a7c15ULL);
    constexpr double kScale = 0x1.0p-53;
    const double u1 = static_cast<double>((a >> 11) + 1) * kScale;  // (0, 1]
    const double u2 = static_cast<double>(b >> 11) * kScale;        // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

RunSet gen_surface(const OracleSpec& spec, std::span<const SynthPoint> grid) {
    if (grid.empty()) throw DataError("oracle: empty grid");
    if (spec.noise_sigma < 0.0) throw DataError("oracle: noise_sigma must be non-negative");
    std::vector<RunRecord> records;
    records.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto& p = grid[i];
        double loss = surface_loss(spec, p);
        if (spec.noise_sigma > 0.0) {
            const double eps = spec.noise_sigma * standard_normal(mix64(spec.seed ^ mix64(i)));
            loss = spec.noise_kind == NoiseKind::lognormal ? loss * std::exp(eps) : loss + eps;
            if (!(loss > 0.0)) throw DataError("oracle: additive noise drove a loss non-positive");
        }
        RunRecord r;
        r.run_id = run_id_for(GridPoint{p.lr, p.batch_size, p.tokens, p.d_model, p.d_model_base}, p.seed);
        r.d_model = p.d_model;
        r.d_model_base = p.d_model_base;
        r.batch_size = p.batch_size;
        r.lr = p.lr;
        r.seed = p.seed;
        r.tokens = p.tokens;
        r.val_loss = loss;
        records.push_back(std::move(r));
    }
    return RunSet(std::move(records), "synthetic oracle");
}

std::vector<SynthPoint> synth_points(std::span<const GridPoint> grid, std::span<const std::int64_t> seeds) {
    std::vector<SynthPoint> out;
    out.reserve(grid.size() * seeds.size());
    for (const auto& g : grid) {
        for (std::int64_t s : seeds) out.push_back({g.lr, g.batch_size, g.tokens, g.d_model, g.d_model_base, s});
    }
    return out;
}

}  // namespace scalefit
