#pragma once

#include "scalefit/extrapolate.hpp"
#include "scalefit/powerlaw_fit.hpp"
#include "scalefit/profile.hpp"
#include "scalefit/report_json.hpp"
#include "scalefit/run_store.hpp"
#include "scalefit/surge_fit.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace scalefit {

inline constexpr const char* kToolVersion = "0.1.0";

struct PipelineConfig {
    std::string input;
    std::vector<FitVariant> variants{kAllVariants.begin(), kAllVariants.end()};
    /// Override the consolidated exponent of the B_crit / eta_crit refit.
    std::optional<double> fix_exponent;
    std::optional<double> fix_exponent_eta;
    std::optional<double> target_tokens;
    bool grid_snap = false;
    std::optional<std::string> out_dir;
    bool group_by_mup_family = true;
    bool refine_optimum = false;
    /// Restrict to one muP family; required when the input holds several.
    std::optional<std::int64_t> d_model_base;
    /// Model used for the best-loss / B* drift tables; defaults to d_model == base.
    std::optional<std::int64_t> reference_d_model;
};

struct PipelineReport {
    std::string input_digest;
    std::string provenance;
    OptimumTable optima;
    SurgeFitSet surge;
    /// Per variant, per target free power-law fits.
    std::vector<PowerLawParams> powerlaw_fits;
    ConsolidatedExponent alpha_b;
    ConsolidatedExponent alpha_eta;
    PowerLawParams b_crit_law;
    PowerLawParams eta_crit_law;
    std::map<std::int64_t, BestLossTable> best_loss;
    std::map<std::int64_t, BatchOptimum> b_star;
    std::optional<PowerLawParams> b_star_drift;
    std::optional<Recommendation> recommendation;
    /// tokens -> batch size -> sensitivity of the reference model.
    std::map<std::int64_t, std::map<std::int64_t, SensitivityCurve>> sensitivity;
    std::vector<std::string> warnings;

    Json to_json(const PipelineConfig& config) const;
};

/// Runs ingestion, optimum aggregation, per-budget surge fits, power-law
/// fits per variant, exponent consolidation, fixed-exponent refits and, when
/// possible, the B* drift and a recommendation. Stage failures throw
/// StageError; skipped cells and budgets land in warnings.
PipelineReport run_pipeline(const PipelineConfig& config);
PipelineReport run_pipeline(const RunSet& runs, const std::string& digest, const PipelineConfig& config);

/// Writes report.json, optima.json, surge_fits.json, powerlaw_fits.json,
/// b_crit_law.json, eta_crit_law.json and warnings.json into `dir`.
void write_artifacts(const PipelineReport& report, const PipelineConfig& config, const std::string& dir);

}  // namespace scalefit
