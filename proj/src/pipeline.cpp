#include "scalefit/pipeline.hpp"

#include "scalefit/error.hpp"
#include "scalefit/format.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace scalefit {

namespace {

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const StageError&) {
        throw;
    } catch (const DataError& e) {
        throw StageError(name, e.what());
    }
}

Json optional_real(const std::optional<double>& v) { return v ? real(*v) : Json(nullptr); }

Json optional_int(const std::optional<std::int64_t>& v) { return v ? Json(*v) : Json(nullptr); }

// Points used for the fixed-exponent refit: the mean-sigma series when it was
// fitted, else the first requested variant.
FitVariant refit_variant(const std::vector<FitVariant>& variants) {
    for (auto v : variants) {
        if (v == FitVariant::mean_sigma) return v;
    }
    return variants.front();
}

}  // namespace

PipelineReport run_pipeline(const PipelineConfig& config) {
    const auto [runs, digest] = stage("ingest", [&] {
        std::ifstream in(config.input, std::ios::binary);
        if (!in) throw DataError("cannot open '" + config.input + "'");
        std::ostringstream buffer;
        buffer << in.rdbuf();
        const std::string bytes = buffer.str();
        std::istringstream text(bytes);
        return std::pair{ingest_csv(text, config.input), content_digest(bytes)};
    });
    return run_pipeline(runs, digest, config);
}

PipelineReport run_pipeline(const RunSet& input, const std::string& digest, const PipelineConfig& config) {
    if (config.variants.empty()) throw StageError("config", "no fit variants selected");

    PipelineReport report;
    report.input_digest = digest;
    report.provenance = input.provenance();
    if (input.pending() > 0) {
        report.warnings.push_back(std::to_string(input.pending()) + " rows without val_loss were skipped");
    }

    const RunSet runs = stage("select", [&] {
        std::set<std::int64_t> bases;
        for (const auto& r : input) bases.insert(r.d_model_base);
        if (bases.empty()) throw DataError("no records");
        std::int64_t base = *bases.begin();
        if (config.d_model_base) {
            base = *config.d_model_base;
            if (!bases.contains(base)) throw DataError("no records with d_model_base=" + std::to_string(base));
        } else if (bases.size() > 1) {
            throw DataError("input holds several muP families; choose one with d_model_base");
        }
        RunFilter f;
        f.d_model_base = Range<std::int64_t>::exactly(base);
        return filter(input, f);
    });
    const std::int64_t base = runs.records().front().d_model_base;

    report.optima = stage("aggregate", [&] {
        return aggregate_optima(runs, AggregateOptions{config.group_by_mup_family, config.refine_optimum});
    });
    for (const auto& d : report.optima.diagnostics) report.warnings.push_back(d);

    report.surge = stage("fit-surge", [&] { return fit_all_budgets(report.optima, config.variants); });
    for (const auto& d : report.surge.diagnostics) report.warnings.push_back(d);

    stage("fit-powerlaw", [&] {
        const auto budgets = report.surge.fits.size();
        if (budgets < 4) throw DataError("need ≥ 4 budgets, got " + std::to_string(budgets));
        for (auto target : {LawTarget::b_crit, LawTarget::eta_crit}) {
            for (auto variant : config.variants) {
                const auto points = law_points(report.surge, variant, target);
                PowerLawFitOptions options;
                options.sigma_policy = variant;
                auto fit = fit_powerlaw(points, target, options);
                fit.variant = variant;
                if (!fit.diagnostics.converged) {
                    report.warnings.push_back("power-law fit of " + std::string(to_string(target)) + " (" +
                                              std::string(to_string(variant)) + ") did not converge");
                }
                report.powerlaw_fits.push_back(fit);
            }
        }
    });

    stage("consolidate", [&] {
        std::vector<PowerLawParams> b_fits;
        std::vector<PowerLawParams> eta_fits;
        for (const auto& f : report.powerlaw_fits) (f.target == LawTarget::b_crit ? b_fits : eta_fits).push_back(f);
        report.alpha_b = consolidate_exponent(b_fits);
        report.alpha_eta = consolidate_exponent(eta_fits);
    });

    stage("refit", [&] {
        const auto variant = refit_variant(config.variants);
        const double alpha_b = config.fix_exponent.value_or(report.alpha_b.alpha_hat);
        const double alpha_eta = config.fix_exponent_eta.value_or(report.alpha_eta.alpha_hat);
        report.b_crit_law =
            refit_fixed_exponent(law_points(report.surge, variant, LawTarget::b_crit), LawTarget::b_crit, alpha_b, variant);
        report.eta_crit_law = refit_fixed_exponent(law_points(report.surge, variant, LawTarget::eta_crit),
                                                   LawTarget::eta_crit, alpha_eta, variant);
        report.b_crit_law.variant = variant;
        report.eta_crit_law.variant = variant;
    });

    stage("best-batch", [&] {
        const std::int64_t d_ref = config.reference_d_model.value_or(base);
        RunFilter f;
        f.d_model = Range<std::int64_t>::exactly(d_ref);
        const RunSet model = filter(runs, f);
        if (model.empty()) {
            report.warnings.push_back("no runs of the reference model d_model=" + std::to_string(d_ref) +
                                      "; best-batch tables skipped");
            return;
        }
        std::set<std::int64_t> budgets;
        std::set<std::int64_t> batches;
        for (const auto& r : model) {
            budgets.insert(r.tokens);
            batches.insert(r.batch_size);
        }
        for (std::int64_t t : budgets) {
            auto table = best_loss_per_batch(model, t);
            if (table.empty()) {
                report.warnings.push_back("no complete loss profile at tokens=" + std::to_string(t));
                continue;
            }
            report.b_star.emplace(t, optimal_batch(table));
            report.best_loss.emplace(t, std::move(table));
            for (std::int64_t b : batches) {
                try {
                    const auto profile = build_profile(model, ProfileContext{b, t, d_ref, base, std::nullopt});
                    report.sensitivity[t].emplace(b, sensitivity_curve(profile));
                } catch (const DataError&) {
                    // Already reported by the best-loss table (batch left out).
                }
            }
        }
    });

    stage("b-star-drift", [&] {
        std::vector<DriftPoint> history;
        for (const auto& [t, opt] : report.b_star) {
            history.push_back({static_cast<double>(t), static_cast<double>(opt.batch_size)});
        }
        if (history.size() < 2) {
            report.warnings.push_back("B* drift not fitted: fewer than 2 budgets with a best batch size");
            return;
        }
        BStarDriftOptions options;
        if (history.size() == 2) {
            options.allow_exact = true;
            report.warnings.push_back("B* drift fitted exactly through 2 points; no uncertainty available");
        }
        report.b_star_drift = fit_bstar_drift(history, options);
    });

    if (config.target_tokens) {
        stage("recommend", [&] {
            if (!report.b_star_drift) throw DataError("no B* drift fit available to extrapolate B*");
            const double t = *config.target_tokens;
            RecommendOptions options;
            options.grid_snap = config.grid_snap;
            options.b_star_source = "b_star_drift";
            report.recommendation = recommend(eval_powerlaw(*report.b_star_drift, t), report.b_crit_law,
                                              report.eta_crit_law, t, options);
            if (report.recommendation->b_star_target < report.recommendation->b_crit_target) {
                report.warnings.push_back("B* target lies below B_crit target at T=" + format_shortest(t));
            }
        });
    }
    return report;
}

Json PipelineReport::to_json(const PipelineConfig& config) const {
    Json j;
    j["tool"] = "scalefit";
    j["version"] = kToolVersion;
    j["input_digest"] = input_digest;
    j["provenance"] = provenance;

    Json cfg;
    Json variants = Json::array();
    for (auto v : config.variants) variants.push_back(std::string(scalefit::to_string(v)));
    cfg["variants"] = variants;
    cfg["fix_exponent"] = optional_real(config.fix_exponent);
    cfg["fix_exponent_eta"] = optional_real(config.fix_exponent_eta);
    cfg["target_tokens"] = optional_real(config.target_tokens);
    cfg["grid_snap"] = config.grid_snap;
    cfg["group_by_mup_family"] = config.group_by_mup_family;
    cfg["refine_optimum"] = config.refine_optimum;
    cfg["d_model_base"] = optional_int(config.d_model_base);
    cfg["reference_d_model"] = optional_int(config.reference_d_model);
    j["config"] = cfg;

    j["optima"] = scalefit::to_json(optima);

    Json surge_json = Json::array();
    for (const auto& [t, fits] : surge.fits) {
        Json per = Json::array();
        for (const auto& f : fits) per.push_back(scalefit::to_json(f));
        surge_json.push_back(Json{{"tokens", t}, {"fits", per}});
    }
    j["surge_fits"] = surge_json;

    Json pl = Json::array();
    for (const auto& f : powerlaw_fits) pl.push_back(scalefit::to_json(f));
    j["powerlaw_fits"] = pl;
    j["consolidated"] = Json{{"b_crit", scalefit::to_json(alpha_b)}, {"eta_crit", scalefit::to_json(alpha_eta)}};
    j["final_laws"] = Json{{"b_crit", scalefit::to_json(b_crit_law)}, {"eta_crit", scalefit::to_json(eta_crit_law)}};

    Json best = Json::array();
    for (const auto& [t, table] : best_loss) best.push_back(Json{{"tokens", t}, {"rows", scalefit::to_json(table)}});
    j["best_loss"] = best;
    Json bstar = Json::array();
    for (const auto& [t, opt] : b_star) {
        bstar.push_back(Json{{"tokens", t}, {"batch_size", opt.batch_size}, {"loss", real(opt.loss)}});
    }
    j["b_star"] = bstar;
    j["b_star_drift"] = b_star_drift ? scalefit::to_json(*b_star_drift) : Json(nullptr);
    j["recommendation"] = recommendation ? scalefit::to_json(*recommendation) : Json(nullptr);

    Json sens = Json::array();
    for (const auto& [t, by_batch] : sensitivity) {
        for (const auto& [b, curve] : by_batch) {
            Json row{{"tokens", t}, {"batch_size", b}};
            const Json body = scalefit::to_json(curve);
            for (const auto& [key, value] : body.items()) row[key] = value;
            sens.push_back(row);
        }
    }
    j["sensitivity"] = sens;
    j["warnings"] = warnings;
    return j;
}

void write_artifacts(const PipelineReport& report, const PipelineConfig& config, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StageError("write", "cannot create '" + dir + "': " + ec.message());

    const Json full = report.to_json(config);
    auto write = [&](const char* name, const Json& j) {
        const auto path = fs::path(dir) / name;
        std::ofstream out(path, std::ios::binary);
        out << dump(j);
        if (!out) throw StageError("write", "cannot write '" + path.string() + "'");
    };
    write("report.json", full);
    write("optima.json", full["optima"]);
    write("surge_fits.json", full["surge_fits"]);
    write("powerlaw_fits.json", full["powerlaw_fits"]);
    write("b_crit_law.json", full["final_laws"]["b_crit"]);
    write("eta_crit_law.json", full["final_laws"]["eta_crit"]);
    write("warnings.json", full["warnings"]);
}

}  // namespace scalefit
