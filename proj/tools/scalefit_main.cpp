// scalefit command-line entry point.
//
// Exit codes: 0 success, 1 usage error, 2 data or fit error.

#include "scalefit/error.hpp"
#include "scalefit/format.hpp"
#include "scalefit/mup.hpp"
#include "scalefit/noise_scale.hpp"
#include "scalefit/pipeline.hpp"
#include "scalefit/profile.hpp"
#include "scalefit/report_json.hpp"
#include "scalefit/run_store.hpp"
#include "scalefit/schedule.hpp"
#include "scalefit/synth_oracle.hpp"

#include <CLI11.hpp>

#include <bit>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace scalefit;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const std::vector<std::string> kVariantNames{"no-error", "eps", "mean-sigma", "all",
                                             "no_error", "eps_floor", "mean_sigma"};

std::int64_t to_int(const std::string& text, const std::string& what) {
    std::int64_t v = 0;
    if (!parse_integer(text, v)) throw UsageError(what + ": not an integer: '" + text + "'");
    return v;
}

double to_real(const std::string& text, const std::string& what) {
    double v = 0.0;
    if (!parse_real(text, v)) throw UsageError(what + ": not a number: '" + text + "'");
    return v;
}

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
}

// Writes to `path`, or stdout for "-" / empty.
void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw DataError("cannot write '" + path + "'");
}

std::string tokens_label(std::int64_t t) {
    if (t > 0 && (t & (t - 1)) == 0) return "2^" + std::to_string(std::countr_zero(static_cast<std::uint64_t>(t)));
    return std::to_string(t);
}

std::vector<FitVariant> variants_from(const std::string& name) {
    if (name.empty() || name == "all") return {kAllVariants.begin(), kAllVariants.end()};
    return {parse_variant(name)};
}

// Values from --config; CLI flags take precedence, then the config file, then defaults.
class Settings {
public:
    void load(const std::string& path) {
        if (path.empty()) return;
        config_ = read_json_file(path);
        if (!config_.is_object()) throw DataError("config '" + path + "' must hold a JSON object");
    }

    std::optional<std::string> value(const CLI::Option* opt, const std::string& cli, const char* key) const {
        if (opt->count() > 0) return cli;
        auto it = config_.find(key);
        if (it == config_.end() || it->is_null()) return std::nullopt;
        if (it->is_string()) return it->get<std::string>();
        if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
        if (it->is_number()) return format_shortest(it->get<double>());
        throw DataError(std::string("config key '") + key + "' must be a string or number");
    }

    bool flag(const CLI::Option* opt, const char* key) const {
        if (opt->count() > 0) return true;
        auto it = config_.find(key);
        if (it == config_.end() || it->is_null()) return false;
        if (!it->is_boolean()) throw DataError(std::string("config key '") + key + "' must be a boolean");
        return it->get<bool>();
    }

private:
    Json config_ = Json::object();
};

// Options shared by the pipeline-driven subcommands.
struct PipelineFlags {
    std::string input, variant, fix_exponent, fix_exponent_eta, target_tokens, base, reference_d_model, out;
    CLI::Option *o_input, *o_variant, *o_fix, *o_fix_eta, *o_target, *o_snap, *o_base, *o_ref, *o_refine, *o_no_group,
        *o_out;

    void attach(CLI::App* cmd, bool with_target, bool with_out) {
        o_input = cmd->add_option("--input", input, "Runs CSV");
        o_variant = cmd->add_option("--variant", variant, "Fit variant")->check(CLI::IsMember(kVariantNames));
        o_fix = cmd->add_option("--fix-exponent", fix_exponent, "Fixed B_crit exponent for the final refit");
        o_fix_eta = cmd->add_option("--fix-exponent-eta", fix_exponent_eta, "Fixed eta_crit exponent for the final refit");
        o_target = with_target ? cmd->add_option("--target-tokens", target_tokens, "Extrapolation horizon") : nullptr;
        o_snap = cmd->add_flag("--grid-snap", "Snap the recommended B* to a power of two");
        o_base = cmd->add_option("--base", base, "muP family (d_model_base) to analyse");
        o_ref = cmd->add_option("--reference-d-model", reference_d_model, "Model used for best-batch tables");
        o_refine = cmd->add_flag("--refine", "Log-parabola refinement of each grid optimum");
        o_no_group = cmd->add_flag("--no-group", "Require a single model instead of averaging a muP family");
        o_out = with_out ? cmd->add_option("--out", out, "Output directory") : nullptr;
    }

    PipelineConfig resolve(const Settings& s) const {
        PipelineConfig c;
        const auto in = s.value(o_input, input, "input");
        if (!in) throw UsageError("--input is required");
        c.input = *in;
        c.variants = variants_from(s.value(o_variant, variant, "variant").value_or("all"));
        if (auto v = s.value(o_fix, fix_exponent, "fix_exponent")) c.fix_exponent = to_real(*v, "--fix-exponent");
        if (auto v = s.value(o_fix_eta, fix_exponent_eta, "fix_exponent_eta")) {
            c.fix_exponent_eta = to_real(*v, "--fix-exponent-eta");
        }
        if (o_target) {
            if (auto v = s.value(o_target, target_tokens, "target_tokens")) {
                c.target_tokens = to_real(*v, "--target-tokens");
            }
        }
        c.grid_snap = s.flag(o_snap, "grid_snap");
        if (auto v = s.value(o_base, base, "base")) c.d_model_base = to_int(*v, "--base");
        if (auto v = s.value(o_ref, reference_d_model, "reference_d_model")) {
            c.reference_d_model = to_int(*v, "--reference-d-model");
        }
        c.refine_optimum = s.flag(o_refine, "refine");
        c.group_by_mup_family = !s.flag(o_no_group, "no_group");
        if (o_out) {
            if (auto v = s.value(o_out, out, "out")) {
                c.out_dir = *v;
            } else if (const char* env = std::getenv("SCALEFIT_OUT"); env && *env) {
                c.out_dir = env;
            }
        }
        return c;
    }
};

RunSet select_base(const RunSet& runs, std::optional<std::int64_t> base) {
    if (!base) return runs;
    RunFilter f;
    f.d_model_base = Range<std::int64_t>::exactly(*base);
    return filter(runs, f);
}

Json plot_data(const PipelineReport& report, const std::string& name) {
    Json rows = Json::array();
    auto append = [&](const Json& more) {
        for (const auto& r : more) rows.push_back(r);
    };
    if (name == "sensitivity" || name == "sensitivity-raw") {
        for (const auto& [t, by_batch] : report.sensitivity) {
            for (const auto& [b, curve] : by_batch) {
                append(plot_rows(curve, "T=" + tokens_label(t) + ",B=" + tokens_label(b), name == "sensitivity"));
            }
        }
    } else if (name == "best-loss") {
        for (const auto& [t, table] : report.best_loss) append(plot_rows(table, "T=" + tokens_label(t)));
    } else if (name == "surge") {
        for (const auto& [t, fits] : report.surge.fits) {
            const auto points = surge_points(report.optima, t);
            for (const auto& p : points) {
                rows.push_back(Json{{"x", real(p.batch_size)}, {"y", real(p.eta_star)}, {"series", "T=" + tokens_label(t)}});
            }
            for (const auto& f : fits) {
                const std::string series = "T=" + tokens_label(t) + " fit " + std::string(to_string(f.variant));
                for (const auto& p : points) {
                    rows.push_back(Json{{"x", real(p.batch_size)},
                                        {"y", real(eval_surge(f.eta_crit, f.b_crit, p.batch_size))},
                                        {"series", series}});
                }
            }
        }
    } else if (name == "b-star") {
        for (const auto& [t, opt] : report.b_star) {
            rows.push_back(Json{{"x", t}, {"y", opt.batch_size}, {"series", "B*"}});
        }
    } else {
        throw UsageError("unknown plot data '" + name + "' (sensitivity, sensitivity-raw, best-loss, surge, b-star)");
    }
    return rows;
}

std::string recommendation_summary(const Recommendation& r) {
    std::ostringstream s;
    s << "T_target = " << format_shortest(r.t_target) << " tokens\n"
      << "B*       = " << format_shortest(r.b_star_target) << " tokens (" << r.b_star_source << ")\n"
      << "B_crit   = " << format_shortest(r.b_crit_target) << " tokens\n"
      << "eta_crit = " << format_shortest(r.eta_crit_target) << "\n"
      << "eta*     = " << format_shortest(r.eta_star_target) << "\n"
      << "regime   = " << to_string(r.regime) << " (" << r.rule << ")\n";
    return s.str();
}

struct NoiseFormula {
    std::vector<std::string> args;
    std::function<double(const std::vector<double>&)> eval;
};

const std::map<std::string, NoiseFormula>& noise_formulas() {
    static const std::map<std::string, NoiseFormula> table{
        {"crit", {{"E_min", "S_min"}, [](const auto& v) { return b_crit_ratio(v[0], v[1]); }}},
        {"noise-curv", {{"tr(H Sigma)", "G^T H G"}, [](const auto& v) { return b_noise_curv(v[0], v[1]); }}},
        {"simple", {{"tr(Sigma)", "|G|^2"}, [](const auto& v) { return b_simple_curv(v[0], v[1]); }}},
        {"crit-loss", {{"B0", "alpha_B", "L"}, [](const auto& v) { return b_crit_from_loss(v[0], v[1], v[2]); }}},
        {"noise-sde", {{"eta", "T", "B"}, [](const auto& v) { return b_noise_sde(v[0], v[1], v[2]); }}},
        {"noise-sde-model",
         {{"eta", "T", "B", "|w|^2"}, [](const auto& v) { return b_noise_norm(v[0], v[1], v[2], v[3]); }}},
        {"li", {{"eta_crit", "B_peak", "B"}, [](const auto& v) { return eta_star_li(v[0], v[1], v[2]); }}},
    };
    return table;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scalefit: critical batch size and learning-rate scaling toolkit"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (CLI flags take precedence)");
    Settings settings;
    std::function<void()> action;

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Validate a runs CSV and summarise it");
    std::string ingest_input, ingest_emit;
    auto* o_ingest_input = ingest->add_option("--input", ingest_input, "Runs CSV");
    ingest->add_option("--emit", ingest_emit, "Write the canonical CSV here ('-' for stdout)");
    auto* o_skip_pending = ingest->add_flag("--skip-pending", "Count rows with an empty val_loss instead of failing");
    ingest->callback([&] {
        action = [&] {
            const auto path = settings.value(o_ingest_input, ingest_input, "input");
            if (!path) throw UsageError("--input is required");
            std::ifstream in(*path, std::ios::binary);
            if (!in) throw DataError("cannot open '" + *path + "'");
            std::ostringstream buffer;
            buffer << in.rdbuf();
            std::istringstream text(buffer.str());
            const auto runs = ingest_csv(text, *path, IngestOptions{settings.flag(o_skip_pending, "skip_pending")});
            if (!ingest_emit.empty()) {
                std::ostringstream csv;
                emit_csv(runs, csv);
                write_text(ingest_emit, csv.str());
                if (ingest_emit == "-") return;
            }
            std::set<std::int64_t> tokens, batches, bases, seeds;
            std::set<std::pair<std::int64_t, std::int64_t>> models;
            for (const auto& r : runs) {
                tokens.insert(r.tokens);
                batches.insert(r.batch_size);
                bases.insert(r.d_model_base);
                seeds.insert(r.seed);
                models.emplace(r.d_model, r.d_model_base);
            }
            Json model_list = Json::array();
            for (const auto& [d, b] : models) model_list.push_back(Json{{"d_model", d}, {"d_model_base", b}});
            Json j;
            j["provenance"] = runs.provenance();
            j["input_digest"] = content_digest(buffer.str());
            j["records"] = runs.size();
            j["pending"] = runs.pending();
            j["models"] = model_list;
            j["d_model_bases"] = bases;
            j["batch_sizes"] = batches;
            j["tokens"] = tokens;
            j["seeds"] = seeds;
            std::cout << dump(j);
        };
    });

    // profile
    auto* profile = app.add_subcommand("profile", "Loss-vs-learning-rate profile, optimum and sensitivity of one cell");
    std::string prof_input, prof_b, prof_t, prof_d, prof_base, prof_seed;
    auto* o_prof_input = profile->add_option("--input", prof_input, "Runs CSV");
    profile->add_option("--batch-size", prof_b, "Batch size in tokens")->required();
    profile->add_option("--tokens", prof_t, "Token budget")->required();
    profile->add_option("--d-model", prof_d, "Model width (default: the only one present)");
    profile->add_option("--base", prof_base, "Base width (default: the only one present)");
    auto* o_prof_seed = profile->add_option("--seed", prof_seed, "Single seed (default: average seeds)");
    auto* o_prof_refine = profile->add_flag("--refine", "Log-parabola refinement of the optimum");
    profile->callback([&] {
        action = [&] {
            const auto path = settings.value(o_prof_input, prof_input, "input");
            if (!path) throw UsageError("--input is required");
            const auto runs = ingest_csv_file(*path);
            ProfileContext ctx;
            ctx.batch_size = to_int(prof_b, "--batch-size");
            ctx.tokens = to_int(prof_t, "--tokens");
            std::set<std::int64_t> widths, bases;
            for (const auto& r : runs) {
                if (r.batch_size != ctx.batch_size || r.tokens != ctx.tokens) continue;
                widths.insert(r.d_model);
                bases.insert(r.d_model_base);
            }
            auto pick = [](const std::string& given, const std::set<std::int64_t>& present, const char* flag) {
                if (!given.empty()) return to_int(given, flag);
                if (present.size() != 1) {
                    throw UsageError(std::string(flag) + " is required when the cell holds " +
                                     std::to_string(present.size()) + " candidates");
                }
                return *present.begin();
            };
            ctx.d_model = pick(prof_d, widths, "--d-model");
            ctx.d_model_base = pick(prof_base, bases, "--base");
            if (auto s = settings.value(o_prof_seed, prof_seed, "seed")) ctx.seed = to_int(*s, "--seed");
            const auto lp = build_profile(runs, ctx);
            const auto opt = find_optimum(lp, settings.flag(o_prof_refine, "refine"));
            Json points = Json::array();
            for (const auto& p : lp.points) points.push_back(Json{{"lr", real(p.lr)}, {"val_loss", real(p.val_loss)}});
            Json j;
            j["context"] = Json{{"batch_size", ctx.batch_size},
                                {"tokens", ctx.tokens},
                                {"d_model", ctx.d_model},
                                {"d_model_base", ctx.d_model_base},
                                {"seed", ctx.seed ? Json(*ctx.seed) : Json(nullptr)}};
            j["points"] = points;
            j["optimum"] = Json{{"eta_star", real(opt.eta_star)},
                                {"loss_min", real(opt.loss_min)},
                                {"grid_resolution", real(opt.grid_resolution)},
                                {"refined", opt.refined}};
            j["sensitivity"] = to_json(sensitivity_curve(lp));
            std::cout << dump(j);
        };
    });

    // fit-surge
    auto* fit_surge_cmd = app.add_subcommand("fit-surge", "Fit the surge curve per token budget");
    std::string fs_input, fs_variant, fs_base, fs_out;
    auto* o_fs_input = fit_surge_cmd->add_option("--input", fs_input, "Runs CSV");
    auto* o_fs_variant =
        fit_surge_cmd->add_option("--variant", fs_variant, "Fit variant")->check(CLI::IsMember(kVariantNames));
    auto* o_fs_base = fit_surge_cmd->add_option("--base", fs_base, "muP family (d_model_base)");
    auto* o_fs_refine = fit_surge_cmd->add_flag("--refine", "Log-parabola refinement of each grid optimum");
    auto* o_fs_log = fit_surge_cmd->add_flag("--log-residuals", "Fit log(eta*) instead of eta*");
    auto* o_fs_out = fit_surge_cmd->add_option("--out", fs_out, "Also write surge_fits.json and optima.json here");
    fit_surge_cmd->callback([&] {
        action = [&] {
            const auto path = settings.value(o_fs_input, fs_input, "input");
            if (!path) throw UsageError("--input is required");
            std::optional<std::int64_t> base;
            if (auto v = settings.value(o_fs_base, fs_base, "base")) base = to_int(*v, "--base");
            const auto runs = select_base(ingest_csv_file(*path), base);
            const auto optima = aggregate_optima(runs, AggregateOptions{true, settings.flag(o_fs_refine, "refine")});
            const auto variants = variants_from(settings.value(o_fs_variant, fs_variant, "variant").value_or("all"));
            SurgeFitOptions options;
            options.log_residuals = settings.flag(o_fs_log, "log_residuals");
            const auto fits = fit_all_budgets(optima, variants, options);
            Json arr = Json::array();
            for (const auto& [t, per] : fits.fits) {
                for (const auto& f : per) arr.push_back(to_json(f));
            }
            Json warnings = optima.diagnostics;
            for (const auto& d : fits.diagnostics) warnings.push_back(d);
            const Json j{{"fits", arr}, {"warnings", warnings}};
            if (auto dir = settings.value(o_fs_out, fs_out, "out")) {
                std::filesystem::create_directories(*dir);
                write_text(*dir + "/surge_fits.json", dump(arr));
                write_text(*dir + "/optima.json", dump(to_json(optima)));
            }
            std::cout << dump(j);
        };
    });

    // fit-powerlaw
    auto* fit_pl = app.add_subcommand("fit-powerlaw", "Power-law fits of the critical parameters over token budgets");
    PipelineFlags pl_flags;
    pl_flags.attach(fit_pl, false, true);
    std::string pl_points, pl_target;
    fit_pl->add_option("--points", pl_points, "CSV with columns tokens,value,sigma (instead of --input)");
    fit_pl->add_option("--target", pl_target, "Law target for --points")
        ->check(CLI::IsMember({"b_crit", "eta_crit", "b_star"}));
    fit_pl->callback([&] {
        action = [&] {
            if (!pl_points.empty()) {
                if (pl_target.empty()) throw UsageError("--points needs --target");
                const auto target = parse_target(pl_target);
                std::ifstream in(pl_points);
                if (!in) throw DataError("cannot open '" + pl_points + "'");
                std::vector<LawPoint> points;
                std::string line;
                std::getline(in, line);
                if (line.rfind("tokens,value", 0) != 0) throw DataError("points CSV must start with 'tokens,value[,sigma]'");
                int row = 1;
                while (std::getline(in, line)) {
                    ++row;
                    if (line.empty() || line == "\r") continue;
                    if (line.back() == '\r') line.pop_back();
                    std::vector<std::string> cells;
                    std::stringstream ss(line);
                    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
                    if (cells.size() < 2 || cells.size() > 3) {
                        throw DataError("row " + std::to_string(row) + ": expected 2 or 3 fields");
                    }
                    LawPoint p{};
                    if (!parse_real(cells[0], p.tokens) || !parse_real(cells[1], p.value) ||
                        (cells.size() == 3 && !parse_real(cells[2], p.sigma))) {
                        throw DataError("row " + std::to_string(row) + ": malformed number");
                    }
                    points.push_back(p);
                }
                const auto variants =
                    variants_from(settings.value(pl_flags.o_variant, pl_flags.variant, "variant").value_or("all"));
                Json j;
                if (auto v = settings.value(pl_flags.o_fix, pl_flags.fix_exponent, "fix_exponent")) {
                    j["fit"] = to_json(refit_fixed_exponent(points, target, to_real(*v, "--fix-exponent"), variants.front()));
                } else {
                    std::vector<PowerLawParams> fits;
                    Json arr = Json::array();
                    for (auto variant : variants) {
                        PowerLawFitOptions options;
                        options.sigma_policy = variant;
                        auto f = fit_powerlaw(points, target, options);
                        f.variant = variant;
                        arr.push_back(to_json(f));
                        fits.push_back(f);
                    }
                    j["fits"] = arr;
                    j["consolidated"] = to_json(consolidate_exponent(fits));
                }
                std::cout << dump(j);
                return;
            }
            const auto config = pl_flags.resolve(settings);
            const auto report = run_pipeline(config);
            if (config.out_dir) write_artifacts(report, config, *config.out_dir);
            const Json full = report.to_json(config);
            std::cout << dump(Json{{"powerlaw_fits", full["powerlaw_fits"]},
                                   {"consolidated", full["consolidated"]},
                                   {"final_laws", full["final_laws"]},
                                   {"warnings", full["warnings"]}});
        };
    });

    // extrapolate
    auto* extrap = app.add_subcommand("extrapolate", "Recommend (B*, eta*) at a target token budget");
    PipelineFlags ex_flags;
    ex_flags.attach(extrap, true, false);
    std::string ex_bcrit_law, ex_eta_law, ex_bstar, ex_bstar_law, ex_tolerance;
    extrap->add_option("--b-crit-law", ex_bcrit_law, "Fitted B_crit law JSON (instead of --input)");
    extrap->add_option("--eta-crit-law", ex_eta_law, "Fitted eta_crit law JSON (instead of --input)");
    extrap->add_option("--b-star", ex_bstar, "Batch size to use at the target");
    extrap->add_option("--b-star-law", ex_bstar_law, "Fitted B* drift law JSON");
    extrap->add_option("--regime-tolerance", ex_tolerance, "log2 band labelled critical (default 0)");
    extrap->callback([&] {
        action = [&] {
            const auto target = settings.value(ex_flags.o_target, ex_flags.target_tokens, "target_tokens");
            if (!target) throw UsageError("--target-tokens is required");
            const double t = to_real(*target, "--target-tokens");
            RecommendOptions options;
            options.grid_snap = settings.flag(ex_flags.o_snap, "grid_snap");
            if (!ex_tolerance.empty()) options.regime_tolerance_log2 = to_real(ex_tolerance, "--regime-tolerance");
            Recommendation rec;
            if (!ex_bcrit_law.empty() || !ex_eta_law.empty()) {
                if (ex_bcrit_law.empty() || ex_eta_law.empty()) {
                    throw UsageError("--b-crit-law and --eta-crit-law go together");
                }
                double b_star = 0.0;
                if (!ex_bstar.empty()) {
                    b_star = to_real(ex_bstar, "--b-star");
                    options.b_star_source = "input";
                } else if (!ex_bstar_law.empty()) {
                    b_star = eval_powerlaw(powerlaw_from_json(read_json_file(ex_bstar_law)), t);
                    options.b_star_source = ex_bstar_law;
                } else {
                    throw UsageError("give --b-star or --b-star-law with fitted law files");
                }
                rec = recommend(b_star, powerlaw_from_json(read_json_file(ex_bcrit_law)),
                                powerlaw_from_json(read_json_file(ex_eta_law)), t, options);
            } else {
                auto config = ex_flags.resolve(settings);
                config.target_tokens.reset();
                const auto report = run_pipeline(config);
                double b_star = 0.0;
                if (!ex_bstar.empty()) {
                    b_star = to_real(ex_bstar, "--b-star");
                    options.b_star_source = "input";
                } else {
                    if (!report.b_star_drift) throw StageError("recommend", "no B* drift fit available to extrapolate B*");
                    b_star = eval_powerlaw(*report.b_star_drift, t);
                    options.b_star_source = "b_star_drift";
                }
                rec = recommend(b_star, report.b_crit_law, report.eta_crit_law, t, options);
            }
            std::cout << dump(to_json(rec));
            std::cerr << recommendation_summary(rec);
        };
    });

    // schedule
    auto* sched = app.add_subcommand("schedule", "Warmup-stable(-decay) learning-rate schedule");
    std::string sc_eta, sc_total, sc_warmup, sc_warmup_frac, sc_decay = "none", sc_decay_tokens, sc_floor, sc_batch,
                                                              sc_emit = "json", sc_spec;
    sched->add_option("--eta-max", sc_eta, "Peak learning rate");
    sched->add_option("--total-tokens", sc_total, "Training length in tokens");
    auto* o_sc_warmup = sched->add_option("--warmup-tokens", sc_warmup, "Absolute warmup length (default 2^19)");
    auto* o_sc_frac = sched->add_option("--warmup-fraction", sc_warmup_frac, "Warmup as a fraction of the run");
    auto* o_sc_nowarm = sched->add_flag("--no-warmup", "Start at eta_max");
    o_sc_warmup->excludes(o_sc_frac)->excludes(o_sc_nowarm);
    o_sc_frac->excludes(o_sc_nowarm);
    sched->add_option("--decay", sc_decay, "Decay phase")->check(CLI::IsMember({"none", "linear", "cosine"}));
    sched->add_option("--decay-tokens", sc_decay_tokens, "Decay length (default: all tokens after warmup)");
    sched->add_option("--floor", sc_floor, "Cosine floor as a fraction of eta_max (default 0.1)");
    sched->add_option("--batch-size", sc_batch, "Tokens per step for --emit csv");
    sched->add_option("--emit", sc_emit, "Output format")->check(CLI::IsMember({"json", "csv"}));
    sched->add_option("--spec", sc_spec, "Schedule spec JSON instead of flags");
    sched->callback([&] {
        action = [&] {
            ScheduleSpec spec;
            if (!sc_spec.empty()) {
                spec = schedule_from_json(read_json_file(sc_spec));
            } else {
                if (sc_eta.empty() || sc_total.empty()) throw UsageError("--eta-max and --total-tokens are required");
                ScheduleRequest req;
                req.eta_max = to_real(sc_eta, "--eta-max");
                req.total_tokens = to_int(sc_total, "--total-tokens");
                if (o_sc_nowarm->count() > 0) {
                    req.warmup_mode = WarmupMode::disabled;
                } else if (o_sc_frac->count() > 0) {
                    req.warmup_mode = WarmupMode::fraction;
                    req.warmup_fraction = to_real(sc_warmup_frac, "--warmup-fraction");
                } else if (o_sc_warmup->count() > 0) {
                    req.warmup_tokens = to_int(sc_warmup, "--warmup-tokens");
                }
                req.decay_kind = parse_decay_kind(sc_decay);
                req.decay_tokens = sc_decay_tokens.empty() ? -1 : to_int(sc_decay_tokens, "--decay-tokens");
                if (!sc_floor.empty()) req.floor_fraction = to_real(sc_floor, "--floor");
                spec = make_schedule(req);
            }
            if (sc_emit == "json") {
                std::cout << dump(to_json(spec));
                return;
            }
            if (sc_batch.empty()) throw UsageError("--emit csv needs --batch-size");
            std::string out = "step,tokens,lr\n";
            for (const auto& s : emit_step_schedule(spec, to_int(sc_batch, "--batch-size"))) {
                out += std::to_string(s.step) + "," + std::to_string(s.tokens) + "," + format_shortest(s.lr) + "\n";
            }
            std::cout << out;
        };
    });

    // mup
    auto* mup = app.add_subcommand("mup", "muP multipliers of a width relative to its base");
    std::string mup_d, mup_base;
    mup->add_option("--d-model", mup_d, "Model width")->required();
    mup->add_option("--base", mup_base, "Base width")->required();
    mup->callback([&] {
        action = [&] { std::cout << dump(to_json(width_multipliers(to_int(mup_d, "--d-model"), to_int(mup_base, "--base")))); };
    });

    // grid
    auto* grid_cmd = app.add_subcommand("grid", "Emit the default sweep as a runs CSV with an empty loss column");
    std::vector<std::string> grid_bases;
    std::string grid_seeds = "1", grid_out;
    grid_cmd->add_option("--base", grid_bases, "Restrict to these base widths");
    grid_cmd->add_option("--seeds", grid_seeds, "Training seeds per configuration");
    grid_cmd->add_option("--out", grid_out, "CSV path (default stdout)");
    grid_cmd->callback([&] {
        action = [&] {
            auto axes = GridAxes::defaults();
            if (!grid_bases.empty()) {
                axes.bases.clear();
                for (const auto& b : grid_bases) axes.bases.push_back(to_int(b, "--base"));
            }
            const auto n_seeds = to_int(grid_seeds, "--seeds");
            if (n_seeds < 1) throw UsageError("--seeds must be at least 1");
            std::string out = std::string(kCsvHeader) + "\n";
            for (const auto& p : enumerate_grid(axes)) {
                for (std::int64_t s = 0; s < n_seeds; ++s) {
                    out += run_id_for(p, s) + "," + std::to_string(p.d_model) + "," + std::to_string(p.d_model_base) +
                           "," + std::to_string(p.batch_size) + "," + format_g17(p.lr) + "," + std::to_string(s) + "," +
                           std::to_string(p.tokens) + ",\n";
                }
            }
            write_text(grid_out, out);
        };
    });

    // noise
    auto* noise = app.add_subcommand("noise", "Evaluate a critical-batch / noise-scale formula");
    std::string noise_name;
    std::vector<std::string> noise_args;
    std::string formula_help = "Formula:";
    for (const auto& [name, f] : noise_formulas()) {
        formula_help += "\n  " + name;
        for (const auto& a : f.args) formula_help += " <" + a + ">";
    }
    noise->add_option("formula", noise_name, formula_help)->required();
    noise->add_option("args", noise_args, "Formula arguments (decimal or 2^x)");
    noise->callback([&] {
        action = [&] {
            auto it = noise_formulas().find(noise_name);
            if (it == noise_formulas().end()) throw UsageError("unknown formula '" + noise_name + "'");
            if (noise_args.size() != it->second.args.size()) {
                throw UsageError(noise_name + " takes " + std::to_string(it->second.args.size()) + " arguments");
            }
            std::vector<double> values;
            for (std::size_t i = 0; i < noise_args.size(); ++i) values.push_back(to_real(noise_args[i], it->second.args[i]));
            std::cout << format_shortest(it->second.eval(values)) << "\n";
        };
    });

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic loss surface over the default sweep");
    std::string sy_spec, sy_out, sy_seed, sy_seeds = "1";
    std::vector<std::string> sy_bases;
    synth->add_option("--spec", sy_spec, "Oracle spec JSON (default: reference laws)");
    auto* o_sy_out = synth->add_option("--out", sy_out, "CSV path (default stdout)");
    auto* o_sy_seed = synth->add_option("--seed", sy_seed, "Noise seed (overrides the spec)");
    synth->add_option("--seeds", sy_seeds, "Training seeds per configuration");
    synth->add_option("--base", sy_bases, "Restrict to these base widths");
    synth->callback([&] {
        action = [&] {
            auto spec = sy_spec.empty() ? OracleSpec::reference() : oracle_from_json(read_json_file(sy_spec));
            if (auto v = settings.value(o_sy_seed, sy_seed, "seed")) spec.seed = static_cast<std::uint64_t>(to_int(*v, "--seed"));
            auto axes = GridAxes::defaults();
            if (!sy_bases.empty()) {
                axes.bases.clear();
                for (const auto& b : sy_bases) axes.bases.push_back(to_int(b, "--base"));
            }
            const auto n_seeds = to_int(sy_seeds, "--seeds");
            if (n_seeds < 1) throw UsageError("--seeds must be at least 1");
            std::vector<std::int64_t> seeds;
            for (std::int64_t s = 0; s < n_seeds; ++s) seeds.push_back(s);
            const auto grid = enumerate_grid(axes);
            const auto runs = gen_surface(spec, synth_points(grid, seeds));
            std::ostringstream csv;
            emit_csv(runs, csv);
            write_text(settings.value(o_sy_out, sy_out, "out").value_or("-"), csv.str());
        };
    });

    // report
    auto* report_cmd = app.add_subcommand("report", "Run the full pipeline and write the report artifacts");
    PipelineFlags rp_flags;
    rp_flags.attach(report_cmd, true, true);
    std::string rp_plot;
    auto* o_rp_plot = report_cmd->add_option("--plot-data", rp_plot, "Print plot rows: sensitivity, sensitivity-raw, best-loss, surge, b-star");
    auto* o_rp_warn = report_cmd->add_flag("--warnings", "Print the warnings section");
    report_cmd->callback([&] {
        action = [&] {
            const auto config = rp_flags.resolve(settings);
            const auto report = run_pipeline(config);
            if (config.out_dir) write_artifacts(report, config, *config.out_dir);
            if (auto name = settings.value(o_rp_plot, rp_plot, "plot_data")) {
                std::cout << dump(plot_data(report, *name));
            } else if (o_rp_warn->count() > 0) {
                std::cout << dump(Json(report.warnings));
            } else if (!config.out_dir) {
                std::cout << dump(report.to_json(config));
            }
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        settings.load(config_path);
        action();
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const StageError& e) {
        std::cerr << "error in stage " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
