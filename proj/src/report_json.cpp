#include "scalefit/report_json.hpp"

#include "scalefit/error.hpp"

#include <cmath>
#include <limits>

namespace scalefit {

Json real(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double real_from(const Json& j) {
    if (j.is_null()) return std::numeric_limits<double>::infinity();
    return j.get<double>();
}

namespace {

Json diagnostics_json(const FitDiagnostics& d) {
    Json j;
    j["residual_norm"] = real(d.residual_norm);
    j["n_points"] = d.n_points;
    j["converged"] = d.converged;
    j["iterations"] = d.iterations;
    return j;
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    auto it = j.find(key);
    return it == j.end() || it->is_null() ? fallback : it->template get<T>();
}

}  // namespace

Json to_json(const SurgeParams& p) {
    Json j;
    j["tokens"] = p.tokens;
    j["variant"] = to_string(p.variant);
    j["eta_crit"] = real(p.eta_crit);
    j["b_crit"] = real(p.b_crit);
    j["sigma_eta_crit"] = real(p.sigma_eta_crit);
    j["sigma_b_crit"] = real(p.sigma_b_crit);
    j["residual_norm"] = real(p.diagnostics.residual_norm);
    j["converged"] = p.diagnostics.converged;
    j["n_points"] = p.diagnostics.n_points;
    j["iterations"] = p.diagnostics.iterations;
    return j;
}

SurgeParams surge_from_json(const Json& j) {
    SurgeParams p;
    p.tokens = j.at("tokens").get<std::int64_t>();
    p.variant = parse_variant(j.at("variant").get<std::string>());
    p.eta_crit = j.at("eta_crit").get<double>();
    p.b_crit = j.at("b_crit").get<double>();
    p.sigma_eta_crit = real_from(j.at("sigma_eta_crit"));
    p.sigma_b_crit = real_from(j.at("sigma_b_crit"));
    p.diagnostics.residual_norm = get_or(j, "residual_norm", 0.0);
    p.diagnostics.converged = get_or(j, "converged", true);
    p.diagnostics.n_points = get_or(j, "n_points", 0);
    p.diagnostics.iterations = get_or(j, "iterations", 0);
    return p;
}

Json to_json(const PowerLawParams& p) {
    Json j;
    j["target"] = to_string(p.target);
    j["variant"] = p.variant ? Json(to_string(*p.variant)) : Json(nullptr);
    j["a"] = real(p.a);
    j["alpha"] = real(p.alpha);
    j["b"] = real(p.b);
    j["sigmas"] = Json{{"a", real(p.sigma_a)}, {"alpha", real(p.sigma_alpha)}, {"b", real(p.sigma_b)}};
    j["fixed_alpha"] = p.fixed_alpha;
    j["fixed_b"] = p.fixed_b;
    j["diagnostics"] = diagnostics_json(p.diagnostics);
    return j;
}

PowerLawParams powerlaw_from_json(const Json& j) {
    PowerLawParams p;
    p.target = parse_target(j.at("target").get<std::string>());
    if (auto it = j.find("variant"); it != j.end() && !it->is_null()) p.variant = parse_variant(it->get<std::string>());
    p.a = j.at("a").get<double>();
    p.alpha = j.at("alpha").get<double>();
    p.b = j.at("b").get<double>();
    if (auto it = j.find("sigmas"); it != j.end()) {
        p.sigma_a = real_from(it->at("a"));
        p.sigma_alpha = real_from(it->at("alpha"));
        p.sigma_b = real_from(it->at("b"));
    }
    p.fixed_alpha = get_or(j, "fixed_alpha", false);
    p.fixed_b = get_or(j, "fixed_b", false);
    return p;
}

Json to_json(const ConsolidatedExponent& c) {
    Json j;
    j["target"] = to_string(c.target);
    j["alpha_hat"] = real(c.alpha_hat);
    j["sigma"] = real(c.sigma);
    Json parts = Json::array();
    for (const auto& p : c.contributing) parts.push_back(Json{{"alpha", real(p.alpha)}, {"sigma", real(p.sigma)}});
    j["contributing"] = parts;
    return j;
}

Json to_json(const Recommendation& r) {
    Json j;
    j["t_target"] = real(r.t_target);
    j["b_star_target"] = real(r.b_star_target);
    j["b_crit_target"] = real(r.b_crit_target);
    j["eta_crit_target"] = real(r.eta_crit_target);
    j["eta_star_target"] = real(r.eta_star_target);
    j["regime"] = to_string(r.regime);
    j["rule"] = r.rule;
    j["provenance"] = Json{{"b_star", r.b_star_source},
                           {"b_crit_law", to_json(r.b_crit_law)},
                           {"eta_crit_law", to_json(r.eta_crit_law)}};
    return j;
}

Json to_json(const OptimumTable& t) {
    Json entries = Json::array();
    for (const auto& [key, cell] : t.entries) {
        entries.push_back(Json{{"batch_size", key.first},
                               {"tokens", key.second},
                               {"log2_eta_star_mean", real(cell.log2_eta_star_mean)},
                               {"log2_eta_star_std", real(cell.log2_eta_star_std)},
                               {"eta_star", real(cell.eta_star())},
                               {"n_contributing", cell.n_contributing}});
    }
    return Json{{"entries", entries}, {"diagnostics", t.diagnostics}};
}

Json to_json(const MupModelSpec& m) {
    Json j;
    j["d_model"] = m.d_model;
    j["d_model_base"] = m.d_model_base;
    j["width_ratio"] = real(m.width_ratio);
    j["init_sigma_base"] = real(m.init_sigma_base);
    j["d_head"] = MupModelSpec::kHeadDim;
    j["n_heads"] = m.n_heads ? Json(*m.n_heads) : Json(nullptr);
    Json mult;
    for (const auto& [cls, v] : m.multipliers) {
        mult[std::string(to_string(cls))] =
            Json{{"lr_multiplier", real(v.lr)}, {"init_std_multiplier", real(v.init_std)}, {"output_multiplier", real(v.output)}};
    }
    j["multipliers"] = mult;
    return j;
}

Json to_json(const ScheduleSpec& s) {
    Json j;
    j["eta_max"] = real(s.eta_max);
    j["total_tokens"] = s.total_tokens;
    j["warmup_tokens"] = s.warmup_tokens;
    j["decay_tokens"] = s.decay_tokens;
    j["decay_kind"] = to_string(s.decay_kind);
    j["floor_fraction"] = real(s.floor_fraction);
    j["warmup_mode"] = to_string(s.warmup_mode);
    j["warmup_fraction"] = real(s.warmup_fraction);
    return j;
}

ScheduleSpec schedule_from_json(const Json& j) {
    ScheduleSpec s;
    s.eta_max = j.at("eta_max").get<double>();
    s.total_tokens = j.at("total_tokens").get<std::int64_t>();
    s.warmup_tokens = get_or<std::int64_t>(j, "warmup_tokens", 0);
    s.decay_tokens = get_or<std::int64_t>(j, "decay_tokens", 0);
    s.decay_kind = parse_decay_kind(get_or<std::string>(j, "decay_kind", "none"));
    s.floor_fraction = get_or(j, "floor_fraction", 0.0);
    s.warmup_mode = parse_warmup_mode(get_or<std::string>(j, "warmup_mode", "absolute"));
    s.warmup_fraction = get_or(j, "warmup_fraction", 0.0);
    validate(s);
    return s;
}

Json to_json(const OracleSpec& s) {
    auto law = [](const PowerLawParams& p) { return Json{{"a", real(p.a)}, {"alpha", real(p.alpha)}, {"b", real(p.b)}}; };
    Json j;
    j["eta_crit_law"] = law(s.eta_crit_law);
    j["b_crit_law"] = law(s.b_crit_law);
    j["b_star_law"] = law(s.b_star_law);
    j["base_loss"] = Json{{"c0", real(s.base_loss.c0)}, {"c1", real(s.base_loss.c1)}, {"c2", real(s.base_loss.c2)}};
    j["curvature_eta"] = real(s.curvature_eta);
    j["curvature_b"] = real(s.curvature_b);
    j["noise_sigma"] = real(s.noise_sigma);
    j["noise_kind"] = s.noise_kind == NoiseKind::lognormal ? "lognormal" : "additive";
    j["seed"] = s.seed;
    return j;
}

OracleSpec oracle_from_json(const Json& j) {
    OracleSpec s = OracleSpec::reference();
    auto law = [&](const char* key, PowerLawParams& p) {
        if (auto it = j.find(key); it != j.end()) {
            p.a = get_or(*it, "a", p.a);
            p.alpha = get_or(*it, "alpha", p.alpha);
            p.b = get_or(*it, "b", p.b);
        }
    };
    law("eta_crit_law", s.eta_crit_law);
    law("b_crit_law", s.b_crit_law);
    law("b_star_law", s.b_star_law);
    if (auto it = j.find("base_loss"); it != j.end()) {
        s.base_loss.c0 = get_or(*it, "c0", s.base_loss.c0);
        s.base_loss.c1 = get_or(*it, "c1", s.base_loss.c1);
        s.base_loss.c2 = get_or(*it, "c2", s.base_loss.c2);
    }
    s.curvature_eta = get_or(j, "curvature_eta", s.curvature_eta);
    s.curvature_b = get_or(j, "curvature_b", s.curvature_b);
    s.noise_sigma = get_or(j, "noise_sigma", s.noise_sigma);
    const auto kind = get_or<std::string>(j, "noise_kind", "lognormal");
    if (kind == "lognormal") {
        s.noise_kind = NoiseKind::lognormal;
    } else if (kind == "additive") {
        s.noise_kind = NoiseKind::additive;
    } else {
        throw DataError("oracle: unknown noise_kind '" + kind + "'");
    }
    s.seed = get_or<std::uint64_t>(j, "seed", s.seed);
    if (!(s.curvature_eta > 0.0)) throw DataError("oracle: curvature_eta must be positive");
    if (s.curvature_b < 0.0) throw DataError("oracle: curvature_b must be non-negative");
    return s;
}

Json to_json(const SensitivityCurve& c) {
    Json normalized = Json::array();
    for (const auto& p : c.normalized) normalized.push_back(Json::array({real(p.x), real(p.delta_loss)}));
    Json raw = Json::array();
    for (const auto& p : c.raw) raw.push_back(Json::array({real(p.x), real(p.delta_loss)}));
    return Json{{"eta_star", real(c.eta_star)}, {"loss_min", real(c.loss_min)}, {"normalized", normalized}, {"raw", raw}};
}

Json to_json(const BestLossTable& t) {
    Json rows = Json::array();
    for (const auto& [b, row] : t) {
        rows.push_back(Json{{"batch_size", b}, {"loss_min", real(row.loss_min)}, {"eta_star", real(row.eta_star)}});
    }
    return rows;
}

Json plot_rows(const SensitivityCurve& c, const std::string& series, bool normalized) {
    Json rows = Json::array();
    for (const auto& p : normalized ? c.normalized : c.raw) {
        rows.push_back(Json{{"x", real(p.x)}, {"y", real(p.delta_loss)}, {"series", series}});
    }
    return rows;
}

Json plot_rows(const BestLossTable& t, const std::string& series) {
    Json rows = Json::array();
    for (const auto& [b, row] : t) {
        rows.push_back(Json{{"x", b}, {"y", real(row.loss_min)}, {"series", series}});
    }
    return rows;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace scalefit
