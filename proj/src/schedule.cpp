#include "scalefit/schedule.hpp"

#include "scalefit/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace scalefit {

std::string_view to_string(DecayKind k) {
    switch (k) {
        case DecayKind::none: return "none";
        case DecayKind::linear_to_zero: return "linear";
        case DecayKind::cosine_to_fraction: return "cosine";
    }
    return "unknown";
}

std::string_view to_string(WarmupMode m) {
    switch (m) {
        case WarmupMode::absolute: return "absolute";
        case WarmupMode::fraction: return "fraction";
        case WarmupMode::disabled: return "disabled";
    }
    return "unknown";
}

DecayKind parse_decay_kind(std::string_view name) {
    if (name == "none") return DecayKind::none;
    if (name == "linear" || name == "linear_to_zero") return DecayKind::linear_to_zero;
    if (name == "cosine" || name == "cosine_to_fraction") return DecayKind::cosine_to_fraction;
    throw DataError("unknown decay kind '" + std::string(name) + "'");
}

WarmupMode parse_warmup_mode(std::string_view name) {
    if (name == "absolute") return WarmupMode::absolute;
    if (name == "fraction") return WarmupMode::fraction;
    if (name == "disabled" || name == "none") return WarmupMode::disabled;
    throw DataError("unknown warmup mode '" + std::string(name) + "'");
}

void validate(const ScheduleSpec& s) {
    if (!(s.eta_max > 0.0)) throw DataError("schedule: eta_max must be positive");
    if (s.total_tokens <= 0) throw DataError("schedule: total_tokens must be positive");
    if (s.warmup_tokens < 0 || s.decay_tokens < 0) throw DataError("schedule: phase lengths must be non-negative");
    if (s.warmup_tokens + s.decay_tokens > s.total_tokens) {
        throw DataError("schedule: warmup_tokens + decay_tokens exceeds total_tokens");
    }
    if (s.warmup_mode == WarmupMode::disabled && s.warmup_tokens != 0) {
        throw DataError("schedule: disabled warmup must have zero warmup tokens");
    }
    if (s.warmup_mode == WarmupMode::fraction) {
        if (!(s.warmup_fraction > 0.0)) throw DataError("schedule: warmup fraction must be positive");
        if (s.warmup_tokens != std::llround(s.warmup_fraction * static_cast<double>(s.total_tokens))) {
            throw DataError("schedule: warmup_tokens must equal round(fraction * total_tokens)");
        }
    }
    if (s.decay_kind == DecayKind::none && s.decay_tokens != 0) {
        throw DataError("schedule: decay tokens given without a decay kind");
    }
    if (s.decay_kind != DecayKind::none && s.decay_tokens == 0) {
        throw DataError("schedule: decay kind given with zero decay tokens");
    }
    if (s.decay_kind == DecayKind::cosine_to_fraction && !(s.floor_fraction >= 0.0 && s.floor_fraction < 1.0)) {
        throw DataError("schedule: cosine floor must lie in [0, 1)");
    }
}

ScheduleSpec make_schedule(const ScheduleRequest& req) {
    ScheduleSpec s;
    s.eta_max = req.eta_max;
    s.total_tokens = req.total_tokens;
    s.warmup_mode = req.warmup_mode;
    s.decay_kind = req.decay_kind;
    switch (req.warmup_mode) {
        case WarmupMode::absolute: s.warmup_tokens = req.warmup_tokens; break;
        case WarmupMode::fraction:
            s.warmup_fraction = req.warmup_fraction;
            s.warmup_tokens = std::llround(req.warmup_fraction * static_cast<double>(req.total_tokens));
            break;
        case WarmupMode::disabled: s.warmup_tokens = 0; break;
    }
    if (req.decay_kind != DecayKind::none) {
        s.decay_tokens = req.decay_tokens < 0 ? req.total_tokens - s.warmup_tokens : req.decay_tokens;
    }
    if (req.decay_kind == DecayKind::cosine_to_fraction) s.floor_fraction = req.floor_fraction;
    validate(s);
    return s;
}

namespace {

double warmup_value(const ScheduleSpec& s, double t) {
    return t / static_cast<double>(s.warmup_tokens) * s.eta_max;
}

double decay_value(const ScheduleSpec& s, double t) {
    const double start = static_cast<double>(s.total_tokens - s.decay_tokens);
    const double progress = (t - start) / static_cast<double>(s.decay_tokens);
    if (s.decay_kind == DecayKind::linear_to_zero) return (1.0 - progress) * s.eta_max;
    // Written so that progress 0 gives exactly eta_max.
    const double drop = 0.5 * (1.0 - std::cos(std::numbers::pi * progress));
    return (1.0 - (1.0 - s.floor_fraction) * drop) * s.eta_max;
}

}  // namespace

double eval_schedule(const ScheduleSpec& s, double t) {
    if (!(t >= 0.0) || t > static_cast<double>(s.total_tokens)) {
        throw DataError("schedule: t outside [0, total_tokens]");
    }
    if (t < static_cast<double>(s.warmup_tokens)) return warmup_value(s, t);
    if (s.decay_tokens > 0 && t >= static_cast<double>(s.total_tokens - s.decay_tokens)) return decay_value(s, t);
    return s.eta_max;
}

double left_limit(const ScheduleSpec& s, double t) {
    if (!(t > 0.0) || t > static_cast<double>(s.total_tokens)) {
        throw DataError("schedule: left limit needs t in (0, total_tokens]");
    }
    if (s.warmup_tokens > 0 && t <= static_cast<double>(s.warmup_tokens)) return warmup_value(s, t);
    if (s.decay_tokens > 0 && t > static_cast<double>(s.total_tokens - s.decay_tokens)) return decay_value(s, t);
    return s.eta_max;
}

std::vector<double> phase_boundaries(const ScheduleSpec& s) {
    std::vector<double> out;
    if (s.warmup_tokens > 0 && s.warmup_tokens < s.total_tokens) out.push_back(static_cast<double>(s.warmup_tokens));
    if (s.decay_tokens > 0) {
        const auto start = s.total_tokens - s.decay_tokens;
        if (start > 0 && start != s.warmup_tokens) out.push_back(static_cast<double>(start));
    }
    return out;
}

std::vector<ScheduleStep> emit_step_schedule(const ScheduleSpec& s, std::int64_t batch_size) {
    if (batch_size < 1) throw DataError("schedule: batch_size must be at least 1");
    const std::int64_t steps = (s.total_tokens + batch_size - 1) / batch_size;
    std::vector<ScheduleStep> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (std::int64_t k = 1; k <= steps; ++k) {
        const std::int64_t tokens = std::min(k * batch_size, s.total_tokens);
        out.push_back({k, tokens, eval_schedule(s, static_cast<double>(tokens))});
    }
    return out;
}

}  // namespace scalefit
