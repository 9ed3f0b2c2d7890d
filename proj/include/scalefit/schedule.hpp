#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace scalefit {

enum class DecayKind { none, linear_to_zero, cosine_to_fraction };
enum class WarmupMode { absolute, fraction, disabled };

struct ScheduleSpec {
    double eta_max = 0.0;
    std::int64_t total_tokens = 0;
    std::int64_t warmup_tokens = 0;
    std::int64_t decay_tokens = 0;
    DecayKind decay_kind = DecayKind::none;
    double floor_fraction = 0.0;  // cosine_to_fraction only
    WarmupMode warmup_mode = WarmupMode::absolute;
    double warmup_fraction = 0.0;  // fraction mode only
};

std::string_view to_string(DecayKind k);
std::string_view to_string(WarmupMode m);
DecayKind parse_decay_kind(std::string_view name);
WarmupMode parse_warmup_mode(std::string_view name);

struct ScheduleRequest {
    double eta_max = 0.0;
    std::int64_t total_tokens = 0;
    WarmupMode warmup_mode = WarmupMode::absolute;
    std::int64_t warmup_tokens = std::int64_t{1} << 19;
    double warmup_fraction = 0.0;
    DecayKind decay_kind = DecayKind::none;
    /// Tokens of decay; negative means "everything after warmup".
    std::int64_t decay_tokens = 0;
    double floor_fraction = 0.1;
};

/// Resolves the warmup mode into tokens and validates the result.
ScheduleSpec make_schedule(const ScheduleRequest& request);

/// Throws DataError unless the spec satisfies its invariants.
void validate(const ScheduleSpec& spec);

/// Learning rate at continuous token-time t in [0, total_tokens].
double eval_schedule(const ScheduleSpec& spec, double t);

/// Value of the phase that ends at `t`, evaluated at `t` (left one-sided limit).
double left_limit(const ScheduleSpec& spec, double t);

/// Start tokens of each phase after the first, ascending, without duplicates.
std::vector<double> phase_boundaries(const ScheduleSpec& spec);

struct ScheduleStep {
    std::int64_t step;
    std::int64_t tokens;
    double lr;
};

/// Steps are 1-based: step k sees min(k * batch_size, total) tokens.
std::vector<ScheduleStep> emit_step_schedule(const ScheduleSpec& spec, std::int64_t batch_size);

}  // namespace scalefit
