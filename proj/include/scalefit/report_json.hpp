#pragma once

#include "scalefit/extrapolate.hpp"
#include "scalefit/mup.hpp"
#include "scalefit/powerlaw_fit.hpp"
#include "scalefit/profile.hpp"
#include "scalefit/schedule.hpp"
#include "scalefit/surge_fit.hpp"
#include "scalefit/synth_oracle.hpp"

#include <json.hpp>

#include <string>

namespace scalefit {

using Json = nlohmann::ordered_json;

/// Non-finite reals become null (JSON has no inf/nan).
Json real(double v);
/// null -> +inf, otherwise the number.
double real_from(const Json& j);

Json to_json(const SurgeParams& p);
Json to_json(const PowerLawParams& p);
Json to_json(const ConsolidatedExponent& c);
Json to_json(const Recommendation& r);
Json to_json(const OptimumTable& t);
Json to_json(const MupModelSpec& m);
Json to_json(const ScheduleSpec& s);
Json to_json(const OracleSpec& s);
Json to_json(const SensitivityCurve& c);
Json to_json(const BestLossTable& t);

PowerLawParams powerlaw_from_json(const Json& j);
SurgeParams surge_from_json(const Json& j);
ScheduleSpec schedule_from_json(const Json& j);
/// Missing keys fall back to OracleSpec::reference().
OracleSpec oracle_from_json(const Json& j);

/// Plot series rows: {"x", "y", "series"}.
Json plot_rows(const SensitivityCurve& c, const std::string& series, bool normalized);
Json plot_rows(const BestLossTable& t, const std::string& series);

/// Deterministic text form: two-space indent, trailing newline.
std::string dump(const Json& j);

}  // namespace scalefit
