#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "chaos_tails/bound_engine.hpp"
#include "chaos_tails/coefficient_series.hpp"
#include "chaos_tails/exponent_catalog.hpp"
#include "chaos_tails/monte_carlo_lab.hpp"
#include "chaos_tails/tail_algebra.hpp"
#include "chaos_tails/ustat_bounds.hpp"

namespace chaos_tails::json_io {

using nlohmann::json;

/// Throws InvalidArgument when j is not an object or has a key outside `allowed`.
void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                std::string_view where);

/// Numbers, or "inf" for an infinite exponent.
json exponent_to_json(Exponent q);
Exponent exponent_from_json(const json& j);
json qvector_to_json(const QVector& qv);
QVector qvector_from_json(const json& j);

/// {"repr":"parametric","Y","K","q","rho"} or {"repr":"grid","x":[...],"t":[...]}.
json tail_to_json(const TailFunction& T);
TailFunction tail_from_json(const json& j);

/// {"support":[{"x","p"}],"d","phi": nested array, first argument outermost}.
json kernel_to_json(const FiniteKernel& K);
FiniteKernel kernel_from_json(const json& j);

/// Dense {"d","n","entries":[{"I","b"}]}, rule {"rule":"power","alpha","C","d","n"}
/// or {"rule":"uniform","d","n"}. A rule without "d" takes d_hint.
json field_to_json(const CoefficientField& F);
CoefficientField field_from_json(const json& j, std::optional<int> d_hint = std::nullopt);

/// {"type":"constant","c"} | {"type":"gq","q","C"} | {"type":"table","p","mu"}.
json moment_envelope_to_json(const MomentEnvelope& m);
MomentEnvelope moment_envelope_from_json(const json& j);

/// {"type":"quadratic","sigma"} | {"type":"log_cosh","scale"} | {"type":"power","q"}
/// | {"type":"grid","lambda","phi"} | {"type":"distribution","values","probs"} | null.
std::optional<CramerProfile> cramer_from_json(const json& j);

/// {"d","dependence","tails":[...]} or {"d","dependence","q":[...],"K":[...]},
/// plus optional "moments" and "cramer" arrays (entries may be null).
FamilyAssumptions assumptions_from_json(const json& j);

json bound_to_json(const BoundResult& b);
BoundResult bound_from_json(const json& j);

/// {"name","d","n","q","gain"}.
json family_to_json(const FamilySpec& s);
FamilySpec family_from_json(const json& j);

json tail_estimate_to_json(const TailEstimate& t);
json moment_estimate_to_json(const MomentEstimate& m);

/// Body of a verification report: everything reproducible from config + seed.
json report_to_json(const VerificationReport& r);

/// {"header":{"tool","version","timestamp",...},"body":body}. The header holds
/// everything that changes between identical runs.
json with_header(json body, json extra_header = json::object());

std::string read_file(const std::string& path);
json read_json_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// Rows joined with '\n', values printed with %.17g in the C locale.
std::string format_number(double v);

}  // namespace chaos_tails::json_io
