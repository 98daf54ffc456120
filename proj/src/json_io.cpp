#include "chaos_tails/json_io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "chaos_tails/errors.hpp"

namespace chaos_tails::json_io {

namespace {

constexpr const char* kVersion = "0.1.0";

[[noreturn]] void schema(std::string_view where, const std::string& what) {
  fail(ErrorCode::InvalidArgument, std::string(where) + ": " + what);
}

const json& need(const json& j, const char* key, std::string_view where) {
  if (!j.contains(key)) schema(where, std::string("missing key \"") + key + "\"");
  return j.at(key);
}

double number(const json& j, std::string_view where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  schema(where, "expected a number");
}

double number_at(const json& j, const char* key, std::string_view where) {
  return number(need(j, key, where), std::string(where) + "." + key);
}

double number_or(const json& j, const char* key, double fallback, std::string_view where) {
  return j.contains(key) ? number(j.at(key), std::string(where) + "." + key) : fallback;
}

std::vector<double> numbers(const json& j, std::string_view where) {
  if (!j.is_array()) schema(where, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(number(v, where));
  return out;
}

std::size_t count_at(const json& j, const char* key, std::string_view where) {
  const auto& v = need(j, key, where);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    schema(where, std::string("\"") + key + "\" must be a nonnegative integer");
  return v.get<std::size_t>();
}

int dim_at(const json& j, const char* key, std::string_view where) {
  const auto v = count_at(j, key, where);
  if (v < 1 || v > 64) schema(where, std::string("\"") + key + "\" must be in [1, 64]");
  return static_cast<int>(v);
}

std::string string_at(const json& j, const char* key, std::string_view where) {
  const auto& v = need(j, key, where);
  if (!v.is_string()) schema(where, std::string("\"") + key + "\" must be a string");
  return v.get<std::string>();
}

// Non-finite doubles become strings so that dumps stay valid JSON.
json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

void phi_nested(const json& j, int depth, std::vector<double>& out, std::size_t m) {
  if (depth == 0) {
    out.push_back(number(j, "kernel.phi"));
    return;
  }
  if (!j.is_array() || j.size() != m)
    fail(ErrorCode::DimensionMismatch, "kernel.phi: each level must list one entry per atom");
  for (const auto& e : j) phi_nested(e, depth - 1, out, m);
}

json phi_to_nested(const std::vector<double>& v, std::size_t m, int depth, std::size_t& pos) {
  if (depth == 0) return num(v[pos++]);
  json a = json::array();
  for (std::size_t i = 0; i < m; ++i) a.push_back(phi_to_nested(v, m, depth - 1, pos));
  return a;
}

}  // namespace

void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                std::string_view where) {
  if (!j.is_object()) schema(where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || it.key() == a;
    if (!ok) schema(where, "unknown key \"" + it.key() + "\"");
  }
}

json exponent_to_json(Exponent q) {
  if (q.infinite()) return "inf";
  return q.value();
}

Exponent exponent_from_json(const json& j) {
  if (j.is_string()) return Exponent::parse(j.get<std::string>());
  if (j.is_number()) return Exponent(j.get<double>());
  schema("exponent", "expected a number or \"inf\"");
}

json qvector_to_json(const QVector& qv) {
  json a = json::array();
  for (const auto& q : qv.q) a.push_back(exponent_to_json(q));
  return a;
}

QVector qvector_from_json(const json& j) {
  if (j.is_string()) return QVector::parse(j.get<std::string>());
  if (!j.is_array() || j.empty()) schema("q", "expected a nonempty array of exponents");
  QVector qv;
  for (const auto& e : j) qv.q.push_back(exponent_from_json(e));
  return qv;
}

// ---------------------------------------------------------------------------
// tails

json tail_to_json(const TailFunction& T) {
  if (T.is_parametric()) {
    const auto& p = T.as_parametric();
    return {{"repr", "parametric"}, {"Y", num(p.Y)}, {"K", num(p.K)}, {"q", num(p.q)},
            {"rho", num(p.rho)}};
  }
  const auto& g = T.as_grid();
  return {{"repr", "grid"}, {"x", nums(g.x)}, {"t", nums(g.t)}};
}

TailFunction tail_from_json(const json& j) {
  const std::string repr = string_at(j, "repr", "tail");
  if (repr == "parametric") {
    check_keys(j, {"repr", "Y", "K", "q", "rho"}, "tail");
    return TailFunction::parametric(number_or(j, "Y", 1.0, "tail"), number_at(j, "K", "tail"),
                                    number_at(j, "q", "tail"), number_or(j, "rho", 0.0, "tail"));
  }
  if (repr == "grid") {
    check_keys(j, {"repr", "x", "t"}, "tail");
    return TailFunction::grid(numbers(need(j, "x", "tail"), "tail.x"),
                              numbers(need(j, "t", "tail"), "tail.t"));
  }
  schema("tail", "repr must be \"parametric\" or \"grid\"");
}

// ---------------------------------------------------------------------------
// kernels

json kernel_to_json(const FiniteKernel& K) {
  json support = json::array();
  for (std::size_t i = 0; i < K.support_size(); ++i)
    support.push_back({{"x", num(K.atoms()[i])}, {"p", num(K.probs()[i])}});
  std::size_t pos = 0;
  return {{"support", support},
          {"d", K.d()},
          {"phi", phi_to_nested(K.values(), K.support_size(), K.d(), pos)}};
}

FiniteKernel kernel_from_json(const json& j) {
  check_keys(j, {"support", "d", "phi"}, "kernel");
  const auto& sup = need(j, "support", "kernel");
  if (!sup.is_array() || sup.empty()) schema("kernel", "support must be a nonempty array");
  std::vector<double> atoms, probs;
  for (const auto& a : sup) {
    check_keys(a, {"x", "p"}, "kernel.support");
    atoms.push_back(number_at(a, "x", "kernel.support"));
    probs.push_back(number_at(a, "p", "kernel.support"));
  }
  const int d = dim_at(j, "d", "kernel");
  std::vector<double> phi;
  phi_nested(need(j, "phi", "kernel"), d, phi, atoms.size());
  return FiniteKernel(std::move(atoms), std::move(probs), d, std::move(phi));
}

// ---------------------------------------------------------------------------
// coefficient fields

json field_to_json(const CoefficientField& F) {
  if (F.is_rule()) {
    json j = {{"rule", "power"}, {"alpha", num(F.alpha())}, {"C", num(F.rule_constant())},
              {"d", F.d()}};
    if (F.n()) j["n"] = *F.n();
    return j;
  }
  if (F.is_separable()) {
    json beta = json::array();
    for (const auto& row : F.beta()) beta.push_back(nums(row));
    return {{"rule", "separable"}, {"beta", beta}};
  }
  json entries = json::array();
  for (const auto& e : F.entries()) entries.push_back({{"I", e.I}, {"b", num(e.b)}});
  return {{"d", F.d()}, {"n", *F.n()}, {"entries", entries}};
}

CoefficientField field_from_json(const json& j, std::optional<int> d_hint) {
  if (!j.is_object()) schema("field", "expected an object");
  auto dim = [&]() -> int {
    if (j.contains("d")) return dim_at(j, "d", "field");
    if (d_hint) return *d_hint;
    schema("field", "missing key \"d\"");
  };
  if (j.contains("rule")) {
    const std::string rule = string_at(j, "rule", "field");
    if (rule == "power") {
      check_keys(j, {"rule", "alpha", "C", "d", "n"}, "field");
      std::optional<std::size_t> n;
      if (j.contains("n")) n = count_at(j, "n", "field");
      return CoefficientField::power_law(dim(), number_at(j, "alpha", "field"),
                                         number_or(j, "C", 1.0, "field"), n);
    }
    if (rule == "uniform") {
      check_keys(j, {"rule", "d", "n"}, "field");
      return CoefficientField::uniform(dim(), count_at(j, "n", "field"));
    }
    if (rule == "separable") {
      check_keys(j, {"rule", "beta"}, "field");
      const auto& b = need(j, "beta", "field");
      if (!b.is_array() || b.empty()) schema("field", "beta must be a nonempty array of rows");
      std::vector<std::vector<double>> beta;
      for (const auto& row : b) beta.push_back(numbers(row, "field.beta"));
      return CoefficientField::separable(beta);
    }
    schema("field", "rule must be \"power\", \"uniform\" or \"separable\"");
  }
  check_keys(j, {"d", "n", "entries"}, "field");
  std::vector<CoefficientEntry> entries;
  const auto& list = need(j, "entries", "field");
  if (!list.is_array()) schema("field", "entries must be an array");
  for (const auto& e : list) {
    check_keys(e, {"I", "b"}, "field.entries");
    const auto& I = need(e, "I", "field.entries");
    if (!I.is_array()) schema("field.entries", "I must be an array of indices");
    CoefficientEntry c;
    for (const auto& i : I) {
      if (!i.is_number_integer() || i.get<long long>() < 1)
        schema("field.entries", "indices must be positive integers");
      c.I.push_back(i.get<std::uint32_t>());
    }
    c.b = number_at(e, "b", "field.entries");
    entries.push_back(std::move(c));
  }
  return CoefficientField::dense(dim(), count_at(j, "n", "field"), std::move(entries));
}

// ---------------------------------------------------------------------------
// assumptions

json moment_envelope_to_json(const MomentEnvelope& m) {
  switch (m.kind()) {
    case MomentEnvelope::Kind::Constant:
      return {{"type", "constant"}, {"c", num(m.constant())}};
    case MomentEnvelope::Kind::Gq:
      return {{"type", "gq"}, {"q", exponent_to_json(m.exponent())}, {"C", num(m.constant())}};
    case MomentEnvelope::Kind::Table:
      return {{"type", "table"}, {"p", nums(m.table_p())}, {"mu", nums(m.table_mu())}};
  }
  return nullptr;
}

MomentEnvelope moment_envelope_from_json(const json& j) {
  const std::string type = string_at(j, "type", "moments");
  if (type == "constant") {
    check_keys(j, {"type", "c"}, "moments");
    return MomentEnvelope::constant(number_at(j, "c", "moments"));
  }
  if (type == "gq") {
    check_keys(j, {"type", "q", "C"}, "moments");
    return MomentEnvelope::gq(exponent_from_json(need(j, "q", "moments")),
                              number_or(j, "C", 1.0, "moments"));
  }
  if (type == "table") {
    check_keys(j, {"type", "p", "mu"}, "moments");
    return MomentEnvelope::table(numbers(need(j, "p", "moments"), "moments.p"),
                                 numbers(need(j, "mu", "moments"), "moments.mu"));
  }
  schema("moments", "type must be \"constant\", \"gq\" or \"table\"");
}

std::optional<CramerProfile> cramer_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  const std::string type = string_at(j, "type", "cramer");
  if (type == "quadratic") {
    check_keys(j, {"type", "sigma"}, "cramer");
    return CramerProfile::quadratic(number_or(j, "sigma", 1.0, "cramer"));
  }
  if (type == "log_cosh") {
    check_keys(j, {"type", "scale"}, "cramer");
    return CramerProfile::log_cosh(number_or(j, "scale", 1.0, "cramer"));
  }
  if (type == "power") {
    check_keys(j, {"type", "q"}, "cramer");
    return CramerProfile::power(number_at(j, "q", "cramer"));
  }
  if (type == "grid") {
    check_keys(j, {"type", "lambda", "phi"}, "cramer");
    return CramerProfile::from_grid(numbers(need(j, "lambda", "cramer"), "cramer.lambda"),
                                    numbers(need(j, "phi", "cramer"), "cramer.phi"));
  }
  if (type == "distribution") {
    check_keys(j, {"type", "values", "probs"}, "cramer");
    return CramerProfile::from_distribution(numbers(need(j, "values", "cramer"), "cramer.values"),
                                            numbers(need(j, "probs", "cramer"), "cramer.probs"));
  }
  schema("cramer", "unknown type \"" + type + "\"");
}

FamilyAssumptions assumptions_from_json(const json& j) {
  check_keys(j, {"d", "dependence", "tails", "q", "K", "moments", "cramer"}, "assumptions");
  const std::string dep = j.contains("dependence") ? string_at(j, "dependence", "assumptions")
                                                   : std::string("martingale");
  Dependence D;
  if (dep == "martingale")
    D = Dependence::Martingale;
  else if (dep == "independent")
    D = Dependence::Independent;
  else
    schema("assumptions", "dependence must be \"martingale\" or \"independent\"");

  FamilyAssumptions A;
  if (j.contains("tails")) {
    if (j.contains("q") || j.contains("K"))
      schema("assumptions", "give either \"tails\" or \"q\"/\"K\", not both");
    const auto& t = j.at("tails");
    if (!t.is_array() || t.empty()) schema("assumptions", "tails must be a nonempty array");
    A.d = static_cast<int>(t.size());
    for (const auto& e : t) A.tails.push_back(tail_from_json(e));
    A.dependence = D;
  } else if (j.contains("q")) {
    const QVector qv = qvector_from_json(j.at("q"));
    std::vector<double> K(qv.d(), 1.0);
    if (j.contains("K")) K = numbers(j.at("K"), "assumptions.K");
    if (K.size() != qv.q.size())
      fail(ErrorCode::DimensionMismatch, "assumptions: q and K differ in length");
    A = weibull_family(qv, K, D);
  } else {
    schema("assumptions", "need \"tails\" or \"q\"");
  }
  if (j.contains("d") && dim_at(j, "d", "assumptions") != A.d)
    fail(ErrorCode::DimensionMismatch, "assumptions: d disagrees with the listed coordinates");
  if (j.contains("moments")) {
    const auto& m = j.at("moments");
    if (!m.is_array()) schema("assumptions", "moments must be an array");
    A.moments.clear();
    for (const auto& e : m)
      A.moments.push_back(e.is_null() ? std::nullopt
                                      : std::optional<MomentEnvelope>(moment_envelope_from_json(e)));
  }
  if (j.contains("cramer")) {
    const auto& c = j.at("cramer");
    if (!c.is_array()) schema("assumptions", "cramer must be an array");
    A.cramer.clear();
    for (const auto& e : c) A.cramer.push_back(cramer_from_json(e));
  }
  A.validate();
  return A;
}

// ---------------------------------------------------------------------------
// bound results

json bound_to_json(const BoundResult& b) {
  json j = json::object();
  j["tail"] = b.tail ? tail_to_json(*b.tail) : json(nullptr);
  if (b.moments)
    j["moments"] = {{"p", nums(b.moments->p)}, {"bound", nums(b.moments->bound)}};
  else
    j["moments"] = nullptr;
  j["provenance"] = b.provenance;
  json meta = json::object();
  for (const auto& [k, v] : b.metadata) meta[k] = num(v);
  j["metadata"] = meta;
  j["notes"] = b.notes;
  return j;
}

BoundResult bound_from_json(const json& j) {
  check_keys(j, {"tail", "moments", "provenance", "metadata", "notes"}, "bound");
  BoundResult b;
  if (j.contains("tail") && !j.at("tail").is_null()) b.tail = tail_from_json(j.at("tail"));
  if (j.contains("moments") && !j.at("moments").is_null()) {
    const auto& m = j.at("moments");
    check_keys(m, {"p", "bound"}, "bound.moments");
    b.moments = MomentCurve{numbers(need(m, "p", "bound.moments"), "bound.moments.p"),
                            numbers(need(m, "bound", "bound.moments"), "bound.moments.bound")};
    if (b.moments->p.size() != b.moments->bound.size())
      fail(ErrorCode::DimensionMismatch, "bound.moments: p and bound differ in length");
  }
  if (j.contains("provenance")) b.provenance = j.at("provenance").get<std::vector<std::string>>();
  if (j.contains("notes")) b.notes = j.at("notes").get<std::vector<std::string>>();
  if (j.contains("metadata")) {
    const auto& m = j.at("metadata");
    if (!m.is_object()) schema("bound", "metadata must be an object");
    for (auto it = m.begin(); it != m.end(); ++it)
      b.metadata[it.key()] = number(it.value(), "bound.metadata");
  }
  return b;
}

// ---------------------------------------------------------------------------
// campaigns

json family_to_json(const FamilySpec& s) {
  json j = {{"name", family_name(s.kind)}, {"d", s.d}, {"n", s.n}};
  j["q"] = nums(s.q);
  if (s.kind == FamilyKind::DependentMartingale) j["gain"] = num(s.gain);
  return j;
}

FamilySpec family_from_json(const json& j) {
  check_keys(j, {"name", "d", "n", "q", "gain"}, "family");
  FamilySpec s;
  s.kind = parse_family(string_at(j, "name", "family"));
  s.d = dim_at(j, "d", "family");
  s.n = count_at(j, "n", "family");
  if (j.contains("q")) {
    const auto& q = j.at("q");
    s.q = q.is_array() ? numbers(q, "family.q") : std::vector<double>(s.d, number(q, "family.q"));
  }
  s.gain = number_or(j, "gain", 0.5, "family");
  s.validate();
  return s;
}

json tail_estimate_to_json(const TailEstimate& t) {
  return {{"x", nums(t.x)},
          {"estimate", nums(t.estimate)},
          {"cp_upper", nums(t.cp_upper)},
          {"count", t.count},
          {"replications", t.replications},
          {"confidence", num(t.confidence)}};
}

json moment_estimate_to_json(const MomentEstimate& m) {
  return {{"p", nums(m.p)},
          {"estimate", nums(m.estimate)},
          {"lower", nums(m.lower)},
          {"upper", nums(m.upper)},
          {"beyond_horizon", m.beyond_horizon},
          {"resamples", m.resamples}};
}

json report_to_json(const VerificationReport& r) {
  json oracle = json::array();
  for (const auto& o : r.oracle) oracle.push_back(o ? num(*o) : json(nullptr));
  std::vector<std::string> verdict, mverdict;
  for (bool v : r.verdict) verdict.push_back(v ? "PASS" : "FAIL");
  for (bool v : r.moment_verdict) mverdict.push_back(v ? "PASS" : "FAIL");
  return {{"family", family_to_json(r.spec)},
          {"field", r.field},
          {"seed", r.seed},
          {"replications", r.replications},
          {"bound_scale", num(r.bound_scale)},
          {"tail", tail_estimate_to_json(r.tail)},
          {"bound", nums(r.bound)},
          {"verdict", verdict},
          {"oracle", oracle},
          {"moments", moment_estimate_to_json(r.moments)},
          {"moment_bound", nums(r.moment_bound)},
          {"moment_verdict", mverdict},
          {"assumptions",
           {{"ok", r.assumptions.ok},
            {"max_envelope_excess", num(r.assumptions.max_envelope_excess)},
            {"max_drift_z", num(r.assumptions.max_drift_z)},
            {"messages", r.assumptions.messages}}},
          {"notes", r.notes},
          {"pass", r.pass}};
}

json with_header(json body, json extra_header) {
  char stamp[32];
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);
  json header = {{"tool", "chaos-tails"}, {"version", kVersion}, {"timestamp", stamp}};
  for (auto it = extra_header.begin(); it != extra_header.end(); ++it) header[it.key()] = it.value();
  return {{"header", header}, {"body", std::move(body)}};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::InvalidArgument, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorCode::InvalidArgument, path + ": " + e.what());
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::InvalidArgument, "cannot write " + path);
  out << content;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace chaos_tails::json_io
