#include "chaos_tails/cli.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "chaos_tails/bound_engine.hpp"
#include "chaos_tails/coefficient_series.hpp"
#include "chaos_tails/exponent_catalog.hpp"
#include "chaos_tails/json_io.hpp"
#include "chaos_tails/monte_carlo_lab.hpp"
#include "chaos_tails/ustat_bounds.hpp"

namespace chaos_tails {

namespace {

using json_io::json;
using json_io::format_number;

std::vector<double> parse_list(const std::string& csv, const char* what) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) fail(ErrorCode::InvalidArgument, std::string(what) + ": bad number \"" + item + "\"");
    out.push_back(v);
  }
  require(!out.empty(), std::string(what) + ": empty list");
  return out;
}

json number_json(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
}

json exponent_result_json(const ExponentResult& r) {
  json j;
  j["value"] = r.infinite ? json("inf") : number_json(r.value);
  j["branch"] = r.branch;
  if (r.log_power) j["log_power"] = number_json(*r.log_power);
  return j;
}

// ---------------------------------------------------------------------------
// exponent

struct ExponentArgs {
  std::string name;
  std::string q;
  std::optional<int> d;
  std::optional<double> r;
  std::optional<int> k;
  bool literal = false;
};

json cmd_exponent(const ExponentArgs& a) {
  auto need_q = [&] {
    require(!a.q.empty(), a.name + " needs --q");
    return QVector::parse(a.q);
  };
  auto need_single_q = [&] {
    const QVector qv = need_q();
    require(qv.d() == 1, a.name + " takes a single exponent in --q");
    return qv.q[0];
  };
  auto need_d = [&] {
    require(a.d.has_value(), a.name + " needs --d");
    require(*a.d >= 1, "--d must be at least 1");
    return *a.d;
  };
  auto need_r = [&] {
    require(a.r.has_value(), a.name + " needs --r");
    return *a.r;
  };
  json out = {{"name", a.name}};
  if (a.name == "M" || a.name == "Nd" || a.name == "G") {
    const QVector qv = need_q();
    ExponentResult r = a.name == "M"    ? exponent_M(qv)
                       : a.name == "G" ? exponent_G(qv)
                                        : exponent_Nd(qv, a.literal ? NdVariant::Shifted
                                                                    : NdVariant::Corrected);
    out["d"] = qv.d();
    out["q"] = json_io::qvector_to_json(qv);
    out.update(exponent_result_json(r));
  } else if (a.name == "gamma_dq") {
    const int d = need_d();
    const Exponent q = need_single_q();
    out["d"] = d;
    out["q"] = json::array({json_io::exponent_to_json(q)});
    out.update(exponent_result_json(exponent_gamma_dq(d, q)));
  } else if (a.name == "L" || a.name == "N_qr") {
    const Exponent q = need_single_q();
    const double r = need_r();
    out["q"] = json::array({json_io::exponent_to_json(q)});
    out["r"] = r;
    out.update(exponent_result_json(a.name == "L" ? vector_L(q, r) : vector_N_qr(q, r)));
  } else if (a.name == "rV") {
    const int d = need_d();
    const Exponent q = need_single_q();
    const double r = need_r();
    out["d"] = d;
    out["q"] = json::array({json_io::exponent_to_json(q)});
    out["r"] = r;
    out.update(exponent_result_json(log_refined_recursion(d, q, r)));
  } else if (a.name == "gamma_moment") {
    const int d = need_d();
    out["d"] = d;
    out["value"] = moment_constant_gamma(d);
    out["branch"] = "gamma(1) = sqrt 2, gamma(d+1) = gamma(d) sqrt 2 (1 + 1/d)^d";
  } else if (a.name == "t") {
    const int d = need_d();
    require(a.k.has_value(), "t needs --k");
    const double r = need_r();
    require(r == std::floor(r), "t needs an integer rank --r");
    out["d"] = d;
    out["k"] = *a.k;
    out["r"] = static_cast<int>(r);
    out["value"] = ustat_scale_t(d, *a.k, static_cast<int>(r));
    out["branch"] = "t(d, k, r)";
  } else {
    fail(ErrorCode::InvalidArgument,
         "unknown exponent name \"" + a.name + "\" (M, Nd, gamma_dq, L, N_qr, rV, gamma_moment, G, t)");
  }
  return out;
}

// ---------------------------------------------------------------------------
// bound

struct BoundArgs {
  std::string mode;
  int theorem = 0;
  std::string assumptions;
  std::string p;
  std::string out;
  std::string csv;
};

std::vector<double> default_p() {
  std::vector<double> p;
  for (int k = 2; k <= 10; ++k) p.push_back(k);
  return p;
}

std::vector<double> p_list(const json& file, const std::string& flag) {
  if (!flag.empty()) return parse_list(flag, "--p");
  if (file.contains("p")) {
    std::vector<double> p;
    for (const auto& v : file.at("p")) {
      require(v.is_number(), "p must be an array of numbers");
      p.push_back(v.get<double>());
    }
    require(!p.empty(), "p must be nonempty");
    return p;
  }
  return default_p();
}

json without(json j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) j.erase(k);
  return j;
}

BoundResult moment_curve(const std::vector<double>& p, const std::function<double(double)>& f,
                         std::string provenance) {
  BoundResult b;
  MomentCurve c;
  for (double v : p) {
    c.p.push_back(v);
    c.bound.push_back(f(v));
  }
  b.moments = c;
  b.provenance.push_back(std::move(provenance));
  return b;
}

}  // namespace

BoundResult build_bound(int theorem, const std::string& mode, const json_io::json& file,
                        const std::string& p_flag) {
  require(mode == "tail" || mode == "moment", "--mode must be tail or moment");
  const bool tail_mode = mode == "tail";
  auto tail_only = [&] {
    require(tail_mode, "theorem " + std::to_string(theorem) + " gives a tail bound; use --mode tail");
  };
  BoundResult b;
  bool is_moment = false;
  switch (theorem) {
    case 1:
    case 2: {
      tail_only();
      json_io::check_keys(file, {"q", "K"}, "assumptions");
      const QVector qv = json_io::qvector_from_json(file.at("q"));
      std::vector<double> K(qv.d(), 1.0);
      if (file.contains("K")) K = file.at("K").get<std::vector<double>>();
      b = theorem == 1 ? theorem1_envelope(qv, K) : theorem2_envelope(qv, K);
      break;
    }
    case 4:
    case 5: {
      tail_only();
      const auto A = json_io::assumptions_from_json(file);
      b = theorem == 4 ? martingale_tail_recursion(A) : independent_tail_recursion(A);
      break;
    }
    case 6:
    case 7: {
      const auto A = json_io::assumptions_from_json(without(file, {"p"}));
      b = moment_bound_curve(A, p_list(file, p_flag), theorem == 7);
      is_moment = true;
      break;
    }
    case 8: {
      json_io::check_keys(file, {"kernel", "C", "p"}, "assumptions");
      const auto K = json_io::kernel_from_json(file.at("kernel"));
      const double C = file.value("C", std::sqrt(2.0));
      b = moment_curve(p_list(file, p_flag),
                       [&](double p) { return ustat_moment_bound(K, p, C); },
                       "ustat moment bound C^d p^d |Phi|_p / log p, C = " + format_number(C));
      is_moment = true;
      break;
    }
    case 9: {
      tail_only();
      json_io::check_keys(file, {"d", "q", "r", "K"}, "assumptions");
      require(file.contains("d") && file.contains("q") && file.contains("r"),
              "theorem 9 needs d, q and r");
      const auto u = ustat_tail_parametric(file.at("d").get<int>(),
                                           json_io::exponent_from_json(file.at("q")),
                                           file.at("r").get<double>(), file.value("K", 1.0));
      b.tail = u.tail;
      b.metadata["exponent"] = u.exponent;
      b.metadata["log_power"] = u.log_power;
      b.provenance.push_back("ustat parametric tail with C(d, q, r) = 1");
      break;
    }
    case 10: {
      tail_only();
      json_io::check_keys(file, {"kernel"}, "assumptions");
      b = ustat_tail_recursion(json_io::kernel_from_json(file.at("kernel")));
      break;
    }
    case 13:
    case 14: {
      tail_only();
      json_io::check_keys(file, {"field", "q", "K", "C1", "C2"}, "assumptions");
      require(file.contains("field") && file.contains("q"), "theorems 13 and 14 need field and q");
      const QVector qv = json_io::qvector_from_json(file.at("q"));
      const auto F = json_io::field_from_json(file.at("field"), qv.d());
      std::vector<double> K;
      if (file.contains("K")) K = file.at("K").get<std::vector<double>>();
      SplitTailOptions opt;
      opt.C1 = file.value("C1", 1.0);
      opt.C2 = file.value("C2", 1.0);
      b.tail = theorem == 13 ? theorem13_tail(F, qv, K, opt) : theorem14_tail(F, qv, K, opt);
      b.metadata["C1"] = opt.C1;
      b.metadata["C2"] = opt.C2;
      b.metadata["sum_sq"] = F.sum_sq();
      b.provenance.push_back(std::string("split-measure tail with exponent ") +
                             (theorem == 13 ? "M" : "N_d") + ", field " + F.describe());
      b.notes.push_back("C1 and C2 are not tracked; the values used are listed in metadata");
      break;
    }
    case 15:
    case 16: {
      json_io::check_keys(file, {"field", "d", "p"}, "assumptions");
      require(file.contains("field"), "theorems 15 and 16 need field");
      std::optional<int> d;
      if (file.contains("d")) d = file.at("d").get<int>();
      const auto F = json_io::field_from_json(file.at("field"), d);
      b = moment_curve(p_list(file, p_flag),
                       [&](double p) {
                         return theorem == 15 ? theorem15_moment(F, F.d(), p)
                                              : theorem16_moment(F, F.d(), p);
                       },
                       std::string("split-measure moment bound inf_lambda (a1 + a2 p^d") +
                           (theorem == 15 ? " / log p)" : ")") + ", field " + F.describe());
      is_moment = true;
      break;
    }
    default:
      fail(ErrorCode::InvalidArgument,
           "--theorem must be one of 1 2 4 5 6 7 8 9 10 13 14 15 16");
  }
  if (is_moment && tail_mode) {
    const MomentCurve c = *b.moments;
    b.tail = moments_to_tail([c](double p) {
      // piecewise-linear in p between listed orders, flat beyond
      if (p <= c.p.front()) return c.bound.front();
      for (std::size_t i = 1; i < c.p.size(); ++i)
        if (p <= c.p[i]) {
          const double w = (p - c.p[i - 1]) / (c.p[i] - c.p[i - 1]);
          return c.bound[i - 1] + w * (c.bound[i] - c.bound[i - 1]);
        }
      return std::numeric_limits<double>::infinity();
    });
    b.provenance.push_back("Markov inequality over the listed moment orders");
  }
  if (!is_moment && !tail_mode)
    fail(ErrorCode::InvalidArgument, "theorem " + std::to_string(theorem) + " gives a tail bound; use --mode tail");
  return b;
}

namespace {

std::string bound_csv(const BoundResult& b, bool tail_mode) {
  std::string s;
  if (tail_mode) {
    s = "x,bound\n";
    const TailFunction& T = *b.tail;
    std::vector<double> x;
    if (!T.is_parametric()) {
      const auto nodes = T.nodes();
      x.assign(nodes.begin(), nodes.end());
    } else {
      const double hi = T.upper_scale();
      for (int k = 0; k < 256; ++k) x.push_back(hi * k / 255.0);
    }
    for (double v : x) s += format_number(v) + "," + format_number(T(v)) + "\n";
  } else {
    s = "p,bound\n";
    for (std::size_t k = 0; k < b.moments->p.size(); ++k)
      s += format_number(b.moments->p[k]) + "," + format_number(b.moments->bound[k]) + "\n";
  }
  return s;
}

json cmd_bound(const BoundArgs& a) {
  const json file = json_io::read_json_file(a.assumptions);
  const BoundResult b = build_bound(a.theorem, a.mode, file, a.p);
  json body = {{"command", "bound"}, {"mode", a.mode}, {"theorem", a.theorem},
               {"assumptions", file}, {"result", json_io::bound_to_json(b)}};
  if (!a.p.empty()) body["p"] = parse_list(a.p, "--p");
  const json doc = json_io::with_header(body);
  if (!a.out.empty()) json_io::write_file(a.out, doc.dump(2) + "\n");
  if (!a.csv.empty()) json_io::write_file(a.csv, bound_csv(b, a.mode == "tail"));
  return doc;
}

// ---------------------------------------------------------------------------
// simulate and oracle

struct SimulateArgs {
  std::string family = "rademacher";
  int d = 1;
  std::size_t n = 1;
  std::string q;
  double gain = 0.5;
  std::size_t replications = 10000;
  std::uint64_t seed = 20240101;
  std::string field;
  std::string x;
  std::string p;
  std::string csv;
};

CoefficientField field_or_uniform(const std::string& path, int d, std::size_t n) {
  if (path.empty()) return CoefficientField::uniform(d, n);
  return json_io::field_from_json(json_io::read_json_file(path), d);
}

json cmd_simulate(const SimulateArgs& a) {
  FamilySpec s;
  s.kind = parse_family(a.family);
  s.d = a.d;
  s.n = a.n;
  if (!a.q.empty()) {
    s.q = parse_list(a.q, "--q");
    if (s.q.size() == 1) s.q.assign(a.d, s.q[0]);
  }
  s.gain = a.gain;
  s.validate();
  require(a.replications >= 1, "--replications must be positive");
  const auto F = field_or_uniform(a.field, a.d, a.n);
  const SampleBatch B = generate_batch(s, a.replications, a.seed, default_workers());
  const auto Q = evaluate_Qd(F, B);
  std::vector<double> x;
  if (!a.x.empty()) {
    x = parse_list(a.x, "--x");
  } else {
    double top = 0.0;
    for (double v : Q) top = std::max(top, std::abs(v));
    for (int k = 0; k <= 32; ++k) x.push_back(top * k / 32.0);
  }
  const auto tail = empirical_tail(Q, x);
  double mean = 0.0, var = 0.0;
  for (double v : Q) mean += v;
  mean /= Q.size();
  for (double v : Q) var += (v - mean) * (v - mean);
  var /= Q.size() > 1 ? Q.size() - 1 : 1;
  json body = {{"command", "simulate"},
               {"family", json_io::family_to_json(s)},
               {"field", json_io::field_to_json(F)},
               {"seed", a.seed},
               {"replications", a.replications},
               {"mean", number_json(mean)},
               {"variance", number_json(var)},
               {"tail", json_io::tail_estimate_to_json(tail)}};
  if (!a.p.empty()) {
    const auto ps = parse_list(a.p, "--p");
    body["moments"] = json_io::moment_estimate_to_json(empirical_moments(Q, ps));
  }
  if (!a.csv.empty()) {
    std::string s_csv = "x,empirical,cp_upper\n";
    for (std::size_t k = 0; k < x.size(); ++k)
      s_csv += format_number(x[k]) + "," + format_number(tail.estimate[k]) + "," +
               format_number(tail.cp_upper[k]) + "\n";
    json_io::write_file(a.csv, s_csv);
  }
  return json_io::with_header(body);
}

struct OracleArgs {
  std::string field;
  int d = 1;
  std::size_t n = 1;
  std::string x;
};

json cmd_oracle(const OracleArgs& a) {
  const auto F = field_or_uniform(a.field, a.d, a.n);
  require(!a.x.empty(), "oracle needs --x");
  const auto x = parse_list(a.x, "--x");
  const auto t = exact_oracle_tail(F, x);
  json tails = json::array();
  for (double v : t) tails.push_back(number_json(v));
  return {{"command", "oracle"},
          {"field", json_io::field_to_json(F)},
          {"x", x},
          {"tail", tails}};
}

// ---------------------------------------------------------------------------
// verify and report

struct VerifyArgs {
  std::string config;
  std::optional<double> scale;
  std::string out;
  std::string csv;
};

BoundResult campaign_bound(const json& spec, const FamilySpec& fam, const CoefficientField& F) {
  json_io::check_keys(spec, {"theorem", "tail", "assumptions"}, "bound");
  if (spec.contains("tail")) {
    require(!spec.contains("theorem"), "bound: give either theorem or tail");
    BoundResult b;
    b.tail = json_io::tail_from_json(spec.at("tail"));
    b.provenance.push_back("tail given in the campaign config");
    return b;
  }
  require(spec.contains("theorem"), "bound: need theorem or tail");
  const FamilyAssumptions A = spec.contains("assumptions")
                                  ? json_io::assumptions_from_json(spec.at("assumptions"))
                                  : fam.assumptions();
  if (A.d != F.d()) fail(ErrorCode::DimensionMismatch, "bound: assumptions and field differ in d");
  QVector qv;
  for (int m = 0; m < fam.d; ++m)
    qv.q.push_back(fam.kind == FamilyKind::Rademacher || fam.kind == FamilyKind::DependentMartingale
                       ? Exponent::infinity()
                       : Exponent(fam.q_of(m)));
  const auto& th = spec.at("theorem");
  BoundResult b;
  bool normalized = true;  // bounds stated for sum b^2 = 1
  if (th.is_string() && th.get<std::string>() == "split") {
    b = split_pipeline_tail(F, A);
    normalized = false;
  } else {
    require(th.is_number_integer(), "bound.theorem must be 1, 2, 4, 5, 13, 14 or \"split\"");
    switch (th.get<int>()) {
      case 1:
        b = theorem1_envelope(qv, std::vector<double>(qv.d(), 1.0));
        break;
      case 2:
        b = theorem2_envelope(qv, std::vector<double>(qv.d(), 1.0));
        break;
      case 4:
        b = martingale_tail_recursion(A);
        break;
      case 5:
        b = independent_tail_recursion(A);
        break;
      case 13:
      case 14:
        b.tail = th.get<int>() == 13 ? theorem13_tail(F, qv) : theorem14_tail(F, qv);
        b.provenance.push_back("split-measure tail with C1 = C2 = 1");
        normalized = false;
        break;
      default:
        fail(ErrorCode::InvalidArgument, "bound.theorem must be 1, 2, 4, 5, 13, 14 or \"split\"");
    }
  }
  const double s = std::sqrt(F.sum_sq());
  if (normalized && std::abs(s - 1.0) > 1e-12) {
    const TailFunction T = *b.tail;
    b.tail = tabulate_tail([T, s](double x) { return T(x / s); }, s * T.characteristic_scale());
    b.provenance.push_back("rescaled by the coefficient norm " + format_number(s));
  }
  return b;
}

json config_echo(const json& cfg, const VerifyConfig& vc) {
  json e = cfg;
  e["seed"] = vc.seed;
  e["replications"] = vc.replications;
  e["scale_bound"] = vc.bound_scale;
  return e;
}

}  // namespace

CampaignRun run_campaign(const json_io::json& cfg, std::optional<double> scale_bound) {
  json_io::check_keys(cfg,
                      {"family", "field", "bound", "moment", "replications", "seed", "x_grid",
                       "x_range", "grid_points", "scale_bound", "confidence", "bootstrap",
                       "envelope_sample", "declared_tails", "oracle"},
                      "campaign");
  require(cfg.contains("family"), "campaign: missing family");
  const FamilySpec fam = json_io::family_from_json(cfg.at("family"));
  const CoefficientField F = cfg.contains("field")
                                 ? json_io::field_from_json(cfg.at("field"), fam.d)
                                 : CoefficientField::uniform(fam.d, fam.n);
  if (F.d() != fam.d || !F.n() || *F.n() != fam.n)
    fail(ErrorCode::DimensionMismatch, "campaign: field and family differ in d or n");

  VerifyConfig vc;
  vc.workers = default_workers();
  vc.replications = cfg.value("replications", vc.replications);
  vc.seed = cfg.value("seed", vc.seed);
  vc.grid_points = cfg.value("grid_points", vc.grid_points);
  vc.bound_scale = cfg.value("scale_bound", 1.0);
  if (scale_bound) vc.bound_scale = *scale_bound;
  vc.confidence = cfg.value("confidence", vc.confidence);
  vc.bootstrap = cfg.value("bootstrap", vc.bootstrap);
  vc.envelope_sample = cfg.value("envelope_sample", vc.envelope_sample);
  if (cfg.contains("x_grid")) {
    require(!cfg.contains("x_range"), "campaign: give x_grid or x_range, not both");
    vc.x_grid = cfg.at("x_grid").get<std::vector<double>>();
  } else if (cfg.contains("x_range")) {
    const auto& r = cfg.at("x_range");
    json_io::check_keys(r, {"lo", "hi", "points"}, "campaign.x_range");
    const double lo = r.at("lo").get<double>(), hi = r.at("hi").get<double>();
    const int pts = r.value("points", 33);
    require(pts >= 2 && hi > lo, "campaign.x_range: need hi > lo and at least 2 points");
    for (int k = 0; k < pts; ++k) vc.x_grid.push_back(lo + (hi - lo) * k / (pts - 1));
  }
  if (cfg.contains("declared_tails")) {
    std::vector<TailFunction> d;
    for (const auto& t : cfg.at("declared_tails")) d.push_back(json_io::tail_from_json(t));
    vc.declared_tails = d;
  }
  if (cfg.contains("oracle")) {
    vc.use_oracle = cfg.at("oracle").get<bool>();
    if (vc.use_oracle && fam.n * static_cast<std::size_t>(fam.d) > 24)
      fail(ErrorCode::TooLarge, "exact oracle requested for n d = " +
                                    std::to_string(fam.n * fam.d) + " > 24");
  }
  BoundResult bound;
  if (cfg.contains("bound")) bound = campaign_bound(cfg.at("bound"), fam, F);
  if (cfg.contains("moment")) {
    const auto& m = cfg.at("moment");
    json_io::check_keys(m, {"theorem", "p"}, "campaign.moment");
    const int th = m.value("theorem", 6);
    require(th == 6 || th == 7, "campaign.moment.theorem must be 6 or 7");
    vc.moment_p = m.contains("p") ? m.at("p").get<std::vector<double>>() : default_p();
    const FamilyAssumptions A = fam.assumptions();
    vc.moment_bound = [A, th](double p) {
      return th == 6 ? martingale_moment_bound(A, p) : independent_moment_bound(A, p);
    };
  }
  require(bound.tail || !vc.moment_p.empty(), "campaign: nothing to verify (no bound, no moment)");

  CampaignRun out;
  out.report = verify_campaign(fam, F, bound, vc);
  json body = json_io::report_to_json(out.report);
  body["command"] = "verify";
  body["config"] = config_echo(cfg, vc);
  if (bound.tail) body["certified_bound"] = json_io::bound_to_json(bound);
  out.document = json_io::with_header(body, {{"runtime_seconds", out.report.runtime_seconds},
                                             {"workers", vc.workers}});
  return out;
}

namespace {

std::pair<json, bool> cmd_verify(const VerifyArgs& a) {
  const auto run = run_campaign(json_io::read_json_file(a.config), a.scale);
  if (!a.out.empty()) json_io::write_file(a.out, run.document.dump(2) + "\n");
  if (!a.csv.empty()) json_io::write_file(a.csv, report_csv(run.report));
  return {run.document, run.report.pass};
}

struct ReportArgs {
  std::string input;
  std::string csv;
};

std::pair<json, bool> cmd_report(const ReportArgs& a) {
  const json doc = json_io::read_json_file(a.input);
  require(doc.contains("body") && doc.at("body").is_object(), "report: expected a verify report");
  const json& r = doc.at("body");
  require(r.contains("tail") && r.contains("verdict") && r.contains("bound"),
          "report: expected a verify report");
  const auto& t = r.at("tail");
  const auto x = t.at("x").get<std::vector<json>>();
  json failures = json::array();
  std::size_t zero_count = 0;
  std::string csv = "x,empirical,cp_upper,bound,verdict\n";
  auto val = [](const json& v) {
    if (v.is_number()) return v.get<double>();
    const auto s = v.get<std::string>();
    return s == "inf" ? std::numeric_limits<double>::infinity()
                      : s == "-inf" ? -std::numeric_limits<double>::infinity()
                                    : std::numeric_limits<double>::quiet_NaN();
  };
  for (std::size_t k = 0; k < x.size(); ++k) {
    const std::string verdict = r.at("verdict").at(k).get<std::string>();
    if (verdict != "PASS") failures.push_back(x[k]);
    if (t.at("count").at(k).get<std::size_t>() == 0) ++zero_count;
    csv += format_number(val(x[k])) + "," + format_number(val(t.at("estimate").at(k))) + "," +
           format_number(val(t.at("cp_upper").at(k))) + "," +
           format_number(val(r.at("bound").at(k))) + "," + verdict + "\n";
  }
  json mfail = json::array();
  if (r.contains("moment_verdict"))
    for (std::size_t k = 0; k < r.at("moment_verdict").size(); ++k)
      if (r.at("moment_verdict").at(k) != "PASS") mfail.push_back(r.at("moments").at("p").at(k));
  double worst = 0.0;  // smallest bound / cp_upper over points with hits
  bool have = false;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (t.at("count").at(k).get<std::size_t>() == 0) continue;
    const double ratio = val(r.at("bound").at(k)) / val(t.at("cp_upper").at(k));
    worst = have ? std::min(worst, ratio) : ratio;
    have = true;
  }
  if (!a.csv.empty()) json_io::write_file(a.csv, csv);
  const bool pass = r.value("pass", false);
  json out = {{"command", "report"},
              {"pass", pass},
              {"points", x.size()},
              {"zero_count_points", zero_count},
              {"tail_failures", failures},
              {"moment_failures", mfail},
              {"min_bound_to_cp_ratio", have ? number_json(worst) : json(nullptr)},
              {"seed", r.value("seed", std::uint64_t{0})},
              {"replications", r.value("replications", std::size_t{0})}};
  return {out, pass};
}

void emit(const json& j) { std::cout << j.dump(2) << "\n"; }

int emit_error(int code, const std::string& kind, const std::string& message) {
  std::cerr << "chaos-tails: " << message << "\n";
  emit({{"error", {{"code", kind}, {"message", message}, {"exit", code}}}});
  return code;
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
      return 2;
    case ErrorCode::TooLarge:
      return 4;
    case ErrorCode::Divergent:
    case ErrorCode::Unbounded:
    case ErrorCode::NonMonotoneMoments:
    case ErrorCode::MissingMoments:
    case ErrorCode::AllProjectionsZero:
    case ErrorCode::NonSummable:
    case ErrorCode::AssumptionViolated:
      return 3;
  }
  return 2;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Tail and moment bounds for multilinear forms in dependent variables"};
  app.require_subcommand(1);
  std::function<int()> action;

  ExponentArgs ea;
  auto* ex = app.add_subcommand("exponent", "Evaluate a tail or moment exponent");
  ex->add_option("--name", ea.name, "M|Nd|gamma_dq|L|N_qr|rV|gamma_moment|G|t")->required();
  ex->add_option("--q", ea.q, "Exponent list, e.g. 2,inf");
  ex->add_option("--d", ea.d, "Dimension");
  ex->add_option("--r", ea.r, "Log power or rank");
  ex->add_option("--k", ea.k, "Projection order (t)");
  ex->add_flag("--literal", ea.literal, "Nd: shifted variant of the recursion");
  ex->callback([&] { action = [&] { emit(cmd_exponent(ea)); return 0; }; });

  BoundArgs ba;
  auto* bo = app.add_subcommand("bound", "Build a tail or moment bound");
  bo->add_option("--mode", ba.mode, "tail|moment")->required();
  bo->add_option("--theorem", ba.theorem, "1|2|4|5|6|7|8|9|10|13|14|15|16")->required();
  bo->add_option("--assumptions", ba.assumptions, "Assumptions JSON file")->required();
  bo->add_option("--p", ba.p, "Moment orders, e.g. 2,4,8");
  bo->add_option("--out", ba.out, "Write the BoundResult JSON here");
  bo->add_option("--csv", ba.csv, "Write the curve as CSV here");
  bo->callback([&] { action = [&] { emit(cmd_bound(ba)); return 0; }; });

  SimulateArgs sa;
  auto* si = app.add_subcommand("simulate", "Simulate Q_d and report empirical tails");
  si->add_option("--family", sa.family, "rademacher|weibull_symmetric|scaled_product|dependent_martingale");
  si->add_option("--d", sa.d, "Dimension");
  si->add_option("--n", sa.n, "Length");
  si->add_option("--q", sa.q, "Per-coordinate exponents");
  si->add_option("--gain", sa.gain, "dependent_martingale gain");
  si->add_option("--replications", sa.replications, "Replications");
  si->add_option("--seed", sa.seed, "Master seed");
  si->add_option("--field", sa.field, "Field JSON file (default uniform)");
  si->add_option("--x", sa.x, "Tail grid");
  si->add_option("--p", sa.p, "Moment orders");
  si->add_option("--csv", sa.csv, "Write x,empirical,cp_upper here");
  si->callback([&] { action = [&] { emit(cmd_simulate(sa)); return 0; }; });

  OracleArgs oa;
  auto* orc = app.add_subcommand("oracle", "Exact Rademacher tail by enumeration");
  orc->add_option("--field", oa.field, "Field JSON file (default uniform)");
  orc->add_option("--d", oa.d, "Dimension");
  orc->add_option("--n", oa.n, "Length");
  orc->add_option("--x", oa.x, "Points")->required();
  orc->callback([&] { action = [&] { emit(cmd_oracle(oa)); return 0; }; });

  VerifyArgs va;
  auto* ve = app.add_subcommand("verify", "Run a verification campaign");
  ve->add_option("--config", va.config, "Campaign config JSON")->required();
  ve->add_option("--scale-bound", va.scale, "Multiply the certified bound (falsification check)");
  ve->add_option("--out", va.out, "Write the report JSON here");
  ve->add_option("--csv", va.csv, "Write x,empirical,cp_upper,bound,verdict here");
  ve->callback([&] {
    action = [&] {
      auto [doc, pass] = cmd_verify(va);
      emit(doc);
      return pass ? 0 : 1;
    };
  });

  ReportArgs ra;
  auto* re = app.add_subcommand("report", "Summarize a verify report and export its curve");
  re->add_option("--input", ra.input, "Report JSON")->required();
  re->add_option("--csv", ra.csv, "Write x,empirical,cp_upper,bound,verdict here");
  re->callback([&] {
    action = [&] {
      auto [doc, pass] = cmd_report(ra);
      emit(doc);
      return pass ? 0 : 1;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return emit_error(2, "InvalidArgument", e.what());
  }
  try {
    return action ? action() : 2;
  } catch (const Error& e) {
    return emit_error(exit_code_for(e.code()), std::string(error_code_name(e.code())), e.what());
  } catch (const json_io::json::exception& e) {
    return emit_error(2, "InvalidArgument", e.what());
  } catch (const std::exception& e) {
    return emit_error(2, "InvalidArgument", e.what());
  }
}

}  // namespace chaos_tails
