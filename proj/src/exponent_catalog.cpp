#include "chaos_tails/exponent_catalog.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "chaos_tails/errors.hpp"
#include "chaos_tails/numerics.hpp"

namespace chaos_tails {

Exponent::Exponent(double v) : value_(v) {
  if (std::isinf(v) && v > 0) {
    infinite_ = true;
    value_ = 0.0;
    return;
  }
  require(std::isfinite(v) && v > 0.0, "exponent must be positive");
}

Exponent Exponent::infinity() {
  Exponent e;
  e.infinite_ = true;
  e.value_ = 0.0;
  return e;
}

Exponent Exponent::parse(std::string_view text) {
  std::string s(text);
  s.erase(std::remove_if(s.begin(), s.end(), ::isspace), s.end());
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
  if (lower == "inf" || lower == "infinity" || lower == "+inf") return infinity();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    fail(ErrorCode::InvalidArgument, "cannot parse exponent '" + s + "'");
  }
  require(used == s.size(), "cannot parse exponent '" + s + "'");
  return Exponent(v);
}

double Exponent::value() const {
  require(!infinite_, "exponent is infinite");
  return value_;
}

std::string Exponent::str() const {
  if (infinite_) return "inf";
  std::ostringstream os;
  os.precision(17);
  os << value_;
  return os.str();
}

QVector QVector::parse(std::string_view csv) {
  QVector qv;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? csv.size() : comma;
    qv.q.push_back(Exponent::parse(csv.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  require(!qv.q.empty(), "empty q vector");
  return qv;
}

QVector QVector::homogeneous(int d, Exponent q) {
  require(d >= 1, "dimension must be >= 1");
  return QVector{std::vector<Exponent>(static_cast<std::size_t>(d), q)};
}

namespace {

void check(const QVector& qv) { require(qv.d() >= 1, "q vector must have d >= 1 entries"); }

double sum_inverse(const QVector& qv) {
  double s = 0.0;
  for (const auto& e : qv.q) s += e.inverse();
  return s;
}

}  // namespace

ExponentResult exponent_M(const QVector& qv) {
  check(qv);
  return {1.0 / (0.5 * qv.d() + sum_inverse(qv)), false, std::nullopt, "M"};
}

ExponentResult exponent_N_base(Exponent q) {
  if (q.infinite()) return {2.0, false, std::nullopt, "q>1"};
  const double v = q.value();
  if (v <= 1.0) return {2.0 * v / (v + 2.0), false, std::nullopt, "q<=1"};
  return {std::min(v, 2.0), false, std::nullopt, "q>1"};
}

ExponentResult exponent_Nd(const QVector& qv, NdVariant variant) {
  check(qv);
  const int D = qv.d();
  const double total = sum_inverse(qv);
  const double base = variant == NdVariant::Corrected ? 0.5 * (D - 1) : 0.5 * (D - 2);
  double best = 0.0;
  int arg = 0;
  for (int k = 0; k < D; ++k) {
    const double inv = base + (total - qv.q[k].inverse()) + 1.0 / exponent_N_base(qv.q[k]).value;
    const double v = 1.0 / inv;
    if (v > best) {
      best = v;
      arg = k;
    }
  }
  std::string branch = "k=" + std::to_string(arg + 1);
  if (variant == NdVariant::Shifted) branch += ",literal";
  return {best, false, std::nullopt, branch};
}

ExponentResult exponent_gamma_dq(int d, Exponent q) {
  require(d >= 1, "gamma_dq: d must be >= 1");
  const double iq = q.inverse();  // 2q/(...) rewritten with 1/q
  if (!q.infinite() && q.value() <= 1.0) {
    const double v = q.value();
    return {2.0 * v / (d * (v + 2.0)), false, std::nullopt, "q in (0,1]"};
  }
  if (!q.infinite() && q.value() <= 2.0) {
    const double v = q.value();
    return {2.0 * v / (2.0 * d + v * (d - 1)), false, std::nullopt, "q in (1,2]"};
  }
  // 2q/[dq + 2(d-1)] = 2/[d + 2(d-1)/q]
  return {2.0 / (d + 2.0 * (d - 1) * iq), false, std::nullopt, "q in (2,inf]"};
}

ExponentResult vector_L(Exponent q, double r) {
  require(std::isfinite(r), "L: r must be finite");
  const double iq = q.inverse();
  // 2q/(q+2) = 2/(1 + 2/q), 2r/(q+2) = 2r/q / (1 + 2/q)
  return {2.0 / (1.0 + 2.0 * iq), false, 2.0 * r * iq / (1.0 + 2.0 * iq), "L"};
}

ExponentResult vector_N_qr(Exponent q, double r) {
  require(std::isfinite(r), "N_qr: r must be finite");
  if (!q.infinite()) {
    const double v = q.value();
    if (v < 1.0 || (v == 1.0 && r < 0.0))
      return {2.0 * v / (v + 2.0), false, 2.0 * r / (v + 2.0), "a"};
    if ((v == 1.0 && r >= 0.0) || (v > 1.0 && v < 2.0) || (v == 2.0 && r < 0.0))
      return {v, false, r, "b"};
  }
  return {2.0, false, 0.0, "c"};
}

ExponentResult log_refined_recursion(int d, Exponent q, double r) {
  require(d >= 1, "rV: d must be >= 1");
  require(std::isfinite(r), "rV: r must be finite");
  const double iq = q.inverse();
  auto V = [&](int k) { return 2.0 / (k * (1.0 + 2.0 * iq)); };
  double rk = 2.0 * r * iq / (1.0 + 2.0 * iq);  // 2r/(q+2)
  for (int k = 1; k < d; ++k) {
    // [r q + V r] / [V q + 2 V + 2 q], numerator and denominator divided by q
    const double v = V(k);
    rk = (rk + v * r * iq) / (v + 2.0 * v * iq + 2.0);
  }
  return {V(d), false, rk, "V,r"};
}

double moment_constant_gamma(int d) {
  require(d >= 1, "gamma: d must be >= 1");
  double g = std::sqrt(2.0);
  for (int k = 1; k < d; ++k) g *= std::sqrt(2.0) * std::pow(1.0 + 1.0 / k, k);
  return g;
}

double F_qr(double q, double r) { return r <= 0.0 ? 1.0 : std::exp(q); }

AuxConstants aux_constants(Exponent q, double r) {
  AuxConstants out;
  if (q.infinite()) {
    out.delta = 1.0;
    out.beta = 0.0;  // the integrand vanishes beyond 1 and e^{v^q} is unbounded
    out.F = 1.0;
    return out;
  }
  const double v = q.value();
  out.delta = std::pow(std::min(v / 2.0, 1.0), -1.0 / v);
  out.F = F_qr(v, r);
  // supremand e^{z} Gamma(2/q, z)/q with z = v^q
  const double a = 2.0 / v;
  auto supremand = [&](double x) {
    const double z = std::pow(x, v);
    return std::exp(z) * boost::math::tgamma(a, z) / v;
  };
  if (v < 2.0) {
    // grows like x^{2-q}/q
    out.beta = numerics::kInf;
    out.beta_argmax = numerics::kInf;
  } else {
    const double x_hi = std::pow(600.0, 1.0 / v);
    double best = supremand(0.0), arg = 0.0;
    const int n = 400;
    for (int i = 1; i <= n; ++i) {
      const double x = x_hi * i / n;
      const double s = supremand(x);
      if (s > best) {
        best = s;
        arg = x;
      }
    }
    if (arg > 0.0) {
      const auto m = numerics::golden_section([&](double x) { return -supremand(x); },
                                              std::max(0.0, arg - x_hi / n), arg + x_hi / n, 1e-12);
      if (-m.value > best) {
        best = -m.value;
        arg = m.arg;
      }
    }
    out.beta = best;
    out.beta_argmax = arg;
  }
  if (v > 2.0) out.beta_closed_form = std::tgamma(2.0 / v) / (v * std::exp(1.0));
  return out;
}

ExponentResult exponent_G(const QVector& qv) {
  check(qv);
  const double s = sum_inverse(qv);
  if (s == 0.0) return {0.0, true, std::nullopt, "G=inf"};
  return {1.0 / s, false, std::nullopt, "G"};
}

double ustat_scale_t(int d, int k, int r) {
  require(1 <= r && r <= k && k <= d, "t(d,k,r): need 1 <= r <= k <= d");
  return 1.0 / ((d - r + 1) * numerics::binomial(d, k));
}

}  // namespace chaos_tails
