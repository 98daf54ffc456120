#include <algorithm>
#include <cmath>
#include <map>

#include <boost/math/special_functions/gamma.hpp>

#include "chaos_tails/errors.hpp"
#include "chaos_tails/numerics.hpp"
#include "chaos_tails/tail_algebra.hpp"

namespace chaos_tails {

namespace {

constexpr double kNegligible = 1e-18;

double param_exponent(const ParametricTail& p, double x) {
  const double z = x / p.K;
  const double base = std::pow(z, p.q);
  if (p.rho == 0.0 || base == 0.0) return base;
  const double F = p.rho < 0.0 ? std::exp(p.q) : 1.0;
  return base * std::pow(std::log(F + z), p.rho);
}

double param_eval(const ParametricTail& p, double x) {
  if (x <= 0.0) return 1.0;
  return std::min(1.0, p.Y * std::exp(-param_exponent(p, x)));
}

// smallest x with exponent(x) >= target; the exponent is increasing
double param_solve(const ParametricTail& p, double target) {
  if (target <= 0.0) return 0.0;
  double hi = p.K;
  for (int i = 0; i < 2000 && param_exponent(p, hi) < target; ++i) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (param_exponent(p, mid) < target) lo = mid; else hi = mid;
    if (hi - lo <= 1e-15 * hi) break;
  }
  return hi;
}

double param_kink(const ParametricTail& p) {
  return p.Y > 1.0 ? param_solve(p, std::log(p.Y)) : 0.0;
}

// int_a^inf y T(y) dy
double param_first_moment_tail(const ParametricTail& p, double a) {
  const double xk = param_kink(p);
  double flat = 0.0;
  if (a < xk) {
    flat = 0.5 * (xk * xk - a * a);
    a = xk;
  }
  if (p.rho == 0.0) {
    const double s = std::pow(a / p.K, p.q);
    return flat + p.Y * p.K * p.K / p.q * boost::math::tgamma(2.0 / p.q, s);
  }
  auto f = [&](double y) { return y * p.Y * std::exp(-param_exponent(p, y)); };
  const double U = std::max(a, param_solve(p, std::log(p.Y) + 60.0));
  return flat + numerics::integrate(f, a, U, 1e-10) +
         numerics::integrate(f, U, numerics::kInf, 1e-10);
}

// E(k, D) = int_0^D e^{k t} dt
double expint0(double k, double D) {
  if (k == 0.0) return D;
  return std::expm1(k * D) / k;
}

// int_a^b y T(y) dy for T log-linear in log(1+y) with slope s, T(a) = ta
double loglinear_moment(double a, double b, double ta, double s) {
  const double D = std::log1p(b) - std::log1p(a);
  const double A = 1.0 + a;
  return ta * (A * A * expint0(s + 2.0, D) - A * expint0(s + 1.0, D));
}

// int_a^inf of the same, finite only for s < -2
double loglinear_moment_tail(double a, double ta, double s) {
  if (ta == 0.0) return 0.0;
  if (!(s < -2.0)) return numerics::kInf;
  const double A = 1.0 + a;
  return ta * A * (A / (-s - 2.0) - 1.0 / (-s - 1.0));
}

}  // namespace

struct TailFunction::GridCache {
  std::vector<double> u;     // log1p(x)
  std::vector<double> logt;  // log t (-inf at zeros)
  double tail_slope = 0.0;   // slope of log t vs u beyond the last node
  std::vector<double> suffix;  // int_{x_i}^inf y T(y) dy
  std::vector<double> jumps;   // nodes where the tail is discontinuous
};

TailFunction::TailFunction() : TailFunction(indicator(1.0)) {}

TailFunction TailFunction::parametric(double Y, double K, double q, double rho) {
  return parametric(ParametricTail{Y, K, q, rho});
}

TailFunction TailFunction::parametric(const ParametricTail& p) {
  require(std::isfinite(p.Y) && p.Y >= 1.0, "parametric tail: need Y >= 1");
  require(std::isfinite(p.K) && p.K > 0.0, "parametric tail: need K > 0");
  require(std::isfinite(p.q) && p.q > 0.0, "parametric tail: need q > 0");
  require(std::isfinite(p.rho), "parametric tail: rho must be finite");
  // below this the log factor can beat the power and break monotonicity
  require(p.rho >= -p.q * p.q, "parametric tail: need rho >= -q^2");
  TailFunction T{RawTag{}};
  T.repr_ = p;
  T.cache_.reset();
  return T;
}

TailFunction TailFunction::grid(std::vector<double> x, std::vector<double> t) {
  require(!x.empty() && x.size() == t.size(), "grid tail: x and t must have equal nonzero length");
  require(x[0] == 0.0, "grid tail: first abscissa must be 0");
  require(std::abs(t[0] - 1.0) <= 1e-12, "grid tail: t(0) must be 1");
  t[0] = 1.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    require(x[i] > x[i - 1] && std::isfinite(x[i]), "grid tail: abscissas must increase strictly");
    require(t[i] >= 0.0 && t[i] <= t[i - 1], "grid tail: values must be nonincreasing in [0,1]");
  }
  auto cache = std::make_shared<GridCache>();
  const std::size_t n = x.size();
  cache->u.resize(n);
  cache->logt.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    cache->u[i] = std::log1p(x[i]);
    cache->logt[i] = t[i] > 0.0 ? std::log(t[i]) : -numerics::kInf;
  }
  if (n >= 2 && t[n - 1] > 0.0 && t[n - 2] > 0.0)
    cache->tail_slope = (cache->logt[n - 1] - cache->logt[n - 2]) / (cache->u[n - 1] - cache->u[n - 2]);
  cache->suffix.assign(n, 0.0);
  cache->suffix[n - 1] = loglinear_moment_tail(x[n - 1], t[n - 1], cache->tail_slope);
  for (std::size_t i = n - 1; i-- > 0;) {
    double seg;
    if (t[i + 1] == 0.0) {
      seg = t[i] * 0.5 * (x[i + 1] * x[i + 1] - x[i] * x[i]);
      if (t[i] > 0.0) cache->jumps.push_back(x[i + 1]);
    } else {
      const double s = (cache->logt[i + 1] - cache->logt[i]) / (cache->u[i + 1] - cache->u[i]);
      seg = loglinear_moment(x[i], x[i + 1], t[i], s);
    }
    cache->suffix[i] = cache->suffix[i + 1] + seg;
  }
  std::sort(cache->jumps.begin(), cache->jumps.end());
  TailFunction T{RawTag{}};
  T.repr_ = GridTail{std::move(x), std::move(t)};
  T.cache_ = std::move(cache);
  return T;
}

TailFunction TailFunction::indicator(double K) {
  require(K > 0.0 && std::isfinite(K), "indicator tail: need K > 0");
  return grid({0.0, K}, {1.0, 0.0});
}

TailFunction TailFunction::constant_one() { return grid({0.0}, {1.0}); }

const ParametricTail& TailFunction::as_parametric() const {
  require(is_parametric(), "tail is not parametric");
  return std::get<ParametricTail>(repr_);
}

const GridTail& TailFunction::as_grid() const {
  require(!is_parametric(), "tail is not a grid");
  return std::get<GridTail>(repr_);
}

double TailFunction::operator()(double x) const {
  if (is_parametric()) return param_eval(std::get<ParametricTail>(repr_), x);
  if (!(x > 0.0)) return 1.0;
  const auto& g = std::get<GridTail>(repr_);
  const auto& c = *cache_;
  const std::size_t n = g.x.size();
  const auto it = std::upper_bound(g.x.begin(), g.x.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - g.x.begin()) - 1;
  if (i + 1 >= n) {
    const double tm = g.t[n - 1];
    if (tm == 0.0 || c.tail_slope == 0.0) return tm;
    return std::min(tm, tm * std::exp(c.tail_slope * (std::log1p(x) - c.u[n - 1])));
  }
  const double ta = g.t[i], tb = g.t[i + 1];
  if (tb == 0.0 || ta == tb) return ta;
  const double w = (std::log1p(x) - c.u[i]) / (c.u[i + 1] - c.u[i]);
  return std::exp(c.logt[i] + w * (c.logt[i + 1] - c.logt[i]));
}

double eval_tail(const TailFunction& T, double x) {
  require(x >= 0.0, "eval_tail: x must be nonnegative");
  return T(x);
}

std::span<const double> TailFunction::nodes() const {
  if (is_parametric()) return {};
  return std::get<GridTail>(repr_).x;
}

std::vector<double> TailFunction::candidate_points() const {
  if (is_parametric()) return {};
  const auto& g = std::get<GridTail>(repr_);
  if (g.x.size() <= 128) return {g.x.begin() + 1, g.x.end()};
  return cache_->jumps;
}

bool TailFunction::compact() const {
  return !is_parametric() && std::get<GridTail>(repr_).t.back() == 0.0;
}

double TailFunction::upper_scale() const {
  if (is_parametric()) {
    const auto& p = std::get<ParametricTail>(repr_);
    return param_solve(p, std::log(p.Y) - std::log(kNegligible));
  }
  const auto& g = std::get<GridTail>(repr_);
  for (std::size_t i = 0; i < g.x.size(); ++i)
    if (g.t[i] <= kNegligible) return std::max(g.x[i], g.x.size() > 1 ? g.x[1] : 1.0);
  const double xm = g.x.back();
  const double s = cache_->tail_slope;
  if (s < 0.0) {
    const double u = cache_->u.back() + std::log(kNegligible / g.t.back()) / s;
    return std::min(std::expm1(u), 1e12 * std::max(xm, 1.0));
  }
  return std::max(xm, 1.0) * 1e6;
}

double TailFunction::characteristic_scale() const {
  const double target = std::exp(-1.0);
  if (is_parametric()) {
    const auto& p = std::get<ParametricTail>(repr_);
    return param_solve(p, std::log(p.Y) + 1.0);
  }
  const auto& g = std::get<GridTail>(repr_);
  for (std::size_t i = 1; i < g.x.size(); ++i) {
    if (g.t[i] <= target) {
      double lo = g.x[i - 1], hi = g.x[i];
      if ((*this)(lo) <= target) return lo;
      for (int k = 0; k < 100 && hi - lo > 1e-14 * hi; ++k) {
        double mid = 0.5 * (lo + hi);
        if ((*this)(mid) <= target) hi = mid; else lo = mid;
      }
      return hi;
    }
  }
  return upper_scale();
}

double TailFunction::second_moment(double v) const {
  require(v >= 0.0, "second moment: v must be nonnegative");
  double out;
  if (is_parametric()) {
    const auto& p = std::get<ParametricTail>(repr_);
    out = v * v * param_eval(p, v) + 2.0 * param_first_moment_tail(p, v);
  } else {
    const auto& g = std::get<GridTail>(repr_);
    const auto& c = *cache_;
    const std::size_t n = g.x.size();
    const double tv = (*this)(v);
    const std::size_t i =
        static_cast<std::size_t>(std::upper_bound(g.x.begin(), g.x.end(), v) - g.x.begin()) - 1;
    double rest;
    if (i + 1 >= n) {
      rest = loglinear_moment_tail(v, tv, c.tail_slope);
    } else if (g.t[i + 1] == 0.0) {
      rest = tv * 0.5 * (g.x[i + 1] * g.x[i + 1] - v * v) + c.suffix[i + 1];
    } else {
      const double s = (c.logt[i + 1] - c.logt[i]) / (c.u[i + 1] - c.u[i]);
      rest = loglinear_moment(v, g.x[i + 1], tv, s) + c.suffix[i + 1];
    }
    out = v * v * tv + 2.0 * rest;
  }
  if (!std::isfinite(out))
    fail(ErrorCode::Divergent, "second moment diverges: tail decays no faster than y^-2");
  return std::max(out, 0.0);
}

double tail_second_moment(const TailFunction& T, double v) {
  require(v > 0.0 || v == 0.0, "tail_second_moment: v must be nonnegative");
  return T.second_moment(v);
}

TailFunction tabulate_on(const std::function<double(double)>& f, std::vector<double> x) {
  require(!x.empty() && x[0] == 0.0, "tabulate_on: first node must be 0");
  std::vector<double> t(x.size());
  t[0] = 1.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    double v = f(x[i]);
    if (!(v >= 0.0)) v = std::isnan(v) ? 1.0 : 0.0;
    t[i] = std::min({v, 1.0, t[i - 1]});
  }
  return TailFunction::grid(std::move(x), std::move(t));
}

TailFunction tabulate_tail(const std::function<double(double)>& f, double scale,
                           const TabulationOptions& opt) {
  require(scale > 0.0 && std::isfinite(scale), "tabulate_tail: scale must be positive");
  double x_hi = scale;
  const double cap = scale * opt.cap_factor;
  while (x_hi < cap && f(x_hi) > opt.floor) x_hi *= 2.0;
  return tabulate_on(f, numerics::log1p_grid(std::min(x_hi, cap), opt.points));
}

TailFunction discrete_tail(std::span<const double> values, std::span<const double> probs) {
  require(!values.empty() && values.size() == probs.size(), "discrete_tail: size mismatch");
  // P(X > x) and P(X < -x) as step functions of x >= 0
  std::map<double, double> pos, neg;  // |value| -> mass
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    require(probs[i] >= 0.0, "discrete_tail: negative probability");
    total += probs[i];
    if (values[i] > 0.0) pos[values[i]] += probs[i];
    else if (values[i] < 0.0) neg[-values[i]] += probs[i];
  }
  require(std::abs(total - 1.0) <= 1e-9, "discrete_tail: probabilities must sum to 1");
  std::vector<double> breaks;
  for (auto& [a, m] : pos) breaks.push_back(a);
  for (auto& [a, m] : neg) breaks.push_back(a);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  auto value_at = [&](double x) {
    double p = 0.0, q = 0.0;
    for (auto& [a, m] : pos) if (a > x) p += m;
    for (auto& [a, m] : neg) if (a > x) q += m;
    return std::min(1.0, std::max(p, q));
  };
  if (breaks.empty()) return TailFunction::grid({0.0, 1e-300}, {1.0, 0.0});
  std::vector<double> x{0.0}, t{1.0};
  double prev = value_at(0.0);
  // jump from 1 to T(0+) right after zero
  const double eps = 1e-9;
  x.push_back(breaks[0] * eps);
  t.push_back(prev);
  for (std::size_t k = 0; k < breaks.size(); ++k) {
    const double a = breaks[k];
    const double next = value_at(a);
    if (next == 0.0) {
      x.push_back(a);
      t.push_back(0.0);
      break;
    }
    if (next == prev) continue;
    if (a > x.back()) {
      x.push_back(a);
      t.push_back(prev);
    }
    x.push_back(a * (1.0 + eps));
    t.push_back(next);
    prev = next;
  }
  return TailFunction::grid(std::move(x), std::move(t));
}

}  // namespace chaos_tails
