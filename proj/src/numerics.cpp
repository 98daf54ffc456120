#include "chaos_tails/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "chaos_tails/errors.hpp"

namespace chaos_tails {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Divergent: return "Divergent";
    case ErrorCode::Unbounded: return "Unbounded";
    case ErrorCode::NonMonotoneMoments: return "NonMonotoneMoments";
    case ErrorCode::MissingMoments: return "MissingMoments";
    case ErrorCode::AllProjectionsZero: return "AllProjectionsZero";
    case ErrorCode::NonSummable: return "NonSummable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::AssumptionViolated: return "AssumptionViolated";
  }
  return "Unknown";
}

}  // namespace chaos_tails

namespace chaos_tails::numerics {

namespace {
constexpr double kInvPhi = 0.6180339887498948482;
}

ScalarMinimum golden_section(const std::function<double(double)>& f, double lo,
                             double hi, double tol, int max_iter) {
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < max_iter && std::abs(b - a) > tol; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  ScalarMinimum best{c, fc};
  if (fd < best.value) best = {d, fd};
  return best;
}

ScalarMinimum minimize_log(const std::function<double(double)>& f, double lo,
                           double hi, std::span<const double> extra,
                           const LogSearchOptions& opt) {
  require(lo > 0.0 && hi >= lo, "minimize_log: need 0 < lo <= hi");
  ScalarMinimum best;
  for (double v : extra) {
    if (v >= lo && v <= hi) {
      double fv = f(v);
      if (fv < best.value) best = {v, fv};
    }
  }
  if (hi == lo) {
    double fv = f(lo);
    if (fv < best.value) best = {lo, fv};
    return best;
  }
  const double ulo = std::log(lo), uhi = std::log(hi);
  const int n = std::max(opt.prescan, 3);
  std::vector<double> u(n), val(n);
  for (int i = 0; i < n; ++i) {
    u[i] = ulo + (uhi - ulo) * i / (n - 1);
    val[i] = f(std::exp(u[i]));
    if (val[i] < best.value) best = {std::exp(u[i]), val[i]};
  }
  // local minima of the scan, best first
  std::vector<int> cand;
  for (int i = 0; i < n; ++i) {
    bool left = i == 0 || val[i] <= val[i - 1];
    bool right = i == n - 1 || val[i] <= val[i + 1];
    if (left && right && std::isfinite(val[i])) cand.push_back(i);
  }
  std::sort(cand.begin(), cand.end(),
            [&](int a, int b) { return val[a] < val[b]; });
  if (static_cast<int>(cand.size()) > opt.starts) cand.resize(opt.starts);
  auto g = [&](double uu) { return f(std::exp(uu)); };
  for (int i : cand) {
    double a = u[std::max(i - 1, 0)], b = u[std::min(i + 1, n - 1)];
    ScalarMinimum m = golden_section(g, a, b, opt.tol);
    if (m.value < best.value) best = {std::exp(m.arg), m.value};
  }
  return best;
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol) {
  if (!(b > a)) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, a, b, 15, rel_tol, &err);
}

std::vector<double> log1p_grid(double x_hi, std::size_t n) {
  require(n >= 2 && x_hi > 0.0, "log1p_grid: need n >= 2 and x_hi > 0");
  std::vector<double> x(n);
  const double top = std::log1p(x_hi);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = std::expm1(top * static_cast<double>(i) / static_cast<double>(n - 1));
  x.front() = 0.0;
  x.back() = x_hi;
  return x;
}

std::vector<double> geometric_grid(double lo, double hi, std::size_t n) {
  require(lo > 0.0 && hi >= lo && n >= 1, "geometric_grid: bad range");
  std::vector<double> x(n);
  if (n == 1) {
    x[0] = lo;
    return x;
  }
  const double r = std::log(hi / lo);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = lo * std::exp(r * static_cast<double>(i) / static_cast<double>(n - 1));
  x.back() = hi;
  return x;
}

double clopper_pearson_upper(std::size_t k, std::size_t n, double confidence) {
  require(n > 0 && k <= n, "clopper_pearson_upper: need 0 <= k <= n, n > 0");
  if (k == n) return 1.0;
  return boost::math::ibeta_inv(static_cast<double>(k + 1),
                                static_cast<double>(n - k), confidence);
}

double clopper_pearson_lower(std::size_t k, std::size_t n, double confidence) {
  require(n > 0 && k <= n, "clopper_pearson_lower: need 0 <= k <= n, n > 0");
  if (k == 0) return 0.0;
  return boost::math::ibeta_inv(static_cast<double>(k),
                                static_cast<double>(n - k + 1), 1.0 - confidence);
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_line: need >= 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "fit_line: degenerate abscissae");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return fit;
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r < 9e15 ? std::round(r) : r;
}

double log_cosh(double u) {
  const double a = std::abs(u);
  if (a < 1e-2) {
    const double a2 = a * a;
    return a2 * (0.5 + a2 * (-1.0 / 12.0 + a2 * (1.0 / 45.0)));
  }
  // log cosh a = a + log1p(e^{-2a}) - log 2
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

double log1p_exp(double a) {
  if (a > 35.0) return a + std::exp(-a);
  return std::log1p(std::exp(a));
}

}  // namespace chaos_tails::numerics
