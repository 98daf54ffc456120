#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace chaos_tails::numerics {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct ScalarMinimum {
  double arg = 0.0;
  double value = kInf;
};

/// Golden-section search for a minimum of f on [lo, hi].
ScalarMinimum golden_section(const std::function<double(double)>& f, double lo,
                             double hi, double tol = 1e-9, int max_iter = 200);

struct LogSearchOptions {
  int prescan = 96;
  int starts = 3;
  double tol = 1e-7;  // in log-argument units
};

/// Minimizes f on [lo, hi] (lo > 0): coarse scan in log(v), then golden
/// refinement around the best few local minima. `extra` holds points that
/// are always evaluated (grid nodes where f may jump).
ScalarMinimum minimize_log(const std::function<double(double)>& f, double lo,
                           double hi, std::span<const double> extra = {},
                           const LogSearchOptions& opt = {});

/// Adaptive Gauss-Kronrod on [a, b]; b may be +inf.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-10);

/// Points uniform in log(1+x) on [0, x_hi].
std::vector<double> log1p_grid(double x_hi, std::size_t n);

std::vector<double> geometric_grid(double lo, double hi, std::size_t n);

/// One-sided Clopper-Pearson bounds for k successes out of n.
double clopper_pearson_upper(std::size_t k, std::size_t n, double confidence);
double clopper_pearson_lower(std::size_t k, std::size_t n, double confidence);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);

double binomial(int n, int k);

/// log cosh(u) without cancellation near zero or overflow at large |u|.
double log_cosh(double u);

/// log(1 + exp(a)) for any a.
double log1p_exp(double a);

}  // namespace chaos_tails::numerics
