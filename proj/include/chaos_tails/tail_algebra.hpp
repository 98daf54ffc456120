#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace chaos_tails {

/// T(x) = min(1, Y exp(-(x/K)^q (log(F + x/K))^rho)), F = e^q when rho < 0
/// and 1 otherwise. rho = -q r in the G(q, r) convention.
struct ParametricTail {
  double Y = 1.0;
  double K = 1.0;
  double q = 1.0;
  double rho = 0.0;
};

/// Nodes x_0 = 0 < ... < x_M with t_0 = 1 >= ... >= t_M >= 0.
struct GridTail {
  std::vector<double> x;
  std::vector<double> t;
};

/// A right-continuous nonincreasing bound on max(P(tau > x), P(tau < -x)).
///
/// Grid tails interpolate log t linearly in log(1 + x). When a node value is
/// zero the preceding value is held on the whole segment, which keeps step
/// tails (indicators, finite distributions) exact. Right of the last node the
/// last segment's slope is continued.
class TailFunction {
 public:
  TailFunction();  // the indicator of [0, 1)

  static TailFunction parametric(double Y, double K, double q, double rho = 0.0);
  static TailFunction parametric(const ParametricTail& p);
  static TailFunction grid(std::vector<double> x, std::vector<double> t);
  /// 1 on [0, K), 0 from K on.
  static TailFunction indicator(double K);
  static TailFunction constant_one();

  double operator()(double x) const;

  bool is_parametric() const { return std::holds_alternative<ParametricTail>(repr_); }
  const ParametricTail& as_parametric() const;
  const GridTail& as_grid() const;

  /// Smallest tabulated point where the tail is negligible (<= 1e-18), or the
  /// last node of a grid.
  double upper_scale() const;
  /// Point where the tail first drops to 1/e (a natural unit of the variable).
  double characteristic_scale() const;
  /// Nodes of a grid tail, empty for parametric ones.
  std::span<const double> nodes() const;
  /// Nodes where a grid tail is discontinuous, plus all nodes of short grids.
  /// Inner optimizers always try these points.
  std::vector<double> candidate_points() const;
  /// True when the tail vanishes identically beyond some point.
  bool compact() const;

  /// v^2 T(v) + 2 int_v^inf y T(y) dy.
  double second_moment(double v) const;

 private:
  struct GridCache;
  struct RawTag {};
  explicit TailFunction(RawTag) {}
  std::variant<ParametricTail, GridTail> repr_;
  std::shared_ptr<const GridCache> cache_;
};

double eval_tail(const TailFunction& T, double x);

struct TabulationOptions {
  std::size_t points = 512;
  double floor = 1e-18;
  double cap_factor = 1e6;
};

/// Samples a tail-like function on the standard log(1+x) grid, enforcing
/// t_0 = 1, values in [0, 1] and monotonicity.
TailFunction tabulate_tail(const std::function<double(double)>& f, double scale,
                           const TabulationOptions& opt = {});

/// Same, on caller-supplied nodes (x[0] must be 0).
TailFunction tabulate_on(const std::function<double(double)>& f,
                         std::vector<double> x);

/// Exact tail of a finitely supported random variable.
TailFunction discrete_tail(std::span<const double> values,
                           std::span<const double> probs);

/// min(1, 4 inf_y [T(y) + G(x/y)]).
double compose_value(const TailFunction& T, const TailFunction& G, double x);
TailFunction product_compose(const TailFunction& T, const TailFunction& G);

struct ParametricProduct {
  ParametricTail tail;
  double scale_constant = 1.0;  // c in K3 = c K1 K2
  bool calibrated = false;      // true when c came from a numeric fit
};

ParametricProduct parametric_product(const ParametricTail& a, const ParametricTail& b);

double tail_second_moment(const TailFunction& T, double v);

/// min(1, inf_v [exp(-x^2/(8 v^2)) + 4 x^-2 S(v)]).
double truncation_value(const TailFunction& T, double x);
TailFunction truncation_operator_W(const TailFunction& T);

class CramerProfile {
 public:
  using Fn = std::function<double(double)>;

  CramerProfile();  // no Cramer condition
  CramerProfile(Fn phi, double lambda_max, std::string label);

  static CramerProfile none();
  static CramerProfile quadratic(double sigma = 1.0);
  static CramerProfile log_cosh(double scale = 1.0);
  /// lambda^2/2 up to 1, then lambda^q/q + 1/2 - 1/q (convex, C^1).
  static CramerProfile power(double q);
  /// Piecewise-linear interpolation of tabulated values (lambda[0] = 0).
  static CramerProfile from_grid(std::vector<double> lambda, std::vector<double> phi);
  /// Exact max over signs of log E exp(+-lambda X) for a finite distribution.
  static CramerProfile from_distribution(std::vector<double> values,
                                         std::vector<double> probs);

  double phi(double lambda) const;
  double lambda_max() const { return lambda_max_; }
  bool degenerate() const { return !(lambda_max_ > 0.0); }
  const std::string& label() const { return label_; }

 private:
  Fn phi_;
  double lambda_max_ = 0.0;
  std::string label_ = "none";
};

/// A Cramer envelope implied by a tail bound of a centered variable:
/// phi(lambda) <= log(1 + 2 lambda int_0^inf (e^{lambda x} - 1) T(x) dx).
CramerProfile cramer_from_tail(const TailFunction& T);

/// Values of a function on a grid, linearly interpolated between nodes.
struct FunctionGrid {
  std::vector<double> x;
  std::vector<double> y;
  double operator()(double v) const;
};

/// sup_n n phi(lambda / sqrt(n)).
double chi_value(const CramerProfile& C, double lambda);
FunctionGrid chi_from_phi(const CramerProfile& C, std::span<const double> lambda);

/// sup_lambda (lambda x - chi(lambda)) at one point, chi possibly +inf.
double conjugate_at(const std::function<double(double)>& chi, double x,
                    double lambda_cap = std::numeric_limits<double>::infinity());

/// Conjugate on x_grid from a lambda grid scan refined at the argmax.
FunctionGrid young_fenchel(const std::function<double(double)>& chi,
                           std::span<const double> lambda_grid,
                           std::span<const double> x_grid);
FunctionGrid young_fenchel(const FunctionGrid& chi, std::span<const double> x_grid);

TailFunction linear_sum_tail(const CramerProfile& C);
TailFunction cramer_refine_Wbar(const TailFunction& T, const CramerProfile& C);

enum class NormFamily { Gq, Gqr, PsiBeta };

struct NormParams {
  double q = 2.0;     // Gq, Gqr
  double r = 0.0;     // Gqr
  double C = 1.0;     // PsiBeta
  double beta = 1.0;  // PsiBeta
};

struct NormEstimate {
  double value = 0.0;
  double horizon = 0.0;
  double argmax = 0.0;
};

/// Finite-horizon supremum of |eta|_p / weight(p) over the supplied p.
NormEstimate norm_from_moments(std::span<const double> p, std::span<const double> moments,
                               NormFamily family, const NormParams& params);

}  // namespace chaos_tails
