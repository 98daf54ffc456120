#include <algorithm>
#include <cmath>

#include "chaos_tails/errors.hpp"
#include "chaos_tails/numerics.hpp"
#include "chaos_tails/tail_algebra.hpp"

namespace chaos_tails {

namespace {

// inf over y of A(y) + B(x / y)
double compose_inner(const TailFunction& A, const TailFunction& B, double x) {
  const double uA = A.upper_scale(), uB = B.upper_scale();
  double lo = std::min(x / uB, uA), hi = std::max(x / uB, uA);
  lo *= 0.5;
  hi *= 2.0;
  std::vector<double> extra = A.candidate_points();
  for (double b : B.candidate_points()) extra.push_back(x / b);
  auto f = [&](double y) { return A(y) + B(x / y); };
  return numerics::minimize_log(f, lo, hi, extra).value;
}

}  // namespace

double compose_value(const TailFunction& T, const TailFunction& G, double x) {
  if (!(x > 0.0)) return 1.0;
  const double inner = std::min(compose_inner(T, G, x), compose_inner(G, T, x));
  return std::min(1.0, 4.0 * inner);
}

TailFunction product_compose(const TailFunction& T, const TailFunction& G) {
  const double scale = T.characteristic_scale() * G.characteristic_scale();
  return tabulate_tail([&](double x) { return compose_value(T, G, x); }, scale);
}

ParametricProduct parametric_product(const ParametricTail& a, const ParametricTail& b) {
  // validates both
  const TailFunction Ta = TailFunction::parametric(a), Tb = TailFunction::parametric(b);
  ParametricProduct out;
  const double q3 = a.q * b.q / (a.q + b.q);
  // log powers combine as r3 = (q1 r2 + q2 r1)/(q1 + q2) with r = -rho/q
  const double r1 = -a.rho / a.q, r2 = -b.rho / b.q;
  const double r3 = (a.q * r2 + b.q * r1) / (a.q + b.q);
  out.tail = ParametricTail{8.0 * std::max(a.Y, b.Y), a.K * b.K, q3, -q3 * r3};
  if (a.rho == 0.0 && b.rho == 0.0) return out;

  // With log factors the scale constant is not tracked in closed form: take
  // the smallest c >= 1 for which the closed form dominates the composition.
  const TailFunction composed = product_compose(Ta, Tb);
  const auto xs = composed.nodes();
  auto dominates = [&](double c) {
    ParametricTail p = out.tail;
    p.K = c * a.K * b.K;
    const TailFunction P = TailFunction::parametric(p);
    for (double x : xs)
      if (P(x) < composed(x) * (1.0 - 1e-9)) return false;
    return true;
  };
  double hi = 1.0;
  while (!dominates(hi) && hi < 1e12) hi *= 2.0;
  double lo = hi / 2.0;
  if (hi > 1.0) {
    for (int i = 0; i < 40; ++i) {
      double mid = 0.5 * (lo + hi);
      if (dominates(mid)) hi = mid; else lo = mid;
    }
  }
  out.scale_constant = hi;
  out.tail.K = hi * a.K * b.K;
  out.calibrated = true;
  return out;
}

double truncation_value(const TailFunction& T, double x) {
  if (!(x > 0.0)) return 1.0;
  const double x2 = x * x;
  auto f = [&](double v) {
    return std::exp(-x2 / (8.0 * v * v)) + 4.0 * T.second_moment(v) / x2;
  };
  // the optimal level sits between the scale of x and the scale of T
  const double sT = T.upper_scale();
  const auto best = numerics::minimize_log(f, 1e-6 * std::min(x, sT), 10.0 * std::max(x, sT),
                                           T.candidate_points());
  return std::min(1.0, best.value);
}

TailFunction truncation_operator_W(const TailFunction& T) {
  const double sd = std::sqrt(T.second_moment(0.0));
  const double scale = sd > 0.0 ? sd : 1.0;
  return tabulate_tail([&](double x) { return truncation_value(T, x); }, scale);
}

}  // namespace chaos_tails
