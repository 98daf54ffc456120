#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "chaos_tails/coefficient_series.hpp"
#include "chaos_tails/errors.hpp"
#include "chaos_tails/numerics.hpp"

using namespace chaos_tails;

namespace {

CoefficientField three_coefficients() {
  return CoefficientField::dense(1, 3, {{{1}, 1.0}, {{2}, 0.5}, {{3}, 0.25}});
}

}  // namespace

TEST(CoefficientField, DenseValidation) {
  EXPECT_THROW(CoefficientField::dense(2, 3, {{{2, 1}, 1.0}}), Error);
  EXPECT_THROW(CoefficientField::dense(2, 3, {{{1, 4}, 1.0}}), Error);
  EXPECT_THROW(CoefficientField::dense(2, 3, {{{1, 2}, 1.0}, {{1, 2}, 0.5}}), Error);
  EXPECT_THROW(CoefficientField::dense(2, 3, {{{1}, 1.0}}), Error);
  const auto F = CoefficientField::dense(2, 3, {{{1, 3}, -2.0}, {{1, 2}, 0.0}});
  EXPECT_EQ(F.entries().size(), 1u);
  const std::uint32_t I[] = {1, 3}, J[] = {2, 3};
  EXPECT_EQ(F.coefficient(I), -2.0);
  EXPECT_EQ(F.coefficient(J), 0.0);
}

TEST(CoefficientField, UniformIsNormalized) {
  const auto F = CoefficientField::uniform(3, 7);
  EXPECT_EQ(F.entries().size(), 35u);
  EXPECT_NEAR(F.sum_sq(), 1.0, 1e-12);
}

TEST(SplitProfile, HandExample) {
  const auto s = split_profile(three_coefficients(), 0.5);
  EXPECT_DOUBLE_EQ(s.a1, 0.75);
  EXPECT_DOUBLE_EQ(s.a2, 1.0);
  EXPECT_DOUBLE_EQ(s.c1, 1.0);
  EXPECT_DOUBLE_EQ(s.c2, std::sqrt(0.25 + 0.0625));
}

TEST(SplitProfile, Limits) {
  const auto F = three_coefficients();
  const auto hi = split_profile(F, 1e9);
  EXPECT_DOUBLE_EQ(hi.a1, 1.75);
  EXPECT_DOUBLE_EQ(hi.a2, 0.0);
  const auto lo = split_profile(F, 1e-9);
  EXPECT_DOUBLE_EQ(lo.a1, 0.0);
  EXPECT_DOUBLE_EQ(lo.a2, std::sqrt(1.3125));
}

TEST(SplitProfile, Monotone) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  std::vector<CoefficientEntry> e;
  for (std::uint32_t i = 1; i <= 40; ++i) e.push_back({{i}, g(rng)});
  const auto F = CoefficientField::dense(1, 40, e);
  double a1 = -1.0, a2 = 1e300;
  for (double l : numerics::geometric_grid(1e-3, 5.0, 300)) {
    const auto s = split_profile(F, l);
    EXPECT_GE(s.a1, a1);
    EXPECT_LE(s.a2, a2);
    EXPECT_NEAR(s.a1 + s.c1, F.sum_abs(), 1e-12);
    EXPECT_NEAR(s.a2 * s.a2 + s.c2 * s.c2, F.sum_sq(), 1e-12);
    a1 = s.a1;
    a2 = s.a2;
  }
}

TEST(PowerLaw, NonSummableBoundary) {
  EXPECT_THROW(CoefficientField::power_law(2, 1.0), Error);
  try {
    CoefficientField::power_law(2, 0.9);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonSummable);
  }
}

TEST(PowerLaw, TailBoundCoversTruncatedRemainder) {
  // dense partial sums between two radii stay below the integral-comparison bound
  for (int d : {1, 2, 3}) {
    for (double s : {1.5 * d, 2.0 * d}) {
      const double R = 6.0;
      const std::size_t n = d == 3 ? 60 : 400;
      double partial = 0.0;
      std::vector<std::uint32_t> I(d);
      const auto F = CoefficientField::power_law(d, s, 1.0, n);
      for (const auto& e : F.entries()) {
        double nrm = 0.0;
        for (auto i : e.I) nrm += double(i) * i;
        if (std::sqrt(nrm) >= R) partial += e.b;
      }
      const double bound = power_tail_sum_bound(d, s, R);
      EXPECT_LE(partial, bound) << "d=" << d << " s=" << s;
      EXPECT_GT(partial, 0.05 * bound) << "d=" << d << " s=" << s;
    }
  }
  EXPECT_TRUE(std::isinf(power_tail_sum_bound(2, 2.0, 5.0)));
}

TEST(PowerLaw, SymbolicAgreesWithDense) {
  // alpha = 3, d = 2: dense sum to n plus its remainder bound covers the symbolic sum
  const auto inf = CoefficientField::power_law(2, 3.0, 1.0, std::nullopt, 1 << 16);
  const auto fin = CoefficientField::power_law(2, 3.0, 1.0, std::size_t{300});
  EXPECT_GT(inf.sum_sq_remainder(), 0.0);
  EXPECT_LE(fin.sum_sq(), inf.sum_sq());
  EXPECT_LE(inf.sum_sq() - fin.sum_sq(),
            power_tail_sum_bound(2, 6.0, 300.0) + inf.sum_sq_remainder());
  EXPECT_LE(fin.sum_abs(), inf.sum_abs());
  EXPECT_LT(inf.sum_abs() - fin.sum_abs(), 0.02);
  const std::uint32_t I[] = {3, 4};
  EXPECT_DOUBLE_EQ(inf.coefficient(I), std::pow(5.0, -3.0));
}

TEST(PowerLaw, IntermediateHasInfiniteL1) {
  const auto F = CoefficientField::power_law(2, 1.5, 1.0, std::nullopt, 1 << 14);
  EXPECT_TRUE(std::isinf(F.sum_abs()));
  const auto s = split_profile(F, 0.01);
  EXPECT_TRUE(std::isinf(s.a1));
  EXPECT_TRUE(std::isfinite(s.c1));
  EXPECT_TRUE(std::isfinite(s.c2));
  for (const auto& p : split_candidates(F)) EXPECT_TRUE(std::isfinite(p.l1));
}

TEST(Theorem13, UnitAtZeroAndHorizon) {
  const auto F = three_coefficients();
  const QVector qv = QVector::homogeneous(1, 2.0);
  const auto T = theorem13_tail(F, qv);
  EXPECT_EQ(T(0.0), 1.0);
  // lambda beyond every coefficient: a2 = 0, a one-term envelope with G = 2
  for (double x : T.nodes())
    if (x > 0.0) EXPECT_LE(T(x), std::exp(-std::pow(x / F.sum_abs(), 2.0)) * (1 + 1e-12));
}

TEST(Theorem13, InfimumProperty) {
  const auto F = CoefficientField::uniform(2, 6);
  const QVector qv = QVector::homogeneous(2, 1.0);
  const auto T = theorem13_tail(F, qv);
  const double G = exponent_G(qv).value, M = exponent_M(qv).value;
  for (double l : {0.01, 0.1, 0.2, 0.5}) {
    const auto s = split_profile(F, l);
    for (double x : T.nodes()) {
      if (x <= 0.0) continue;
      const double e1 = s.a1 > 0 ? std::exp(-std::pow(x / s.a1, G)) : 0.0;
      const double e2 = s.a2 > 0 ? std::exp(-std::pow(x / s.a2, M)) : 0.0;
      EXPECT_LE(T(x), std::min(1.0, e1 + e2) * (1 + 1e-12));
    }
  }
}

TEST(Theorem14, BelowTheorem13) {
  const auto F = CoefficientField::power_law(2, 1.5, 1.0, std::nullopt, 1 << 14);
  for (double q : {1.0, 2.0, 4.0}) {
    const QVector qv = QVector::homogeneous(2, q);
    const auto T13 = theorem13_tail(F, qv), T14 = theorem14_tail(F, qv);
    // each second term orders as N_d >= M once x >= l2 K, and every l2 <= |b|_2
    const double x0 = std::sqrt(F.sum_sq());
    for (double x : numerics::geometric_grid(x0, 200.0, 60)) EXPECT_LE(T14(x), T13(x) * (1 + 1e-9));
    EXPECT_GE(T14(0.1 * x0), T13(0.1 * x0));
  }
  EXPECT_EQ(exponent_Nd(QVector::homogeneous(1, 2.0)).value, 2.0);
  EXPECT_EQ(exponent_M(QVector::homogeneous(1, 2.0)).value, 1.0);
}

TEST(Theorem13, PowerLawSlope) {
  // exponent q/(q(d - alpha) + d) for alpha in (d/2, d); alpha = 1.75, q = 2 is
  // the slowest to settle (0.68 against 0.8 on this window)
  for (double alpha : {1.25, 1.5, 1.75}) {
    for (double q : {1.0, 2.0}) {
      const auto F = CoefficientField::power_law(2, alpha, 1.0);
      const auto T = theorem13_tail(F, QVector::homogeneous(2, q));
      const double want = classify_power_law(2, alpha, q).tail_exponent;
      const double got = loglog_slope(T, 10.0, 100.0);
      EXPECT_NEAR(got, want, 0.15 * want) << "alpha=" << alpha << " q=" << q;
    }
  }
}

TEST(Theorem15, EqualMagnitudes) {
  const auto F = CoefficientField::uniform(2, 5);
  for (double p : {2.0, 3.0, 10.0, 100.0}) {
    const double w = p * p / std::log(p);
    EXPECT_NEAR(theorem15_moment(F, 2, p), std::min(F.sum_abs(), std::sqrt(F.sum_sq()) * w), 1e-12);
  }
}

TEST(Theorem15, PAtE) {
  const auto F = three_coefficients();
  const double e = std::exp(1.0);
  // only the all-large split has a2 > 0 with a1 = 0
  EXPECT_LE(theorem15_moment(F, 1, e), std::sqrt(F.sum_sq()) * e + 1e-12);
  EXPECT_NEAR(theorem16_moment(F, 1, e) , std::min(F.sum_abs(), 1.0 + std::sqrt(0.3125) * e), 1e-12);
}

TEST(Theorem16, SingleCoefficient) {
  const auto F = CoefficientField::dense(2, 2, {{{1, 2}, 1.0}});
  for (double p : {1.0, 2.0, 5.0, 50.0}) EXPECT_DOUBLE_EQ(theorem16_moment(F, 2, p), 1.0);
}

TEST(Theorem16, RatioToTheorem15) {
  // with a one-sided split both infima sit on the same pair
  const auto F = CoefficientField::dense(1, 1, {{{1}, 1.0}});
  EXPECT_DOUBLE_EQ(theorem16_moment(F, 1, 2.0), 1.0);
  const auto G = CoefficientField::uniform(2, 30);
  for (double p : {2.0, 3.0}) {
    const double w = p * p;
    const auto s = moment_split_argmin(G, w / std::log(p));
    if (s.l1 == 0.0) EXPECT_NEAR(theorem16_moment(G, 2, p) / theorem15_moment(G, 2, p), std::log(p), 1e-12);
    EXPECT_LE(theorem15_moment(G, 2, p), theorem16_moment(G, 2, p) * std::max(1.0, 1.0 / std::log(p)));
  }
}

TEST(Theorem16, PowerLawGrowth) {
  // martingale form: a1 + a2 p^d with a1 ~ R^{d-alpha}, a2 ~ R^{d/2-alpha}
  const auto F = CoefficientField::power_law(2, 1.5, 1.0);
  std::vector<double> lx, ly;
  for (double p : numerics::geometric_grid(4.0, 32.0, 12)) {
    lx.push_back(std::log(p));
    ly.push_back(std::log(theorem16_moment(F, 2, p)));
  }
  EXPECT_NEAR(numerics::fit_line(lx, ly).slope, 1.0, 0.15);
}

TEST(Theorem15, RegimeGrowth) {
  const auto mid = CoefficientField::power_law(2, 1.25, 1.0);
  EXPECT_NEAR(theorem15_growth_exponent(mid, 4.0, 32.0), 1.5, 0.15 * 1.5);
  const auto big = CoefficientField::power_law(2, 2.5, 1.0);
  EXPECT_LE(theorem15_moment(big, 2, 32.0), big.sum_abs());
  EXPECT_LE(theorem15_moment(big, 2, 1e6), big.sum_abs());
}

TEST(Regimes, Classification) {
  EXPECT_EQ(classify_power_law(2, 1.0, 2.0).regime, PowerLawRegime::NonSummable);
  const auto c = classify_power_law(2, 1.25, 2.0);
  EXPECT_EQ(c.regime, PowerLawRegime::Intermediate);
  EXPECT_DOUBLE_EQ(c.moment_growth, 1.5);
  EXPECT_DOUBLE_EQ(c.tail_exponent, 2.0 / (2.0 * 0.75 + 2.0));
  EXPECT_EQ(classify_power_law(2, 2.0, 2.0).regime, PowerLawRegime::Critical);
  EXPECT_EQ(classify_power_law(2, 2.5, 2.0).regime, PowerLawRegime::Summable);
}

TEST(NormalizedSum, Construction) {
  auto r = normalized_sum_bounds({{1.0, 4.0, 9.0}}, QVector::homogeneous(1, 2.0),
                                 Dependence::Martingale, BoundKind::Tail);
  const double s = std::sqrt(14.0);
  for (std::uint32_t i = 1; i <= 3; ++i) {
    const std::uint32_t I[] = {i};
    EXPECT_NEAR(r.field.coefficient(I), i / s, 1e-15);
  }
  EXPECT_NEAR(r.sum_b2, 1.0, 1e-12);
  ASSERT_TRUE(r.bound.tail);
}

TEST(NormalizedSum, UniformAndModes) {
  std::vector<std::vector<double>> ones(2, std::vector<double>(6, 1.0));
  auto r = normalized_sum_bounds(ones, QVector::homogeneous(2, 2.0), Dependence::Independent,
                                 BoundKind::Moment, {2, 4});
  for (const auto& e : r.field.entries()) EXPECT_NEAR(e.b, 1.0 / std::sqrt(15.0), 1e-15);
  ASSERT_TRUE(r.bound.moments);
  EXPECT_EQ(r.bound.moments->p.size(), 2u);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  std::vector<std::vector<double>> sig(3, std::vector<double>(7));
  for (auto& row : sig)
    for (auto& v : row) v = u(rng);
  auto t = normalized_sum_bounds(sig, QVector::homogeneous(3, 1.0), Dependence::Martingale,
                                 BoundKind::Moment);
  EXPECT_NEAR(t.sum_b2, 1.0, 1e-12);
}

TEST(SplitPipeline, DominatesExactSmallInstances) {
  // d=1, b = (1, 1/2, 1/4) over Rademacher signs, exact two-sided tail
  const auto F = three_coefficients();
  FamilyAssumptions A = weibull_family(QVector::homogeneous(1, Exponent::infinity()), {1.0});
  const auto B = split_pipeline_tail(F, A);
  const double b[] = {1.0, 0.5, 0.25};
  for (double x : numerics::geometric_grid(0.05, 3.0, 60)) {
    int hits = 0;
    for (int s = 0; s < 8; ++s) {
      double q = 0.0;
      for (int i = 0; i < 3; ++i) q += ((s >> i) & 1 ? 1.0 : -1.0) * b[i];
      hits += q > x;
    }
    EXPECT_GE((*B.tail)(x), hits / 8.0) << x;
  }
  EXPECT_LT((*B.tail)(20.0), 1e-12);
}
