#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "chaos_tails/errors.hpp"
#include "chaos_tails/monte_carlo_lab.hpp"
#include "chaos_tails/numerics.hpp"

using namespace chaos_tails;

namespace {

FamilySpec family(FamilyKind k, int d, std::size_t n, std::vector<double> q = {}) {
  FamilySpec s;
  s.kind = k;
  s.d = d;
  s.n = n;
  s.q = std::move(q);
  return s;
}

}  // namespace

TEST(Rng, CounterStreamsAreKeyed) {
  CounterRng a(1, 5), b(1, 5), c(1, 6), e(2, 5);
  const auto x = a.next();
  EXPECT_EQ(x, b.next());
  EXPECT_NE(x, c.next());
  EXPECT_NE(x, e.next());
  CounterRng u(9, 0);
  double lo = 1, hi = 0;
  for (int i = 0; i < 100000; ++i) {
    const double v = u.uniform();
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LT(hi, 1.0);
}

TEST(Batch, RademacherValuesAndMean) {
  const auto B = generate_batch(family(FamilyKind::Rademacher, 2, 8), 20000, 3);
  double s = 0.0;
  for (double v : B.xi) {
    EXPECT_TRUE(v == 1.0 || v == -1.0);
    s += v;
  }
  const double N = static_cast<double>(B.xi.size());
  EXPECT_LT(std::abs(s / N), 4.0 / std::sqrt(N));
}

TEST(Batch, WeibullMedianAtLog2) {
  const auto B = generate_batch(family(FamilyKind::WeibullSymmetric, 1, 1, {1.0}), 200000, 11);
  std::size_t above = 0;
  for (double v : B.xi) above += std::abs(v) > std::log(2.0);
  const double f = static_cast<double>(above) / B.xi.size();
  EXPECT_NEAR(f, 0.5, 4.0 * 0.5 / std::sqrt(200000.0));
}

TEST(Batch, DeterministicAcrossWorkers) {
  for (auto k : {FamilyKind::Rademacher, FamilyKind::WeibullSymmetric, FamilyKind::ScaledProduct,
                 FamilyKind::DependentMartingale}) {
    const auto s = family(k, 2, 5, k == FamilyKind::Rademacher || k == FamilyKind::DependentMartingale
                                       ? std::vector<double>{}
                                       : std::vector<double>{1.5, 3.0});
    const auto a = generate_batch(s, 999, 42, 1);
    const auto b = generate_batch(s, 999, 42, 8);
    EXPECT_EQ(a.xi, b.xi) << family_name(k);
  }
}

TEST(Families, NamesRoundTrip) {
  for (auto k : {FamilyKind::Rademacher, FamilyKind::WeibullSymmetric, FamilyKind::ScaledProduct,
                 FamilyKind::DependentMartingale})
    EXPECT_EQ(parse_family(family_name(k)), k);
  EXPECT_THROW(parse_family("gaussian"), Error);
}

TEST(Qd, HandExamples) {
  const auto F1 = CoefficientField::dense(1, 3, {{{1}, 1.0}});
  const double xi1[] = {5.0, 0.3, -7.0};
  EXPECT_EQ(qd_enumerate(F1, xi1, 3), 5.0);
  const auto F2 = CoefficientField::uniform(2, 3);
  // coordinate 1 = (1, 1, *), coordinate 2 = (*, 1, -1)
  const double xi2[] = {1.0, 1.0, 99.0, 99.0, 1.0, -1.0};
  EXPECT_NEAR(qd_enumerate(F2, xi2, 3), -1.0 / std::sqrt(3.0), 1e-15);
}

TEST(Qd, EnumerationMatchesSeparable) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (int d = 1; d <= 3; ++d) {
    for (std::size_t n : {3u, 7u, 12u}) {
      if (n < static_cast<std::size_t>(d)) continue;
      std::vector<std::vector<double>> beta(d, std::vector<double>(n));
      for (auto& row : beta)
        for (auto& v : row) v = g(rng);
      const auto F = CoefficientField::separable(beta);
      const auto B = generate_batch(family(FamilyKind::WeibullSymmetric, d, n, std::vector<double>(d, 1.0)), 200, 9);
      const auto a = evaluate_Qd(F, B, QdEvaluator::Enumerate);
      const auto b = evaluate_Qd(F, B, QdEvaluator::Separable);
      for (std::size_t r = 0; r < a.size(); ++r) EXPECT_NEAR(a[r], b[r], 1e-10);
    }
  }
}

TEST(Qd, DimensionMismatch) {
  const auto F = CoefficientField::uniform(2, 4);
  const auto B = generate_batch(family(FamilyKind::Rademacher, 2, 5), 3, 1);
  try {
    evaluate_Qd(F, B);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

TEST(Qd, VarianceMatchesCoefficientSum) {
  // D Q = sum b^2 prod sigma^2, within 5 bootstrap standard errors
  const auto s = family(FamilyKind::WeibullSymmetric, 2, 6, {1.0, 2.0});
  const auto F = CoefficientField::uniform(2, 6);
  const auto B = generate_batch(s, 40000, 17);
  const auto v = evaluate_Qd(F, B);
  const double want = F.sum_sq() * s.second_moment(0, 1) * s.second_moment(1, 1);
  auto var = [](const std::vector<double>& x) {
    double m = 0, q = 0;
    for (double a : x) m += a;
    m /= x.size();
    for (double a : x) q += (a - m) * (a - m);
    return q / (x.size() - 1);
  };
  const double est = var(v);
  std::vector<double> boot;
  std::vector<double> res(v.size());
  for (int b = 0; b < 200; ++b) {
    CounterRng rng(23, b);
    for (auto& x : res) x = v[rng.next() % v.size()];
    boot.push_back(var(res));
  }
  const double se = std::sqrt(var(boot));
  EXPECT_LE(std::abs(est - want), 5.0 * se) << est << " vs " << want;
}

TEST(R2, Examples) {
  // Rademacher: squares are 1, so R_2 equals the off-diagonal part
  const auto off = CoefficientField::dense(2, 3, {{{1, 2}, 0.5}, {{2, 3}, -1.0}});
  const std::vector<double> diag{1.0, 2.0, 3.0};
  const auto B = generate_batch(family(FamilyKind::Rademacher, 1, 3), 50, 4);
  const auto r = evaluate_R2(off, diag, B);
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double want = 0.5 * B.at(k, 0, 0) * B.at(k, 0, 1) - B.at(k, 0, 1) * B.at(k, 0, 2);
    EXPECT_NEAR(r[k], want, 1e-15);
  }
  // pure diagonal part is centered
  const auto zero = CoefficientField::dense(2, 3, {});
  const auto W = generate_batch(family(FamilyKind::WeibullSymmetric, 1, 3, {1.0}), 100000, 8);
  const auto c = evaluate_R2(zero, std::vector<double>{1, 1, 1}, W);
  double m = 0, q = 0;
  for (double v : c) m += v;
  m /= c.size();
  for (double v : c) q += (v - m) * (v - m);
  EXPECT_LT(std::abs(m), 4.0 * std::sqrt(q / c.size() / c.size()));
  // n = 2, b(1,2) = 1
  const auto one = CoefficientField::dense(2, 2, {{{1, 2}, 1.0}});
  const auto D = generate_batch(family(FamilyKind::WeibullSymmetric, 1, 2, {2.0}), 5, 2);
  const auto r2 = evaluate_R2(one, std::vector<double>{0.5, 0.0}, D);
  for (std::size_t k = 0; k < 5; ++k)
    EXPECT_NEAR(r2[k], D.at(k, 0, 0) * D.at(k, 0, 1) + 0.5 * (D.at(k, 0, 0) * D.at(k, 0, 0) - 1.0), 1e-14);
}

TEST(EmpiricalTail, Examples) {
  const std::vector<double> zeros(1000, 0.0);
  const double xs[] = {0.1, 1.0};
  const auto t = empirical_tail(zeros, xs);
  EXPECT_EQ(t.estimate[0], 0.0);
  EXPECT_DOUBLE_EQ(t.cp_upper[0], numerics::clopper_pearson_upper(0, 1000, 0.99));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> v(100000);
  for (auto& a : v) a = g(rng);
  const double x0[] = {1e-9};
  EXPECT_NEAR(empirical_tail(v, x0).estimate[0], 0.5, 0.01);
  const auto R = generate_batch(family(FamilyKind::Rademacher, 1, 1), 100000, 6);
  const double h[] = {0.5};
  EXPECT_NEAR(empirical_tail(R.xi, h).estimate[0], 0.5, 0.01);
}

TEST(EmpiricalMoments, Examples) {
  const auto R = generate_batch(family(FamilyKind::Rademacher, 1, 1), 5000, 6);
  const double ps[] = {1.0, 2.0, 7.0};
  const auto m = empirical_moments(R.xi, ps, 200);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_DOUBLE_EQ(m.estimate[k], 1.0);
    EXPECT_DOUBLE_EQ(m.upper[k], 1.0);
  }
  const std::vector<double> c(100, -2.5);
  EXPECT_DOUBLE_EQ(empirical_moments(c, ps, 50).estimate[2], 2.5);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<double> v(20000);
  for (auto& a : v) a = g(rng);
  const double two[] = {2.0, 30.0};
  const auto n = empirical_moments(v, two, 500);
  EXPECT_NEAR(n.estimate[0], 1.0, 0.03);
  EXPECT_LE(n.lower[0], n.estimate[0]);
  EXPECT_GE(n.upper[0], n.estimate[0]);
  EXPECT_FALSE(n.beyond_horizon[0]);
  EXPECT_TRUE(n.beyond_horizon[1]);
}

TEST(Oracle, Examples) {
  const auto F = CoefficientField::dense(1, 4, {{{1}, 0.5}, {{2}, 0.5}, {{3}, 0.5}, {{4}, 0.5}});
  EXPECT_DOUBLE_EQ(exact_oracle_tail(F, 1, 4, 1.5), 0.0625);
  const auto one = CoefficientField::dense(1, 1, {{{1}, 1.0}});
  EXPECT_DOUBLE_EQ(exact_oracle_tail(one, 1, 1, 0.5), 0.5);
  const auto U = CoefficientField::uniform(2, 3);
  const double exact = exact_oracle_tail(U, 2, 3, 1.7);
  const auto A = family(FamilyKind::Rademacher, 2, 3).assumptions();
  const auto M = martingale_tail_recursion(A);
  EXPECT_LE(exact, (*M.tail)(1.7));
  EXPECT_GT(exact, 0.0);
}

TEST(Oracle, TooLarge) {
  const auto F = CoefficientField::uniform(2, 15);
  try {
    exact_oracle_tail(F, 2, 15, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooLarge);
  }
}

TEST(Oracle, PipelinesDominate) {
  // Theorems 4, 5 and the split pipelines against exact enumeration
  for (int d : {1, 2}) {
    for (std::size_t n : {static_cast<std::size_t>(d), std::size_t{4}, std::size_t{6}}) {
      const auto F = CoefficientField::uniform(d, n);
      const auto spec = family(FamilyKind::Rademacher, d, n);
      FamilyAssumptions A = spec.assumptions();
      const auto grid = numerics::log1p_grid(4.0 * std::sqrt(static_cast<double>(n)), 64);
      const auto exact = exact_oracle_tail(F, grid);
      const auto M = martingale_tail_recursion(A);
      const auto I = independent_tail_recursion(A);
      const auto S = split_pipeline_tail(F, A);
      A.dependence = Dependence::Martingale;
      const auto S13 = split_pipeline_tail(F, A);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        EXPECT_GE((*M.tail)(grid[k]), exact[k]) << d << " " << n << " " << grid[k];
        EXPECT_GE((*I.tail)(grid[k]), exact[k]) << d << " " << n << " " << grid[k];
        EXPECT_GE((*S.tail)(grid[k]), exact[k]) << d << " " << n << " " << grid[k];
        EXPECT_GE((*S13.tail)(grid[k]), exact[k]) << d << " " << n << " " << grid[k];
      }
    }
  }
}

TEST(Families, AssumptionChecks) {
  for (auto k : {FamilyKind::Rademacher, FamilyKind::WeibullSymmetric, FamilyKind::ScaledProduct,
                 FamilyKind::DependentMartingale}) {
    const auto s = family(k, 2, 6, k == FamilyKind::Rademacher || k == FamilyKind::DependentMartingale
                                       ? std::vector<double>{}
                                       : std::vector<double>{1.0, 2.0});
    const auto B = generate_batch(s, 20000, 77);
    std::vector<TailFunction> env{s.coordinate_tail(0), s.coordinate_tail(1)};
    const auto c = check_family(B, env);
    EXPECT_TRUE(c.ok) << family_name(k) << (c.messages.empty() ? "" : c.messages[0]);
    EXPECT_LE(c.max_drift_z, 3.9);
  }
  // a declared envelope that the family exceeds
  const auto s = family(FamilyKind::Rademacher, 1, 4);
  const auto B = generate_batch(s, 5000, 1);
  EXPECT_FALSE(check_family(B, {TailFunction::indicator(0.5)}).ok);
}

TEST(Families, DependentMartingaleIsNotIndependent) {
  const auto s = family(FamilyKind::DependentMartingale, 1, 2);
  const auto B = generate_batch(s, 600, 31);
  std::vector<double> a, b;
  for (std::size_t r = 0; r < B.replications; ++r) {
    a.push_back(B.at(r, 0, 0));
    b.push_back(B.at(r, 0, 1));
  }
  const double stat = distance_correlation(a, b);
  // permutation null
  std::size_t exceed = 0;
  for (int k = 0; k < 100; ++k) {
    std::vector<double> p = b;
    CounterRng rng(5, k);
    for (std::size_t i = p.size() - 1; i > 0; --i) std::swap(p[i], p[rng.next() % (i + 1)]);
    exceed += distance_correlation(a, p) >= stat;
  }
  EXPECT_LE(exceed, 1u);
  // the same test does not reject for Rademacher coordinates
  const auto R = generate_batch(family(FamilyKind::Rademacher, 1, 2), 600, 31);
  std::vector<double> c, e;
  for (std::size_t r = 0; r < R.replications; ++r) {
    c.push_back(R.at(r, 0, 0));
    e.push_back(R.at(r, 0, 1));
  }
  EXPECT_LT(distance_correlation(c, e), stat);
}

TEST(Campaign, AzumaSanity) {
  const std::size_t n = 64;
  const auto spec = family(FamilyKind::Rademacher, 1, n);
  const auto F = CoefficientField::uniform(1, n);
  BoundResult b;
  b.tail = TailFunction::parametric(1.0, std::sqrt(8.0), 2.0);  // exp(-x^2/8)
  VerifyConfig cfg;
  cfg.replications = 100000;
  for (int k = 0; k <= 32; ++k) cfg.x_grid.push_back(4.0 * k / 32.0);
  const auto r = verify_campaign(spec, F, b, cfg);
  EXPECT_TRUE(r.pass);
  cfg.bound_scale = 0.01;
  EXPECT_FALSE(verify_campaign(spec, F, b, cfg).pass);
  BoundResult wrong;
  wrong.tail = TailFunction::parametric(1.0, std::sqrt(0.1), 2.0);  // exp(-10 x^2)
  cfg.bound_scale = 1.0;
  EXPECT_FALSE(verify_campaign(spec, F, wrong, cfg).pass);
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "x,empirical,cp_upper,bound,verdict");
}

TEST(Campaign, MomentVerdict) {
  const auto spec = family(FamilyKind::Rademacher, 2, 16);
  const auto F = CoefficientField::uniform(2, 16);
  BoundResult none;
  VerifyConfig cfg;
  cfg.replications = 10000;
  cfg.moment_p = {2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto A = spec.assumptions();
  cfg.moment_bound = [A](double p) { return martingale_moment_bound(A, p); };
  const auto r = verify_campaign(spec, F, none, cfg);
  EXPECT_TRUE(r.pass);
  for (std::size_t k = 0; k < cfg.moment_p.size(); ++k)
    EXPECT_DOUBLE_EQ(r.moment_bound[k], 4.0 * cfg.moment_p[k] * cfg.moment_p[k]);
}

TEST(Campaign, DeterministicReport) {
  const auto spec = family(FamilyKind::WeibullSymmetric, 1, 8, {1.0});
  const auto F = CoefficientField::uniform(1, 8);
  const auto A = spec.assumptions();
  const auto b = martingale_tail_recursion(A);
  VerifyConfig cfg;
  cfg.replications = 20000;
  cfg.workers = 1;
  const auto r1 = verify_campaign(spec, F, b, cfg);
  cfg.workers = 4;
  const auto r2 = verify_campaign(spec, F, b, cfg);
  EXPECT_EQ(report_csv(r1), report_csv(r2));
  EXPECT_TRUE(r1.pass);
}

TEST(Campaign, AssumptionViolation) {
  const auto spec = family(FamilyKind::Rademacher, 1, 4);
  const auto F = CoefficientField::uniform(1, 4);
  BoundResult b;
  b.tail = TailFunction::constant_one();
  VerifyConfig cfg;
  cfg.replications = 2000;
  cfg.declared_tails = std::vector<TailFunction>{TailFunction::indicator(0.5)};
  try {
    verify_campaign(spec, F, b, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AssumptionViolated);
  }
}

TEST(LowerEnvelope, ExponentFitRecoversKnownCurves) {
  std::vector<double> x, t;
  for (double v : numerics::geometric_grid(1.0, 8.0, 20)) {
    x.push_back(v);
    t.push_back(0.3 * std::exp(-0.7 * std::pow(v, 1.4)));
  }
  const auto f = fit_tail_exponent(x, t);
  EXPECT_NEAR(f.slope, 1.4, 0.02);
  EXPECT_NEAR(f.offset, -std::log(0.3), 0.02);
}

TEST(LowerEnvelope, ProbeSlopes) {
  const auto g = numerics::geometric_grid(0.1, 30.0, 60);
  const auto r1 = lower_envelope_probe(1, Exponent(2.0), {1}, g, 200000, 3);
  EXPECT_DOUBLE_EQ(r1.predicted, 2.0);
  EXPECT_NEAR(r1.runs[0].slope, 2.0, 0.3);
  // a product of three weibull(3) factors decays like exp(-x^{q/d}), faster
  // than the min(q, 2)/d envelope which needs long sums to be attained
  const auto r3 = lower_envelope_probe(3, Exponent(3.0), {1}, g, 200000, 3);
  EXPECT_NEAR(r3.predicted, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r3.runs[0].slope, 1.0, 0.3);
  EXPECT_GE(r3.runs[0].slope, r3.predicted);
}
