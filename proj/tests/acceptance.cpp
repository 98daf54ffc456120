// Acceptance checks: one [PASS]/[FAIL] line per criterion, exit 1 on any failure.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "chaos_tails/bound_engine.hpp"
#include "chaos_tails/coefficient_series.hpp"
#include "chaos_tails/exponent_catalog.hpp"
#include "chaos_tails/monte_carlo_lab.hpp"
#include "chaos_tails/numerics.hpp"
#include "chaos_tails/tail_algebra.hpp"
#include "chaos_tails/ustat_bounds.hpp"

using namespace chaos_tails;
using numerics::kInf;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

char buf[512];

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void run(const char* id, const char* title, double limit_seconds, const std::function<Outcome()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < limit_seconds;
  const bool ok = o.ok && in_time;
  if (!ok) ++failures;
  std::printf("[%s] %s %s: %s (%.3f s, limit %g s%s)\n", ok ? "PASS" : "FAIL", id, title,
              o.detail.c_str(), secs, limit_seconds, in_time ? "" : ", over time");
  std::fflush(stdout);
}

FamilySpec rademacher(int d, std::size_t n) {
  FamilySpec s;
  s.kind = FamilyKind::Rademacher;
  s.d = d;
  s.n = n;
  return s;
}

// The Azuma campaign shared by AC5 and AC10: W[indicator] = exp(-x^2/8).
VerificationReport azuma(double scale) {
  const std::size_t n = 64;
  BoundResult b;
  b.tail = truncation_operator_W(TailFunction::indicator(1.0));
  VerifyConfig cfg;
  cfg.replications = 100000;
  cfg.bound_scale = scale;
  cfg.workers = default_workers();
  for (int k = 0; k <= 32; ++k) cfg.x_grid.push_back(4.0 * k / 32.0);
  return verify_campaign(rademacher(1, n), CoefficientField::uniform(1, n), b, cfg);
}

}  // namespace

int main() {
  run("AC1", "moment constants gamma(2), gamma(3)", 1e-3, [] {
    const double g2 = moment_constant_gamma(2), g3 = moment_constant_gamma(3);
    const double e2 = std::abs(g2 - 4.0), e3 = std::abs(g3 - 9.0 * std::sqrt(2.0));
    return Outcome{e2 <= 1e-12 && e3 <= 1e-12,
                   fmt("gamma(2) = %.15g, gamma(3) = %.15g, errors %.1e %.1e", g2, g3, e2, e3)};
  });

  run("AC2", "N_d(q..q) = gamma(d, q)", 1.0, [] {
    const std::vector<Exponent> qs{0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 8.0, Exponent::infinity()};
    double worst = 0.0;
    int cases = 0;
    bool ok = true;
    for (int d = 1; d <= 6; ++d)
      for (const auto& q : qs) {
        const auto a = exponent_Nd(QVector::homogeneous(d, q));
        const auto b = exponent_gamma_dq(d, q);
        ++cases;
        if (a.infinite != b.infinite) {
          ok = false;
          continue;
        }
        if (!a.infinite) worst = std::max(worst, std::abs(a.value - b.value));
      }
    return Outcome{ok && worst <= 1e-12, fmt("%d cases, max abs difference %.1e", cases, worst)};
  });

  run("AC3", "Young-Fenchel conjugates of l^2/2 and l^3/3", 1.0, [] {
    const auto lam = numerics::geometric_grid(1e-6, 50, 4000);
    std::vector<double> xs;
    for (int i = 0; i <= 1000; ++i) xs.push_back(10.0 * i / 1000);
    const auto c2 = young_fenchel([](double l) { return l * l / 2; }, lam, xs);
    const auto c3 = young_fenchel([](double l) { return l * l * l / 3; }, lam, xs);
    double e2 = 0.0, r3 = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      e2 = std::max(e2, std::abs(c2.y[i] - xs[i] * xs[i] / 2));
      if (xs[i] > 0) {
        const double want = 2.0 / 3.0 * std::pow(xs[i], 1.5);
        r3 = std::max(r3, std::abs(c3.y[i] - want) / want);
      }
    }
    return Outcome{e2 <= 1e-6 && r3 <= 1e-5,
                   fmt("max abs error %.1e (quadratic), max rel error %.1e (cubic)", e2, r3)};
  });

  run("AC4", "Theorem-4 pipeline dominates exact Rademacher tails", 120.0, [] {
    std::size_t checks = 0, violations = 0;
    double tightest = kInf;
    for (int d : {1, 2}) {
      const auto A = rademacher(d, 1).assumptions();
      const BoundResult B = martingale_tail_recursion(A);
      const TailFunction& T = *B.tail;
      const std::size_t n_max = d == 1 ? 10 : 6;
      for (std::size_t n = static_cast<std::size_t>(d); n <= n_max; ++n) {
        const auto F = CoefficientField::uniform(d, n);
        // the standard grid of the bound plus every atom of |Q| and the point just below it
        std::vector<double> xs(T.nodes().begin(), T.nodes().end());
        if (xs.empty()) xs = numerics::log1p_grid(T.upper_scale(), 512);
        auto values = exact_rademacher_values(F);
        for (double v : values) {
          xs.push_back(std::abs(v));
          xs.push_back(std::nextafter(std::abs(v), 0.0));
        }
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
        const auto exact = exact_oracle_tail(F, xs);
        for (std::size_t k = 0; k < xs.size(); ++k) {
          ++checks;
          const double b = T(xs[k]);
          if (b < exact[k]) ++violations;
          if (exact[k] > 0) tightest = std::min(tightest, b / exact[k]);
        }
      }
    }
    return Outcome{violations == 0, fmt("%zu points, %zu violations, min bound/exact %.3f", checks,
                                        violations, tightest)};
  });

  run("AC5", "Azuma campaign d=1 n=64, 1e5 replications", 60.0, [] {
    const auto r = azuma(1.0);
    std::size_t pass = 0;
    for (bool v : r.verdict) pass += v;
    return Outcome{r.pass, fmt("%s, %zu/%zu grid points pass", r.pass ? "PASS" : "FAIL", pass,
                               r.verdict.size())};
  });

  run("AC6", "Theorem-6 moment campaign d=2 n=32, 1e4 replications", 120.0, [] {
    const auto spec = rademacher(2, 32);
    const auto A = spec.assumptions();
    VerifyConfig cfg;
    cfg.replications = 10000;
    cfg.workers = default_workers();
    for (int p = 2; p <= 10; ++p) cfg.moment_p.push_back(p);
    cfg.moment_bound = [A](double p) { return martingale_moment_bound(A, p); };
    const auto r = verify_campaign(spec, CoefficientField::uniform(2, 32), BoundResult{}, cfg);
    bool ok = r.pass;
    double worst = 0.0;  // largest bootstrap upper / bound: the tightness ratio
    for (std::size_t k = 0; k < cfg.moment_p.size(); ++k) {
      const double p = cfg.moment_p[k];
      ok = ok && std::abs(r.moment_bound[k] - 4.0 * p * p) <= 1e-9 * p * p;
      ok = ok && r.moments.upper[k] <= r.moment_bound[k];
      worst = std::max(worst, r.moments.upper[k] / r.moment_bound[k]);
    }
    return Outcome{ok, fmt("%s, max empirical upper band / 4p^2 = %.4f", ok ? "PASS" : "FAIL", worst)};
  });

  run("AC7", "lower-envelope slope d=2, q=inf, 1e6 replications", 300.0, [] {
    const auto g = numerics::geometric_grid(0.05, 40.0, 80);
    const auto rep = lower_envelope_probe(2, Exponent::infinity(), {4, 16, 64}, g, 1000000, 7,
                                          default_workers());
    const auto& big = rep.runs.back();
    const bool ok = big.slope >= 0.8 && big.slope <= 1.3;
    std::string per;
    for (const auto& r : rep.runs) per += fmt(" n=%zu:%.3f", r.n, r.slope);
    return Outcome{ok, fmt("predicted %.3f, fitted slope %.3f at n=%zu (raw %.3f, %zu points);%s",
                           rep.predicted, big.slope, big.n, big.raw_slope, big.fit_points,
                           per.c_str())};
  });

  run("AC8", "U-statistic reassembly and rank of the centered kernel", 30.0, [] {
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> size(2, 4);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u(0.1, 1.0);
    double worst = 0.0;
    int rank_ok = 0;
    for (int k = 0; k < 20; ++k) {
      const int m = size(rng);
      std::vector<double> atoms(m), probs(m), phi(m * m);
      double total = 0.0;
      for (int i = 0; i < m; ++i) {
        atoms[i] = g(rng);
        probs[i] = u(rng);
        total += probs[i];
      }
      for (auto& p : probs) p /= total;
      // exact normalization
      double s = 0.0;
      for (int i = 0; i + 1 < m; ++i) s += probs[i];
      probs[m - 1] = 1.0 - s;
      for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) phi[i * m + j] = phi[j * m + i] = g(rng);
      const FiniteKernel K(atoms, probs, 2, phi);
      const auto H = hoeffding_decompose(K);
      std::uniform_int_distribution<std::size_t> pick(0, m - 1);
      for (int t = 0; t < 100; ++t) {
        std::vector<std::size_t> sample(3 + t % 8);
        for (auto& v : sample) v = pick(rng);
        worst = std::max(worst, std::abs(ustat_evaluate(K, sample) - ustat_reassemble(H, sample)));
      }
      rank_ok += detect_rank(strip_first_order(K)) == 2;
    }
    return Outcome{worst <= 1e-10 && rank_ok == 20,
                   fmt("max reassembly error %.1e, rank 2 for %d/20 centered kernels", worst, rank_ok)};
  });

  run("AC9", "power-law regimes of the Theorem-15 moment growth", 60.0, [] {
    const auto ps = numerics::geometric_grid(4.0, 32.0, 16);
    // alpha = 1.25: intermediate, growth exponent 2(d - alpha) = 1.5
    const auto mid = CoefficientField::power_law(2, 1.25, 1.0);
    const double s = theorem15_growth_exponent(mid, 4.0, 32.0);
    const bool ok_mid = std::abs(s - 1.5) <= 0.15 * 1.5;
    // alpha = 2 = d: critical, C log p
    const auto crit = CoefficientField::power_law(2, 2.0, 1.0);
    double lo = kInf, hi = 0.0;
    for (double p : ps) {
      const double r = theorem15_moment(crit, 2, p) / std::log(p);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    const bool ok_crit = hi / lo - 1.0 <= 0.15;
    // alpha = 2.5 > d: bounded by sum |b|
    const auto big = CoefficientField::power_law(2, 2.5, 1.0);
    const double l1 = big.sum_abs();
    bool below = true;
    for (double p : ps) below = below && theorem15_moment(big, 2, p) <= l1;
    const double f32 = theorem15_moment(big, 2, 32.0);
    const bool ok_big = below && f32 >= 0.85 * l1;
    return Outcome{ok_mid && ok_crit && ok_big,
                   fmt("alpha=1.25 exponent %.3f (want 1.5); alpha=2 f/log p spread %.1f%%; "
                       "alpha=2.5 f(32)/sum|b| = %.3f",
                       s, 100.0 * (hi / lo - 1.0), f32 / l1)};
  });

  run("AC10", "falsifiability: Azuma bound scaled by 0.01 fails", 60.0, [] {
    const auto r = azuma(0.01);
    std::size_t fail = 0;
    for (bool v : r.verdict) fail += !v;
    return Outcome{!r.pass, fmt("%s, %zu/%zu grid points fail", r.pass ? "PASS" : "FAIL", fail,
                                r.verdict.size())};
  });

  return failures == 0 ? 0 : 1;
}
