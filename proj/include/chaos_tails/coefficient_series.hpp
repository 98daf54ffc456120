#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chaos_tails/bound_engine.hpp"
#include "chaos_tails/exponent_catalog.hpp"
#include "chaos_tails/tail_algebra.hpp"

namespace chaos_tails {

/// One coefficient b(I); indices are 1-based and strictly increasing.
struct CoefficientEntry {
  std::vector<std::uint32_t> I;
  double b = 0.0;
};

/// Sorted magnitude profile behind the split measures.
struct MagnitudeTable;

/// A d-dimensional coefficient sequence b(I), I = (i_1 < ... < i_d).
/// Dense fields hold their nonzero entries; power-law fields |b(I)| = C |I|^{-alpha}
/// (|I| the Euclidean norm of the index tuple) with n = inf are enumerated up to a
/// radius and bounded beyond it by integral comparison.
class CoefficientField {
 public:
  static CoefficientField dense(int d, std::size_t n, std::vector<CoefficientEntry> entries);
  /// b(I) = prod_m beta[m][i_m - 1]; beta has d rows of length n.
  static CoefficientField separable(const std::vector<std::vector<double>>& beta);
  /// b(I) = 1/sqrt(C(n, d)) on every tuple.
  static CoefficientField uniform(int d, std::size_t n);
  /// |b(I)| = C |I|^{-alpha}. With n given the field is materialized densely.
  /// enumeration_target is the number of tuples enumerated exactly when n = inf.
  static CoefficientField power_law(int d, double alpha, double C = 1.0,
                                    std::optional<std::size_t> n = std::nullopt,
                                    std::size_t enumeration_target = std::size_t{1} << 21);

  int d() const { return d_; }
  /// Horizon; nothing for a power-law field with n = inf.
  std::optional<std::size_t> n() const { return n_; }
  bool is_rule() const { return rule_; }
  bool is_separable() const { return !beta_.empty(); }
  double alpha() const { return alpha_; }
  double rule_constant() const { return C_; }
  const std::vector<std::vector<double>>& beta() const { return beta_; }

  /// Nonzero entries (dense fields only).
  const std::vector<CoefficientEntry>& entries() const;
  /// b(I) for a 1-based strictly increasing tuple; 0 when absent.
  double coefficient(std::span<const std::uint32_t> I) const;

  /// sum |b| (may be +inf) and sum b^2; for rule fields these are upper bounds.
  double sum_abs() const;
  double sum_sq() const;
  /// Integral-comparison remainder included in the rule sums (0 for dense fields).
  double sum_abs_remainder() const;
  double sum_sq_remainder() const;
  /// Radius up to which a rule field is enumerated exactly.
  double enumeration_radius() const;

  const MagnitudeTable& table() const { return *table_; }
  std::string describe() const;

 private:
  int d_ = 1;
  std::optional<std::size_t> n_;
  bool rule_ = false;
  double alpha_ = 0.0, C_ = 1.0;
  std::vector<std::vector<double>> beta_;
  std::vector<CoefficientEntry> entries_;
  std::shared_ptr<const MagnitudeTable> table_;
};

/// Upper bound on sum over strictly increasing positive tuples with |I| >= R of
/// |I|^{-s}: kappa_d (R - sqrt d)^{d-s}/(s-d) with kappa_d = |S^{d-1}|/(d! 2^d).
/// +inf when s <= d; requires R > sqrt d.
double power_tail_sum_bound(int d, double s, double R);

struct SplitProfile {
  double lambda = 0.0;
  double a1 = 0.0;  // sum_{|b| <= lambda} |b|
  double a2 = 0.0;  // sqrt(sum_{|b| > lambda} b^2)
  double c1 = 0.0;  // sum_{|b| > lambda} |b|
  double c2 = 0.0;  // sqrt(sum_{|b| <= lambda} b^2)
  bool bounded = false;  // sums include an integral-comparison remainder
};

SplitProfile split_profile(const CoefficientField& F, double lambda);

/// A split A | complement used in the two-term bounds: the l1 part is bounded by
/// the triangle inequality, the l2 part by the chaos bound.
struct SplitPair {
  double lambda = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  bool complement = false;  // l1 over the large coefficients
};

/// Candidate splits in both orientations (pairs with infinite l1 are dropped).
/// Exact for dense fields; subsampled prefixes for large tables.
std::vector<SplitPair> split_candidates(const CoefficientField& F, std::size_t max_candidates = 4096);

struct SplitTailOptions {
  double C1 = 1.0;
  double C2 = 1.0;
  TabulationOptions tabulation{};
};

/// min(1, C1 inf_lambda [exp(-C2 (x/(a1 K))^G) + exp(-C2 (x/(a2 K))^M)]), K = prod K_m.
TailFunction theorem13_tail(const CoefficientField& F, const QVector& qv,
                            const std::vector<double>& K = {}, const SplitTailOptions& opt = {});

/// As theorem13_tail with N_d(q) in place of M.
TailFunction theorem14_tail(const CoefficientField& F, const QVector& qv,
                            const std::vector<double>& K = {}, const SplitTailOptions& opt = {});

/// Constant-tracked two-term bound: min(1, inf_split [T1(x/(2 l1)) + R(x/(2 l2))]),
/// T1 the Markov tail of moments prod_m |xi_m|_{d p} and R the martingale
/// (or independent) recursion of the assumptions.
BoundResult split_pipeline_tail(const CoefficientField& F, const FamilyAssumptions& A);

/// inf_lambda (a1 + a2 p^d / log p).
double theorem15_moment(const CoefficientField& F, int d, double p);
/// inf_lambda (a1 + a2 p^d).
double theorem16_moment(const CoefficientField& F, int d, double p);

/// Minimizing split of a two-term moment bound with multiplier w on the l2 part.
SplitPair moment_split_argmin(const CoefficientField& F, double w);

enum class PowerLawRegime { NonSummable, Intermediate, Critical, Summable };

struct PowerLawClass {
  PowerLawRegime regime = PowerLawRegime::NonSummable;
  /// Moment growth exponent in p (2(d - alpha) when intermediate, 0 beyond).
  double moment_growth = 0.0;
  /// Tail exponent q/(q(d - alpha) + d) when intermediate, G beyond.
  double tail_exponent = 0.0;
  std::string label;
};

PowerLawClass classify_power_law(int d, double alpha, Exponent q);
std::string regime_name(PowerLawRegime r);

/// Growth exponent d * slope of log f(p) against log(p^d / log p) on a
/// geometric p-grid, f = theorem15_moment.
double theorem15_growth_exponent(const CoefficientField& F, double p_lo, double p_hi,
                                 std::size_t points = 16);

enum class BoundKind { Tail, Moment };

struct NormalizedSum {
  CoefficientField field;
  double sum_b2 = 0.0;
  BoundResult bound;
};

/// theta_n = sum xi(I) / sqrt(sum prod sigma^2): b(I) = prod sigma(i_m, m)/sqrt(sum prod sigma^2),
/// with the normalized coordinates xi/sigma carrying exp(-x^q) tails (tail mode) or
/// unit moment envelopes p^{1/q} (moment mode). sigma2[m][i] = sigma^2(i+1, m+1).
NormalizedSum normalized_sum_bounds(const std::vector<std::vector<double>>& sigma2,
                                    const QVector& qv, Dependence dep, BoundKind kind,
                                    const std::vector<double>& p = {2, 4, 8, 16});

}  // namespace chaos_tails
