#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chaos_tails/bound_engine.hpp"
#include "chaos_tails/coefficient_series.hpp"
#include "chaos_tails/tail_algebra.hpp"

namespace chaos_tails {

/// Counter-based generator: the stream for (seed, key) depends on nothing else.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t key);
  std::uint64_t next();
  /// Uniform on (0, 1), never 0 or 1.
  double uniform();
  /// +1 or -1.
  double sign() { return (next() >> 63) ? 1.0 : -1.0; }

 private:
  std::uint64_t state_;
};

std::uint64_t splitmix64(std::uint64_t x);

enum class FamilyKind { Rademacher, WeibullSymmetric, ScaledProduct, DependentMartingale };

std::string family_name(FamilyKind k);
FamilyKind parse_family(const std::string& name);

struct FamilySpec {
  FamilyKind kind = FamilyKind::Rademacher;
  int d = 1;
  std::size_t n = 1;
  /// Per-coordinate exponents (WeibullSymmetric, ScaledProduct); empty means q = 2.
  std::vector<double> q;
  /// h(history) = (1 + gain sign(last nu)) / (1 + gain) for DependentMartingale.
  double gain = 0.5;

  void validate() const;
  double q_of(int m) const;
  /// E xi(i, m)^2 (i 1-based).
  double second_moment(int m, std::size_t i) const;
  /// Tail envelope of one coordinate variable, max(P(xi > x), P(xi < -x)).
  TailFunction coordinate_tail(int m) const;
  /// Moment envelope p -> sup_i |xi(i, m)|_p.
  MomentEnvelope coordinate_moments(int m) const;
  /// Assumptions for the bound engine matching this family.
  FamilyAssumptions assumptions() const;
};

/// Fills xi[m * n + i] for one replication.
void sample_replication(const FamilySpec& spec, std::uint64_t seed, std::uint64_t rep,
                        std::span<double> xi);

struct SampleBatch {
  FamilySpec spec;
  std::size_t replications = 0;
  std::uint64_t seed = 0;
  std::vector<double> xi;  // [rep][m][i]

  std::span<const double> replication(std::size_t r) const {
    const std::size_t w = static_cast<std::size_t>(spec.d) * spec.n;
    return {xi.data() + r * w, w};
  }
  double at(std::size_t r, int m, std::size_t i) const {
    return xi[(r * spec.d + m) * spec.n + i];
  }
};

/// Worker count from CHAOS_TAILS_WORKERS or hardware concurrency.
unsigned default_workers();

/// Runs fn(begin, end) over [0, count) split into contiguous chunks.
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t, std::size_t)>& fn);

SampleBatch generate_batch(const FamilySpec& spec, std::size_t replications, std::uint64_t seed,
                           unsigned workers = 1);

/// Streams replications through a statistic without storing the batch.
std::vector<double> simulate_statistic(
    const FamilySpec& spec, std::size_t replications, std::uint64_t seed, unsigned workers,
    const std::function<double(std::span<const double>)>& statistic);

/// Q_d for one replication by tuple enumeration.
double qd_enumerate(const CoefficientField& F, std::span<const double> xi, std::size_t n);
/// Q_d by prefix dynamic programming for separable fields.
double qd_separable(const CoefficientField& F, std::span<const double> xi, std::size_t n);

enum class QdEvaluator { Auto, Enumerate, Separable };

std::vector<double> evaluate_Qd(const CoefficientField& F, const SampleBatch& batch,
                                QdEvaluator how = QdEvaluator::Auto);

/// R_2 = sum_{i<j} b(i,j) xi(i) xi(j) + sum_i b(i,i) (xi(i)^2 - E xi(i)^2) on coordinate 1.
std::vector<double> evaluate_R2(const CoefficientField& offdiag, std::span<const double> diag,
                                const SampleBatch& batch);

struct TailEstimate {
  std::vector<double> x;
  std::vector<double> estimate;
  std::vector<double> cp_upper;
  std::vector<std::size_t> count;  // max of the two one-sided counts
  std::size_t replications = 0;
  double confidence = 0.99;
};

TailEstimate empirical_tail(std::span<const double> values, std::span<const double> x_grid,
                            double confidence = 0.99);

struct MomentEstimate {
  std::vector<double> p;
  std::vector<double> estimate;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<bool> beyond_horizon;  // p > 4 log10(replications)
  std::size_t resamples = 0;
};

MomentEstimate empirical_moments(std::span<const double> values, std::span<const double> p,
                                 std::size_t resamples = 1000, double confidence = 0.99,
                                 std::uint64_t seed = 1);

/// Exact distribution of Q_d over all 2^{n d} Rademacher sign patterns
/// (values with equal probability). Throws TooLarge when n d > 24.
std::vector<double> exact_rademacher_values(const CoefficientField& F);

/// max(P(Q > x), P(Q < -x)) by enumeration.
double exact_oracle_tail(const CoefficientField& F, int d, std::size_t n, double x);
std::vector<double> exact_oracle_tail(const CoefficientField& F, std::span<const double> x);

/// Sample distance correlation.
double distance_correlation(std::span<const double> a, std::span<const double> b);

struct AssumptionCheck {
  bool ok = true;
  double max_envelope_excess = 0.0;  // CP lower band minus envelope, largest over x
  double max_drift_z = 0.0;          // conditional drift in standard errors
  std::vector<std::string> messages;
};

/// Empirical check that each coordinate is dominated by `declared` (its CP 99%
/// lower band never exceeds the envelope) and has no conditional drift given
/// the sign of its predecessor (|z| below the Bonferroni threshold for a
/// family-wise level of 0.001 over the 2 d drift tests).
AssumptionCheck check_family(const SampleBatch& batch, const std::vector<TailFunction>& declared);

struct VerifyConfig {
  std::size_t replications = 100000;
  std::uint64_t seed = 20240101;
  unsigned workers = 1;
  std::vector<double> x_grid;  // empty: 32 geometric points on [0.25 x90, 4 x99.99]
  std::size_t grid_points = 32;
  double bound_scale = 1.0;
  double confidence = 0.99;
  std::vector<double> moment_p;                              // empty: no moment verdict
  std::optional<std::function<double(double)>> moment_bound; // p -> bound
  std::size_t bootstrap = 1000;
  std::size_t envelope_sample = 20000;  // replications used for the assumption check
  std::optional<std::vector<TailFunction>> declared_tails;  // default: the family's own
  bool use_oracle = true;
};

struct VerificationReport {
  FamilySpec spec;
  std::string field;
  TailEstimate tail;
  std::vector<double> bound;
  std::vector<bool> verdict;
  std::vector<std::optional<double>> oracle;
  MomentEstimate moments;
  std::vector<double> moment_bound;
  std::vector<bool> moment_verdict;
  AssumptionCheck assumptions;
  std::uint64_t seed = 0;
  std::size_t replications = 0;
  double bound_scale = 1.0;
  double runtime_seconds = 0.0;
  bool pass = false;
  std::vector<std::string> notes;
};

/// Simulates Q_d for the field, compares the bound (times bound_scale) with the
/// Clopper-Pearson upper band and the exact oracle where available.
/// Throws AssumptionViolated when the family fails its envelope check.
VerificationReport verify_campaign(const FamilySpec& spec, const CoefficientField& F,
                                   const BoundResult& bound, const VerifyConfig& cfg);

/// Columns x, empirical, cp_upper, bound, verdict.
std::string report_csv(const VerificationReport& r);

struct LowerEnvelopeRun {
  std::size_t n = 0;
  TailEstimate tail;
  /// s in -log T = c + C x^s, least squares with the prefactor c profiled out.
  double slope = 0.0;
  double log_prefactor = 0.0;  // c
  /// Plain slope of log(-log T) against log x on the same points.
  double raw_slope = 0.0;
  std::size_t fit_points = 0;
};

struct ExponentFit {
  double slope = 0.0;
  double offset = 0.0;
  double raw_slope = 0.0;
};

/// Fits -log t = c + C x^s: for each c on a grid below min(-log t) the line
/// log(-log t - c) = log C + s log x, scored by the residual in -log t.
ExponentFit fit_tail_exponent(std::span<const double> x, std::span<const double> t);

struct LowerEnvelopeReport {
  int d = 1;
  Exponent q;
  double predicted = 0.0;  // min(q, 2)/d
  std::vector<LowerEnvelopeRun> runs;
};

/// Tails of the product construction prod_{m<=d} S_m, where S_m is a normalized
/// Rademacher sum of length n (q = inf) or a weibull_symmetric(q) variable (n unused),
/// and the exponent fit on grid points with at least min_count hits and tail <= tail_max.
LowerEnvelopeReport lower_envelope_probe(int d, Exponent q, const std::vector<std::size_t>& n_list,
                                         const std::vector<double>& x_grid,
                                         std::size_t replications, std::uint64_t seed,
                                         unsigned workers = 1, std::size_t min_count = 100,
                                         double tail_max = 0.3);

}  // namespace chaos_tails
