#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "chaos_tails/exponent_catalog.hpp"
#include "chaos_tails/tail_algebra.hpp"

namespace chaos_tails {

enum class Dependence { Martingale, Independent };

/// p -> sup_i |xi(i, m)|_p for one coordinate.
class MomentEnvelope {
 public:
  enum class Kind { Constant, Gq, Table };

  static MomentEnvelope constant(double c);
  /// C p^{1/q}; q = inf gives the constant C.
  static MomentEnvelope gq(Exponent q, double C = 1.0);
  /// Linear interpolation of tabulated values, unavailable outside the table.
  static MomentEnvelope table(std::vector<double> p, std::vector<double> mu);

  /// The envelope at p, or nothing when it is not available there.
  std::optional<double> operator()(double p) const;
  Kind kind() const { return kind_; }
  double constant() const { return c_; }
  Exponent exponent() const { return q_; }
  const std::vector<double>& table_p() const { return p_; }
  const std::vector<double>& table_mu() const { return mu_; }
  std::string describe() const;

 private:
  Kind kind_ = Kind::Constant;
  double c_ = 1.0;
  Exponent q_ = Exponent::infinity();
  std::vector<double> p_, mu_;
};

struct FamilyAssumptions {
  int d = 1;
  std::vector<TailFunction> tails;                    // T_m, one per coordinate
  std::vector<std::optional<CramerProfile>> cramer;   // phi_m, may be empty
  Dependence dependence = Dependence::Martingale;
  std::vector<std::optional<MomentEnvelope>> moments; // mu_m, may be empty

  /// Checks sizes and d >= 1; throws DimensionMismatch or InvalidArgument.
  void validate() const;
};

struct MomentCurve {
  std::vector<double> p;
  std::vector<double> bound;
};

struct BoundResult {
  std::optional<TailFunction> tail;
  std::optional<MomentCurve> moments;
  std::vector<std::string> provenance;
  std::map<std::string, double> metadata;
  std::vector<std::string> notes;
};

/// Order in which coordinates enter the recursion.
enum class CoordinateOrder {
  Ascending,    // W[T_1], then T_2, ..., T_d: the inner polynomial is peeled first
  Descending,   // W[T_d], then T_{d-1}, ..., T_1
  Literal       // W[T_d], then T_2, ..., T_d as the recursion is displayed
};

std::vector<int> coordinate_sequence(int d, CoordinateOrder order);

/// T^(1) = W[T_a], T^(s+1) = W[T_b v T^(s)] along the coordinate sequence.
BoundResult martingale_tail_recursion(const FamilyAssumptions& A,
                                      CoordinateOrder order = CoordinateOrder::Ascending);

/// Same recursion seeded with Wbar = min(W, exp(-chi*)) when the base
/// coordinate has a Cramer profile; otherwise the martingale recursion.
BoundResult independent_tail_recursion(const FamilyAssumptions& A,
                                       CoordinateOrder order = CoordinateOrder::Ascending);

/// Homogeneous-form inputs exp(-(x/K_m)^{q_m}); q = inf is the indicator at K_m.
FamilyAssumptions weibull_family(const QVector& qv, const std::vector<double>& K,
                                 Dependence dep = Dependence::Martingale);

/// Upper envelope exp(-(x/(C prod K))^M) with C fitted to the recursion on
/// x >= x0, x0 the point where the recursion tail falls to 1/e.
BoundResult theorem1_envelope(const QVector& qv, const std::vector<double>& K);

/// exp(-C3 (x/prod K)^{N_d}) with C3 fitted to the independent recursion.
BoundResult theorem2_envelope(const QVector& qv, const std::vector<double>& K);

/// exp(-C4 x^{min(q,2)/d}) with C4 = 1 (the constant is not tracked).
BoundResult theorem3_lower_envelope(int d, Exponent q);

/// gamma(d) p^d prod mu_m(d p).
double martingale_moment_bound(const FamilyAssumptions& A, double p);

/// 2^{d/2} p^d prod mu_m(p) / log p.
double independent_moment_bound(const FamilyAssumptions& A, double p);

/// Moment curve on the given p values, with provenance.
BoundResult moment_bound_curve(const FamilyAssumptions& A, const std::vector<double>& p,
                               bool independent);

struct MarkovOptions {
  double p_max = 64.0;
};

/// x -> min(1, inf_{p in [2, P]} (bound(p)/x)^p).
TailFunction moments_to_tail(const std::function<double(double)>& bound,
                             const MarkovOptions& opt = {});

/// Slope of log(-log T) against log x on nodes inside [x_lo, x_hi].
double loglog_slope(const TailFunction& T, double x_lo, double x_hi);

}  // namespace chaos_tails
