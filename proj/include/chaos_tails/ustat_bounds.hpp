#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "chaos_tails/bound_engine.hpp"
#include "chaos_tails/exponent_catalog.hpp"
#include "chaos_tails/tail_algebra.hpp"

namespace chaos_tails {

/// A symmetric kernel on support^d with support atoms carrying probabilities.
/// Values are stored row-major, the first argument varying slowest.
class FiniteKernel {
 public:
  FiniteKernel() = default;
  /// Validates probabilities (positive, summing to 1 within 1e-12), the table
  /// size m^d and symmetry under argument permutation.
  FiniteKernel(std::vector<double> atoms, std::vector<double> probs, int d,
               std::vector<double> phi);

  int d() const { return d_; }
  std::size_t support_size() const { return atoms_.size(); }
  const std::vector<double>& atoms() const { return atoms_; }
  const std::vector<double>& probs() const { return probs_; }
  const std::vector<double>& values() const { return phi_; }

  /// Value at a tuple of atom indices.
  double operator()(std::span<const std::size_t> idx) const;
  double at_flat(std::size_t i) const { return phi_[i]; }

  double mean() const;
  /// E Phi^2 - (E Phi)^2.
  double variance() const;
  /// (E |Phi|^p)^{1/p} under the product measure.
  double lp_norm(double p) const;
  FiniteKernel centered() const;
  FiniteKernel scaled(double c) const;
  /// Fix the last argument at atom z: a kernel of dimension d - 1.
  FiniteKernel slice_last(std::size_t z) const;
  /// Distribution of Phi(xi_1, ..., xi_d): distinct values with probabilities.
  void distribution(std::vector<double>& values, std::vector<double>& probs) const;
  double max_abs() const;

 private:
  std::vector<double> atoms_, probs_, phi_;
  int d_ = 0;
};

/// h_j(x_1..x_j) = E Phi(x_1..x_j, xi_{j+1}..xi_d), a kernel of dimension j
/// (j = 0 gives a one-entry table holding E Phi).
FiniteKernel conditional_mean(const FiniteKernel& K, int j);

/// g_k = int Phi prod_{l<=k} (delta_{x_l} - mu)(dy_l) prod_{l>k} mu(dy_l).
FiniteKernel hoeffding_project(const FiniteKernel& K, int k);

/// Largest |sum_x mu(x) g(x_1..x_{k-1}, x)| over all prefixes.
double degeneracy_defect(const FiniteKernel& g);

struct HoeffdingDecomposition {
  int d = 0;
  int rank = 0;
  double mean = 0.0;
  std::vector<FiniteKernel> g;   // g[k-1] = g_k, k = 1..d
  std::vector<double> weights;   // weights[k-1] = C(d, k)
  std::vector<double> second_moments;  // E g_k^2
};

HoeffdingDecomposition hoeffding_decompose(const FiniteKernel& K, double zero_tol = 1e-10);

/// Smallest k with g_k not identically zero (within tol relative to max |Phi|).
int detect_rank(const FiniteKernel& K, double zero_tol = 1e-10);

/// Phi - E Phi - sum_i g_1(x_i): removes the first-order part.
FiniteKernel strip_first_order(const FiniteKernel& K);

/// sum over d-subsets of the sample of Phi, divided by C(n, d).
double ustat_evaluate(const FiniteKernel& K, std::span<const std::size_t> sample);

/// E Phi + sum_k C(d, k) U(n; g_k), evaluated from the projections.
double ustat_reassemble(const HoeffdingDecomposition& H, std::span<const std::size_t> sample);

/// D U(n) = sum_k C(d,k)^2 E g_k^2 / C(n,k).
double ustat_variance(const HoeffdingDecomposition& H, std::size_t n);

/// C^d p^d |Phi|_p / log p.
double ustat_moment_bound(const FiniteKernel& K, double p, double C = 1.4142135623730951);

struct UstatParametric {
  double exponent = 0.0;   // q / (q d + 1)
  double log_power = 0.0;  // -(r - 1) q / (q d + 1)
  TailFunction tail;       // parametric when monotone, otherwise its nonincreasing majorant
};

/// exp(-(x/K)^{q/(qd+1)} (log(F + x/K))^{-(r-1)q/(qd+1)}) with C(d, q, r) = 1.
UstatParametric ustat_tail_parametric(int d, Exponent q, double r, double Kscale);

/// Tail of U(n)/sqrt(D U(n)) through the slice recursion:
/// min(1, sum_{k >= r} L_k(sigma_k C(d,k) t(d,k,r) x)), where L_k bounds
/// C(n,k)^{-1/2} sum_I g_k(xi_I).
BoundResult ustat_tail_recursion(const FiniteKernel& K);

/// The slice recursion alone for a degenerate kernel of dimension k.
/// Returns nothing when the kernel vanishes identically.
std::optional<TailFunction> ustat_slice_bound(const FiniteKernel& g);

}  // namespace chaos_tails
