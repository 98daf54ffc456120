#include "chaos_tails/coefficient_series.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "chaos_tails/errors.hpp"
#include "chaos_tails/numerics.hpp"

namespace chaos_tails {

using numerics::kInf;

/// Magnitudes sorted in decreasing order with prefix sums; rule fields add an
/// integral-comparison remainder for everything beyond the enumerated radius.
struct MagnitudeTable {
  std::vector<double> mag;         // decreasing
  std::vector<double> prefix_l1;   // prefix_l1[k] = sum_{j<k} mag[j]
  std::vector<double> prefix_l2;   // same for mag^2
  double rest_l1 = 0.0;            // remainder beyond the table
  double rest_l2 = 0.0;
  double radius = kInf;            // enumerated radius (rule fields)
  double lambda_beyond = 0.0;      // magnitude at the radius (rule fields)

  std::size_t size() const { return mag.size(); }
  double large_l1(std::size_t k) const { return prefix_l1[k]; }
  double large_l2(std::size_t k) const { return prefix_l2[k]; }
  double small_l1(std::size_t k) const { return prefix_l1.back() - prefix_l1[k] + rest_l1; }
  double small_l2(std::size_t k) const {
    return std::max(0.0, prefix_l2.back() - prefix_l2[k]) + rest_l2;
  }
};

namespace {

constexpr std::size_t kDenseCap = 4'000'000;

std::shared_ptr<MagnitudeTable> build_table(std::vector<double> mag, double rest_l1,
                                                  double rest_l2) {
  auto t = std::make_shared<MagnitudeTable>();
  std::sort(mag.begin(), mag.end(), std::greater<>());
  t->mag = std::move(mag);
  t->prefix_l1.assign(t->mag.size() + 1, 0.0);
  t->prefix_l2.assign(t->mag.size() + 1, 0.0);
  for (std::size_t k = 0; k < t->mag.size(); ++k) {
    t->prefix_l1[k + 1] = t->prefix_l1[k] + t->mag[k];
    t->prefix_l2[k + 1] = t->prefix_l2[k] + t->mag[k] * t->mag[k];
  }
  t->rest_l1 = rest_l1;
  t->rest_l2 = rest_l2;
  return t;
}

double tuple_count(int d, std::size_t n) {
  return numerics::binomial(static_cast<int>(n), d);
}

void check_tuple(std::span<const std::uint32_t> I, int d, std::size_t n) {
  if (static_cast<int>(I.size()) != d)
    fail(ErrorCode::DimensionMismatch, "index tuple length differs from field dimension");
  for (std::size_t m = 0; m < I.size(); ++m) {
    require(I[m] >= 1 && I[m] <= n, "index outside 1..n");
    if (m > 0) require(I[m] > I[m - 1], "index tuples must be strictly increasing");
  }
}

// all strictly increasing tuples in 1..n, lexicographic
template <class Fn>
void for_each_tuple(int d, std::size_t n, Fn&& fn) {
  if (static_cast<std::size_t>(d) > n) return;
  std::vector<std::uint32_t> I(d);
  for (int m = 0; m < d; ++m) I[m] = m + 1;
  while (true) {
    fn(I);
    int m = d - 1;
    while (m >= 0 && I[m] == n - (d - 1 - m)) --m;
    if (m < 0) return;
    ++I[m];
    for (int j = m + 1; j < d; ++j) I[j] = I[j - 1] + 1;
  }
}

double sq_norm(std::span<const std::uint32_t> I) {
  double s = 0.0;
  for (auto i : I) s += static_cast<double>(i) * i;
  return s;
}

// squared norms of strictly increasing tuples with |I|^2 < R2
void enumerate_norms(int d, int m, std::uint32_t start, double partial, double R2,
                     std::vector<double>& out) {
  for (std::uint32_t i = start;; ++i) {
    // the remaining coordinates are at least i+1, i+2, ...
    double least = partial;
    for (int j = 0; j < d - m; ++j) least += static_cast<double>(i + j) * (i + j);
    if (least >= R2) return;
    if (m == d - 1) out.push_back(partial + static_cast<double>(i) * i);
    else enumerate_norms(d, m + 1, i + 1, partial + static_cast<double>(i) * i, R2, out);
  }
}

double unit_ball_volume(int d) {
  return std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
}

}  // namespace

double power_tail_sum_bound(int d, double s, double R) {
  require(d >= 1, "dimension must be at least 1");
  require(R > std::sqrt(static_cast<double>(d)), "tail radius must exceed sqrt(d)");
  if (s <= d) return kInf;
  // unit cubes [I-1, I] are disjoint, lie in the cone 0 <= y_1 <= ... <= y_d at
  // distance >= |I| - sqrt d, and |y|^{-s} >= |I|^{-s} on each of them
  const double sphere = 2.0 * std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0);
  const double kappa = sphere / (std::tgamma(d + 1.0) * std::pow(2.0, d));
  return kappa * std::pow(R - std::sqrt(static_cast<double>(d)), d - s) / (s - d);
}

// ---------------------------------------------------------------------------
// fields

CoefficientField CoefficientField::dense(int d, std::size_t n,
                                         std::vector<CoefficientEntry> entries) {
  require(d >= 1, "field dimension must be at least 1");
  require(n >= static_cast<std::size_t>(d), "horizon must be at least d");
  CoefficientField F;
  F.d_ = d;
  F.n_ = n;
  std::vector<CoefficientEntry> kept;
  for (auto& e : entries) {
    check_tuple(e.I, d, n);
    require(std::isfinite(e.b), "coefficients must be finite");
    if (e.b != 0.0) kept.push_back(std::move(e));
  }
  std::sort(kept.begin(), kept.end(),
            [](const auto& a, const auto& b) { return a.I < b.I; });
  for (std::size_t k = 1; k < kept.size(); ++k)
    require(kept[k].I != kept[k - 1].I, "duplicate index tuple");
  std::vector<double> mag;
  mag.reserve(kept.size());
  for (const auto& e : kept) mag.push_back(std::abs(e.b));
  F.entries_ = std::move(kept);
  F.table_ = build_table(std::move(mag), 0.0, 0.0);
  return F;
}

CoefficientField CoefficientField::separable(const std::vector<std::vector<double>>& beta) {
  require(!beta.empty(), "separable field needs at least one row");
  const int d = static_cast<int>(beta.size());
  const std::size_t n = beta[0].size();
  for (const auto& row : beta)
    if (row.size() != n) fail(ErrorCode::DimensionMismatch, "separable rows differ in length");
  if (tuple_count(d, n) > kDenseCap) fail(ErrorCode::TooLarge, "too many tuples to materialize");
  std::vector<CoefficientEntry> entries;
  for_each_tuple(d, n, [&](const std::vector<std::uint32_t>& I) {
    double b = 1.0;
    for (int m = 0; m < d; ++m) b *= beta[m][I[m] - 1];
    entries.push_back({I, b});
  });
  CoefficientField F = dense(d, n, std::move(entries));
  F.beta_ = beta;
  return F;
}

CoefficientField CoefficientField::uniform(int d, std::size_t n) {
  require(d >= 1 && n >= static_cast<std::size_t>(d), "uniform field needs n >= d >= 1");
  if (tuple_count(d, n) > kDenseCap) fail(ErrorCode::TooLarge, "too many tuples to materialize");
  const double b = 1.0 / std::sqrt(tuple_count(d, n));
  std::vector<CoefficientEntry> entries;
  for_each_tuple(d, n, [&](const std::vector<std::uint32_t>& I) { entries.push_back({I, b}); });
  return dense(d, n, std::move(entries));
}

CoefficientField CoefficientField::power_law(int d, double alpha, double C,
                                             std::optional<std::size_t> n,
                                             std::size_t enumeration_target) {
  require(d >= 1, "field dimension must be at least 1");
  require(C > 0.0 && std::isfinite(C), "power-law constant must be positive");
  require(std::isfinite(alpha) && alpha > 0.0, "power-law exponent must be positive");
  if (n) {
    require(*n >= static_cast<std::size_t>(d), "horizon must be at least d");
    if (tuple_count(d, *n) > kDenseCap)
      fail(ErrorCode::TooLarge, "too many tuples to materialize");
    std::vector<CoefficientEntry> entries;
    for_each_tuple(d, *n, [&](const std::vector<std::uint32_t>& I) {
      entries.push_back({I, C * std::pow(sq_norm(I), -alpha / 2.0)});
    });
    CoefficientField F = dense(d, *n, std::move(entries));
    F.rule_ = true;
    F.alpha_ = alpha;
    F.C_ = C;
    return F;
  }
  if (alpha <= d / 2.0)
    fail(ErrorCode::NonSummable, "power-law field with alpha <= d/2 has infinite sum of squares");
  require(enumeration_target >= 16, "enumeration target too small");
  // tuple count below radius R is about omega_d R^d / (d! 2^d)
  double R = std::pow(static_cast<double>(enumeration_target) * std::tgamma(d + 1.0) *
                          std::pow(2.0, d) / unit_ball_volume(d),
                      1.0 / d);
  R = std::max(R, std::sqrt(static_cast<double>(d)) + 2.0);
  std::vector<double> norms2;
  enumerate_norms(d, 0, 1, 0.0, R * R, norms2);
  std::vector<double> mag;
  mag.reserve(norms2.size());
  for (double s : norms2) mag.push_back(C * std::pow(s, -alpha / 2.0));
  norms2.clear();
  norms2.shrink_to_fit();
  const double rest1 = C * power_tail_sum_bound(d, alpha, R);
  const double rest2 = C * C * power_tail_sum_bound(d, 2.0 * alpha, R);
  auto table = build_table(std::move(mag), rest1, rest2);
  table->radius = R;
  table->lambda_beyond = C * std::pow(R, -alpha);
  CoefficientField F;
  F.d_ = d;
  F.rule_ = true;
  F.alpha_ = alpha;
  F.C_ = C;
  F.table_ = std::move(table);
  return F;
}

const std::vector<CoefficientEntry>& CoefficientField::entries() const {
  if (!n_) fail(ErrorCode::TooLarge, "an infinite power-law field has no dense entries");
  return entries_;
}

double CoefficientField::coefficient(std::span<const std::uint32_t> I) const {
  if (!n_) {
    check_tuple(I, d_, std::numeric_limits<std::uint32_t>::max());
    return C_ * std::pow(sq_norm(I), -alpha_ / 2.0);
  }
  check_tuple(I, d_, *n_);
  const std::vector<std::uint32_t> key(I.begin(), I.end());
  auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                             [](const auto& e, const auto& k) { return e.I < k; });
  return (it != entries_.end() && it->I == key) ? it->b : 0.0;
}

double CoefficientField::sum_abs() const { return table_->small_l1(0); }
double CoefficientField::sum_sq() const { return table_->small_l2(0); }
double CoefficientField::sum_abs_remainder() const { return table_->rest_l1; }
double CoefficientField::sum_sq_remainder() const { return table_->rest_l2; }
double CoefficientField::enumeration_radius() const { return table_->radius; }

std::string CoefficientField::describe() const {
  std::ostringstream os;
  if (rule_) os << "power-law |I|^-" << alpha_ << " x " << C_;
  else if (is_separable()) os << "separable";
  else os << "dense";
  os << ", d=" << d_ << ", n=";
  if (n_) os << *n_;
  else os << "inf (enumerated to |I| < " << table_->radius << ")";
  return os.str();
}

// ---------------------------------------------------------------------------
// split measures

SplitProfile split_profile(const CoefficientField& F, double lambda) {
  require(lambda >= 0.0, "split threshold must be nonnegative");
  const MagnitudeTable& t = F.table();
  SplitProfile s;
  s.lambda = lambda;
  s.bounded = F.is_rule() && !F.n();
  if (s.bounded && lambda < t.lambda_beyond) {
    // the large set reaches past the enumerated radius: bound both sides
    const double R = std::pow(lambda / F.rule_constant(), -1.0 / F.alpha());
    const double C = F.rule_constant();
    s.a1 = C * power_tail_sum_bound(F.d(), F.alpha(), R);
    s.c2 = std::sqrt(C * C * power_tail_sum_bound(F.d(), 2.0 * F.alpha(), R));
    s.c1 = t.large_l1(t.size()) + t.rest_l1;
    s.a2 = std::sqrt(t.large_l2(t.size()) + t.rest_l2);
    return s;
  }
  // number of magnitudes strictly above lambda
  const std::size_t k = static_cast<std::size_t>(
      std::partition_point(t.mag.begin(), t.mag.end(), [&](double m) { return m > lambda; }) -
      t.mag.begin());
  s.a1 = t.small_l1(k);
  s.a2 = std::sqrt(t.large_l2(k));
  s.c1 = t.large_l1(k);
  s.c2 = std::sqrt(t.small_l2(k));
  return s;
}

std::vector<SplitPair> split_candidates(const CoefficientField& F, std::size_t max_candidates) {
  const MagnitudeTable& t = F.table();
  const std::size_t N = t.size();
  require(max_candidates >= 4, "need at least four split candidates");
  std::vector<std::size_t> ks;
  if (N + 1 <= max_candidates) {
    // group boundaries: every magnitude strictly below its predecessor
    ks.push_back(0);
    for (std::size_t k = 1; k < N; ++k)
      if (t.mag[k] < t.mag[k - 1]) ks.push_back(k);
    ks.push_back(N);
  } else {
    for (double v : numerics::geometric_grid(1.0, static_cast<double>(N), max_candidates - 1))
      ks.push_back(static_cast<std::size_t>(std::llround(v)));
    ks.push_back(0);
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  }
  std::vector<SplitPair> out;
  for (std::size_t k : ks) {
    double lambda;
    if (k < N) lambda = t.mag[k];
    else if (F.is_rule() && !F.n()) lambda = t.lambda_beyond;
    else lambda = N > 0 ? t.mag[N - 1] / 2.0 : 0.0;
    const double s1 = t.small_l1(k), l2 = std::sqrt(t.large_l2(k));
    const double c1 = t.large_l1(k), c2 = std::sqrt(t.small_l2(k));
    if (std::isfinite(s1)) out.push_back({lambda, s1, l2, false});
    if (std::isfinite(c1)) out.push_back({lambda, c1, c2, true});
  }
  if (out.empty()) fail(ErrorCode::NonSummable, "no split with a finite l1 part");
  return out;
}

// ---------------------------------------------------------------------------
// two-term tails

namespace {

double kprod(const std::vector<double>& K, int d) {
  if (K.empty()) return 1.0;
  if (static_cast<int>(K.size()) != d)
    fail(ErrorCode::DimensionMismatch, "scale vector length differs from field dimension");
  double p = 1.0;
  for (double k : K) {
    require(k > 0.0 && std::isfinite(k), "scales must be positive");
    p *= k;
  }
  return p;
}

// exp(-C2 u^e) for u >= 0, e possibly infinite
double stretched(double u, double e, bool infinite, double C2) {
  if (infinite) return u < 1.0 ? 1.0 : (u == 1.0 ? std::exp(-C2) : 0.0);
  return std::exp(-C2 * std::pow(u, e));
}

TailFunction two_term_tail(const CoefficientField& F, const QVector& qv,
                           const std::vector<double>& K, const SplitTailOptions& opt,
                           const ExponentResult& second) {
  if (qv.d() != F.d()) fail(ErrorCode::DimensionMismatch, "q vector length differs from field dimension");
  require(opt.C1 > 0.0 && opt.C2 > 0.0, "constants must be positive");
  const ExponentResult G = exponent_G(qv);
  const double Kp = kprod(K, F.d());
  const auto pairs = split_candidates(F);
  auto value = [&](double x) {
    if (x <= 0.0) return 1.0;
    double best = kInf;
    for (const auto& s : pairs) {
      const double e1 = s.l1 > 0.0 ? stretched(x / (s.l1 * Kp), G.value, G.infinite, opt.C2) : 0.0;
      const double e2 =
          s.l2 > 0.0 ? stretched(x / (s.l2 * Kp), second.value, second.infinite, opt.C2) : 0.0;
      best = std::min(best, e1 + e2);
      if (best == 0.0) break;
    }
    return std::min(1.0, opt.C1 * best);
  };
  const double scale = Kp * std::max(1e-300, std::sqrt(F.sum_sq()));
  return tabulate_tail(value, scale, opt.tabulation);
}

}  // namespace

TailFunction theorem13_tail(const CoefficientField& F, const QVector& qv,
                            const std::vector<double>& K, const SplitTailOptions& opt) {
  return two_term_tail(F, qv, K, opt, exponent_M(qv));
}

TailFunction theorem14_tail(const CoefficientField& F, const QVector& qv,
                            const std::vector<double>& K, const SplitTailOptions& opt) {
  return two_term_tail(F, qv, K, opt, exponent_Nd(qv));
}

namespace {

// log E|xi|^r <= log int_0^inf r x^{r-1} min(1, 2 T(x)) dx, computed with a
// shift so that large r does not overflow
double log_abs_moment(const TailFunction& T, double r) {
  const double hi = T.compact() ? T.nodes().back() : T.upper_scale() * 4.0;
  auto logf = [&](double x) {
    const double t = std::min(1.0, 2.0 * T(x));
    if (t <= 0.0) return -kInf;
    return std::log(r) + (r - 1.0) * std::log(x) + std::log(t);
  };
  double shift = -kInf;
  for (double x : numerics::geometric_grid(hi * 1e-6, hi, 400)) shift = std::max(shift, logf(x));
  auto f = [&](double x) {
    if (x <= 0.0) return 0.0;
    const double l = logf(x);
    return l == -kInf ? 0.0 : std::exp(l - shift);
  };
  std::vector<double> cuts{0.0};
  for (double x : numerics::geometric_grid(hi * 1e-3, hi, 24)) cuts.push_back(x);
  double acc = 0.0;
  for (std::size_t i = 1; i < cuts.size(); ++i) acc += numerics::integrate(f, cuts[i - 1], cuts[i], 1e-9);
  if (!T.compact()) acc += numerics::integrate(f, hi, kInf, 1e-9);
  return std::log(acc) + shift;
}

// prod_m |xi_m|_{r}: from the moment envelopes when present, otherwise from the tails
double coordinate_moment_product(const FamilyAssumptions& A, double r) {
  double logp = 0.0;
  for (int m = 0; m < A.d; ++m) {
    std::optional<double> mu;
    if (static_cast<int>(A.moments.size()) == A.d && A.moments[m]) mu = (*A.moments[m])(r);
    if (mu) logp += std::log(*mu);
    else logp += log_abs_moment(A.tails[m], r) / r;
  }
  return std::exp(logp);
}

}  // namespace

BoundResult split_pipeline_tail(const CoefficientField& F, const FamilyAssumptions& A) {
  A.validate();
  if (A.d != F.d()) fail(ErrorCode::DimensionMismatch, "assumptions and field differ in dimension");
  const bool indep = A.dependence == Dependence::Independent;
  BoundResult rec = indep ? independent_tail_recursion(A) : martingale_tail_recursion(A);
  const TailFunction R = *rec.tail;
  // Markov over a fixed p-grid: each term is a valid bound on its own
  const auto ps = numerics::geometric_grid(2.0, 64.0, 97);
  std::vector<double> log_b1;
  for (double p : ps) log_b1.push_back(std::log(coordinate_moment_product(A, A.d * p)));
  auto T1 = [&](double y) {
    if (y <= 0.0) return 1.0;
    double best = 0.0;
    const double ly = std::log(y);
    for (std::size_t i = 0; i < ps.size(); ++i) best = std::min(best, ps[i] * (log_b1[i] - ly));
    return std::exp(best);
  };
  const auto pairs = split_candidates(F);
  auto value = [&](double x) {
    if (x <= 0.0) return 1.0;
    double best = 1.0;
    for (const auto& s : pairs) {
      const double e1 = s.l1 > 0.0 ? T1(x / (2.0 * s.l1)) : 0.0;
      if (e1 >= best) continue;
      const double e2 = s.l2 > 0.0 ? R(x / (2.0 * s.l2)) : 0.0;
      best = std::min(best, e1 + e2);
    }
    return best;
  };
  const double scale = std::max(1e-300, std::sqrt(F.sum_sq()) * R.characteristic_scale());
  BoundResult out;
  out.tail = tabulate_tail(value, scale);
  out.provenance = rec.provenance;
  out.provenance.push_back("split Q = Q(A) + Q(B), T(Q, x) <= T(Q(A), x/2) + T(Q(B), x/2)");
  out.provenance.push_back("l1 part: Markov with |Q(A)|_p <= a1 prod_m |xi_m|_{d p}, p in [2, 64]");
  out.provenance.push_back(std::string("l2 part: ") + (indep ? "independent" : "martingale") +
                           " recursion scaled by a2");
  out.provenance.push_back("infimum over " + std::to_string(pairs.size()) + " splits");
  out.metadata["splits"] = static_cast<double>(pairs.size());
  out.metadata["sum_abs"] = F.sum_abs();
  out.metadata["sum_sq"] = F.sum_sq();
  return out;
}

// ---------------------------------------------------------------------------
// moments

SplitPair moment_split_argmin(const CoefficientField& F, double w) {
  require(w >= 0.0 && std::isfinite(w), "moment weight must be finite and nonnegative");
  SplitPair best{};
  double v = kInf;
  for (const auto& s : split_candidates(F)) {
    const double f = s.l1 + s.l2 * w;
    if (f < v) {
      v = f;
      best = s;
    }
  }
  return best;
}

double theorem15_moment(const CoefficientField& F, int d, double p) {
  if (d != F.d()) fail(ErrorCode::DimensionMismatch, "dimension differs from field");
  require(p > 1.0, "moment order must exceed 1");
  const double w = std::pow(p, d) / std::log(p);
  const SplitPair s = moment_split_argmin(F, w);
  return s.l1 + s.l2 * w;
}

double theorem16_moment(const CoefficientField& F, int d, double p) {
  if (d != F.d()) fail(ErrorCode::DimensionMismatch, "dimension differs from field");
  require(p >= 1.0, "moment order must be at least 1");
  const double w = std::pow(p, d);
  const SplitPair s = moment_split_argmin(F, w);
  return s.l1 + s.l2 * w;
}

double theorem15_growth_exponent(const CoefficientField& F, double p_lo, double p_hi,
                                 std::size_t points) {
  require(p_lo > 1.0 && p_hi > p_lo && points >= 2, "invalid p range");
  std::vector<double> lx, ly;
  const int d = F.d();
  for (double p : numerics::geometric_grid(p_lo, p_hi, points)) {
    lx.push_back(d * std::log(p) - std::log(std::log(p)));
    ly.push_back(std::log(theorem15_moment(F, d, p)));
  }
  return d * numerics::fit_line(lx, ly).slope;
}

// ---------------------------------------------------------------------------
// regimes

std::string regime_name(PowerLawRegime r) {
  switch (r) {
    case PowerLawRegime::NonSummable: return "non-summable";
    case PowerLawRegime::Intermediate: return "intermediate";
    case PowerLawRegime::Critical: return "critical";
    case PowerLawRegime::Summable: return "summable";
  }
  return "?";
}

PowerLawClass classify_power_law(int d, double alpha, Exponent q) {
  require(d >= 1 && alpha > 0.0, "need d >= 1 and alpha > 0");
  PowerLawClass c;
  const double G = q.infinite() ? kInf : q.value() / d;
  if (alpha <= d / 2.0) {
    c.regime = PowerLawRegime::NonSummable;
    c.label = "sum b^2 diverges";
    c.moment_growth = kInf;
    c.tail_exponent = 0.0;
  } else if (alpha < d) {
    c.regime = PowerLawRegime::Intermediate;
    c.moment_growth = 2.0 * (d - alpha);
    c.tail_exponent = q.infinite() ? 1.0 / (d - alpha) : q.value() / (q.value() * (d - alpha) + d);
    c.label = "p^{2(d-alpha)}";
  } else if (alpha == d) {
    c.regime = PowerLawRegime::Critical;
    c.moment_growth = 0.0;
    c.tail_exponent = G;
    c.label = "log p";
  } else {
    c.regime = PowerLawRegime::Summable;
    c.moment_growth = 0.0;
    c.tail_exponent = G;
    c.label = "bounded";
  }
  return c;
}

// ---------------------------------------------------------------------------
// normalized sums

NormalizedSum normalized_sum_bounds(const std::vector<std::vector<double>>& sigma2,
                                    const QVector& qv, Dependence dep, BoundKind kind,
                                    const std::vector<double>& p) {
  require(!sigma2.empty(), "variance table is empty");
  if (static_cast<int>(sigma2.size()) != qv.d())
    fail(ErrorCode::DimensionMismatch, "variance table rows differ from q vector length");
  std::vector<std::vector<double>> sigma;
  for (const auto& row : sigma2) {
    std::vector<double> s;
    for (double v : row) {
      require(v > 0.0 && std::isfinite(v), "variances must be positive");
      s.push_back(std::sqrt(v));
    }
    sigma.push_back(std::move(s));
  }
  CoefficientField raw = CoefficientField::separable(sigma);
  const double norm = std::sqrt(raw.sum_sq());
  std::vector<std::vector<double>> beta = sigma;
  for (auto& x : beta[0]) x /= norm;
  NormalizedSum out{CoefficientField::separable(beta), 0.0, {}};
  out.sum_b2 = out.field.sum_sq();
  require(std::abs(out.sum_b2 - 1.0) <= 1e-12, "normalized coefficients leave the unit sphere");
  const std::vector<double> unit(qv.d(), 1.0);
  if (kind == BoundKind::Tail) {
    out.bound = dep == Dependence::Independent ? theorem2_envelope(qv, unit)
                                               : theorem1_envelope(qv, unit);
  } else {
    FamilyAssumptions A = weibull_family(qv, unit, dep);
    A.moments.clear();
    for (const auto& q : qv.q) A.moments.push_back(MomentEnvelope::gq(q));
    out.bound = moment_bound_curve(A, p, dep == Dependence::Independent);
  }
  out.bound.provenance.insert(out.bound.provenance.begin(),
                              "b(I) = prod sigma(i_m, m) / sqrt(sum prod sigma^2), sum b^2 = 1");
  out.bound.metadata["sum_b2"] = out.sum_b2;
  return out;
}

}  // namespace chaos_tails
