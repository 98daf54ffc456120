#include "chaos_tails/monte_carlo_lab.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "chaos_tails/errors.hpp"
#include "chaos_tails/numerics.hpp"

namespace chaos_tails {

using numerics::kInf;

// ---------------------------------------------------------------------------
// random streams

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t key)
    : state_(splitmix64(seed ^ splitmix64(key ^ 0xD1B54A32D192ED03ULL))) {}

std::uint64_t CounterRng::next() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double CounterRng::uniform() {
  return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// families

std::string family_name(FamilyKind k) {
  switch (k) {
    case FamilyKind::Rademacher: return "rademacher";
    case FamilyKind::WeibullSymmetric: return "weibull_symmetric";
    case FamilyKind::ScaledProduct: return "scaled_product";
    case FamilyKind::DependentMartingale: return "dependent_martingale";
  }
  return "?";
}

FamilyKind parse_family(const std::string& name) {
  for (auto k : {FamilyKind::Rademacher, FamilyKind::WeibullSymmetric, FamilyKind::ScaledProduct,
                 FamilyKind::DependentMartingale})
    if (family_name(k) == name) return k;
  fail(ErrorCode::InvalidArgument, "unknown family '" + name + "'");
}

void FamilySpec::validate() const {
  require(d >= 1, "family dimension must be at least 1");
  require(n >= 1, "family length must be at least 1");
  if (!q.empty() && static_cast<int>(q.size()) != d)
    fail(ErrorCode::DimensionMismatch, "need one exponent per coordinate");
  for (double v : q) require(v > 0.0 && std::isfinite(v), "family exponents must be positive");
  require(gain >= 0.0 && gain < 1.0, "dependent gain must lie in [0, 1)");
}

double FamilySpec::q_of(int m) const { return q.empty() ? 2.0 : q[m]; }

namespace {

bool weibull_like(FamilyKind k) {
  return k == FamilyKind::WeibullSymmetric || k == FamilyKind::ScaledProduct;
}

}  // namespace

double FamilySpec::second_moment(int m, std::size_t i) const {
  switch (kind) {
    case FamilyKind::Rademacher: return 1.0;
    case FamilyKind::WeibullSymmetric:
    case FamilyKind::ScaledProduct: return std::tgamma(1.0 + 2.0 / q_of(m));
    case FamilyKind::DependentMartingale: {
      const double c = 1.0 / (1.0 + gain);
      return i <= 1 ? c * c : c * c * (1.0 + gain * gain);
    }
  }
  return 1.0;
}

TailFunction FamilySpec::coordinate_tail(int m) const {
  // P(xi > x) = P(xi < -x) = exp(-x^q)/2 for the Weibull-like families
  if (weibull_like(kind)) return TailFunction::parametric(1.0, 1.0, q_of(m), 0.0);
  return TailFunction::indicator(1.0);
}

MomentEnvelope FamilySpec::coordinate_moments(int m) const {
  if (!weibull_like(kind)) return MomentEnvelope::constant(1.0);
  // |xi|_p = Gamma(1 + p/q)^{1/p} <= C p^{1/q}
  const double qm = q_of(m);
  double C = 0.0;
  for (double p : numerics::geometric_grid(1.0, 4096.0, 2000))
    C = std::max(C, std::exp(std::lgamma(1.0 + p / qm) / p) / std::pow(p, 1.0 / qm));
  return MomentEnvelope::gq(Exponent(qm), C * (1.0 + 1e-9));
}

FamilyAssumptions FamilySpec::assumptions() const {
  validate();
  QVector qv;
  for (int m = 0; m < d; ++m)
    qv.q.push_back(weibull_like(kind) ? Exponent(q_of(m)) : Exponent::infinity());
  const bool indep = kind == FamilyKind::Rademacher || kind == FamilyKind::WeibullSymmetric;
  FamilyAssumptions A = weibull_family(qv, std::vector<double>(d, 1.0),
                                       indep ? Dependence::Independent : Dependence::Martingale);
  for (int m = 0; m < d; ++m) A.moments.emplace_back(coordinate_moments(m));
  return A;
}

void sample_replication(const FamilySpec& spec, std::uint64_t seed, std::uint64_t rep,
                        std::span<double> xi) {
  const std::size_t n = spec.n;
  CounterRng rng(seed, rep);
  for (int m = 0; m < spec.d; ++m) {
    double* out = xi.data() + m * n;
    switch (spec.kind) {
      case FamilyKind::Rademacher:
        for (std::size_t i = 0; i < n; ++i) out[i] = rng.sign();
        break;
      case FamilyKind::WeibullSymmetric: {
        const double inv = 1.0 / spec.q_of(m);
        for (std::size_t i = 0; i < n; ++i) {
          const double s = rng.sign();
          out[i] = s * std::pow(-std::log(rng.uniform()), inv);
        }
        break;
      }
      case FamilyKind::ScaledProduct: {
        const double tau = std::pow(-std::log(rng.uniform()), 1.0 / spec.q_of(m));
        for (std::size_t i = 0; i < n; ++i) out[i] = tau * rng.sign();
        break;
      }
      case FamilyKind::DependentMartingale: {
        const double c = 1.0 / (1.0 + spec.gain);
        double last = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double nu = rng.sign();
          out[i] = nu * c * (1.0 + spec.gain * last);
          last = nu;
        }
        break;
      }
    }
  }
}

unsigned default_workers() {
  if (const char* env = std::getenv("CHAOS_TAILS_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1 && v <= 1024) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  workers = std::max(1u, workers);
  if (workers == 1 || count < 2 * workers) {
    fn(0, count);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk, e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& t : pool) t.join();
}

SampleBatch generate_batch(const FamilySpec& spec, std::size_t replications, std::uint64_t seed,
                           unsigned workers) {
  spec.validate();
  require(replications >= 1, "need at least one replication");
  SampleBatch b{spec, replications, seed, {}};
  const std::size_t w = static_cast<std::size_t>(spec.d) * spec.n;
  b.xi.resize(replications * w);
  parallel_for(replications, workers, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r)
      sample_replication(spec, seed, r, std::span<double>(b.xi.data() + r * w, w));
  });
  return b;
}

std::vector<double> simulate_statistic(
    const FamilySpec& spec, std::size_t replications, std::uint64_t seed, unsigned workers,
    const std::function<double(std::span<const double>)>& statistic) {
  spec.validate();
  require(replications >= 1, "need at least one replication");
  std::vector<double> out(replications);
  const std::size_t w = static_cast<std::size_t>(spec.d) * spec.n;
  parallel_for(replications, workers, [&](std::size_t lo, std::size_t hi) {
    std::vector<double> buf(w);
    for (std::size_t r = lo; r < hi; ++r) {
      sample_replication(spec, seed, r, buf);
      out[r] = statistic(buf);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// statistics

double qd_enumerate(const CoefficientField& F, std::span<const double> xi, std::size_t n) {
  double s = 0.0;
  for (const auto& e : F.entries()) {
    double v = e.b;
    for (std::size_t m = 0; m < e.I.size(); ++m) v *= xi[m * n + e.I[m] - 1];
    s += v;
  }
  return s;
}

double qd_separable(const CoefficientField& F, std::span<const double> xi, std::size_t n) {
  require(F.is_separable(), "field is not separable");
  const auto& beta = F.beta();
  const int d = F.d();
  // S[m](j) = sum over i_1 < ... < i_m <= j of prod beta xi; rolled over j
  std::vector<double> S(d + 1, 0.0);
  S[0] = 1.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (int m = std::min<int>(d, static_cast<int>(j) + 1); m >= 1; --m)
      S[m] += beta[m - 1][j] * xi[(m - 1) * n + j] * S[m - 1];
  }
  return S[d];
}

namespace {

void check_field_batch(const CoefficientField& F, const FamilySpec& spec) {
  if (F.d() != spec.d) fail(ErrorCode::DimensionMismatch, "field and family differ in dimension");
  if (!F.n() || *F.n() != spec.n)
    fail(ErrorCode::DimensionMismatch, "field horizon differs from family length");
}

std::function<double(std::span<const double>)> qd_statistic(const CoefficientField& F,
                                                            std::size_t n, QdEvaluator how) {
  const bool sep = how == QdEvaluator::Separable || (how == QdEvaluator::Auto && F.is_separable());
  if (sep) return [&F, n](std::span<const double> xi) { return qd_separable(F, xi, n); };
  return [&F, n](std::span<const double> xi) { return qd_enumerate(F, xi, n); };
}

}  // namespace

std::vector<double> evaluate_Qd(const CoefficientField& F, const SampleBatch& batch,
                                QdEvaluator how) {
  check_field_batch(F, batch.spec);
  const auto stat = qd_statistic(F, batch.spec.n, how);
  std::vector<double> out(batch.replications);
  for (std::size_t r = 0; r < batch.replications; ++r) out[r] = stat(batch.replication(r));
  return out;
}

std::vector<double> evaluate_R2(const CoefficientField& offdiag, std::span<const double> diag,
                                const SampleBatch& batch) {
  const std::size_t n = batch.spec.n;
  if (offdiag.d() != 2) fail(ErrorCode::DimensionMismatch, "R_2 needs a two-dimensional field");
  if (!offdiag.n() || *offdiag.n() != n || diag.size() != n)
    fail(ErrorCode::DimensionMismatch, "R_2 coefficients differ from family length");
  std::vector<double> out(batch.replications);
  for (std::size_t r = 0; r < batch.replications; ++r) {
    const auto xi = batch.replication(r);  // coordinate 1 occupies xi[0..n)
    double s = 0.0;
    for (const auto& e : offdiag.entries()) s += e.b * xi[e.I[0] - 1] * xi[e.I[1] - 1];
    for (std::size_t i = 0; i < n; ++i)
      s += diag[i] * (xi[i] * xi[i] - batch.spec.second_moment(0, i + 1));
    out[r] = s;
  }
  return out;
}

TailEstimate empirical_tail(std::span<const double> values, std::span<const double> x_grid,
                            double confidence) {
  require(!values.empty(), "no values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  TailEstimate t;
  t.replications = v.size();
  t.confidence = confidence;
  const double N = static_cast<double>(v.size());
  for (double x : x_grid) {
    require(x >= 0.0, "tail grid must be nonnegative");
    const std::size_t above = v.end() - std::upper_bound(v.begin(), v.end(), x);
    const std::size_t below = std::lower_bound(v.begin(), v.end(), -x) - v.begin();
    const std::size_t k = std::max(above, below);
    t.x.push_back(x);
    t.count.push_back(k);
    t.estimate.push_back(k / N);
    t.cp_upper.push_back(numerics::clopper_pearson_upper(k, v.size(), confidence));
  }
  return t;
}

MomentEstimate empirical_moments(std::span<const double> values, std::span<const double> p,
                                 std::size_t resamples, double confidence, std::uint64_t seed) {
  require(!values.empty(), "no values");
  const std::size_t N = values.size();
  MomentEstimate out;
  out.resamples = resamples;
  std::vector<std::vector<double>> pw;
  for (double pp : p) {
    require(pp >= 1.0, "moment order must be at least 1");
    std::vector<double> a(N);
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += (a[i] = std::pow(std::abs(values[i]), pp));
    out.p.push_back(pp);
    out.estimate.push_back(std::pow(s / N, 1.0 / pp));
    out.beyond_horizon.push_back(pp > 4.0 * std::log10(static_cast<double>(N)));
    pw.push_back(std::move(a));
  }
  std::vector<std::vector<double>> boot(p.size(), std::vector<double>(resamples));
  std::vector<std::size_t> idx(N);
  for (std::size_t b = 0; b < resamples; ++b) {
    CounterRng rng(seed, b);
    for (auto& i : idx) i = rng.next() % N;
    for (std::size_t k = 0; k < p.size(); ++k) {
      double s = 0.0;
      for (auto i : idx) s += pw[k][i];
      boot[k][b] = std::pow(s / N, 1.0 / p[k]);
    }
  }
  const double a = (1.0 - confidence) / 2.0;
  for (auto& col : boot) {
    if (col.empty()) {
      out.lower.push_back(out.estimate[out.lower.size()]);
      out.upper.push_back(out.estimate[out.upper.size()]);
      continue;
    }
    std::sort(col.begin(), col.end());
    const auto at = [&](double f) {
      const double pos = f * (col.size() - 1);
      const std::size_t i = static_cast<std::size_t>(pos);
      const double w = pos - i;
      return i + 1 < col.size() ? col[i] * (1 - w) + col[i + 1] * w : col.back();
    };
    out.lower.push_back(at(a));
    out.upper.push_back(at(1.0 - a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// exact oracle

std::vector<double> exact_rademacher_values(const CoefficientField& F) {
  if (!F.n()) fail(ErrorCode::TooLarge, "infinite field has no exact oracle");
  const std::size_t n = *F.n();
  const std::size_t bits = n * F.d();
  if (bits > 24) fail(ErrorCode::TooLarge, "exact oracle limited to n d <= 24 (got " +
                                               std::to_string(bits) + ")");
  const std::size_t total = std::size_t{1} << bits;
  std::vector<double> out(total), xi(bits);
  for (std::size_t s = 0; s < total; ++s) {
    for (std::size_t k = 0; k < bits; ++k) xi[k] = (s >> k) & 1 ? 1.0 : -1.0;
    out[s] = qd_enumerate(F, xi, n);
  }
  return out;
}

std::vector<double> exact_oracle_tail(const CoefficientField& F, std::span<const double> x) {
  std::vector<double> v = exact_rademacher_values(F);
  std::sort(v.begin(), v.end());
  const double N = static_cast<double>(v.size());
  std::vector<double> out;
  for (double t : x) {
    const double above = static_cast<double>(v.end() - std::upper_bound(v.begin(), v.end(), t));
    const double below = static_cast<double>(std::lower_bound(v.begin(), v.end(), -t) - v.begin());
    out.push_back(std::max(above, below) / N);
  }
  return out;
}

double exact_oracle_tail(const CoefficientField& F, int d, std::size_t n, double x) {
  if (F.d() != d) fail(ErrorCode::DimensionMismatch, "field dimension differs from d");
  if (!F.n() || *F.n() != n) fail(ErrorCode::DimensionMismatch, "field horizon differs from n");
  if (n * static_cast<std::size_t>(d) > 24)
    fail(ErrorCode::TooLarge, "exact oracle limited to n d <= 24");
  const double xs[] = {x};
  return exact_oracle_tail(F, xs)[0];
}

double distance_correlation(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 4, "distance correlation needs matching samples");
  const std::size_t N = a.size();
  auto centered = [N](std::span<const double> v) {
    std::vector<double> D(N * N), row(N, 0.0);
    double all = 0.0;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) {
        D[i * N + j] = std::abs(v[i] - v[j]);
        row[i] += D[i * N + j];
      }
    for (auto& r : row) {
      all += r;
      r /= N;
    }
    all /= static_cast<double>(N) * N;
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) D[i * N + j] += all - row[i] - row[j];
    return D;
  };
  const auto A = centered(a), B = centered(b);
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < N * N; ++k) {
    ab += A[k] * B[k];
    aa += A[k] * A[k];
    bb += B[k] * B[k];
  }
  if (aa <= 0.0 || bb <= 0.0) return 0.0;
  return std::sqrt(std::max(0.0, ab) / std::sqrt(aa * bb));
}

// ---------------------------------------------------------------------------
// campaigns

AssumptionCheck check_family(const SampleBatch& batch, const std::vector<TailFunction>& declared) {
  const FamilySpec& s = batch.spec;
  if (static_cast<int>(declared.size()) != s.d)
    fail(ErrorCode::DimensionMismatch, "need one declared envelope per coordinate");
  AssumptionCheck out;
  // two-sided z threshold at family-wise level 0.001 over the 2 d drift tests
  const double tests = 2.0 * s.d;
  double zlo = 0.0, zhi = 10.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (zlo + zhi);
    (std::erfc(mid / std::sqrt(2.0)) > 0.001 / tests ? zlo : zhi) = mid;
  }
  const double zcrit = zhi;
  for (int m = 0; m < s.d; ++m) {
    std::vector<double> v;
    v.reserve(batch.replications * s.n);
    for (std::size_t r = 0; r < batch.replications; ++r)
      for (std::size_t i = 0; i < s.n; ++i) v.push_back(batch.at(r, m, i));
    double top = 0.0;
    for (double x : v) top = std::max(top, std::abs(x));
    if (top <= 0.0) continue;
    std::sort(v.begin(), v.end());
    const double N = static_cast<double>(v.size());
    for (double x : numerics::geometric_grid(top * 1e-3, top, 64)) {
      const std::size_t above = v.end() - std::upper_bound(v.begin(), v.end(), x);
      const std::size_t below = std::lower_bound(v.begin(), v.end(), -x) - v.begin();
      const std::size_t k = std::max(above, below);
      const double lo = numerics::clopper_pearson_lower(k, v.size(), 0.99);
      const double excess = lo - declared[m](x);
      if (excess > out.max_envelope_excess) out.max_envelope_excess = excess;
      if (excess > 0.0) {
        out.ok = false;
        std::ostringstream os;
        os << "coordinate " << m + 1 << ": empirical tail " << k / N << " at x = " << x
           << " exceeds the declared envelope " << declared[m](x);
        out.messages.push_back(os.str());
        break;
      }
    }
    // conditional drift of xi(i) given the sign of xi(i-1)
    for (int sgn : {-1, 1}) {
      double sum = 0.0, sq = 0.0;
      std::size_t cnt = 0;
      for (std::size_t r = 0; r < batch.replications; ++r)
        for (std::size_t i = 1; i < s.n; ++i) {
          const double prev = batch.at(r, m, i - 1);
          if ((prev > 0.0 ? 1 : -1) != sgn) continue;
          const double x = batch.at(r, m, i);
          sum += x;
          sq += x * x;
          ++cnt;
        }
      if (cnt < 2) continue;
      const double mean = sum / cnt;
      const double var = std::max(0.0, sq / cnt - mean * mean);
      const double se = std::sqrt(var / cnt);
      const double z = se > 0.0 ? std::abs(mean) / se : (mean == 0.0 ? 0.0 : kInf);
      out.max_drift_z = std::max(out.max_drift_z, z);
      if (z > zcrit) {
        out.ok = false;
        std::ostringstream os;
        os << "coordinate " << m + 1 << ": conditional drift of " << z
           << " standard errors exceeds " << zcrit;
        out.messages.push_back(os.str());
      }
    }
  }
  return out;
}

namespace {

double quantile(std::vector<double> v, double f) {
  std::sort(v.begin(), v.end());
  const double pos = f * (v.size() - 1);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - i) * (v[i + 1] - v[i]);
}

}  // namespace

VerificationReport verify_campaign(const FamilySpec& spec, const CoefficientField& F,
                                   const BoundResult& bound, const VerifyConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  spec.validate();
  check_field_batch(F, spec);
  require(bound.tail.has_value() || cfg.moment_bound.has_value(), "nothing to verify");
  require(cfg.replications >= 1, "need at least one replication");
  require(cfg.bound_scale > 0.0, "bound scale must be positive");
  VerificationReport rep;
  rep.spec = spec;
  rep.field = F.describe();
  rep.seed = cfg.seed;
  rep.replications = cfg.replications;
  rep.bound_scale = cfg.bound_scale;

  // the family must satisfy the envelopes the bound was built from
  std::vector<TailFunction> declared;
  if (cfg.declared_tails) declared = *cfg.declared_tails;
  else
    for (int m = 0; m < spec.d; ++m) declared.push_back(spec.coordinate_tail(m));
  const SampleBatch probe = generate_batch(
      spec, std::min(cfg.envelope_sample, cfg.replications), splitmix64(cfg.seed ^ 0xA5A5ULL),
      cfg.workers);
  rep.assumptions = check_family(probe, declared);
  if (!rep.assumptions.ok) {
    std::string msg = "family fails its envelope check";
    if (!rep.assumptions.messages.empty()) msg += ": " + rep.assumptions.messages.front();
    fail(ErrorCode::AssumptionViolated, msg);
  }

  const auto values = simulate_statistic(spec, cfg.replications, cfg.seed, cfg.workers,
                                         qd_statistic(F, spec.n, QdEvaluator::Auto));
  const bool oracle = cfg.use_oracle && spec.kind == FamilyKind::Rademacher &&
                      spec.n * static_cast<std::size_t>(spec.d) <= 24;
  bool pass = true;
  if (bound.tail) {
    std::vector<double> grid = cfg.x_grid;
    if (grid.empty()) {
      std::vector<double> a(values.size());
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::abs(values[i]);
      const double x90 = quantile(a, 0.90), x9999 = quantile(a, 0.9999);
      const double lo = x90 > 0.0 ? 0.25 * x90 : 1e-3 * std::max(x9999, 1.0);
      const double hi = std::max(4.0 * x9999, 2.0 * lo);
      grid = numerics::geometric_grid(lo, hi, cfg.grid_points);
    }
    rep.tail = empirical_tail(values, grid, cfg.confidence);
    std::vector<double> exact;
    if (oracle) exact = exact_oracle_tail(F, grid);
    const double floor_band = numerics::clopper_pearson_upper(0, values.size(), cfg.confidence);
    std::size_t unresolved = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double b = std::min(1.0, cfg.bound_scale * (*bound.tail)(grid[k]));
      bool ok = b >= rep.tail.cp_upper[k];
      // no exceedances and a bound under the zero-count band: not resolvable
      if (!ok && rep.tail.count[k] == 0 && b < floor_band) {
        ok = true;
        ++unresolved;
      }
      if (oracle) {
        rep.oracle.emplace_back(exact[k]);
        ok = ok && b >= exact[k] - 1e-12;
      } else {
        rep.oracle.emplace_back(std::nullopt);
      }
      rep.bound.push_back(b);
      rep.verdict.push_back(ok);
      pass = pass && ok;
    }
    if (unresolved)
      rep.notes.push_back(std::to_string(unresolved) +
                          " grid points below the zero-count band were not resolvable");
  }
  if (cfg.moment_bound && !cfg.moment_p.empty()) {
    rep.moments = empirical_moments(values, cfg.moment_p, cfg.bootstrap, cfg.confidence,
                                    splitmix64(cfg.seed ^ 0x5EEDULL));
    for (std::size_t k = 0; k < cfg.moment_p.size(); ++k) {
      const double b = cfg.bound_scale * (*cfg.moment_bound)(cfg.moment_p[k]);
      const bool ok = b >= rep.moments.upper[k];
      rep.moment_bound.push_back(b);
      rep.moment_verdict.push_back(ok);
      pass = pass && ok;
      if (rep.moments.beyond_horizon[k])
        rep.notes.push_back("p = " + std::to_string(cfg.moment_p[k]) +
                            " exceeds the reliable moment horizon");
    }
  }
  rep.pass = pass;
  rep.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::string report_csv(const VerificationReport& r) {
  std::string out = "x,empirical,cp_upper,bound,verdict\n";
  char buf[160];
  for (std::size_t k = 0; k < r.tail.x.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%s\n", r.tail.x[k],
                  r.tail.estimate[k], r.tail.cp_upper[k], r.bound[k],
                  r.verdict[k] ? "PASS" : "FAIL");
    out += buf;
  }
  return out;
}

ExponentFit fit_tail_exponent(std::span<const double> x, std::span<const double> t) {
  require(x.size() == t.size() && x.size() >= 3, "exponent fit needs three points");
  std::vector<double> lx, v;
  for (std::size_t k = 0; k < x.size(); ++k) {
    require(x[k] > 0.0 && t[k] > 0.0 && t[k] < 1.0, "exponent fit needs 0 < t < 1 and x > 0");
    lx.push_back(std::log(x[k]));
    v.push_back(-std::log(t[k]));
  }
  ExponentFit out;
  {
    std::vector<double> ly;
    for (double a : v) ly.push_back(std::log(a));
    out.raw_slope = numerics::fit_line(lx, ly).slope;
  }
  const double vmin = *std::min_element(v.begin(), v.end());
  double best = kInf;
  std::vector<double> ly(v.size());
  for (int j = 0; j <= 800; ++j) {
    const double c = vmin - 0.01 - (800 - j) * 0.01;  // c in [vmin - 8.01, vmin - 0.01]
    for (std::size_t k = 0; k < v.size(); ++k) ly[k] = std::log(v[k] - c);
    const auto f = numerics::fit_line(lx, ly);
    double res = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double e = c + std::exp(f.intercept + f.slope * lx[k]) - v[k];
      res += e * e;
    }
    if (res < best) {
      best = res;
      out.slope = f.slope;
      out.offset = c;
    }
  }
  return out;
}

LowerEnvelopeReport lower_envelope_probe(int d, Exponent q, const std::vector<std::size_t>& n_list,
                                         const std::vector<double>& x_grid,
                                         std::size_t replications, std::uint64_t seed,
                                         unsigned workers, std::size_t min_count,
                                         double tail_max) {
  require(d >= 1, "dimension must be at least 1");
  require(!n_list.empty() && !x_grid.empty(), "need run lengths and a grid");
  LowerEnvelopeReport rep;
  rep.d = d;
  rep.q = q;
  rep.predicted = q.capped(2.0) / d;
  for (std::size_t n : n_list) {
    require(n >= 1, "run length must be positive");
    std::vector<double> values(replications);
    const std::uint64_t run_seed = splitmix64(seed ^ n);
    parallel_for(replications, workers, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t r = lo; r < hi; ++r) {
        CounterRng rng(run_seed, r);
        double prod = 1.0;
        for (int m = 0; m < d; ++m) {
          if (q.infinite()) {
            // normalized Rademacher sum: 2 (number of + signs) - n over sqrt n
            std::size_t plus = 0, left = n;
            while (left >= 64) {
              plus += std::popcount(rng.next());
              left -= 64;
            }
            if (left) plus += std::popcount(rng.next() >> (64 - left));
            prod *= (2.0 * plus - static_cast<double>(n)) / std::sqrt(static_cast<double>(n));
          } else {
            const double s = rng.sign();
            prod *= s * std::pow(-std::log(rng.uniform()), 1.0 / q.value());
          }
        }
        values[r] = prod;
      }
    });
    LowerEnvelopeRun run;
    run.n = n;
    run.tail = empirical_tail(values, x_grid, 0.99);
    std::vector<double> xs, ts;
    for (std::size_t k = 0; k < x_grid.size(); ++k) {
      const double t = run.tail.estimate[k];
      if (x_grid[k] <= 0.0 || run.tail.count[k] < min_count || t > tail_max || t >= 1.0) continue;
      xs.push_back(x_grid[k]);
      ts.push_back(t);
    }
    run.fit_points = xs.size();
    if (xs.size() >= 3) {
      const ExponentFit f = fit_tail_exponent(xs, ts);
      run.slope = f.slope;
      run.log_prefactor = f.offset;
      run.raw_slope = f.raw_slope;
    }
    rep.runs.push_back(std::move(run));
  }
  return rep;
}

}  // namespace chaos_tails
