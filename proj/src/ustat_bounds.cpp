#include "chaos_tails/ustat_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "chaos_tails/errors.hpp"
#include "chaos_tails/numerics.hpp"

namespace chaos_tails {

namespace {

std::size_t ipow(std::size_t m, int d) {
  std::size_t r = 1;
  for (int i = 0; i < d; ++i) r *= m;
  return r;
}

// digits of a flat index, first argument most significant
void unflatten(std::size_t flat, std::size_t m, int d, std::vector<std::size_t>& out) {
  out.assign(static_cast<std::size_t>(d), 0);
  for (int i = d - 1; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = flat % m;
    flat /= m;
  }
}

std::size_t flatten(std::span<const std::size_t> idx, std::size_t m) {
  std::size_t f = 0;
  for (std::size_t v : idx) f = f * m + v;
  return f;
}

// calls f(indices) for every increasing k-subset of {0..n-1}
template <class F>
void for_each_subset(std::size_t n, std::size_t k, F&& f) {
  std::vector<std::size_t> c(k);
  std::iota(c.begin(), c.end(), 0);
  if (k > n) return;
  while (true) {
    f(std::span<const std::size_t>(c));
    std::size_t i = k;
    while (i > 0 && c[i - 1] == n - k + i - 1) --i;
    if (i == 0) return;
    ++c[i - 1];
    for (std::size_t j = i; j < k; ++j) c[j] = c[j - 1] + 1;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// kernels

FiniteKernel::FiniteKernel(std::vector<double> atoms, std::vector<double> probs, int d,
                           std::vector<double> phi)
    : atoms_(std::move(atoms)), probs_(std::move(probs)), phi_(std::move(phi)), d_(d) {
  require(d_ >= 0, "kernel dimension must be nonnegative");
  require(!atoms_.empty(), "kernel support must be nonempty");
  if (atoms_.size() != probs_.size())
    fail(ErrorCode::DimensionMismatch, "support atoms and probabilities differ in length");
  double total = 0.0;
  for (double p : probs_) {
    require(p > 0.0, "support probabilities must be positive");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-12, "support probabilities must sum to 1");
  const std::size_t m = atoms_.size();
  if (phi_.size() != ipow(m, d_))
    fail(ErrorCode::DimensionMismatch, "kernel table must have m^d entries");
  for (double v : phi_) require(std::isfinite(v), "kernel values must be finite");
  const double tol = 1e-12 * (1.0 + max_abs());
  std::vector<std::size_t> idx;
  for (std::size_t f = 0; f < phi_.size(); ++f) {
    unflatten(f, m, d_, idx);
    std::sort(idx.begin(), idx.end());
    require(std::abs(phi_[f] - phi_[flatten(idx, m)]) <= tol, "kernel must be symmetric");
  }
}

double FiniteKernel::operator()(std::span<const std::size_t> idx) const {
  require(static_cast<int>(idx.size()) == d_, "kernel arity mismatch");
  return phi_[flatten(idx, atoms_.size())];
}

namespace {

// product-measure weight of a flat index
double weight(const FiniteKernel& K, std::size_t flat) {
  const std::size_t m = K.support_size();
  double w = 1.0;
  for (int i = 0; i < K.d(); ++i) {
    w *= K.probs()[flat % m];
    flat /= m;
  }
  return w;
}

}  // namespace

double FiniteKernel::mean() const {
  double s = 0.0;
  for (std::size_t f = 0; f < phi_.size(); ++f) s += weight(*this, f) * phi_[f];
  return s;
}

double FiniteKernel::variance() const {
  const double mu = mean();
  double s = 0.0;
  for (std::size_t f = 0; f < phi_.size(); ++f) s += weight(*this, f) * (phi_[f] - mu) * (phi_[f] - mu);
  return s;
}

double FiniteKernel::lp_norm(double p) const {
  require(p >= 1.0, "norm order must be at least 1");
  const double a = max_abs();
  if (a == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t f = 0; f < phi_.size(); ++f) s += weight(*this, f) * std::pow(std::abs(phi_[f]) / a, p);
  return a * std::pow(s, 1.0 / p);
}

double FiniteKernel::max_abs() const {
  double a = 0.0;
  for (double v : phi_) a = std::max(a, std::abs(v));
  return a;
}

FiniteKernel FiniteKernel::centered() const {
  const double mu = mean();
  std::vector<double> v = phi_;
  for (double& x : v) x -= mu;
  return FiniteKernel(atoms_, probs_, d_, std::move(v));
}

FiniteKernel FiniteKernel::scaled(double c) const {
  std::vector<double> v = phi_;
  for (double& x : v) x *= c;
  return FiniteKernel(atoms_, probs_, d_, std::move(v));
}

FiniteKernel FiniteKernel::slice_last(std::size_t z) const {
  require(d_ >= 1, "cannot slice a constant kernel");
  require(z < atoms_.size(), "slice atom out of range");
  const std::size_t m = atoms_.size();
  std::vector<double> v(phi_.size() / m);
  for (std::size_t f = 0; f < v.size(); ++f) v[f] = phi_[f * m + z];
  return FiniteKernel(atoms_, probs_, d_ - 1, std::move(v));
}

void FiniteKernel::distribution(std::vector<double>& values, std::vector<double>& probs) const {
  std::map<double, double> mass;
  for (std::size_t f = 0; f < phi_.size(); ++f) mass[phi_[f]] += weight(*this, f);
  values.clear();
  probs.clear();
  for (auto& [v, p] : mass) {
    values.push_back(v);
    probs.push_back(p);
  }
}

// ---------------------------------------------------------------------------
// projections

FiniteKernel conditional_mean(const FiniteKernel& K, int j) {
  require(j >= 0 && j <= K.d(), "conditional mean order out of range");
  const std::size_t m = K.support_size();
  std::vector<double> cur = K.values();
  for (int level = K.d(); level > j; --level) {
    std::vector<double> next(cur.size() / m, 0.0);
    for (std::size_t f = 0; f < next.size(); ++f)
      for (std::size_t y = 0; y < m; ++y) next[f] += K.probs()[y] * cur[f * m + y];
    cur.swap(next);
  }
  return FiniteKernel(K.atoms(), K.probs(), j, std::move(cur));
}

FiniteKernel hoeffding_project(const FiniteKernel& K, int k) {
  require(k >= 1 && k <= K.d(), "projection order must lie in [1, d]");
  const std::size_t m = K.support_size();
  std::vector<FiniteKernel> h;
  for (int j = 0; j <= k; ++j) h.push_back(conditional_mean(K, j));
  std::vector<double> g(ipow(m, k), 0.0);
  std::vector<std::size_t> idx, sub;
  for (std::size_t f = 0; f < g.size(); ++f) {
    unflatten(f, m, k, idx);
    double s = 0.0;
    for (unsigned mask = 0; mask < (1u << k); ++mask) {
      sub.clear();
      for (int l = 0; l < k; ++l)
        if (mask & (1u << l)) sub.push_back(idx[static_cast<std::size_t>(l)]);
      const double sign = ((k - static_cast<int>(sub.size())) % 2 == 0) ? 1.0 : -1.0;
      s += sign * h[sub.size()].at_flat(flatten(sub, m));
    }
    g[f] = s;
  }
  return FiniteKernel(K.atoms(), K.probs(), k, std::move(g));
}

double degeneracy_defect(const FiniteKernel& g) {
  if (g.d() == 0) return std::abs(g.at_flat(0));
  const std::size_t m = g.support_size();
  double worst = 0.0;
  for (std::size_t f = 0; f < g.values().size() / m; ++f) {
    double s = 0.0;
    for (std::size_t y = 0; y < m; ++y) s += g.probs()[y] * g.at_flat(f * m + y);
    worst = std::max(worst, std::abs(s));
  }
  return worst;
}

HoeffdingDecomposition hoeffding_decompose(const FiniteKernel& K, double zero_tol) {
  require(K.d() >= 1, "kernel dimension must be at least 1");
  HoeffdingDecomposition H;
  H.d = K.d();
  H.mean = K.mean();
  const double scale = std::max(K.max_abs(), 1e-300);
  for (int k = 1; k <= K.d(); ++k) {
    H.g.push_back(hoeffding_project(K, k));
    H.weights.push_back(numerics::binomial(K.d(), k));
    const FiniteKernel& g = H.g.back();
    double m2 = 0.0;
    for (std::size_t f = 0; f < g.values().size(); ++f) m2 += weight(g, f) * g.at_flat(f) * g.at_flat(f);
    H.second_moments.push_back(m2);
    if (H.rank == 0 && g.max_abs() > zero_tol * scale) H.rank = k;
  }
  return H;
}

int detect_rank(const FiniteKernel& K, double zero_tol) {
  const HoeffdingDecomposition H = hoeffding_decompose(K, zero_tol);
  if (H.rank == 0) fail(ErrorCode::AllProjectionsZero, "kernel is constant: all projections vanish");
  return H.rank;
}

FiniteKernel strip_first_order(const FiniteKernel& K) {
  const FiniteKernel g1 = hoeffding_project(K, 1);
  const double mu = K.mean();
  const std::size_t m = K.support_size();
  std::vector<double> v = K.values();
  std::vector<std::size_t> idx;
  for (std::size_t f = 0; f < v.size(); ++f) {
    unflatten(f, m, K.d(), idx);
    v[f] -= mu;
    for (std::size_t a : idx) v[f] -= g1.at_flat(a);
  }
  return FiniteKernel(K.atoms(), K.probs(), K.d(), std::move(v));
}

// ---------------------------------------------------------------------------
// statistics

namespace {

double subset_average(const FiniteKernel& K, std::span<const std::size_t> sample) {
  const std::size_t n = sample.size(), k = static_cast<std::size_t>(K.d());
  double s = 0.0;
  std::vector<std::size_t> idx(k);
  for_each_subset(n, k, [&](std::span<const std::size_t> c) {
    for (std::size_t i = 0; i < k; ++i) idx[i] = sample[c[i]];
    s += K(idx);
  });
  return s / numerics::binomial(static_cast<int>(n), static_cast<int>(k));
}

}  // namespace

double ustat_evaluate(const FiniteKernel& K, std::span<const std::size_t> sample) {
  require(sample.size() > static_cast<std::size_t>(K.d()), "need more sample points than the kernel dimension");
  for (std::size_t a : sample) require(a < K.support_size(), "sample atom out of range");
  return subset_average(K, sample);
}

double ustat_reassemble(const HoeffdingDecomposition& H, std::span<const std::size_t> sample) {
  require(sample.size() > static_cast<std::size_t>(H.d), "need more sample points than the kernel dimension");
  double u = H.mean;
  for (int k = 1; k <= H.d; ++k) u += H.weights[k - 1] * subset_average(H.g[k - 1], sample);
  return u;
}

double ustat_variance(const HoeffdingDecomposition& H, std::size_t n) {
  require(n > static_cast<std::size_t>(H.d), "need n > d");
  double v = 0.0;
  for (int k = 1; k <= H.d; ++k)
    v += H.weights[k - 1] * H.weights[k - 1] * H.second_moments[k - 1] /
         numerics::binomial(static_cast<int>(n), k);
  return v;
}

double ustat_moment_bound(const FiniteKernel& K, double p, double C) {
  require(p >= 2.0, "moment order must be at least 2");
  require(C > 0.0, "constant must be positive");
  return std::pow(C, K.d()) * std::pow(p, K.d()) * K.lp_norm(p) / std::log(p);
}

UstatParametric ustat_tail_parametric(int d, Exponent q, double r, double Kscale) {
  require(d >= 1, "dimension must be at least 1");
  require(Kscale > 0.0, "scale must be positive");
  UstatParametric out;
  if (q.infinite()) {
    // q/(qd+1) -> 1/d and -(r-1)q/(qd+1) -> -(r-1)/d
    out.exponent = 1.0 / d;
    out.log_power = -(r - 1.0) / d;
  } else {
    const double qq = q.value();
    out.exponent = qq / (qq * d + 1.0);
    out.log_power = -(r - 1.0) * qq / (qq * d + 1.0);
  }
  const ParametricTail p{1.0, Kscale, out.exponent, out.log_power};
  if (p.rho >= -p.q * p.q) {
    out.tail = TailFunction::parametric(p);
  } else {
    // the formula is not monotone near 0: use sup_{y >= x} of it
    auto raw = [&](double x) {
      const double z = x / Kscale;
      if (z <= 0.0) return 1.0;
      return std::min(1.0, std::exp(-std::pow(z, p.q) * std::pow(std::log(std::exp(p.q) + z), p.rho)));
    };
    const TailFunction probe = tabulate_on(raw, numerics::log1p_grid(Kscale * 1e6, 2048));
    std::vector<double> xs(probe.nodes().begin(), probe.nodes().end());
    std::vector<double> ts(xs.size());
    double run = 0.0;
    for (std::size_t i = xs.size(); i-- > 0;) {
      run = std::max(run, raw(xs[i]));
      ts[i] = run;
    }
    ts[0] = 1.0;
    out.tail = TailFunction::grid(std::move(xs), std::move(ts));
  }
  return out;
}

// ---------------------------------------------------------------------------
// slice recursion

namespace {

struct SliceCache {
  std::map<std::vector<std::pair<double, double>>, TailFunction> leaves;
};

std::optional<TailFunction> slice_bound(const FiniteKernel& g, SliceCache& cache, double zero_tol) {
  if (g.max_abs() <= zero_tol) return std::nullopt;
  if (g.d() == 1) {
    std::vector<double> v, p;
    g.distribution(v, p);
    // the tail and phi only see |value| and the sign-symmetric envelope
    std::vector<std::pair<double, double>> key;
    for (std::size_t i = 0; i < v.size(); ++i) key.emplace_back(v[i], p[i]);
    std::vector<std::pair<double, double>> flipped;
    for (auto [a, b] : key) flipped.emplace_back(-a, b);
    std::sort(flipped.begin(), flipped.end());
    if (flipped < key) key = flipped;
    auto it = cache.leaves.find(key);
    if (it != cache.leaves.end()) return it->second;
    const TailFunction T = discrete_tail(v, p);
    const TailFunction L = cramer_refine_Wbar(T, CramerProfile::from_distribution(v, p));
    cache.leaves.emplace(key, L);
    return L;
  }
  std::vector<std::pair<double, TailFunction>> parts;
  for (std::size_t z = 0; z < g.support_size(); ++z) {
    auto L = slice_bound(g.slice_last(z), cache, zero_tol);
    if (L) parts.emplace_back(g.probs()[z], *L);
  }
  if (parts.empty()) return std::nullopt;
  // a full-weight mixture of one tail is that tail
  double mass = 0.0;
  bool same = true;
  for (auto& [w, L] : parts) {
    mass += w;
    same = same && !L.is_parametric() && L.as_grid().x == parts[0].second.as_grid().x &&
           L.as_grid().t == parts[0].second.as_grid().t;
  }
  if (same && std::abs(mass - 1.0) <= 1e-12) return truncation_operator_W(parts[0].second);
  double scale = 0.0;
  for (auto& [w, L] : parts) scale = std::max(scale, L.characteristic_scale());
  auto mixture = [&](double x) {
    double s = 0.0;
    for (auto& [w, L] : parts) s += w * L(x);
    return s;
  };
  return truncation_operator_W(tabulate_tail(mixture, scale));
}

}  // namespace

std::optional<TailFunction> ustat_slice_bound(const FiniteKernel& g) {
  SliceCache cache;
  return slice_bound(g, cache, 1e-12 * (1.0 + g.max_abs()));
}

BoundResult ustat_tail_recursion(const FiniteKernel& K) {
  const HoeffdingDecomposition H = hoeffding_decompose(K);
  if (H.rank == 0) fail(ErrorCode::AllProjectionsZero, "kernel is constant: all projections vanish");
  const int d = H.d, r = H.rank;
  BoundResult out;
  out.metadata["d"] = d;
  out.metadata["rank"] = r;
  SliceCache cache;
  const double zero_tol = 1e-12 * (1.0 + K.max_abs());
  std::vector<std::pair<double, TailFunction>> terms;  // (argument scale, L_k)
  for (int k = r; k <= d; ++k) {
    const double sigma = std::sqrt(H.second_moments[k - 1]);
    out.metadata["sigma_" + std::to_string(k)] = sigma;
    auto L = slice_bound(H.g[k - 1], cache, zero_tol);
    if (!L) {
      out.notes.push_back("g_" + std::to_string(k) + " vanishes");
      continue;
    }
    const double c = sigma * H.weights[k - 1] * ustat_scale_t(d, k, r);
    terms.emplace_back(c, *L);
    out.provenance.push_back("L_" + std::to_string(k) + " from " + std::to_string(k - 1) +
                             " slice levels, Wbar at the base; evaluated at " +
                             std::to_string(c) + " x");
  }
  double scale = 0.0;
  for (auto& [c, L] : terms) scale = std::max(scale, L.characteristic_scale() / c);
  auto total = [&](double x) {
    double s = 0.0;
    for (auto& [c, L] : terms) s += L(c * x);
    return std::min(1.0, s);
  };
  out.tail = tabulate_tail(total, scale);
  out.provenance.push_back("union over k >= r with t(d,k,r) splitting");
  out.notes.push_back("tail of U(n)/sqrt(D U(n)) uniformly in n > d");
  return out;
}

}  // namespace chaos_tails
