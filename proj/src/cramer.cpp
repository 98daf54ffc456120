#include <algorithm>
#include <cmath>
#include <memory>

#include "chaos_tails/errors.hpp"
#include "chaos_tails/numerics.hpp"
#include "chaos_tails/tail_algebra.hpp"

namespace chaos_tails {

using numerics::kInf;

CramerProfile::CramerProfile() = default;

CramerProfile::CramerProfile(Fn phi, double lambda_max, std::string label)
    : phi_(std::move(phi)), lambda_max_(lambda_max), label_(std::move(label)) {
  require(lambda_max >= 0.0, "cramer profile: lambda_max must be nonnegative");
}

CramerProfile CramerProfile::none() { return CramerProfile(); }

CramerProfile CramerProfile::quadratic(double sigma) {
  require(sigma > 0.0, "quadratic profile: sigma must be positive");
  return CramerProfile([s2 = sigma * sigma](double l) { return 0.5 * s2 * l * l; }, kInf,
                       "quadratic");
}

CramerProfile CramerProfile::log_cosh(double scale) {
  require(scale > 0.0, "log_cosh profile: scale must be positive");
  return CramerProfile([scale](double l) { return numerics::log_cosh(scale * l); }, kInf,
                       "log_cosh");
}

CramerProfile CramerProfile::power(double q) {
  require(q > 1.0, "power profile: need q > 1");
  return CramerProfile(
      [q](double l) {
        if (l <= 1.0) return 0.5 * l * l;
        return std::pow(l, q) / q + 0.5 - 1.0 / q;
      },
      kInf, "power");
}

CramerProfile CramerProfile::from_grid(std::vector<double> lambda, std::vector<double> phi) {
  require(lambda.size() >= 2 && lambda.size() == phi.size(), "grid profile: need >= 2 points");
  require(lambda[0] == 0.0 && phi[0] == 0.0, "grid profile: must start at (0, 0)");
  for (std::size_t i = 1; i < lambda.size(); ++i)
    require(lambda[i] > lambda[i - 1] && phi[i] >= phi[i - 1],
            "grid profile: lambda increasing, phi nondecreasing");
  const double lmax = lambda.back();
  auto g = std::make_shared<FunctionGrid>(FunctionGrid{std::move(lambda), std::move(phi)});
  return CramerProfile([g](double l) { return (*g)(l); }, lmax, "grid");
}

CramerProfile CramerProfile::from_distribution(std::vector<double> values,
                                               std::vector<double> probs) {
  require(!values.empty() && values.size() == probs.size(), "distribution profile: size mismatch");
  double vmax = 0.0;
  for (double v : values) vmax = std::max(vmax, std::abs(v));
  auto fn = [values = std::move(values), probs = std::move(probs), vmax](double l) {
    auto one_side = [&](double sgn) {
      if (l * vmax < 1.0) {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
          s += probs[i] * std::expm1(sgn * l * values[i]);
        return std::log1p(s);
      }
      double m = -kInf;
      for (double v : values) m = std::max(m, sgn * l * v);
      double s = 0.0;
      for (std::size_t i = 0; i < values.size(); ++i)
        s += probs[i] * std::exp(sgn * l * values[i] - m);
      return m + std::log(s);
    };
    return std::max({one_side(1.0), one_side(-1.0), 0.0});
  };
  return CramerProfile(std::move(fn), kInf, "distribution");
}

double CramerProfile::phi(double lambda) const {
  const double l = std::abs(lambda);
  if (l == 0.0) return 0.0;
  if (degenerate() || l > lambda_max_) return kInf;
  return phi_(l);
}

double FunctionGrid::operator()(double v) const {
  if (x.empty()) return kInf;
  if (v <= x.front()) return y.front();
  if (v > x.back()) return kInf;
  const auto it = std::lower_bound(x.begin(), x.end(), v);
  const std::size_t j = static_cast<std::size_t>(it - x.begin());
  if (x[j] == v) return y[j];
  const double w = (v - x[j - 1]) / (x[j] - x[j - 1]);
  return y[j - 1] + w * (y[j] - y[j - 1]);
}

namespace {

const std::vector<double>& chi_counts() {
  static const std::vector<double> counts = [] {
    std::vector<double> n;
    for (int i = 1; i <= 64; ++i) n.push_back(i);
    for (double v = 64.0 * std::sqrt(2.0); v <= std::ldexp(1.0, 40); v *= std::sqrt(2.0))
      n.push_back(std::floor(v));
    n.push_back(std::ldexp(1.0, 40));
    return n;
  }();
  return counts;
}

}  // namespace

double chi_value(const CramerProfile& C, double lambda) {
  const double l = std::abs(lambda);
  if (l == 0.0) return 0.0;
  if (C.degenerate()) return kInf;
  const auto& ns = chi_counts();
  double best = 0.0;
  std::vector<double> vals(ns.size());
  for (std::size_t k = 0; k < ns.size(); ++k) {
    const double n = ns[k];
    vals[k] = n * C.phi(l / std::sqrt(n));
    if (std::isinf(vals[k]) && k == 0) return kInf;
    best = std::max(best, vals[k]);
  }
  // still growing at the largest n by a visible margin: no finite supremum
  const double last = vals.back(), earlier = vals[vals.size() - 9];
  if (last > 1.01 * earlier && last >= best)
    fail(ErrorCode::Unbounded, "chi: n phi(lambda/sqrt n) grows without bound (phi not centered?)");
  return best;
}

FunctionGrid chi_from_phi(const CramerProfile& C, std::span<const double> lambda) {
  FunctionGrid g;
  g.x.assign(lambda.begin(), lambda.end());
  g.y.reserve(lambda.size());
  for (double l : lambda) g.y.push_back(chi_value(C, l));
  return g;
}

double conjugate_at(const std::function<double(double)>& chi, double x, double lambda_cap) {
  if (!(x > 0.0)) return 0.0;
  auto h = [&](double l) {
    const double c = chi(l);
    return std::isfinite(c) ? l * x - c : -kInf;
  };
  double l = 1.0;
  while (!(h(l) > -kInf) && l > 1e-300) l *= 0.5;
  if (!(h(l) > -kInf)) return 0.0;
  for (int i = 0; i < 2000 && 2.0 * l <= lambda_cap && h(2.0 * l) > h(l); ++i) l *= 2.0;
  for (int i = 0; i < 2000 && l > 1e-300 && h(0.5 * l) >= h(l); ++i) l *= 0.5;
  const double hi = std::min(2.0 * l, lambda_cap);
  const auto m = numerics::golden_section([&](double u) { return -h(std::exp(u)); },
                                          std::log(0.5 * l), std::log(hi), 1e-10);
  return std::max({0.0, -m.value, h(l)});
}

FunctionGrid young_fenchel(const std::function<double(double)>& chi,
                           std::span<const double> lambda_grid, std::span<const double> x_grid) {
  require(!lambda_grid.empty(), "young_fenchel: empty lambda grid");
  std::vector<double> cv(lambda_grid.size());
  for (std::size_t j = 0; j < lambda_grid.size(); ++j) cv[j] = chi(lambda_grid[j]);
  FunctionGrid out;
  out.x.assign(x_grid.begin(), x_grid.end());
  out.y.reserve(x_grid.size());
  for (double x : x_grid) {
    double best = 0.0;
    std::size_t arg = 0;
    bool found = false;
    for (std::size_t j = 0; j < lambda_grid.size(); ++j) {
      if (!std::isfinite(cv[j])) continue;
      const double v = lambda_grid[j] * x - cv[j];
      if (!found || v > best) {
        best = v;
        arg = j;
        found = true;
      }
    }
    if (found && x > 0.0) {
      const double a = lambda_grid[arg > 0 ? arg - 1 : 0];
      const double b = lambda_grid[std::min(arg + 1, lambda_grid.size() - 1)];
      if (b > a) {
        auto neg = [&](double l) {
          const double c = chi(l);
          return std::isfinite(c) ? c - l * x : kInf;
        };
        const auto m = numerics::golden_section(neg, a, b, 1e-12 * std::max(1.0, b));
        best = std::max(best, -m.value);
      }
    }
    out.y.push_back(std::max(0.0, found ? best : 0.0));
  }
  return out;
}

FunctionGrid young_fenchel(const FunctionGrid& chi, std::span<const double> x_grid) {
  FunctionGrid out;
  out.x.assign(x_grid.begin(), x_grid.end());
  for (double x : x_grid) {
    double best = 0.0;
    for (std::size_t j = 0; j < chi.x.size(); ++j)
      if (std::isfinite(chi.y[j])) best = std::max(best, chi.x[j] * x - chi.y[j]);
    out.y.push_back(best);
  }
  return out;
}

namespace {

/// chi tabulated on a log grid, conjugated by scan plus golden refinement.
class ConjugateTable {
 public:
  explicit ConjugateTable(const CramerProfile& C) : C_(C) {
    const double lmax = C.lambda_max();
    double top;
    if (std::isfinite(lmax)) {
      top = lmax;
    } else {
      top = 1.0;
      while (chi_value(C, top) < 200.0 && top < 1e18) top *= 2.0;
    }
    lambda_ = numerics::geometric_grid(top * 1e-9, top, 1024);
    lambda_.insert(lambda_.begin(), 0.0);
    chi_.resize(lambda_.size());
    for (std::size_t j = 0; j < lambda_.size(); ++j) chi_[j] = chi_value(C, lambda_[j]);
  }

  double operator()(double x) const {
    if (!(x > 0.0)) return 0.0;
    double best = 0.0;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < lambda_.size(); ++j) {
      if (!std::isfinite(chi_[j])) break;
      const double v = lambda_[j] * x - chi_[j];
      if (v > best) {
        best = v;
        arg = j;
      }
    }
    if (arg == 0) return best;
    const double a = lambda_[arg - 1];
    const double b = arg + 1 < lambda_.size() ? lambda_[arg + 1] : lambda_[arg];
    if (b > a) {
      auto neg = [&](double l) {
        const double c = chi_value(C_, l);
        return std::isfinite(c) ? c - l * x : kInf;
      };
      const auto m = numerics::golden_section(neg, a, b, 1e-9 * b, 80);
      best = std::max(best, -m.value);
    }
    return best;
  }

 private:
  const CramerProfile& C_;
  std::vector<double> lambda_, chi_;
};

}  // namespace

TailFunction linear_sum_tail(const CramerProfile& C) {
  if (C.degenerate()) return TailFunction::constant_one();
  const ConjugateTable conj(C);
  double scale = 1e-9;
  while (conj(scale) < 1.0 && scale < 1e15) scale *= 2.0;
  return tabulate_tail([&](double x) { return std::exp(-conj(x)); }, scale);
}

TailFunction cramer_refine_Wbar(const TailFunction& T, const CramerProfile& C) {
  TailFunction W = truncation_operator_W(T);
  if (C.degenerate()) return W;
  const ConjugateTable conj(C);
  const auto nodes = W.nodes();
  return tabulate_on([&](double x) { return std::min(W(x), std::exp(-conj(x))); },
                     std::vector<double>(nodes.begin(), nodes.end()));
}

// ---------------------------------------------------------------------------

namespace {

double log_expm1(double z) {
  if (z > 30.0) return z;
  return std::log(std::expm1(z));
}

// log of int_0^inf expm1(lambda x) T(x) dx
double log_exponential_integral(const TailFunction& T, double lambda, double x_end) {
  auto logf = [&](double x) {
    const double t = T(x);
    if (t <= 0.0 || x <= 0.0) return -kInf;
    return log_expm1(lambda * x) + std::log(t);
  };
  // locate the peak of the integrand to keep the quadrature well scaled
  const auto xs = numerics::geometric_grid(x_end * 1e-9, x_end, 600);
  double m = -kInf, xm = xs.front();
  for (double x : xs) {
    const double v = logf(x);
    if (v > m) {
      m = v;
      xm = x;
    }
  }
  if (!std::isfinite(m)) return -kInf;
  auto f = [&](double x) {
    const double v = logf(x) - m;
    return v < -700.0 ? 0.0 : std::exp(v);
  };
  std::vector<double> cuts{0.0, xm};
  for (double c : T.candidate_points())
    if (c > 0.0 && c < x_end) cuts.push_back(c);
  cuts.push_back(x_end);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    total += numerics::integrate(f, cuts[i], cuts[i + 1], 1e-9);
  if (!(total > 0.0)) return -kInf;
  return m + std::log(total);
}

}  // namespace

CramerProfile cramer_from_tail(const TailFunction& T) {
  double lmax;
  if (T.compact()) {
    lmax = kInf;
  } else if (T.is_parametric()) {
    const auto& p = T.as_parametric();
    if (p.q > 1.0) lmax = kInf;
    else if (p.q == 1.0) lmax = p.rho > 0.0 ? kInf : 1.0 / p.K;
    else lmax = 0.0;
  } else {
    lmax = 0.0;  // polynomial extrapolation: no exponential moments
  }
  if (lmax == 0.0) return CramerProfile::none();

  // end of the integration range: where lambda x + log T(x) has fallen far
  // below its peak, or the support end for compact tails
  auto x_end_for = [T](double lambda) {
    if (T.compact()) return T.nodes().back();
    double x = T.characteristic_scale();
    for (int i = 0; i < 200; ++i) {
      const double t = T(x);
      if (t <= 0.0 || lambda * x + std::log(t) < -200.0) break;
      x *= 1.5;
    }
    return x;
  };
  auto log_g = [&](double lambda) {
    return std::log(2.0 * lambda) + log_exponential_integral(T, lambda, x_end_for(lambda));
  };

  double top;
  if (std::isfinite(lmax)) {
    top = lmax * (1.0 - 1e-6);
  } else {
    top = 1.0 / T.characteristic_scale();
    while (numerics::log1p_exp(log_g(top)) < 200.0 && top < 1e15) top *= 2.0;
  }
  auto lam = std::make_shared<std::vector<double>>(numerics::geometric_grid(top * 1e-6, top, 256));
  // g(lambda)/lambda^2 is nondecreasing, so the value at the right node bounds
  // the whole cell from above
  auto logpsi = std::make_shared<std::vector<double>>();
  for (double l : *lam) logpsi->push_back(log_g(l) - 2.0 * std::log(l));
  // with a finite lambda_max, +inf on (top, lambda_max) is still an envelope
  auto direct = [T, x_end_for, lmax, top](double l) {
    if (std::isfinite(lmax) && l > top) return kInf;
    return numerics::log1p_exp(std::log(2.0 * l) +
                               log_exponential_integral(T, l, x_end_for(l)));
  };
  auto fn = [lam, logpsi, direct](double l) {
    if (l > lam->back()) return direct(l);
    const std::size_t j =
        static_cast<std::size_t>(std::lower_bound(lam->begin(), lam->end(), l) - lam->begin());
    return numerics::log1p_exp((*logpsi)[j] + 2.0 * std::log(l));
  };
  return CramerProfile(std::move(fn), lmax, "from_tail");
}

// ---------------------------------------------------------------------------

NormEstimate norm_from_moments(std::span<const double> p, std::span<const double> moments,
                               NormFamily family, const NormParams& params) {
  require(!p.empty() && p.size() == moments.size(), "norm_from_moments: size mismatch");
  NormEstimate out;
  for (std::size_t i = 0; i < p.size(); ++i) {
    require(p[i] >= 1.0 && std::isfinite(moments[i]) && moments[i] >= 0.0,
            "norm_from_moments: need p >= 1 and finite nonnegative moments");
    if (i > 0) {
      require(p[i] > p[i - 1], "norm_from_moments: p must increase");
      if (moments[i] < moments[i - 1] * (1.0 - 1e-9))
        fail(ErrorCode::NonMonotoneMoments,
             "norm_from_moments: |eta|_p decreases in p (Lyapunov violated)");
    }
    double w = 1.0;
    switch (family) {
      case NormFamily::Gq:
        w = std::pow(p[i], 1.0 / params.q);
        break;
      case NormFamily::Gqr:
        if (p[i] < 2.0) continue;
        w = std::pow(p[i], 1.0 / params.q) * std::pow(std::log(p[i]), params.r);
        break;
      case NormFamily::PsiBeta:
        w = std::exp(params.C * std::pow(p[i], params.beta));
        break;
    }
    const double v = moments[i] / w;
    if (v > out.value) {
      out.value = v;
      out.argmax = p[i];
    }
    out.horizon = p[i];
  }
  return out;
}

}  // namespace chaos_tails
