#include "chaos_tails/bound_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "chaos_tails/errors.hpp"
#include "chaos_tails/numerics.hpp"

namespace chaos_tails {

using numerics::kInf;

// ---------------------------------------------------------------------------
// moment envelopes

MomentEnvelope MomentEnvelope::constant(double c) {
  require(c > 0.0 && std::isfinite(c), "moment envelope constant must be positive");
  MomentEnvelope m;
  m.kind_ = Kind::Constant;
  m.c_ = c;
  return m;
}

MomentEnvelope MomentEnvelope::gq(Exponent q, double C) {
  require(C > 0.0 && std::isfinite(C), "moment envelope constant must be positive");
  MomentEnvelope m;
  m.kind_ = Kind::Gq;
  m.c_ = C;
  m.q_ = q;
  return m;
}

MomentEnvelope MomentEnvelope::table(std::vector<double> p, std::vector<double> mu) {
  require(!p.empty() && p.size() == mu.size(), "moment table needs matching nonempty columns");
  for (std::size_t i = 0; i < p.size(); ++i) {
    require(p[i] > 0.0 && mu[i] > 0.0, "moment table entries must be positive");
    if (i > 0) {
      require(p[i] > p[i - 1], "moment table abscissas must increase");
      if (mu[i] < mu[i - 1] * (1.0 - 1e-12))
        fail(ErrorCode::NonMonotoneMoments, "moment envelope decreases in p");
    }
  }
  MomentEnvelope m;
  m.kind_ = Kind::Table;
  m.p_ = std::move(p);
  m.mu_ = std::move(mu);
  return m;
}

std::optional<double> MomentEnvelope::operator()(double p) const {
  switch (kind_) {
    case Kind::Constant:
      return c_;
    case Kind::Gq:
      return c_ * std::pow(p, q_.inverse());
    case Kind::Table: {
      if (p < p_.front() * (1 - 1e-12) || p > p_.back() * (1 + 1e-12)) return std::nullopt;
      if (p <= p_.front()) return mu_.front();
      if (p >= p_.back()) return mu_.back();
      const auto it = std::upper_bound(p_.begin(), p_.end(), p);
      const std::size_t i = static_cast<std::size_t>(it - p_.begin());
      const double w = (p - p_[i - 1]) / (p_[i] - p_[i - 1]);
      return mu_[i - 1] + w * (mu_[i] - mu_[i - 1]);
    }
  }
  return std::nullopt;
}

std::string MomentEnvelope::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Constant: os << "constant(" << c_ << ")"; break;
    case Kind::Gq: os << "gq(q=" << q_.str() << ",C=" << c_ << ")"; break;
    case Kind::Table: os << "table(" << p_.size() << " points)"; break;
  }
  return os.str();
}

void FamilyAssumptions::validate() const {
  require(d >= 1, "dimension must be at least 1");
  if (static_cast<int>(tails.size()) != d && !tails.empty())
    fail(ErrorCode::DimensionMismatch, "expected one tail envelope per coordinate");
  if (!cramer.empty() && static_cast<int>(cramer.size()) != d)
    fail(ErrorCode::DimensionMismatch, "expected one Cramer profile per coordinate");
  if (!moments.empty() && static_cast<int>(moments.size()) != d)
    fail(ErrorCode::DimensionMismatch, "expected one moment envelope per coordinate");
}

// ---------------------------------------------------------------------------
// tail recursions

std::vector<int> coordinate_sequence(int d, CoordinateOrder order) {
  require(d >= 1, "dimension must be at least 1");
  std::vector<int> seq;
  switch (order) {
    case CoordinateOrder::Ascending:
      for (int m = 1; m <= d; ++m) seq.push_back(m);
      break;
    case CoordinateOrder::Descending:
      for (int m = d; m >= 1; --m) seq.push_back(m);
      break;
    case CoordinateOrder::Literal:
      seq.push_back(d);
      for (int m = 2; m <= d; ++m) seq.push_back(m);
      break;
  }
  return seq;
}

namespace {

std::string order_name(CoordinateOrder order) {
  switch (order) {
    case CoordinateOrder::Ascending: return "ascending";
    case CoordinateOrder::Descending: return "descending";
    case CoordinateOrder::Literal: return "literal";
  }
  return "?";
}

BoundResult run_recursion(const FamilyAssumptions& A, CoordinateOrder order,
                          const CramerProfile* base_profile) {
  A.validate();
  if (static_cast<int>(A.tails.size()) != A.d)
    fail(ErrorCode::DimensionMismatch, "tail recursion needs one tail envelope per coordinate");
  const auto seq = coordinate_sequence(A.d, order);
  BoundResult out;
  out.metadata["d"] = A.d;
  out.notes.push_back("coordinate order: " + order_name(order));

  const TailFunction& T0 = A.tails[seq[0] - 1];
  TailFunction cur;
  if (base_profile && !base_profile->degenerate()) {
    cur = cramer_refine_Wbar(T0, *base_profile);
    out.provenance.push_back("T(1) = Wbar[T_" + std::to_string(seq[0]) + "] (Cramer profile " +
                             base_profile->label() + ")");
  } else {
    cur = truncation_operator_W(T0);
    out.provenance.push_back("T(1) = W[T_" + std::to_string(seq[0]) + "]");
  }
  for (std::size_t s = 1; s < seq.size(); ++s) {
    const TailFunction prod = product_compose(A.tails[seq[s] - 1], cur);
    cur = truncation_operator_W(prod);
    out.provenance.push_back("T(" + std::to_string(s + 1) + ") = W[T_" + std::to_string(seq[s]) +
                             " v T(" + std::to_string(s) + ")]");
  }
  out.tail = cur;
  return out;
}

}  // namespace

BoundResult martingale_tail_recursion(const FamilyAssumptions& A, CoordinateOrder order) {
  return run_recursion(A, order, nullptr);
}

BoundResult independent_tail_recursion(const FamilyAssumptions& A, CoordinateOrder order) {
  A.validate();
  const int base = coordinate_sequence(A.d, order).front();
  const CramerProfile* prof = nullptr;
  if (!A.cramer.empty() && A.cramer[base - 1] && !A.cramer[base - 1]->degenerate())
    prof = &*A.cramer[base - 1];
  BoundResult out = run_recursion(A, order, prof);
  if (A.dependence != Dependence::Independent)
    out.notes.push_back("independence not declared: the Cramer refinement assumes it");
  if (!prof)
    out.notes.push_back("no Cramer profile for coordinate " + std::to_string(base) +
                        ": fell back to the martingale recursion");
  return out;
}

FamilyAssumptions weibull_family(const QVector& qv, const std::vector<double>& K,
                                 Dependence dep) {
  if (K.size() != qv.q.size())
    fail(ErrorCode::DimensionMismatch, "need one scale per coordinate");
  require(qv.d() >= 1, "empty exponent vector");
  FamilyAssumptions A;
  A.d = qv.d();
  A.dependence = dep;
  for (int m = 0; m < A.d; ++m) {
    require(K[m] > 0.0, "scales must be positive");
    const Exponent q = qv.q[m];
    if (q.infinite()) {
      A.tails.push_back(TailFunction::indicator(K[m]));
      // a centered variable bounded by K is K-subgaussian
      A.cramer.emplace_back(CramerProfile::quadratic(K[m]));
    } else {
      A.tails.push_back(TailFunction::parametric(1.0, K[m], q.value(), 0.0));
      if (dep == Dependence::Independent) A.cramer.emplace_back(cramer_from_tail(A.tails.back()));
      else A.cramer.emplace_back(std::nullopt);
    }
  }
  return A;
}

namespace {

double prod_scale(const std::vector<double>& K) {
  double k = 1.0;
  for (double v : K) k *= v;
  return k;
}

// nodes of T with x >= 1/e point and a representable positive value
std::vector<std::pair<double, double>> fit_points(const TailFunction& T) {
  std::vector<std::pair<double, double>> pts;
  const auto xs = T.nodes();
  for (double x : xs) {
    const double t = T(x);
    if (t <= std::exp(-1.0) && t > 1e-300) pts.emplace_back(x, -std::log(t));
  }
  return pts;
}

}  // namespace

double loglog_slope(const TailFunction& T, double x_lo, double x_hi) {
  require(x_lo > 0.0 && x_hi > x_lo, "slope window must be a positive interval");
  std::vector<double> lx, ly;
  for (double x : numerics::geometric_grid(x_lo, x_hi, 64)) {
    const double t = T(x);
    if (t > 0.0 && t < 1.0) {
      lx.push_back(std::log(x));
      ly.push_back(std::log(-std::log(t)));
    }
  }
  require(lx.size() >= 2, "tail is degenerate on the slope window");
  return numerics::fit_line(lx, ly).slope;
}

BoundResult theorem1_envelope(const QVector& qv, const std::vector<double>& K) {
  const double M = exponent_M(qv).value;
  const double Kp = prod_scale(K);
  BoundResult pipe = martingale_tail_recursion(weibull_family(qv, K));
  const TailFunction& T = *pipe.tail;
  const auto pts = fit_points(T);
  require(!pts.empty(), "recursion tail never falls below 1/e");
  double C = 0.0;
  for (auto [x, l] : pts) C = std::max(C, x / (Kp * std::pow(l, 1.0 / M)));
  BoundResult out;
  out.tail = TailFunction::parametric(1.0, C * Kp, M, 0.0);
  out.provenance = pipe.provenance;
  out.provenance.push_back("upper envelope exp(-(x/(C K))^M), constants from pipeline");
  out.provenance.push_back("lower envelope exponent M reported for context");
  out.metadata["M"] = M;
  out.metadata["lower_exponent"] = M;
  out.metadata["C"] = C;
  out.metadata["K"] = Kp;
  out.metadata["x0"] = pts.front().first;
  out.notes.push_back("envelope dominates the recursion on x >= x0 (recursion tail <= 1/e)");
  return out;
}

BoundResult theorem2_envelope(const QVector& qv, const std::vector<double>& K) {
  const auto N = exponent_Nd(qv);
  const double Kp = prod_scale(K);
  BoundResult pipe = independent_tail_recursion(weibull_family(qv, K, Dependence::Independent));
  const TailFunction& T = *pipe.tail;
  const auto pts = fit_points(T);
  require(!pts.empty(), "recursion tail never falls below 1/e");
  double C3 = kInf;
  for (auto [x, l] : pts) C3 = std::min(C3, l / std::pow(x / Kp, N.value));
  BoundResult out;
  // exp(-C3 z^N) = exp(-(z / C3^{-1/N})^N)
  out.tail = TailFunction::parametric(1.0, Kp * std::pow(C3, -1.0 / N.value), N.value, 0.0);
  out.provenance = pipe.provenance;
  out.provenance.push_back("envelope exp(-C3 (x/K)^N_d), constants from pipeline");
  out.metadata["N_d"] = N.value;
  out.metadata["C3"] = C3;
  out.metadata["K"] = Kp;
  out.metadata["x0"] = pts.front().first;
  out.notes.push_back("N_d branch " + N.branch);
  out.notes.push_back("C3 fitted on the tabulated range of the recursion beyond x0");
  return out;
}

BoundResult theorem3_lower_envelope(int d, Exponent q) {
  require(d >= 1, "dimension must be at least 1");
  const double e = q.capped(2.0) / d;
  BoundResult out;
  out.tail = TailFunction::parametric(1.0, 1.0, e, 0.0);
  out.provenance.push_back("lower bound, used to sandwich empirical tails");
  out.metadata["exponent"] = e;
  out.metadata["C4"] = 1.0;
  out.metadata["lower"] = 1.0;
  out.notes.push_back("C4 is not tracked; set to 1");
  return out;
}

// ---------------------------------------------------------------------------
// moment bounds

namespace {

double moment_product(const FamilyAssumptions& A, double p) {
  if (static_cast<int>(A.moments.size()) != A.d)
    fail(ErrorCode::MissingMoments, "no moment envelopes supplied");
  double prod = 1.0;
  for (int m = 0; m < A.d; ++m) {
    if (!A.moments[m]) fail(ErrorCode::MissingMoments, "coordinate " + std::to_string(m + 1) +
                                                           " has no moment envelope");
    const auto v = (*A.moments[m])(p);
    if (!v) fail(ErrorCode::MissingMoments, "moment of coordinate " + std::to_string(m + 1) +
                                                " unavailable at p = " + std::to_string(p));
    prod *= *v;
  }
  return prod;
}

}  // namespace

double martingale_moment_bound(const FamilyAssumptions& A, double p) {
  A.validate();
  require(p >= 2.0, "moment order must be at least 2");
  return moment_constant_gamma(A.d) * std::pow(p, A.d) * moment_product(A, A.d * p);
}

double independent_moment_bound(const FamilyAssumptions& A, double p) {
  A.validate();
  require(p >= 2.0, "moment order must be at least 2");
  return std::pow(2.0, A.d / 2.0) * std::pow(p, A.d) * moment_product(A, p) / std::log(p);
}

BoundResult moment_bound_curve(const FamilyAssumptions& A, const std::vector<double>& p,
                               bool independent) {
  BoundResult out;
  MomentCurve c;
  for (double v : p) {
    c.p.push_back(v);
    c.bound.push_back(independent ? independent_moment_bound(A, v) : martingale_moment_bound(A, v));
  }
  out.moments = c;
  out.metadata["d"] = A.d;
  if (independent) {
    out.provenance.push_back("2^{d/2} p^d prod mu_m(p) / log p (independent coordinates)");
    if (A.dependence != Dependence::Independent)
      out.notes.push_back("independence not declared: the bound assumes it");
  } else {
    out.metadata["gamma_d"] = moment_constant_gamma(A.d);
    out.provenance.push_back("gamma(d) p^d prod mu_m(d p) (martingale coordinates)");
  }
  for (int m = 0; m < A.d && m < static_cast<int>(A.moments.size()); ++m)
    if (A.moments[m]) out.notes.push_back("mu_" + std::to_string(m + 1) + " = " +
                                          A.moments[m]->describe());
  return out;
}

TailFunction moments_to_tail(const std::function<double(double)>& bound, const MarkovOptions& opt) {
  require(opt.p_max > 2.0, "moment horizon must exceed 2");
  const double b2 = bound(2.0);
  require(b2 > 0.0 && std::isfinite(b2), "moment curve must be positive at p = 2");
  auto value = [&](double x) {
    if (x <= b2) return 1.0;
    const double lx = std::log(x);
    auto f = [&](double p) {
      const double b = bound(p);
      if (!(b > 0.0) || !std::isfinite(b)) return kInf;
      return p * (std::log(b) - lx);
    };
    const double ends[] = {2.0, opt.p_max};
    const auto best = numerics::minimize_log(f, 2.0, opt.p_max, ends);
    return std::min(1.0, std::exp(best.value));
  };
  // keep bound(2) as a node so the tail is exactly 1 up to it
  const TailFunction coarse = tabulate_tail(value, b2);
  std::vector<double> xs(coarse.nodes().begin(), coarse.nodes().end());
  const auto it = std::lower_bound(xs.begin(), xs.end(), b2);
  if (it == xs.end() || *it != b2) xs.insert(it, b2);
  return tabulate_on(value, std::move(xs));
}

}  // namespace chaos_tails
