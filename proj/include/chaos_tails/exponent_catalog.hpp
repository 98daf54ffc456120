#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chaos_tails {

/// An exponent in (0, +inf]. Infinity is a flag, never a floating infinity,
/// so 1/q is exactly 0 for it.
class Exponent {
 public:
  Exponent() = default;
  Exponent(double v);  // NOLINT: implicit from finite values
  static Exponent infinity();
  static Exponent parse(std::string_view text);  // "2", "0.5", "inf"

  bool infinite() const { return infinite_; }
  double value() const;  // only for finite exponents
  double inverse() const { return infinite_ ? 0.0 : 1.0 / value_; }
  /// min(q, c) as a plain number.
  double capped(double c) const { return infinite_ ? c : std::min(value_, c); }
  std::string str() const;

 private:
  double value_ = 1.0;
  bool infinite_ = false;
};

struct QVector {
  std::vector<Exponent> q;
  int d() const { return static_cast<int>(q.size()); }
  static QVector parse(std::string_view csv);
  static QVector homogeneous(int d, Exponent q);
};

struct ExponentResult {
  double value = 0.0;
  bool infinite = false;
  std::optional<double> log_power;
  std::string branch;
};

ExponentResult exponent_M(const QVector& qv);
ExponentResult exponent_N_base(Exponent q);

enum class NdVariant {
  Corrected,    // 1/N^(k) = (D-1)/2 + sum_{m != k} 1/q(m) + 1/N(q(k))
  Shifted  // the shifted variant with (D-2)/2 in place of (D-1)/2
};
ExponentResult exponent_Nd(const QVector& qv, NdVariant variant = NdVariant::Corrected);

ExponentResult exponent_gamma_dq(int d, Exponent q);
ExponentResult vector_L(Exponent q, double r);
ExponentResult vector_N_qr(Exponent q, double r);

/// (V(d, q), r(d)) with V as value and r(d) as log_power.
ExponentResult log_refined_recursion(int d, Exponent q, double r);

double moment_constant_gamma(int d);

struct AuxConstants {
  double delta = 1.0;
  double beta = 0.0;             // supremum definition, +inf when it diverges
  double beta_argmax = 0.0;
  std::optional<double> beta_closed_form;  // Gamma(2/q)/(q e), quoted for q > 2
  double F = 1.0;
};
AuxConstants aux_constants(Exponent q, double r = 0.0);
double F_qr(double q, double r);

ExponentResult exponent_G(const QVector& qv);
double ustat_scale_t(int d, int k, int r);

}  // namespace chaos_tails
