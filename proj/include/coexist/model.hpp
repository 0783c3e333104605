#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coexist/errors.hpp"

namespace coexist {

/// Scalar constants of the chemotaxis system: diffusion rates d1,d2,d3,
/// sensitivities chi1,chi2, signal production k,l and signal decay lambda.
struct ModelConstants {
  double d1 = 1.0;
  double d2 = 1.0;
  double d3 = 1.0;
  double chi1 = 0.0;
  double chi2 = 0.0;
  double k = 1.0;
  double l = 1.0;
  double lambda = 1.0;
};

/// One time-space coefficient
///
///   c(t,x) = mean + time_amp*sin(time_freq*t + time_phase)
///                 + space_amp*cos(space_mode*pi*x/L)
///
/// together with declared global bounds [inf, sup]. The sinusoid family
/// covers constant, time-periodic and space-heterogeneous coefficients and
/// admits exact envelopes, which keeps the hypothesis checks rigorous.
struct CoefficientField {
  double mean = 0.0;
  double time_amp = 0.0;
  double time_freq = 0.0;
  double time_phase = 0.0;
  double space_amp = 0.0;
  int space_mode = 0;
  double inf = 0.0;
  double sup = 0.0;

  double time_term(double t) const { return time_amp * std::sin(time_freq * t + time_phase); }

  double value(double t, double x, double length) const {
    return mean + time_term(t) +
           space_amp * std::cos(space_mode * std::numbers::pi * x / length);
  }

  /// Infimum over x at fixed t; exact for the cosine profile (space_mode >= 1).
  double inf_at(double t) const { return mean + time_term(t) - std::abs(space_amp); }
  /// Supremum over x at fixed t.
  double sup_at(double t) const { return mean + time_term(t) + std::abs(space_amp); }

  /// Conservative global envelope mean -+ (|time_amp| + |space_amp|).
  double envelope_lo() const { return mean - std::abs(time_amp) - std::abs(space_amp); }
  double envelope_hi() const { return mean + std::abs(time_amp) + std::abs(space_amp); }

  bool space_independent() const { return space_amp == 0.0; }
  bool time_independent() const { return time_amp == 0.0; }
  bool is_constant() const { return inf == sup; }

  CoefficientField& with_auto_bounds() {
    inf = envelope_lo();
    sup = envelope_hi();
    return *this;
  }
};

inline CoefficientField constant_field(double value) {
  CoefficientField f;
  f.mean = value;
  f.inf = value;
  f.sup = value;
  return f;
}

/// Full parameter set of the two-species system: constants plus the six
/// coefficient fields a0,a1,a2 (species u) and b0,b1,b2 (species v).
struct ModelSpec {
  ModelConstants constants;
  CoefficientField a0, a1, a2, b0, b1, b2;

  /// Collects every invariant violation; empty means the spec is valid.
  std::vector<std::string> validate() const;

  void require_valid() const {
    auto problems = validate();
    if (!problems.empty()) {
      std::string what;
      for (const auto& p : problems) {
        if (!what.empty()) what += "; ";
        what += p;
      }
      fail(errc::invalid_spec, what);
    }
  }

  bool space_independent() const {
    return a0.space_independent() && a1.space_independent() && a2.space_independent() &&
           b0.space_independent() && b1.space_independent() && b2.space_independent();
  }

  bool time_independent() const {
    return a0.time_independent() && a1.time_independent() && a2.time_independent() &&
           b0.time_independent() && b1.time_independent() && b2.time_independent();
  }

  bool constant_coefficients() const {
    return a0.is_constant() && a1.is_constant() && a2.is_constant() && b0.is_constant() &&
           b1.is_constant() && b2.is_constant();
  }
};

namespace detail {

inline void validate_field(const CoefficientField& f, const char* name,
                           std::vector<std::string>& out) {
  const double params[] = {f.mean, f.time_amp, f.time_freq, f.time_phase,
                           f.space_amp, f.inf, f.sup};
  for (double p : params) {
    if (!std::isfinite(p)) {
      out.push_back(std::string(name) + ": non-finite parameter");
      return;
    }
  }
  if (!(f.inf > 0.0)) out.push_back(std::string(name) + ": inf must be > 0");
  if (!(f.inf <= f.sup)) out.push_back(std::string(name) + ": inf must be <= sup");
  if (f.space_mode < 0) out.push_back(std::string(name) + ": space_mode must be >= 0");
  if (f.space_amp != 0.0 && f.space_mode == 0)
    out.push_back(std::string(name) + ": space_amp != 0 requires space_mode >= 1");
}

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace detail

inline std::vector<std::string> ModelSpec::validate() const {
  std::vector<std::string> out;
  const ModelConstants& c = constants;
  const double all[] = {c.d1, c.d2, c.d3, c.chi1, c.chi2, c.k, c.l, c.lambda};
  for (double p : all) {
    if (!std::isfinite(p)) {
      out.push_back("constants: non-finite value");
      break;
    }
  }
  if (!(c.d1 > 0.0)) out.push_back("d1 must be > 0");
  if (!(c.d2 > 0.0)) out.push_back("d2 must be > 0");
  if (!(c.d3 > 0.0)) out.push_back("d3 must be > 0");
  // lambda = 0 makes the Neumann elliptic solve singular, so it is rejected
  // even though the continuous model tolerates it.
  if (!(c.lambda > 0.0)) out.push_back("lambda must be > 0");
  if (c.chi1 < 0.0) out.push_back("chi1 must be >= 0");
  if (c.chi2 < 0.0) out.push_back("chi2 must be >= 0");
  if (c.k < 0.0) out.push_back("k must be >= 0");
  if (c.l < 0.0) out.push_back("l must be >= 0");
  detail::validate_field(a0, "a0", out);
  detail::validate_field(a1, "a1", out);
  detail::validate_field(a2, "a2", out);
  detail::validate_field(b0, "b0", out);
  detail::validate_field(b1, "b1", out);
  detail::validate_field(b2, "b2", out);
  return out;
}

/// Ultimate bounds of the two populations. A field is absent when the guard
/// inequality protecting its denominator fails.
struct DerivedBounds {
  std::optional<double> A_bar_1, A_bar_2;
  std::optional<double> B_bar_1, B_bar_2;
};

inline DerivedBounds derive_bounds(const ModelSpec& spec) {
  spec.require_valid();
  const ModelConstants& c = spec.constants;
  DerivedBounds out;
  const double du = spec.a1.inf - c.k * c.chi1 / c.d3;
  const double dv = spec.b2.inf - c.l * c.chi2 / c.d3;
  if (du > 0.0) out.A_bar_1 = spec.a0.sup / du;
  if (dv > 0.0) out.A_bar_2 = spec.b0.sup / dv;
  if (du > 0.0 && dv > 0.0) {
    const double den = du * dv - (c.k * c.chi2 / c.d3) * (c.l * c.chi1 / c.d3);
    if (den > 0.0) {
      out.B_bar_1 = (spec.a0.sup * dv + (c.l * c.chi1 / c.d3) * spec.b0.sup) / den;
      out.B_bar_2 = (spec.b0.sup * du + (c.k * c.chi2 / c.d3) * spec.a0.sup) / den;
    }
  }
  return out;
}

/// Verdicts of the persistence/stability hypotheses plus the derived bounds
/// and the raw margin (LHS - RHS) of every inequality that was evaluated.
/// h7 is absent ("not applicable") when some coefficient depends on space,
/// since that hypothesis presumes a_i(t,x) = a_i(t).
struct HypothesisReport {
  bool h1 = false, h2 = false, h3 = false, h4 = false, h5 = false, h6 = false;
  std::optional<bool> h7;
  bool cond_1_5 = false;
  std::optional<double> A_bar_1, A_bar_2, B_bar_1, B_bar_2;
  std::vector<std::pair<std::string, double>> margins;

  double margin(const std::string& name) const {
    for (const auto& [key, value] : margins)
      if (key == name) return value;
    fail(errc::invalid_spec, "unknown margin " + name);
  }
};

inline HypothesisReport check_hypotheses(const ModelSpec& spec) {
  spec.require_valid();
  const ModelConstants& c = spec.constants;
  HypothesisReport rep;

  const double k_chi1 = c.k * c.chi1 / c.d3;
  const double l_chi1 = c.l * c.chi1 / c.d3;
  const double k_chi2 = c.k * c.chi2 / c.d3;
  const double l_chi2 = c.l * c.chi2 / c.d3;

  auto margin = [&rep](const std::string& name, double value) {
    rep.margins.emplace_back(name, value);
  };

  margin("h1.a1", spec.a1.inf - k_chi1);
  margin("h1.a2", spec.a2.inf - l_chi1);
  margin("h1.b1", spec.b1.inf - k_chi2);
  margin("h1.b2", spec.b2.inf - l_chi2);
  rep.h1 = spec.a1.inf > k_chi1 && spec.a2.inf >= l_chi1 && spec.b1.inf >= k_chi2 &&
           spec.b2.inf > l_chi2;

  const double du = spec.a1.inf - k_chi1;
  const double dv = spec.b2.inf - l_chi2;
  margin("h2.coupling", du * dv - k_chi2 * l_chi1);
  rep.h2 = du > 0.0 && dv > 0.0 && du * dv > k_chi2 * l_chi1;

  const DerivedBounds bounds = derive_bounds(spec);
  rep.A_bar_1 = bounds.A_bar_1;
  rep.A_bar_2 = bounds.A_bar_2;
  rep.B_bar_1 = bounds.B_bar_1;
  rep.B_bar_2 = bounds.B_bar_2;

  margin("eq15.u", spec.a0.inf - spec.a2.sup * spec.b0.sup / spec.b2.inf);
  margin("eq15.v", spec.b0.inf - spec.a0.sup * spec.b1.sup / spec.a1.inf);
  rep.cond_1_5 = spec.a0.inf > spec.a2.sup * spec.b0.sup / spec.b2.inf &&
                 spec.b0.inf > spec.a0.sup * spec.b1.sup / spec.a1.inf;

  if (bounds.A_bar_1 && bounds.A_bar_2) {
    const double A1 = *bounds.A_bar_1;
    const double A2 = *bounds.A_bar_2;
    margin("h3.u", spec.a0.inf - spec.a2.sup * A2);
    margin("h3.v", spec.b0.inf - spec.b1.sup * A1);
    rep.h3 = rep.h1 && spec.a0.inf > spec.a2.sup * A2 && spec.b0.inf > spec.b1.sup * A1;
    margin("h5.u", spec.a0.inf - (spec.a2.sup * A2 + k_chi1 * A1));
    margin("h5.v", spec.b0.inf - (spec.b1.sup * A1 + l_chi2 * A2));
    rep.h5 = rep.h1 && spec.a0.inf > spec.a2.sup * A2 + k_chi1 * A1 &&
             spec.b0.inf > spec.b1.sup * A1 + l_chi2 * A2;
  }

  if (bounds.B_bar_1 && bounds.B_bar_2) {
    const double B1 = *bounds.B_bar_1;
    const double B2 = *bounds.B_bar_2;
    margin("h4.u", spec.a0.inf -
                       (detail::positive_part(spec.a2.sup - l_chi1) * B2 + l_chi1 * B2));
    margin("h4.v", spec.b0.inf -
                       (detail::positive_part(spec.b1.sup - k_chi2) * B1 + k_chi2 * B1));
    rep.h4 = rep.h2 &&
             spec.a0.inf > detail::positive_part(spec.a2.sup - l_chi1) * B2 + l_chi1 * B2 &&
             spec.b0.inf > detail::positive_part(spec.b1.sup - k_chi2) * B1 + k_chi2 * B1;
    margin("h6.u", spec.a0.inf - ((spec.a2.sup + l_chi1) * B2 + k_chi1 * B1));
    margin("h6.v", spec.b0.inf - ((spec.b1.sup + k_chi2) * B1 + l_chi2 * B2));
    rep.h6 = rep.h2 && spec.a0.inf > (spec.a2.sup + l_chi1) * B2 + k_chi1 * B1 &&
             spec.b0.inf > (spec.b1.sup + k_chi2) * B1 + l_chi2 * B2;
  }

  if (spec.space_independent()) {
    // With space-independent fields the declared bounds are time envelopes,
    // so inf_t(a1 - b1) >= a1.inf - b1.sup.
    const double lhs_u = spec.a1.inf - spec.b1.sup;
    const double lhs_v = spec.b2.inf - spec.a2.sup;
    const double rhs_u = 2.0 * c.k * (c.chi1 + c.chi2) / c.d3;
    const double rhs_v = 2.0 * c.l * (c.chi1 + c.chi2) / c.d3;
    margin("h7.u", lhs_u - rhs_u);
    margin("h7.v", lhs_v - rhs_v);
    rep.h7 = rep.cond_1_5 && lhs_u > rhs_u && lhs_v > rhs_v;
  }

  return rep;
}

/// Result of sampling one coefficient field against its declared bounds.
struct FieldBoundsReport {
  bool pass = false;
  double worst_violation = 0.0;  // max distance outside [inf, sup] over samples
  double t_at = 0.0, x_at = 0.0, value_at = 0.0;
  double envelope_lo = 0.0, envelope_hi = 0.0;
};

/// Samples c(t,x) on a tensor grid over one temporal period (or [0,1] when
/// time_freq = 0) and x in [0, length]; passes iff every sample lies in the
/// declared [inf, sup].
inline FieldBoundsReport validate_field_bounds(const CoefficientField& field, int samples_t,
                                               int samples_x, double length = 1.0) {
  if (samples_t < 2 || samples_x < 2)
    fail(errc::invalid_spec, "validate_field_bounds requires >= 2 samples per direction");
  FieldBoundsReport rep;
  rep.envelope_lo = field.envelope_lo();
  rep.envelope_hi = field.envelope_hi();
  const double t_span =
      field.time_freq != 0.0 ? 2.0 * std::numbers::pi / std::abs(field.time_freq) : 1.0;
  rep.pass = true;
  for (int i = 0; i < samples_t; ++i) {
    const double t = t_span * i / (samples_t - 1);
    for (int j = 0; j < samples_x; ++j) {
      const double x = length * j / (samples_x - 1);
      const double v = field.value(t, x, length);
      const double violation = std::max(field.inf - v, v - field.sup);
      if (violation > 0.0) {
        rep.pass = false;
        if (violation > rep.worst_violation) {
          rep.worst_violation = violation;
          rep.t_at = t;
          rep.x_at = x;
          rep.value_at = v;
        }
      }
    }
  }
  return rep;
}

}  // namespace coexist
