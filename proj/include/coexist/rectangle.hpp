#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "coexist/errors.hpp"
#include "coexist/model.hpp"

namespace coexist {

/// Which hypothesis family licensed the rectangle: R comes from (H5) and the
/// componentwise comparison system, S from (H6) and the coupled one.
enum class Branch { R, S };

inline const char* branch_name(Branch b) { return b == Branch::R ? "R" : "S"; }

/// An attracting box [lo1, hi1] x [lo2, hi2] for the two populations.
struct Rectangle {
  double lo1 = 0.0, hi1 = 0.0;
  double lo2 = 0.0, hi2 = 0.0;
  Branch branch = Branch::R;

  bool positive() const { return lo1 > 0.0 && lo2 > 0.0 && lo1 <= hi1 && lo2 <= hi2; }
};

struct IterationTrace {
  struct Quad {
    double lo1, hi1, lo2, hi2;
  };
  std::vector<Quad> quads;  // quads[0] is the seed
  double residual = 0.0;    // max |equation residual| at the final quad
  bool converged = false;
  int iterations = 0;
  bool ordering_violated = false;
};

struct RectangleResult {
  Rectangle rect;
  IterationTrace trace;
};

namespace detail {

struct RectCoeffs {
  // Shared shorthands: cu = k*chi1/d3, cv = l*chi2/d3 and the four shifted
  // competition coefficients.
  double cu, cv;
  double au_inf, au_sup;  // a1.inf - cu, a1.sup - cu
  double bv_inf, bv_sup;  // b2.inf - cv, b2.sup - cv
};

inline RectCoeffs rect_coeffs(const ModelSpec& spec) {
  const ModelConstants& c = spec.constants;
  RectCoeffs r;
  r.cu = c.k * c.chi1 / c.d3;
  r.cv = c.l * c.chi2 / c.d3;
  r.au_inf = spec.a1.inf - r.cu;
  r.au_sup = spec.a1.sup - r.cu;
  r.bv_inf = spec.b2.inf - r.cv;
  r.bv_sup = spec.b2.sup - r.cv;
  return r;
}

// One sweep of the monotone recurrence for the R branch: the upper pair is
// refreshed from the previous lower pair, then the lower pair from the new
// upper pair.
inline IterationTrace::Quad r_sweep(const ModelSpec& s, const RectCoeffs& c,
                                    const IterationTrace::Quad& q) {
  IterationTrace::Quad n;
  n.hi1 = (s.a0.sup - s.a2.inf * q.lo2 - c.cu * q.lo1) / c.au_inf;
  n.hi2 = (s.b0.sup - s.b1.inf * q.lo1 - c.cv * q.lo2) / c.bv_inf;
  n.lo1 = (s.a0.inf - s.a2.sup * n.hi2 - c.cu * n.hi1) / c.au_sup;
  n.lo2 = (s.b0.inf - s.b1.sup * n.hi1 - c.cv * n.hi2) / c.bv_sup;
  return n;
}

struct Affine2 {
  // y = m * x + c with m a 2x2 matrix stored row-major.
  std::array<double, 4> m;
  std::array<double, 2> c;

  std::array<double, 2> operator()(std::array<double, 2> x) const {
    return {m[0] * x[0] + m[1] * x[1] + c[0], m[2] * x[0] + m[3] * x[1] + c[1]};
  }
};

// The S-branch sweep maps the lower pair to the upper pair (and vice versa)
// through the coupled 2x2 elimination of the comparison system.
inline std::array<double, 2> s_upper_from_lower(const ModelSpec& s, std::array<double, 2> lo) {
  const ModelConstants& k = s.constants;
  const double cu = k.k * k.chi1 / k.d3;
  const double cv = k.l * k.chi2 / k.d3;
  const double lchi1 = k.l * k.chi1 / k.d3;
  const double kchi2 = k.k * k.chi2 / k.d3;
  const double den = (s.a1.inf - cu) * (s.b2.inf - cv) - kchi2 * lchi1;
  const double alpha = s.a0.sup - (s.a2.inf + lchi1) * lo[1] - cu * lo[0];
  const double beta = s.b0.sup - (s.b1.inf + kchi2) * lo[0] - cv * lo[1];
  return {(alpha * (s.b2.inf - cv) + lchi1 * beta) / den,
          (beta * (s.a1.inf - cu) + kchi2 * alpha) / den};
}

inline std::array<double, 2> s_lower_from_upper(const ModelSpec& s, std::array<double, 2> hi) {
  const ModelConstants& k = s.constants;
  const double cu = k.k * k.chi1 / k.d3;
  const double cv = k.l * k.chi2 / k.d3;
  const double lchi1 = k.l * k.chi1 / k.d3;
  const double kchi2 = k.k * k.chi2 / k.d3;
  const double den = (s.a1.sup - cu) * (s.b2.sup - cv) - kchi2 * lchi1;
  const double alpha = s.a0.inf - (s.a2.sup + lchi1) * hi[1] - cu * hi[0];
  const double beta = s.b0.inf - (s.b1.sup + kchi2) * hi[0] - cv * hi[1];
  return {(alpha * (s.b2.sup - cv) + lchi1 * beta) / den,
          (beta * (s.a1.sup - cu) + kchi2 * alpha) / den};
}

inline IterationTrace::Quad s_sweep(const ModelSpec& s, const IterationTrace::Quad& q) {
  const auto hi = s_upper_from_lower(s, {q.lo1, q.lo2});
  const auto lo = s_lower_from_upper(s, hi);
  return {lo[0], hi[0], lo[1], hi[1]};
}

inline double r_residual(const ModelSpec& s, const RectCoeffs& c, const IterationTrace::Quad& q) {
  const double r1 = c.au_inf * q.hi1 - (s.a0.sup - s.a2.inf * q.lo2 - c.cu * q.lo1);
  const double r2 = c.bv_inf * q.hi2 - (s.b0.sup - s.b1.inf * q.lo1 - c.cv * q.lo2);
  const double r3 = c.au_sup * q.lo1 - (s.a0.inf - s.a2.sup * q.hi2 - c.cu * q.hi1);
  const double r4 = c.bv_sup * q.lo2 - (s.b0.inf - s.b1.sup * q.hi1 - c.cv * q.hi2);
  return std::max(std::max(std::abs(r1), std::abs(r2)), std::max(std::abs(r3), std::abs(r4)));
}

inline double s_residual(const ModelSpec& s, const IterationTrace::Quad& q) {
  const auto hi = s_upper_from_lower(s, {q.lo1, q.lo2});
  const auto lo = s_lower_from_upper(s, {q.hi1, q.hi2});
  return std::max(std::max(std::abs(q.hi1 - hi[0]), std::abs(q.hi2 - hi[1])),
                  std::max(std::abs(q.lo1 - lo[0]), std::abs(q.lo2 - lo[1])));
}

}  // namespace detail

/// Runs the monotone fixed-point recurrence for the requested branch from the
/// seed (0, A_bar) resp. (0, B_bar) until the largest componentwise change
/// drops below tol. The lower components never decrease and the upper ones
/// never increase along the trace.
inline RectangleResult iterate_rectangle(const ModelSpec& spec, Branch branch,
                                         double tol = 1e-12, int max_iter = 10000) {
  spec.require_valid();
  if (!(tol > 0.0)) fail(errc::invalid_spec, "tol must be > 0");
  const HypothesisReport hyp = check_hypotheses(spec);
  if (branch == Branch::R && !hyp.h5)
    fail(errc::hypothesis_not_met, "branch R requires (H5)");
  if (branch == Branch::S && !hyp.h6)
    fail(errc::hypothesis_not_met, "branch S requires (H6)");

  const auto coeffs = detail::rect_coeffs(spec);
  IterationTrace trace;
  IterationTrace::Quad q;
  if (branch == Branch::R) {
    q = {0.0, *hyp.A_bar_1, 0.0, *hyp.A_bar_2};
  } else {
    q = {0.0, *hyp.B_bar_1, 0.0, *hyp.B_bar_2};
  }
  trace.quads.push_back(q);

  for (int n = 1; n <= max_iter; ++n) {
    const IterationTrace::Quad next =
        branch == Branch::R ? detail::r_sweep(spec, coeffs, q) : detail::s_sweep(spec, q);
    trace.quads.push_back(next);
    trace.iterations = n;
    const double delta =
        std::max(std::max(std::abs(next.lo1 - q.lo1), std::abs(next.hi1 - q.hi1)),
                 std::max(std::abs(next.lo2 - q.lo2), std::abs(next.hi2 - q.hi2)));
    q = next;
    if (delta < tol) {
      trace.converged = true;
      break;
    }
    // lo > hi beyond tol means the hypothesis margin is too thin for the
    // recurrence to stay ordered; report instead of clamping.
    if (q.lo1 - q.hi1 > tol || q.lo2 - q.hi2 > tol) {
      trace.ordering_violated = true;
      break;
    }
  }

  trace.residual = branch == Branch::R ? detail::r_residual(spec, coeffs, q)
                                       : detail::s_residual(spec, q);

  Rectangle rect;
  rect.branch = branch;
  // At an exact collapse the two monotone sequences can land one ulp apart;
  // ordering violations larger than tol were already flagged above.
  rect.lo1 = std::min(q.lo1, q.hi1);
  rect.hi1 = std::max(q.lo1, q.hi1);
  rect.lo2 = std::min(q.lo2, q.hi2);
  rect.hi2 = std::max(q.lo2, q.hi2);
  return {rect, trace};
}

/// The twelve coefficients of the decoupled 2x2 linear systems
///   h1*hi1 = h2 + h3*hi2,  p1*hi2 = p2 + p3*hi1   (upper pair)
/// and the underbar analogue for the lower pair, with their determinants.
struct ClosedFormCoefficients {
  double h_bar_1 = 0, h_bar_2 = 0, h_bar_3 = 0;
  double p_bar_1 = 0, p_bar_2 = 0, p_bar_3 = 0;
  double h_lo_1 = 0, h_lo_2 = 0, h_lo_3 = 0;
  double p_lo_1 = 0, p_lo_2 = 0, p_lo_3 = 0;
  double det_bar = 0, det_lo = 0;
};

struct ClosedFormResult {
  Rectangle rect;
  ClosedFormCoefficients coeffs;
  bool invariants_ok = false;  // positivity and nesting, checked post hoc
  std::string invariant_note;
};

namespace detail {

inline ClosedFormCoefficients r_closed_form_coeffs(const ModelSpec& s) {
  const auto c = rect_coeffs(s);
  ClosedFormCoefficients k;
  const double cross = c.au_inf * c.au_sup - c.cu * c.cu;
  const double cross_v = c.bv_inf * c.bv_sup - c.cv * c.cv;
  k.h_bar_1 = c.bv_sup * cross - s.a2.inf * s.b1.sup * c.au_sup;
  k.h_bar_2 = c.bv_sup * (s.a0.sup * c.au_sup - c.cu * s.a0.inf) - s.a2.inf * s.b0.inf * c.au_sup;
  k.h_bar_3 = c.cv * s.a2.inf * c.au_sup + c.cu * s.a2.sup * c.bv_sup;
  k.p_bar_1 = c.au_sup * cross_v - s.b1.inf * s.a2.sup * c.bv_sup;
  k.p_bar_2 = c.au_sup * (s.b0.sup * c.bv_sup - c.cv * s.b0.inf) - s.b1.inf * s.a0.inf * c.bv_sup;
  k.p_bar_3 = c.cu * s.b1.inf * c.bv_sup + c.cv * s.b1.sup * c.au_sup;
  k.h_lo_1 = c.bv_inf * cross - s.a2.sup * s.b1.inf * c.au_inf;
  k.h_lo_2 = c.bv_inf * (s.a0.inf * c.au_inf - c.cu * s.a0.sup) - s.a2.sup * s.b0.sup * c.au_inf;
  k.h_lo_3 = c.cv * s.a2.sup * c.au_inf + c.cu * s.a2.inf * c.bv_inf;
  k.p_lo_1 = c.au_inf * cross_v - s.b1.sup * s.a2.inf * c.bv_inf;
  k.p_lo_2 = c.au_inf * (s.b0.inf * c.bv_inf - c.cv * s.b0.sup) - s.b1.sup * s.a0.sup * c.bv_inf;
  k.p_lo_3 = c.cu * s.b1.sup * c.bv_inf + c.cv * s.b1.inf * c.au_inf;
  return k;
}

// Extracts an affine map from its action on {0, e1, e2}; the S-branch sweep
// is exactly affine, so this recovers its matrix and offset without
// transcribing the lengthy displayed fractions.
template <class F>
inline Affine2 extract_affine(F&& f) {
  const auto c = f(std::array<double, 2>{0.0, 0.0});
  const auto e1 = f(std::array<double, 2>{1.0, 0.0});
  const auto e2 = f(std::array<double, 2>{0.0, 1.0});
  Affine2 a;
  a.c = {c[0], c[1]};
  a.m = {e1[0] - c[0], e2[0] - c[0], e1[1] - c[1], e2[1] - c[1]};
  return a;
}

inline ClosedFormCoefficients s_closed_form_coeffs(const ModelSpec& s) {
  const Affine2 up = extract_affine([&](std::array<double, 2> lo) {
    return s_upper_from_lower(s, lo);
  });
  const Affine2 lo = extract_affine([&](std::array<double, 2> hi) {
    return s_lower_from_upper(s, hi);
  });

  // hi = up(lo(hi)) => (I - Mup*Mlo) hi = Mup*c_lo + c_up, written in the
  // same h/p shape as the R branch.
  ClosedFormCoefficients k;
  const double K00 = up.m[0] * lo.m[0] + up.m[1] * lo.m[2];
  const double K01 = up.m[0] * lo.m[1] + up.m[1] * lo.m[3];
  const double K10 = up.m[2] * lo.m[0] + up.m[3] * lo.m[2];
  const double K11 = up.m[2] * lo.m[1] + up.m[3] * lo.m[3];
  k.h_bar_1 = 1.0 - K00;
  k.h_bar_3 = K01;
  k.h_bar_2 = up.m[0] * lo.c[0] + up.m[1] * lo.c[1] + up.c[0];
  k.p_bar_1 = 1.0 - K11;
  k.p_bar_3 = K10;
  k.p_bar_2 = up.m[2] * lo.c[0] + up.m[3] * lo.c[1] + up.c[1];

  const double L00 = lo.m[0] * up.m[0] + lo.m[1] * up.m[2];
  const double L01 = lo.m[0] * up.m[1] + lo.m[1] * up.m[3];
  const double L10 = lo.m[2] * up.m[0] + lo.m[3] * up.m[2];
  const double L11 = lo.m[2] * up.m[1] + lo.m[3] * up.m[3];
  k.h_lo_1 = 1.0 - L00;
  k.h_lo_3 = L01;
  k.h_lo_2 = lo.m[0] * up.c[0] + lo.m[1] * up.c[1] + lo.c[0];
  k.p_lo_1 = 1.0 - L11;
  k.p_lo_3 = L10;
  k.p_lo_2 = lo.m[2] * up.c[0] + lo.m[3] * up.c[1] + lo.c[1];
  return k;
}

}  // namespace detail

/// Solves the fixed-point system of the requested branch in closed form via
/// the decoupled 2x2 eliminations. No hypothesis is needed to form the
/// coefficients; positivity of the solution is checked post hoc and reported.
inline ClosedFormResult closed_form_rectangle(const ModelSpec& spec, Branch branch = Branch::R,
                                              double det_tol = 1e-10) {
  spec.require_valid();
  if (!(det_tol > 0.0)) fail(errc::invalid_spec, "det_tol must be > 0");

  ClosedFormCoefficients k = branch == Branch::R ? detail::r_closed_form_coeffs(spec)
                                                 : detail::s_closed_form_coeffs(spec);
  k.det_bar = k.h_bar_1 * k.p_bar_1 - k.h_bar_3 * k.p_bar_3;
  k.det_lo = k.h_lo_1 * k.p_lo_1 - k.h_lo_3 * k.p_lo_3;

  const double scale_bar =
      std::max({std::abs(k.h_bar_1 * k.p_bar_1), std::abs(k.h_bar_3 * k.p_bar_3), 1e-300});
  const double scale_lo =
      std::max({std::abs(k.h_lo_1 * k.p_lo_1), std::abs(k.h_lo_3 * k.p_lo_3), 1e-300});
  if (std::abs(k.det_bar) < det_tol * scale_bar || std::abs(k.det_lo) < det_tol * scale_lo)
    fail(errc::non_unique_system, "fixed-point system determinant vanishes");

  ClosedFormResult out;
  out.coeffs = k;
  out.rect.branch = branch;
  out.rect.hi1 = (k.h_bar_2 * k.p_bar_1 + k.h_bar_3 * k.p_bar_2) / k.det_bar;
  out.rect.hi2 = (k.p_bar_2 * k.h_bar_1 + k.p_bar_3 * k.h_bar_2) / k.det_bar;
  out.rect.lo1 = (k.h_lo_2 * k.p_lo_1 + k.h_lo_3 * k.p_lo_2) / k.det_lo;
  out.rect.lo2 = (k.p_lo_2 * k.h_lo_1 + k.p_lo_3 * k.h_lo_2) / k.det_lo;

  out.invariants_ok = out.rect.positive();
  if (!out.invariants_ok) out.invariant_note = "solution violates 0 < lo <= hi";
  const DerivedBounds bounds = derive_bounds(spec);
  const std::optional<double> cap1 = branch == Branch::R ? bounds.A_bar_1 : bounds.B_bar_1;
  const std::optional<double> cap2 = branch == Branch::R ? bounds.A_bar_2 : bounds.B_bar_2;
  if (out.invariants_ok && cap1 && cap2) {
    const double slack1 = 1e-12 * std::abs(*cap1);
    const double slack2 = 1e-12 * std::abs(*cap2);
    if (out.rect.hi1 > *cap1 + slack1 || out.rect.hi2 > *cap2 + slack2) {
      out.invariants_ok = false;
      out.invariant_note = "solution escapes the ultimate-bound box";
    }
  }
  return out;
}

struct ConstantCoefficientCheck {
  bool ok = false;
  // Cross-multiplied margins of a2/b2 < a0/b0 < a1/b1 plus the product
  // inequality (a1 - 2k*chi1/d3)(b2 - 2l*chi2/d3) > a2*b1.
  double margin_left = 0.0;
  double margin_right = 0.0;
  double margin_product = 0.0;
};

/// Evaluates the constant-coefficient uniqueness condition. Requires every
/// field to be declared constant (inf = sup).
inline ConstantCoefficientCheck constant_coefficient_check(const ModelSpec& spec) {
  spec.require_valid();
  if (!spec.constant_coefficients())
    fail(errc::not_constant_coefficients, "all six coefficients must have inf = sup");
  const ModelConstants& c = spec.constants;
  const double a0 = spec.a0.inf, a1 = spec.a1.inf, a2 = spec.a2.inf;
  const double b0 = spec.b0.inf, b1 = spec.b1.inf, b2 = spec.b2.inf;
  ConstantCoefficientCheck out;
  out.margin_left = a0 * b2 - a2 * b0;   // a2/b2 < a0/b0
  out.margin_right = a1 * b0 - a0 * b1;  // a0/b0 < a1/b1
  out.margin_product =
      (a1 - 2.0 * c.k * c.chi1 / c.d3) * (b2 - 2.0 * c.l * c.chi2 / c.d3) - a2 * b1;
  out.ok = out.margin_left > 0.0 && out.margin_right > 0.0 && out.margin_product > 0.0;
  return out;
}

/// The unique constant-coefficient rectangle point of both fixed-point
/// systems: ((a0*b2 - a2*b0)/(b2*a1 - b1*a2), (b0*a1 - b1*a0)/(b2*a1 - b1*a2)).
inline std::array<double, 2> constant_coexistence_point(const ModelSpec& spec) {
  if (!spec.constant_coefficients())
    fail(errc::not_constant_coefficients, "all six coefficients must have inf = sup");
  const double a0 = spec.a0.inf, a1 = spec.a1.inf, a2 = spec.a2.inf;
  const double b0 = spec.b0.inf, b1 = spec.b1.inf, b2 = spec.b2.inf;
  const double den = b2 * a1 - b1 * a2;
  return {(a0 * b2 - a2 * b0) / den, (b0 * a1 - b1 * a0) / den};
}

}  // namespace coexist
