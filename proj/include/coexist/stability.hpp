#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "coexist/errors.hpp"
#include "coexist/model.hpp"
#include "coexist/rectangle.hpp"

namespace coexist {

struct QQValues {
  double q1, Q1, q2, Q2;
};

/// Evaluates the four stability functionals at time t for a given attracting
/// rectangle. The time-dependent extrema over x are exact for the cosine
/// spatial profile: a_inf(t) = mean + time term - |space_amp|, and likewise
/// with + for the supremum.
inline QQValues qQ_profiles(const ModelSpec& spec, const Rectangle& rect, double t) {
  if (!rect.positive()) fail(errc::invalid_spec, "rectangle must satisfy 0 < lo <= hi");
  const ModelConstants& c = spec.constants;
  if (!(c.lambda > 0.0)) fail(errc::invalid_spec, "lambda must be > 0");

  const double lo_signal = c.k * rect.lo1 + c.l * rect.lo2;
  const double hi_signal = c.k * rect.hi1 + c.l * rect.hi2;
  const double grad_term = (c.chi1 * c.chi1 * rect.hi1 * rect.hi1 / c.d1 +
                            c.chi2 * c.chi2 * rect.hi2 * rect.hi2 / c.d2) /
                           (4.0 * c.lambda * c.d3);
  const double cross = (spec.a2.sup_at(t) * rect.hi1 + spec.b1.sup_at(t) * rect.hi2) / 2.0;

  QQValues v;
  v.q1 = 2.0 * spec.a1.inf_at(t) * rect.lo1 + spec.a2.inf_at(t) * rect.lo2 +
         c.chi1 * lo_signal / (2.0 * c.d3);
  v.Q1 = spec.a0.sup_at(t) + c.chi1 * hi_signal / (2.0 * c.d3) + c.k * c.k * grad_term + cross;
  v.q2 = 2.0 * spec.b2.inf_at(t) * rect.lo2 + spec.b1.inf_at(t) * rect.lo1 +
         c.chi2 * lo_signal / (2.0 * c.d3);
  v.Q2 = spec.b0.sup_at(t) + c.chi2 * hi_signal / (2.0 * c.d3) + c.l * c.l * grad_term + cross;
  return v;
}

/// Windowed estimate of the time-averaged decay condition.
struct StabilityProfile {
  double mu_estimate = 0.0;
  double window = 0.0;
  double slack = 0.0;  // quadrature error allowance entering the verdict
  std::vector<std::array<double, 5>> samples;  // rows (t, q1, Q1, q2, Q2)
  bool verdict = false;
  Branch branch = Branch::R;
};

/// Default temporal scales for the sliding-window average: ten periods of the
/// slowest nonzero coefficient frequency (ten time units when every field is
/// time-constant), a horizon of five windows and 200 quadrature nodes per
/// period.
struct StabilityDefaults {
  double window, horizon, quadrature_dt;
};

inline StabilityDefaults stability_defaults(const ModelSpec& spec) {
  double min_freq = 0.0;
  for (const CoefficientField* f : {&spec.a0, &spec.a1, &spec.a2, &spec.b0, &spec.b1, &spec.b2}) {
    if (f->time_amp != 0.0 && f->time_freq != 0.0) {
      const double w = std::abs(f->time_freq);
      if (min_freq == 0.0 || w < min_freq) min_freq = w;
    }
  }
  const double period = min_freq > 0.0 ? 2.0 * std::numbers::pi / min_freq : 1.0;
  return {10.0 * period, 50.0 * period, period / 200.0};
}

namespace detail {

// Max over sliding windows of m nodes of the trapezoid average of f sampled
// at spacing dt on [0, horizon].
inline double sliding_window_max_average(const std::vector<double>& f, double dt, int m) {
  std::vector<double> prefix(f.size(), 0.0);
  for (std::size_t i = 1; i < f.size(); ++i)
    prefix[i] = prefix[i - 1] + 0.5 * dt * (f[i - 1] + f[i]);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j + m < f.size(); ++j)
    best = std::max(best, (prefix[j + m] - prefix[j]) / (m * dt));
  return best;
}

}  // namespace detail

/// Approximates the limsup of the window averages of max(Q1-q1, Q2-q2) by the
/// maximum over sliding windows in [0, horizon]. Time-constant coefficients
/// take the exact pointwise path (no windowing error). The verdict demands
/// strict negativity with a margin above the quadrature slack, estimated by
/// Richardson comparison against a half-step pass.
inline StabilityProfile check_average_condition(const ModelSpec& spec, const Rectangle& rect,
                                                double horizon, double window,
                                                double quadrature_dt) {
  spec.require_valid();
  if (!(window > 0.0) || !(horizon >= 2.0 * window))
    fail(errc::invalid_spec, "require horizon >= 2*window > 0");
  if (!(quadrature_dt > 0.0)) fail(errc::invalid_spec, "quadrature_dt must be > 0");

  StabilityProfile prof;
  prof.branch = rect.branch;
  prof.window = window;

  if (spec.time_independent()) {
    const QQValues v = qQ_profiles(spec, rect, 0.0);
    prof.mu_estimate = std::max(v.Q1 - v.q1, v.Q2 - v.q2);
    prof.slack = 0.0;
    prof.samples.push_back({0.0, v.q1, v.Q1, v.q2, v.Q2});
    prof.verdict = prof.mu_estimate < 0.0;
    return prof;
  }

  const int m = std::max(1, static_cast<int>(std::llround(window / quadrature_dt)));
  const double dt = window / m;
  const int n = std::max(2 * m, static_cast<int>(std::llround(horizon / dt)));

  std::vector<double> coarse(n + 1), fine(2 * n + 1);
  for (int i = 0; i <= n; ++i) {
    const double t = i * dt;
    const QQValues v = qQ_profiles(spec, rect, t);
    coarse[i] = std::max(v.Q1 - v.q1, v.Q2 - v.q2);
    prof.samples.push_back({t, v.q1, v.Q1, v.q2, v.Q2});
  }
  for (int i = 0; i <= 2 * n; ++i) {
    const QQValues v = qQ_profiles(spec, rect, i * (dt / 2.0));
    fine[i] = std::max(v.Q1 - v.q1, v.Q2 - v.q2);
  }

  const double mu_coarse = detail::sliding_window_max_average(coarse, dt, m);
  const double mu_fine = detail::sliding_window_max_average(fine, dt / 2.0, 2 * m);
  prof.mu_estimate = mu_fine;
  prof.slack = 2.0 * std::abs(mu_fine - mu_coarse);
  prof.verdict = prof.mu_estimate + prof.slack < 0.0;
  return prof;
}

inline StabilityProfile check_average_condition(const ModelSpec& spec, const Rectangle& rect) {
  const StabilityDefaults d = stability_defaults(spec);
  return check_average_condition(spec, rect, d.horizon, d.window, d.quadrature_dt);
}

/// The chi = 0 rectangle in closed form (quotients of the competitive
/// comparison bounds); requires the persistence condition for positivity.
inline Rectangle chi_zero_rectangle(const ModelSpec& spec) {
  Rectangle r;
  r.branch = Branch::R;
  r.lo1 = (spec.a0.inf * spec.b2.inf - spec.a2.sup * spec.b0.sup) /
          (spec.a1.sup * spec.b2.inf - spec.a2.sup * spec.b1.inf);
  r.hi1 = (spec.a0.sup * spec.b2.sup - spec.a2.inf * spec.b0.inf) /
          (spec.a1.inf * spec.b2.sup - spec.a2.inf * spec.b1.sup);
  r.lo2 = (spec.a1.inf * spec.b0.inf - spec.a0.sup * spec.b1.sup) /
          (spec.a1.inf * spec.b2.sup - spec.a2.inf * spec.b1.sup);
  r.hi2 = (spec.a1.sup * spec.b0.sup - spec.a0.inf * spec.b1.inf) /
          (spec.a1.sup * spec.b2.inf - spec.a2.sup * spec.b1.inf);
  return r;
}

struct CorollaryReport {
  bool ok = false;
  bool premise_u = false;  // a0.sup/a0.inf < 2 a1.inf/a1.sup
  bool premise_v = false;  // b0.sup/b0.inf < 2 b2.inf/b2.sup
  bool cond_1_5 = false;
  double lhs1 = 0.0, rhs1 = 0.0;
  double lhs2 = 0.0, rhs2 = 0.0;
  double margin1 = 0.0, margin2 = 0.0;
  Rectangle rect;
};

/// Uniqueness/stability test for the chemotaxis-free system: checks the two
/// premises, the persistence condition and the two displayed smallness
/// inequalities on the competition coefficients, all evaluated on the chi = 0
/// rectangle.
inline CorollaryReport check_corollary(const ModelSpec& spec) {
  spec.require_valid();
  if (spec.constants.chi1 != 0.0 || spec.constants.chi2 != 0.0)
    fail(errc::chemotaxis_not_zero, "the corollary concerns the chi1 = chi2 = 0 system");

  CorollaryReport rep;
  rep.premise_u = spec.a0.sup * spec.a1.sup < 2.0 * spec.a1.inf * spec.a0.inf;
  rep.premise_v = spec.b0.sup * spec.b2.sup < 2.0 * spec.b2.inf * spec.b0.inf;
  rep.cond_1_5 = spec.a0.inf > spec.a2.sup * spec.b0.sup / spec.b2.inf &&
                 spec.b0.inf > spec.a0.sup * spec.b1.sup / spec.a1.inf;
  rep.rect = chi_zero_rectangle(spec);

  const double den_u = spec.a1.sup * spec.b2.inf - spec.a2.sup * spec.b1.inf;
  const double den_v = spec.b2.sup * spec.a1.inf - spec.b1.sup * spec.a2.inf;
  rep.lhs1 = spec.a2.sup * (rep.rect.hi1 / 2.0 +
                            (2.0 * spec.a1.inf * spec.b0.sup - spec.a0.sup * spec.b1.inf) / den_u) +
             spec.b1.sup / 2.0 * rep.rect.hi2 - spec.a2.inf * rep.rect.lo2;
  rep.rhs1 = spec.b2.inf * (2.0 * spec.a1.inf * spec.a0.inf - spec.a0.sup * spec.a1.sup) / den_u;
  rep.lhs2 = spec.b1.sup * (rep.rect.hi2 / 2.0 +
                            (2.0 * spec.b2.inf * spec.a0.sup - spec.b0.sup * spec.a2.inf) / den_v) +
             spec.a2.sup / 2.0 * rep.rect.hi1 - spec.b1.inf * rep.rect.lo1;
  rep.rhs2 = spec.a1.inf * (2.0 * spec.b2.inf * spec.b0.inf - spec.b0.sup * spec.b2.sup) / den_v;
  rep.margin1 = rep.rhs1 - rep.lhs1;
  rep.margin2 = rep.rhs2 - rep.lhs2;
  rep.ok = rep.premise_u && rep.premise_v && rep.cond_1_5 && rep.margin1 > 0.0 &&
           rep.margin2 > 0.0;
  return rep;
}

}  // namespace coexist
