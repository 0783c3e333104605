#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "coexist/errors.hpp"
#include "coexist/model.hpp"

namespace coexist {

/// State of the 4-D comparison system: envelopes (u_hi, u_lo) and
/// (v_hi, v_lo) around the two populations.
struct OdeState4 {
  double u_hi = 0.0, u_lo = 0.0;
  double v_hi = 0.0, v_lo = 0.0;

  bool ordered() const { return u_lo <= u_hi && v_lo <= v_hi; }
};

/// State of the plain two-species competition system.
struct OdeState2 {
  double u = 0.0, v = 0.0;
};

template <class State>
struct Trajectory {
  std::vector<double> t;
  std::vector<State> y;

  const State& back() const { return y.back(); }
};

namespace detail {

constexpr double kNegClampTol = 1e-12;
constexpr double kOverflowGuard = 1e12;

// Logistic-competition growth rate; shared between the 2-D and 4-D systems
// so a collapsed envelope reproduces the plain system bit for bit.
inline double lv_rate(double c0, double c1, double c2, double self, double other) {
  return c0 - c1 * self - c2 * other;
}

template <std::size_t N, class F>
inline std::array<double, N> rk4_step(F&& f, double t, const std::array<double, N>& y,
                                      double dt) {
  const auto k1 = f(t, y);
  std::array<double, N> tmp;
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * dt * k1[i];
  const auto k2 = f(t + 0.5 * dt, tmp);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + 0.5 * dt * k2[i];
  const auto k3 = f(t + 0.5 * dt, tmp);
  for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + dt * k3[i];
  const auto k4 = f(t + dt, tmp);
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i)
    out[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

template <std::size_t N>
inline void clamp_or_fail(std::array<double, N>& y, double t) {
  for (double& c : y) {
    if (c < 0.0) {
      if (c < -kNegClampTol)
        fail(errc::step_unstable, "component fell below -1e-12 at t=" + std::to_string(t));
      c = 0.0;
    }
    if (!(std::abs(c) < kOverflowGuard))
      fail(errc::step_unstable, "component exceeded overflow guard at t=" + std::to_string(t));
  }
}

inline std::array<double, 4> comparison_rhs(const ModelSpec& s, double t,
                                            const std::array<double, 4>& y) {
  const ModelConstants& c = s.constants;
  const double sig_hi = c.k * y[0] + c.l * y[2];
  const double sig_lo = c.k * y[1] + c.l * y[3];
  const double chemo1 = c.chi1 / c.d3 * (sig_hi - sig_lo);
  const double chemo2 = c.chi2 / c.d3 * (sig_hi - sig_lo);
  return {
      y[0] * (chemo1 + lv_rate(s.a0.sup_at(t), s.a1.inf_at(t), s.a2.inf_at(t), y[0], y[3])),
      y[1] * (-chemo1 + lv_rate(s.a0.inf_at(t), s.a1.sup_at(t), s.a2.sup_at(t), y[1], y[2])),
      y[2] * (chemo2 + lv_rate(s.b0.sup_at(t), s.b2.inf_at(t), s.b1.inf_at(t), y[2], y[1])),
      y[3] * (-chemo2 + lv_rate(s.b0.inf_at(t), s.b2.sup_at(t), s.b1.sup_at(t), y[3], y[0])),
  };
}

inline std::array<double, 2> lv_rhs(const ModelSpec& s, double t, const std::array<double, 2>& y) {
  const double zero = 0.0;
  return {
      y[0] * (zero + lv_rate(s.a0.sup_at(t), s.a1.inf_at(t), s.a2.inf_at(t), y[0], y[1])),
      y[1] * (zero + lv_rate(s.b0.sup_at(t), s.b2.inf_at(t), s.b1.inf_at(t), y[1], y[0])),
  };
}

}  // namespace detail

/// Integrates the 4-D comparison system with classical fixed-step RK4.
/// Ordered initial data stays ordered; roundoff-scale negative undershoot is
/// clamped to zero and anything worse aborts.
inline Trajectory<OdeState4> solve_comparison4(const ModelSpec& spec, const OdeState4& init,
                                               double t0, double t_end, double dt) {
  spec.require_valid();
  if (!init.ordered()) fail(errc::invalid_spec, "initial envelopes must be ordered");
  if (init.u_lo < 0.0 || init.v_lo < 0.0) fail(errc::invalid_spec, "initial data must be >= 0");
  if (!(dt > 0.0) || !(t_end >= t0)) fail(errc::invalid_spec, "require dt > 0 and t_end >= t0");

  const long long n = std::llround((t_end - t0) / dt);
  Trajectory<OdeState4> traj;
  traj.t.reserve(n + 1);
  traj.y.reserve(n + 1);
  std::array<double, 4> y = {init.u_hi, init.u_lo, init.v_hi, init.v_lo};
  traj.t.push_back(t0);
  traj.y.push_back(init);
  for (long long i = 0; i < n; ++i) {
    const double t = t0 + i * dt;
    y = detail::rk4_step<4>(
        [&spec](double tt, const std::array<double, 4>& s) {
          return detail::comparison_rhs(spec, tt, s);
        },
        t, y, dt);
    detail::clamp_or_fail(y, t + dt);
    traj.t.push_back(t0 + (i + 1) * dt);
    traj.y.push_back({y[0], y[1], y[2], y[3]});
  }
  return traj;
}

/// Integrates the plain two-species system (space-independent coefficients).
inline Trajectory<OdeState2> solve_lv(const ModelSpec& spec, const OdeState2& init, double t0,
                                      double t_end, double dt) {
  spec.require_valid();
  if (!spec.space_independent())
    fail(errc::invalid_spec, "solve_lv requires space-independent coefficients");
  if (!(init.u > 0.0) || !(init.v > 0.0)) fail(errc::invalid_spec, "initial data must be > 0");
  if (!(dt > 0.0) || !(t_end >= t0)) fail(errc::invalid_spec, "require dt > 0 and t_end >= t0");

  const long long n = std::llround((t_end - t0) / dt);
  Trajectory<OdeState2> traj;
  traj.t.reserve(n + 1);
  traj.y.reserve(n + 1);
  std::array<double, 2> y = {init.u, init.v};
  traj.t.push_back(t0);
  traj.y.push_back(init);
  for (long long i = 0; i < n; ++i) {
    const double t = t0 + i * dt;
    y = detail::rk4_step<2>(
        [&spec](double tt, const std::array<double, 2>& s) { return detail::lv_rhs(spec, tt, s); },
        t, y, dt);
    detail::clamp_or_fail(y, t + dt);
    traj.t.push_back(t0 + (i + 1) * dt);
    traj.y.push_back({y[0], y[1]});
  }
  return traj;
}

/// Entire-solution samples obtained by pullback plus the two-start agreement
/// certificate. w is reconstructed as (k u + l v) / lambda.
struct PullbackResult {
  std::vector<double> t;
  std::vector<double> u, v, w;
  double deviation = 0.0;  // max pairwise gap between the two starts on the grid
  bool certified = false;
};

/// Integrates from min(t_grid) - t_back with two well-separated positive
/// starts and samples the first trajectory on t_grid. The certificate passes
/// iff the two starts agree within tol on every grid point; a failure means
/// t_back was too short.
inline PullbackResult pullback_entire_solution(const ModelSpec& spec, double t_back,
                                               const std::vector<double>& t_grid, double tol,
                                               double dt = 1e-3) {
  spec.require_valid();
  if (!spec.space_independent())
    fail(errc::invalid_spec, "pullback requires space-independent coefficients");
  if (t_grid.empty()) fail(errc::invalid_spec, "t_grid must be nonempty");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) fail(errc::invalid_spec, "t_grid must be increasing");
  if (!(t_back > 0.0) || !(tol > 0.0) || !(dt > 0.0))
    fail(errc::invalid_spec, "t_back, tol and dt must be > 0");
  const HypothesisReport hyp = check_hypotheses(spec);
  if (!hyp.cond_1_5)
    fail(errc::hypothesis_not_met, "pullback requires the persistence condition (1.5)");

  const std::array<std::array<double, 2>, 2> starts = {{{0.1, 0.1}, {10.0, 10.0}}};
  std::array<std::vector<std::array<double, 2>>, 2> samples;

  for (int s = 0; s < 2; ++s) {
    double t = t_grid.front() - t_back;
    std::array<double, 2> y = starts[s];
    auto rhs = [&spec](double tt, const std::array<double, 2>& st) {
      return detail::lv_rhs(spec, tt, st);
    };
    for (double target : t_grid) {
      const double span = target - t;
      if (span > 0.0) {
        const long long steps = std::max<long long>(1, (long long)std::ceil(span / dt - 1e-9));
        const double h = span / steps;
        for (long long i = 0; i < steps; ++i) {
          y = detail::rk4_step<2>(rhs, t + i * h, y, h);
          detail::clamp_or_fail(y, t + (i + 1) * h);
        }
        t = target;
      }
      samples[s].push_back(y);
    }
  }

  PullbackResult out;
  out.t = t_grid;
  const ModelConstants& c = spec.constants;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    out.u.push_back(samples[0][i][0]);
    out.v.push_back(samples[0][i][1]);
    out.w.push_back((c.k * samples[0][i][0] + c.l * samples[0][i][1]) / c.lambda);
    out.deviation = std::max(out.deviation,
                             std::max(std::abs(samples[0][i][0] - samples[1][i][0]),
                                      std::abs(samples[0][i][1] - samples[1][i][1])));
  }
  out.certified = out.deviation < tol;
  return out;
}

/// The contraction functional L(t) = ln(u_hi/u_lo) + ln(v_hi/v_lo) evaluated
/// along a comparison trajectory; nonincreasing under (H7).
inline std::vector<double> lyapunov_ratio(const Trajectory<OdeState4>& traj) {
  std::vector<double> out;
  out.reserve(traj.y.size());
  for (const OdeState4& s : traj.y) {
    if (!(s.u_hi > 0.0) || !(s.u_lo > 0.0) || !(s.v_hi > 0.0) || !(s.v_lo > 0.0))
      fail(errc::non_positive_component, "lyapunov_ratio requires strictly positive components");
    out.push_back(std::log(s.u_hi / s.u_lo) + std::log(s.v_hi / s.v_lo));
  }
  return out;
}

}  // namespace coexist
