#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "coexist/errors.hpp"
#include "coexist/model.hpp"
#include "coexist/rectangle.hpp"
#include "coexist/tridiag.hpp"

namespace coexist {

/// Cell-centered grid on [0, L] with homogeneous Neumann closure.
struct Grid1D {
  double length = 1.0;
  int n_cells = 0;

  double h() const { return length / n_cells; }
  double x_center(int j) const { return (j + 0.5) * h(); }

  void require_valid() const {
    if (n_cells < 4) fail(errc::invalid_spec, "grid needs n_cells >= 4");
    if (!(length > 0.0)) fail(errc::invalid_spec, "grid length must be > 0");
  }

  bool operator==(const Grid1D& o) const {
    return length == o.length && n_cells == o.n_cells;
  }
};

/// Discrete fields at one instant; w always solves the discrete elliptic
/// equation for the stored u, v.
struct SimState {
  double t = 0.0;
  std::vector<double> u, v, w;
};

struct DiagRow {
  double t;
  double min_u, max_u, min_v, max_v, min_w, max_w;
  double mass_u, mass_v;
};

struct RunDiagnostics {
  Grid1D grid;
  double dt = 0.0;
  std::vector<DiagRow> rows;
  std::vector<SimState> snapshots;  // fields at the saved times
  std::optional<double> a1_entry_time;  // observed entry under the H1 ultimate bound
};

/// Scheme error allowance used when checking continuum statements on discrete runs.
inline double tol_num(const Grid1D& grid, double dt) {
  return 10.0 * grid.h() * grid.h() + 10.0 * dt;
}

/// Solves (lambda I - d3 Delta_h) w = k u + l v with ghost-cell Neumann
/// closure by a tridiagonal direct solve.
inline std::vector<double> solve_elliptic(const Grid1D& grid, const std::vector<double>& u,
                                          const std::vector<double>& v,
                                          const ModelConstants& constants) {
  grid.require_valid();
  if (!(constants.lambda > 0.0)) fail(errc::singular_system, "lambda must be > 0");
  const int n = grid.n_cells;
  if ((int)u.size() != n || (int)v.size() != n)
    fail(errc::invalid_spec, "field size does not match grid");
  const double h2 = grid.h() * grid.h();
  const double off = -constants.d3 / h2;
  std::vector<double> lower(n, off), upper(n, off), diag(n), rhs(n);
  for (int j = 0; j < n; ++j) {
    const int neighbors = (j == 0 || j == n - 1) ? 1 : 2;
    diag[j] = constants.lambda + constants.d3 * neighbors / h2;
    rhs[j] = constants.k * u[j] + constants.l * v[j];
  }
  lower[0] = 0.0;
  upper[n - 1] = 0.0;
  return solve_tridiagonal(lower, diag, upper, rhs);
}

namespace detail {

// Second difference with ghost cells w[-1] = w[0], w[n] = w[n-1].
inline double laplacian_h(const std::vector<double>& w, int j, double h2) {
  const int n = (int)w.size();
  const double left = j > 0 ? w[j - 1] : w[j];
  const double right = j < n - 1 ? w[j + 1] : w[j];
  return (left - 2.0 * w[j] + right) / h2;
}

// Conservative upwind chemotaxis divergence: returns -d/dx(chi q w_x) per
// cell, with the face density taken from the cell the drift leaves.
inline void chemotaxis_divergence(const std::vector<double>& q, const std::vector<double>& w,
                                  double chi, double h, std::vector<double>& out) {
  const int n = (int)q.size();
  std::vector<double> flux(n + 1, 0.0);  // faces 0..n, boundary faces stay 0
  for (int f = 1; f < n; ++f) {
    const double grad = (w[f] - w[f - 1]) / h;
    const double upwind = grad > 0.0 ? q[f - 1] : q[f];
    flux[f] = chi * upwind * grad;
  }
  for (int j = 0; j < n; ++j) out[j] = -(flux[j + 1] - flux[j]) / h;
}

inline double max_face_gradient(const std::vector<double>& w, double h) {
  double m = 0.0;
  for (std::size_t f = 1; f < w.size(); ++f)
    m = std::max(m, std::abs(w[f] - w[f - 1]) / h);
  return m;
}

// Backward-Euler diffusion solve: (I - dt d Delta_h) out = in.
inline std::vector<double> implicit_diffusion(const Grid1D& grid, const std::vector<double>& in,
                                              double d, double dt) {
  const int n = grid.n_cells;
  const double r = dt * d / (grid.h() * grid.h());
  std::vector<double> lower(n, -r), upper(n, -r), diag(n);
  for (int j = 0; j < n; ++j) {
    const int neighbors = (j == 0 || j == n - 1) ? 1 : 2;
    diag[j] = 1.0 + r * neighbors;
  }
  lower[0] = 0.0;
  upper[n - 1] = 0.0;
  return solve_tridiagonal(lower, diag, upper, in);
}

inline void clamp_field(std::vector<double>& f, double t) {
  for (double& x : f) {
    if (x < 0.0) {
      if (x < -1e-12)
        fail(errc::step_unstable, "field fell below -1e-12 at t=" + std::to_string(t));
      x = 0.0;
    }
    if (!(std::abs(x) < 1e12))
      fail(errc::step_unstable, "field exceeded overflow guard at t=" + std::to_string(t));
  }
}

}  // namespace detail

/// One IMEX step: explicit upwinded chemotaxis flux and reactions, implicit
/// diffusion, then a fresh elliptic solve for the new signal field.
inline SimState step(const SimState& state, const ModelSpec& spec, const Grid1D& grid,
                     double dt) {
  grid.require_valid();
  const int n = grid.n_cells;
  const double h = grid.h();
  const ModelConstants& c = spec.constants;

  const double max_grad = detail::max_face_gradient(state.w, h);
  const double chi_max = std::max(c.chi1, c.chi2);
  if (dt * chi_max * max_grad / h > 0.5)
    fail(errc::cfl_violated, "advective CFL dt*max|chi w_x|/h exceeds 1/2");

  std::vector<double> adv_u(n), adv_v(n), u_star(n), v_star(n);
  detail::chemotaxis_divergence(state.u, state.w, c.chi1, h, adv_u);
  detail::chemotaxis_divergence(state.v, state.w, c.chi2, h, adv_v);
  for (int j = 0; j < n; ++j) {
    const double x = grid.x_center(j);
    const double ru = state.u[j] * (spec.a0.value(state.t, x, grid.length) -
                                    spec.a1.value(state.t, x, grid.length) * state.u[j] -
                                    spec.a2.value(state.t, x, grid.length) * state.v[j]);
    const double rv = state.v[j] * (spec.b0.value(state.t, x, grid.length) -
                                    spec.b1.value(state.t, x, grid.length) * state.u[j] -
                                    spec.b2.value(state.t, x, grid.length) * state.v[j]);
    u_star[j] = state.u[j] + dt * (adv_u[j] + ru);
    v_star[j] = state.v[j] + dt * (adv_v[j] + rv);
  }

  SimState next;
  next.t = state.t + dt;
  next.u = detail::implicit_diffusion(grid, u_star, c.d1, dt);
  next.v = detail::implicit_diffusion(grid, v_star, c.d2, dt);
  detail::clamp_field(next.u, next.t);
  detail::clamp_field(next.v, next.t);
  next.w = solve_elliptic(grid, next.u, next.v, c);
  return next;
}

/// Cosine initial profile base + amp*cos(mode*pi*x/L), floored at zero.
struct FieldInit {
  double base = 0.0;
  double amp = 0.0;
  int mode = 0;

  std::vector<double> sample(const Grid1D& grid) const {
    std::vector<double> f(grid.n_cells);
    for (int j = 0; j < grid.n_cells; ++j) {
      const double x = grid.x_center(j);
      f[j] = std::max(0.0, base + amp * std::cos(mode * std::numbers::pi * x / grid.length));
    }
    return f;
  }
};

inline SimState make_initial_state(const ModelSpec& spec, const Grid1D& grid,
                                   const FieldInit& init_u, const FieldInit& init_v) {
  SimState s;
  s.t = 0.0;
  s.u = init_u.sample(grid);
  s.v = init_v.sample(grid);
  s.w = solve_elliptic(grid, s.u, s.v, spec.constants);
  return s;
}

namespace detail {

inline DiagRow diag_row(const SimState& s, double h) {
  DiagRow r;
  r.t = s.t;
  const auto [umin, umax] = std::minmax_element(s.u.begin(), s.u.end());
  const auto [vmin, vmax] = std::minmax_element(s.v.begin(), s.v.end());
  const auto [wmin, wmax] = std::minmax_element(s.w.begin(), s.w.end());
  r.min_u = *umin;
  r.max_u = *umax;
  r.min_v = *vmin;
  r.max_v = *vmax;
  r.min_w = *wmin;
  r.max_w = *wmax;
  double mu = 0.0, mv = 0.0;
  for (double x : s.u) mu += x;
  for (double x : s.v) mv += x;
  r.mass_u = h * mu;
  r.mass_v = h * mv;
  return r;
}

}  // namespace detail

struct SimulationResult {
  RunDiagnostics diagnostics;
  SimState final_state;
};

/// Time loop with diagnostics recorded every save_every steps (plus the
/// initial and final instants). When (H1) holds, the observed entry time
/// under max u <= A_bar_1 + tol_num is reported.
inline SimulationResult simulate(const ModelSpec& spec, const Grid1D& grid,
                                 const FieldInit& init_u, const FieldInit& init_v, double t_end,
                                 double dt, int save_every) {
  spec.require_valid();
  grid.require_valid();
  if (!(dt > 0.0) || !(t_end > 0.0)) fail(errc::invalid_spec, "require dt > 0 and t_end > 0");
  if (save_every < 1) fail(errc::invalid_spec, "save_every must be >= 1");

  SimulationResult out;
  out.diagnostics.grid = grid;
  out.diagnostics.dt = dt;
  SimState state = make_initial_state(spec, grid, init_u, init_v);
  const double h = grid.h();
  out.diagnostics.rows.push_back(detail::diag_row(state, h));
  out.diagnostics.snapshots.push_back(state);

  const long long n_steps = std::llround(t_end / dt);
  for (long long i = 0; i < n_steps; ++i) {
    state = step(state, spec, grid, dt);
    state.t = (i + 1) * dt;  // keep saved times free of accumulation drift
    if ((i + 1) % save_every == 0 || i + 1 == n_steps) {
      out.diagnostics.rows.push_back(detail::diag_row(state, h));
      out.diagnostics.snapshots.push_back(state);
    }
  }
  out.final_state = state;

  const DerivedBounds bounds = derive_bounds(spec);
  if (bounds.A_bar_1) {
    const double cap = *bounds.A_bar_1 + tol_num(grid, dt);
    std::optional<double> entry;
    for (auto it = out.diagnostics.rows.rbegin(); it != out.diagnostics.rows.rend(); ++it) {
      if (it->max_u <= cap)
        entry = it->t;
      else
        break;
    }
    out.diagnostics.a1_entry_time = entry;
  }
  return out;
}

/// First saved time after which all four rectangle bounds hold (with slack
/// eps) through the end of the run.
inline std::optional<double> envelope_check(const RunDiagnostics& run, const Rectangle& rect,
                                            double eps) {
  if (!(eps > 0.0)) fail(errc::invalid_spec, "eps must be > 0");
  std::optional<double> entry;
  for (auto it = run.rows.rbegin(); it != run.rows.rend(); ++it) {
    const bool inside = it->min_u >= rect.lo1 - eps && it->max_u <= rect.hi1 + eps &&
                        it->min_v >= rect.lo2 - eps && it->max_v <= rect.hi2 + eps;
    if (inside)
      entry = it->t;
    else
      break;
  }
  return entry;
}

struct CornerRun {
  double init_u = 0.0, init_v = 0.0;
  bool stayed = true;
  double worst_excess = 0.0;
};

struct InvarianceReport {
  bool ok = false;
  double tolerance = 0.0;
  std::array<CornerRun, 4> corners;
};

/// Seeds constant fields at the four rectangle corners and verifies the runs
/// stay inside [lo - tol, hi + tol] at every step, tol = 10 h^2 + 10 dt.
inline InvarianceReport invariance_check(const ModelSpec& spec, const Grid1D& grid,
                                         const Rectangle& rect, double dt, double t_end) {
  spec.require_valid();
  grid.require_valid();
  if (!rect.positive()) fail(errc::invalid_spec, "rectangle must satisfy 0 < lo <= hi");

  InvarianceReport rep;
  rep.tolerance = tol_num(grid, dt);
  const std::array<std::array<double, 2>, 4> corners = {{{rect.lo1, rect.lo2},
                                                         {rect.lo1, rect.hi2},
                                                         {rect.hi1, rect.lo2},
                                                         {rect.hi1, rect.hi2}}};
  rep.ok = true;
  const long long n_steps = std::llround(t_end / dt);
  for (int ci = 0; ci < 4; ++ci) {
    CornerRun& corner = rep.corners[ci];
    corner.init_u = corners[ci][0];
    corner.init_v = corners[ci][1];
    SimState state = make_initial_state(spec, grid, FieldInit{corners[ci][0], 0.0, 0},
                                        FieldInit{corners[ci][1], 0.0, 0});
    for (long long i = 0; i < n_steps; ++i) {
      state = step(state, spec, grid, dt);
      for (int j = 0; j < grid.n_cells; ++j) {
        const double excess =
            std::max(std::max(rect.lo1 - state.u[j], state.u[j] - rect.hi1),
                     std::max(rect.lo2 - state.v[j], state.v[j] - rect.hi2));
        if (excess > corner.worst_excess) corner.worst_excess = excess;
      }
    }
    corner.stayed = corner.worst_excess <= rep.tolerance;
    if (!corner.stayed) rep.ok = false;
  }
  return rep;
}

struct EnergySeries {
  std::vector<double> t;
  std::vector<double> energy;
  double fitted_rate = 0.0;  // least-squares slope of ln E over the last half
  bool rate_valid = false;
};

/// Discrete L2 distance between two paired runs on identical grids and save
/// times, with the fitted exponential decay rate.
inline EnergySeries energy_between(const RunDiagnostics& run_a, const RunDiagnostics& run_b) {
  if (!(run_a.grid == run_b.grid)) fail(errc::grid_mismatch, "runs use different grids");
  if (run_a.snapshots.size() != run_b.snapshots.size())
    fail(errc::grid_mismatch, "runs have different save times");
  EnergySeries out;
  const double h = run_a.grid.h();
  for (std::size_t i = 0; i < run_a.snapshots.size(); ++i) {
    const SimState& sa = run_a.snapshots[i];
    const SimState& sb = run_b.snapshots[i];
    if (sa.t != sb.t) fail(errc::grid_mismatch, "runs have different save times");
    double e = 0.0;
    for (int j = 0; j < run_a.grid.n_cells; ++j) {
      const double du = sa.u[j] - sb.u[j];
      const double dv = sa.v[j] - sb.v[j];
      e += du * du + dv * dv;
    }
    out.t.push_back(sa.t);
    out.energy.push_back(h * e);
  }

  // Fit ln E on the last half of the run, ignoring underflowed values.
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = out.t.size() / 2; i < out.t.size(); ++i)
    if (out.energy[i] > 1e-300) pts.emplace_back(out.t[i], std::log(out.energy[i]));
  if (pts.size() >= 2) {
    double st = 0, sy = 0, stt = 0, sty = 0;
    for (auto [t, y] : pts) {
      st += t;
      sy += y;
      stt += t * t;
      sty += t * y;
    }
    const double n = (double)pts.size();
    const double denom = n * stt - st * st;
    if (denom > 0.0) {
      out.fitted_rate = (n * sty - st * sy) / denom;
      out.rate_valid = true;
    }
  }
  return out;
}

}  // namespace coexist
