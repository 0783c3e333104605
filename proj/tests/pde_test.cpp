#include "coexist/pde.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "coexist/ode.hpp"
#include "test_specs.hpp"

using namespace coexist;

namespace {

Grid1D grid_of(int n, double length = 1.0) {
  Grid1D g;
  g.length = length;
  g.n_cells = n;
  return g;
}

TEST(SolveElliptic, ConstantForcingGivesConstantSolution) {
  const Grid1D grid = grid_of(32);
  ModelConstants c;
  c.d3 = 7.0;  // any diffusion; the constant solution is forcing / lambda
  const std::vector<double> u(grid.n_cells, 2.0), v(grid.n_cells, 3.0);
  const std::vector<double> w = solve_elliptic(grid, u, v, c);
  for (double x : w) EXPECT_NEAR(x, 5.0, 1e-12);
}

TEST(SolveElliptic, ZeroForcingGivesZero) {
  const Grid1D grid = grid_of(16);
  const std::vector<double> zero(grid.n_cells, 0.0);
  for (double x : solve_elliptic(grid, zero, zero, ModelConstants{})) EXPECT_EQ(x, 0.0);
}

double manufactured_max_error(int n) {
  // w*(x) = cos(pi x / L) has zero Neumann flux at both ends; feed
  // k u + l v := -d3 (w*)'' + lambda w* and recover w*.
  const Grid1D grid = grid_of(n, 1.0);
  ModelConstants c;
  c.d3 = 0.7;
  c.lambda = 1.3;
  std::vector<double> u(grid.n_cells), v(grid.n_cells, 0.0);
  const double pi = std::numbers::pi;
  for (int j = 0; j < n; ++j) {
    const double x = grid.x_center(j);
    u[j] = (c.d3 * pi * pi + c.lambda) * std::cos(pi * x);
  }
  const std::vector<double> w = solve_elliptic(grid, u, v, c);
  double err = 0.0;
  for (int j = 0; j < n; ++j)
    err = std::max(err, std::abs(w[j] - std::cos(pi * grid.x_center(j))));
  return err;
}

TEST(SolveElliptic, ManufacturedSolutionSecondOrder) {
  const double e64 = manufactured_max_error(64);
  const double e128 = manufactured_max_error(128);
  EXPECT_GT(e64 / e128, 3.5);
  EXPECT_LT(e64 / e128, 4.5);
}

TEST(SolveElliptic, ResidualAndDiscreteIdentity) {
  const Grid1D grid = grid_of(48);
  const ModelSpec s = scen::symmetric_constant_spec();
  const SimState st = make_initial_state(s, grid, {1.2, 0.3, 2}, {0.9, 0.2, 1});
  const double h2 = grid.h() * grid.h();
  double rmax = 0.0, forcing = 0.0, wmax = 0.0, identity = 0.0;
  for (int j = 0; j < grid.n_cells; ++j) {
    const double left = j > 0 ? st.w[j - 1] : st.w[j];
    const double right = j < grid.n_cells - 1 ? st.w[j + 1] : st.w[j];
    const double lap = (left - 2.0 * st.w[j] + right) / h2;
    const double f = s.constants.k * st.u[j] + s.constants.l * st.v[j];
    const double res = s.constants.lambda * st.w[j] - s.constants.d3 * lap - f;
    rmax = std::max(rmax, std::abs(res));
    forcing = std::max(forcing, std::abs(f));
    wmax = std::max(wmax, std::abs(st.w[j]));
    identity += s.constants.d3 * lap + f - s.constants.lambda * st.w[j];
  }
  EXPECT_LE(rmax, 1e-12 * (forcing + s.constants.lambda * wmax));
  EXPECT_NEAR(grid.h() * identity, 0.0, 1e-11);
}

TEST(Step, ZeroStateIsExactlyStationary) {
  const Grid1D grid = grid_of(16);
  const ModelSpec s = scen::symmetric_constant_spec();
  SimState st;
  st.u.assign(grid.n_cells, 0.0);
  st.v.assign(grid.n_cells, 0.0);
  st.w.assign(grid.n_cells, 0.0);
  for (int i = 0; i < 10; ++i) st = step(st, s, grid, 1e-3);
  for (int j = 0; j < grid.n_cells; ++j) {
    EXPECT_EQ(st.u[j], 0.0);
    EXPECT_EQ(st.v[j], 0.0);
    EXPECT_EQ(st.w[j], 0.0);
  }
}

TEST(Step, SpatiallyConstantRunTracksLvToFirstOrder) {
  const ModelSpec s = scen::symmetric_constant_spec();
  const Grid1D grid = grid_of(32);
  const double dt = 1e-3;
  SimState st = make_initial_state(s, grid, {1.0, 0.0, 0}, {1.4, 0.0, 0});
  const auto lv = solve_lv(s, {1.0, 1.4}, 0.0, 10.0, dt);
  double worst_dev = 0.0, worst_spread = 0.0;
  for (int i = 0; i < 10000; ++i) {
    st = step(st, s, grid, dt);
    const auto [mn, mx] = std::minmax_element(st.u.begin(), st.u.end());
    worst_spread = std::max(worst_spread, *mx - *mn);
    worst_dev = std::max(worst_dev, std::abs(st.u[0] - lv.y[i + 1].u));
    worst_dev = std::max(worst_dev, std::abs(st.v[0] - lv.y[i + 1].v));
  }
  // Constant fields stay constant (discrete gradient of constant w vanishes)
  // and the time error of the explicit reaction update is O(dt).
  EXPECT_LT(worst_spread, 1e-12);
  EXPECT_LT(worst_dev, 5.0 * dt);
}

TEST(Step, SymmetricScenarioFlattensToThePoint) {
  const ModelSpec s = scen::symmetric_constant_spec();
  const Grid1D coarse_grid = grid_of(64);
  const SimulationResult coarse =
      simulate(s, coarse_grid, {1.2, 0.1, 1}, {1.2, 0.0, 0}, 30.0, 1e-3, 1000);
  double dev = 0.0;
  for (int j = 0; j < coarse_grid.n_cells; ++j)
    dev = std::max(dev, std::abs(coarse.final_state.u[j] - 1.2));
  EXPECT_LT(dev, 1e-3);

  const SimulationResult fine =
      simulate(s, grid_of(128), {1.2, 0.1, 1}, {1.2, 0.0, 0}, 30.0, 1e-3, 1000);
  double dev_fine = 0.0;
  for (int j = 0; j < 128; ++j)
    dev_fine = std::max(dev_fine, std::abs(fine.final_state.u[j] - 1.2));
  EXPECT_NEAR(dev, dev_fine, 1e-4);
}

TEST(Step, CflViolationIsRejected) {
  // A steep signal gradient with a huge time step trips the advective CFL.
  ModelSpec s = scen::symmetric_constant_spec();
  s.constants.chi1 = 10.0;
  s.constants.chi2 = 10.0;
  s.constants.k = 5.0;
  const Grid1D grid = grid_of(64);
  SimState st = make_initial_state(s, grid, {1.0, 0.9, 1}, {1.0, 0.0, 0});
  try {
    step(st, s, grid, 0.5);
    FAIL() << "expected CflViolated";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::cfl_violated);
  }
}

TEST(Step, MassConservedWithoutReaction) {
  // Reaction switched off entirely (raw fields, bypassing spec validation):
  // diffusion and upwinded chemotaxis fluxes telescope, so h*sum(u) is
  // conserved to roundoff.
  ModelSpec s;
  s.constants.chi1 = 0.1;
  s.constants.chi2 = 0.05;
  const Grid1D grid = grid_of(64);
  SimState st = make_initial_state(s, grid, {1.0, 0.4, 2}, {0.8, 0.3, 1});
  const double h = grid.h();
  auto mass = [&](const std::vector<double>& f) {
    double m = 0.0;
    for (double x : f) m += x;
    return h * m;
  };
  const double mu0 = mass(st.u), mv0 = mass(st.v);
  for (int i = 0; i < 1000; ++i) st = step(st, s, grid, 1e-3);
  EXPECT_NEAR(mass(st.u), mu0, 1e-12);
  EXPECT_NEAR(mass(st.v), mv0, 1e-12);
}

TEST(Step, PositivityUnderCfl) {
  const ModelSpec s = scen::symmetric_constant_spec();
  const Grid1D grid = grid_of(64);
  SimState st = make_initial_state(s, grid, {0.05, 0.05, 3}, {0.05, 0.04, 2});
  for (int i = 0; i < 2000; ++i) {
    st = step(st, s, grid, 1e-3);
    for (double x : st.u) ASSERT_GE(x, 0.0);
    for (double x : st.v) ASSERT_GE(x, 0.0);
  }
}

TEST(Simulate, ZeroInitsGiveZeroDiagnostics) {
  const ModelSpec s = scen::symmetric_constant_spec();
  const SimulationResult sim = simulate(s, grid_of(16), {0.0, 0.0, 0}, {0.0, 0.0, 0}, 0.1,
                                        1e-3, 10);
  for (const DiagRow& r : sim.diagnostics.rows) {
    EXPECT_EQ(r.max_u, 0.0);
    EXPECT_EQ(r.max_v, 0.0);
    EXPECT_EQ(r.max_w, 0.0);
    EXPECT_EQ(r.mass_u, 0.0);
  }
}

TEST(Simulate, PersistenceFromSmallInits) {
  const ModelSpec s = scen::symmetric_constant_spec();
  const SimulationResult sim =
      simulate(s, grid_of(64), {0.01, 0.0, 0}, {0.01, 0.0, 0}, 30.0, 1e-3, 100);
  const RectangleResult rect = iterate_rectangle(s, Branch::R);
  const auto entry = envelope_check(sim.diagnostics, rect.rect, 0.01);
  ASSERT_TRUE(entry.has_value());
  bool after = false;
  for (const DiagRow& r : sim.diagnostics.rows) {
    if (r.t >= *entry) after = true;
    if (after) {
      EXPECT_GE(r.min_u, rect.rect.lo1 - 0.01);
      EXPECT_GE(r.min_v, rect.rect.lo2 - 0.01);
    }
  }
  // Cross-check against the comparison envelope from the same constant init.
  const auto ode = solve_comparison4(s, {0.01, 0.01, 0.01, 0.01}, 0.0, 30.0, 1e-3);
  EXPECT_NEAR(ode.back().u_lo, 1.2, 1e-5);
}

TEST(Simulate, MassMatchesCellSum) {
  const ModelSpec s = scen::symmetric_constant_spec();
  const SimulationResult sim =
      simulate(s, grid_of(32), {1.0, 0.2, 1}, {0.9, 0.1, 2}, 0.5, 1e-3, 50);
  for (std::size_t i = 0; i < sim.diagnostics.rows.size(); ++i) {
    const SimState& snap = sim.diagnostics.snapshots[i];
    double m = 0.0;
    for (double x : snap.u) m += x;
    EXPECT_DOUBLE_EQ(sim.diagnostics.rows[i].mass_u, (1.0 / 32.0) * m);
  }
}

TEST(Simulate, HomogenizationUnderH7) {
  const ModelSpec s = scen::h7_periodic_spec();
  const SimulationResult sim =
      simulate(s, grid_of(64), {1.0, 0.3, 2}, {1.0, 0.0, 0}, 10.0, 1e-3, 500);
  const DiagRow first = sim.diagnostics.rows.front();
  const DiagRow last = sim.diagnostics.rows.back();
  EXPECT_GT(first.max_u - first.min_u, 0.5);
  EXPECT_LT(last.max_u - last.min_u, 1e-2 * (first.max_u - first.min_u));
}

TEST(EnvelopeCheck, TrivialAndInconsistentRectangles) {
  const ModelSpec s = scen::symmetric_constant_spec();
  const SimulationResult sim =
      simulate(s, grid_of(32), {1.2, 0.0, 0}, {1.2, 0.0, 0}, 1.0, 1e-3, 100);
  Rectangle wide;
  wide.lo1 = wide.lo2 = 0.5;
  wide.hi1 = wide.hi2 = 2.0;
  const auto entry = envelope_check(sim.diagnostics, wide, 0.01);
  ASSERT_TRUE(entry.has_value());
  EXPECT_EQ(*entry, 0.0);

  Rectangle impossible = wide;
  impossible.hi1 = 0.9;  // below the run's steady max
  EXPECT_FALSE(envelope_check(sim.diagnostics, impossible, 0.01).has_value());
}

TEST(InvarianceCheck, CornersStayInsideForRunningScenario) {
  const ModelSpec s = scen::symmetric_constant_spec();
  const RectangleResult rect = iterate_rectangle(s, Branch::R);
  // Collapsed rectangle: widen it slightly around the point so the corner
  // runs exercise a genuine box.
  Rectangle box = rect.rect;
  box.lo1 -= 0.05;
  box.lo2 -= 0.05;
  box.hi1 += 0.05;
  box.hi2 += 0.05;
  // The widened box is not the fixed-point rectangle; use the exact one for
  // the verdict and the widened one only as a smoke check of the plumbing.
  const InvarianceReport exact = invariance_check(s, grid_of(64), rect.rect, 1e-3, 5.0);
  EXPECT_TRUE(exact.ok);
  for (const CornerRun& c : exact.corners) EXPECT_LE(c.worst_excess, exact.tolerance);
}

TEST(InvarianceCheck, PointRectangleStaysWithinSchemeError) {
  const ModelSpec s = scen::symmetric_constant_spec();
  Rectangle point;
  point.lo1 = point.hi1 = 1.2;
  point.lo2 = point.hi2 = 1.2;
  const InvarianceReport rep = invariance_check(s, grid_of(64), point, 1e-3, 2.0);
  EXPECT_TRUE(rep.ok);
}

TEST(EnergyBetween, IdenticalRunsAndDefinition) {
  const ModelSpec s = scen::symmetric_constant_spec();
  const Grid1D grid = grid_of(32);
  const SimulationResult a = simulate(s, grid, {1.0, 0.2, 1}, {1.1, 0.0, 0}, 1.0, 1e-3, 100);
  const EnergySeries self = energy_between(a.diagnostics, a.diagnostics);
  for (double e : self.energy) EXPECT_EQ(e, 0.0);

  const SimulationResult b = simulate(s, grid, {1.3, 0.0, 0}, {0.8, 0.1, 2}, 1.0, 1e-3, 100);
  const EnergySeries e = energy_between(a.diagnostics, b.diagnostics);
  double expected = 0.0;
  for (int j = 0; j < grid.n_cells; ++j) {
    const double du = a.diagnostics.snapshots[0].u[j] - b.diagnostics.snapshots[0].u[j];
    const double dv = a.diagnostics.snapshots[0].v[j] - b.diagnostics.snapshots[0].v[j];
    expected += du * du + dv * dv;
  }
  EXPECT_DOUBLE_EQ(e.energy.front(), grid.h() * expected);
}

TEST(EnergyBetween, MismatchedGridsRejected) {
  const ModelSpec s = scen::symmetric_constant_spec();
  const SimulationResult a = simulate(s, grid_of(32), {1.0, 0.0, 0}, {1.0, 0.0, 0}, 0.1, 1e-3, 10);
  const SimulationResult b = simulate(s, grid_of(64), {1.0, 0.0, 0}, {1.0, 0.0, 0}, 0.1, 1e-3, 10);
  try {
    energy_between(a.diagnostics, b.diagnostics);
    FAIL() << "expected GridMismatch";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::grid_mismatch);
  }
}

TEST(EnergyBetween, ContractionForDistinctInits) {
  const ModelSpec s = scen::symmetric_constant_spec();
  const Grid1D grid = grid_of(64);
  const SimulationResult a = simulate(s, grid, {1.5, 0.2, 1}, {1.0, 0.0, 0}, 10.0, 1e-3, 200);
  const SimulationResult b = simulate(s, grid, {0.7, 0.0, 0}, {1.4, 0.1, 2}, 10.0, 1e-3, 200);
  const EnergySeries e = energy_between(a.diagnostics, b.diagnostics);
  ASSERT_TRUE(e.rate_valid);
  EXPECT_LT(e.fitted_rate, 0.0);
  EXPECT_LT(e.energy.back(), 1e-10 * e.energy.front());
}

TEST(EnergyBetween, SignalGradientBoundedByPopulationEnergy) {
  // The difference e = wA - wB solves the discrete elliptic equation with
  // forcing k(uA-uB) + l(vA-vB); summation by parts plus Young's inequality
  // gives h*sum_faces((e_{j+1}-e_j)/h)^2 <= k^2/(2 lambda d3)*||psi||^2 +
  // l^2/(2 lambda d3)*||phi||^2 exactly, up to solver roundoff.
  const ModelSpec s = scen::symmetric_constant_spec();
  const Grid1D grid = grid_of(64);
  const SimulationResult a = simulate(s, grid, {1.5, 0.2, 1}, {1.0, 0.0, 0}, 2.0, 1e-3, 100);
  const SimulationResult b = simulate(s, grid, {0.7, 0.0, 0}, {1.4, 0.1, 2}, 2.0, 1e-3, 100);
  const double h = grid.h();
  const ModelConstants& c = s.constants;
  for (std::size_t i = 0; i < a.diagnostics.snapshots.size(); ++i) {
    const SimState& sa = a.diagnostics.snapshots[i];
    const SimState& sb = b.diagnostics.snapshots[i];
    double grad = 0.0, psi2 = 0.0, phi2 = 0.0;
    for (int j = 0; j + 1 < grid.n_cells; ++j) {
      const double de = (sa.w[j + 1] - sb.w[j + 1]) - (sa.w[j] - sb.w[j]);
      grad += (de / h) * (de / h);
    }
    for (int j = 0; j < grid.n_cells; ++j) {
      const double du = sa.u[j] - sb.u[j];
      const double dv = sa.v[j] - sb.v[j];
      psi2 += du * du;
      phi2 += dv * dv;
    }
    const double lhs = h * grad;
    const double rhs = c.k * c.k / (2.0 * c.lambda * c.d3) * h * psi2 +
                       c.l * c.l / (2.0 * c.lambda * c.d3) * h * phi2;
    EXPECT_LE(lhs, rhs * (1.0 + 1e-12) + 1e-15);
  }
}

TEST(ComparisonSandwich, OdeEnvelopeBracketsPdeExtrema) {
  const std::array<ModelSpec, 3> scenarios = {
      scen::symmetric_constant_spec(), scen::h7_periodic_spec(),
      scen::chi_zero_band_spec()};
  for (const ModelSpec& s : scenarios) {
    ASSERT_TRUE(check_hypotheses(s).h2);
    const Grid1D grid = grid_of(64);
    const double dt = 1e-3;
    const FieldInit iu{1.1, 0.4, 1}, iv{0.9, 0.2, 2};
    const SimulationResult sim = simulate(s, grid, iu, iv, 5.0, dt, 100);
    const std::vector<double> u0 = iu.sample(grid);
    const std::vector<double> v0 = iv.sample(grid);
    OdeState4 init;
    init.u_hi = *std::max_element(u0.begin(), u0.end());
    init.u_lo = *std::min_element(u0.begin(), u0.end());
    init.v_hi = *std::max_element(v0.begin(), v0.end());
    init.v_lo = *std::min_element(v0.begin(), v0.end());
    const auto ode = solve_comparison4(s, init, 0.0, 5.0, dt);
    const double tol = tol_num(grid, dt);
    for (const DiagRow& row : sim.diagnostics.rows) {
      const std::size_t idx = (std::size_t)std::llround(row.t / dt);
      ASSERT_LT(idx, ode.y.size());
      const OdeState4& env = ode.y[idx];
      EXPECT_GE(row.min_u, env.u_lo - tol);
      EXPECT_LE(row.max_u, env.u_hi + tol);
      EXPECT_GE(row.min_v, env.v_lo - tol);
      EXPECT_LE(row.max_v, env.v_hi + tol);
    }
  }
}

TEST(GridRefinement, MinMaxSeriesConvergeAtSecondOrder) {
  const ModelSpec s = scen::symmetric_constant_spec();
  const double dt = 2.5e-4;
  auto series = [&](int n) {
    return simulate(s, grid_of(n), {1.0, 0.4, 1}, {0.9, 0.2, 2}, 0.5, dt, 200);
  };
  const SimulationResult r32 = series(32);
  const SimulationResult r64 = series(64);
  const SimulationResult r128 = series(128);
  auto series_gap = [](const SimulationResult& a, const SimulationResult& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.diagnostics.rows.size(); ++i) {
      d = std::max(d, std::abs(a.diagnostics.rows[i].max_u - b.diagnostics.rows[i].max_u));
      d = std::max(d, std::abs(a.diagnostics.rows[i].min_u - b.diagnostics.rows[i].min_u));
    }
    return d;
  };
  const double d_coarse = series_gap(r32, r64);
  const double d_fine = series_gap(r64, r128);
  const double order = std::log2(d_coarse / d_fine);
  EXPECT_GE(order, 1.8);
}

}  // namespace
