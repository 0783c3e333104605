// Command-line front end for the coexistence certifier. Subcommands map to
// the pipeline stages; exit status is 0 for a positive verdict, 2 for a
// negative one and 1 for errors.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "coexist/scenario.hpp"

namespace {

using namespace coexist;

constexpr int kExitPositive = 0;
constexpr int kExitError = 1;
constexpr int kExitNegative = 2;

const char* verdict_str(bool ok) { return ok ? "yes" : "no"; }

void print_hypotheses(const HypothesisReport& hyp) {
  std::printf("hypotheses:\n");
  std::printf("  H1 %-3s  H2 %-3s  H3 %-3s  H4 %-3s\n", verdict_str(hyp.h1), verdict_str(hyp.h2),
              verdict_str(hyp.h3), verdict_str(hyp.h4));
  std::printf("  H5 %-3s  H6 %-3s  H7 %-3s  (1.5) %s\n", verdict_str(hyp.h5), verdict_str(hyp.h6),
              hyp.h7 ? verdict_str(*hyp.h7) : "n/a", verdict_str(hyp.cond_1_5));
  if (hyp.A_bar_1) std::printf("  A_bar = (%.12g, %.12g)\n", *hyp.A_bar_1, *hyp.A_bar_2);
  if (hyp.B_bar_1) std::printf("  B_bar = (%.12g, %.12g)\n", *hyp.B_bar_1, *hyp.B_bar_2);
  std::printf("  margins (LHS - RHS):\n");
  for (const auto& [name, value] : hyp.margins)
    std::printf("    %-12s % .12g\n", name.c_str(), value);
}

void print_rect(const char* label, const Rectangle& r) {
  std::printf("  %s rect = [%.12g, %.12g] x [%.12g, %.12g]\n", label, r.lo1, r.hi1, r.lo2, r.hi2);
}

int cmd_check(const std::string& config_path) {
  const ScenarioConfig cfg = parse_config(config_path);
  const HypothesisReport hyp = check_hypotheses(cfg.model);
  print_hypotheses(hyp);
  const bool positive = hyp.h5 || hyp.h6 || (hyp.h7 && *hyp.h7);
  std::printf("verdict: %s (a certification path is %slicensed)\n", positive ? "pass" : "fail",
              positive ? "" : "not ");
  return positive ? kExitPositive : kExitNegative;
}

int cmd_rectangle(const std::string& config_path) {
  const ScenarioConfig cfg = parse_config(config_path);
  const HypothesisReport hyp = check_hypotheses(cfg.model);
  bool any_ok = false;
  for (const Branch branch : {Branch::R, Branch::S}) {
    const bool licensed = branch == Branch::R ? hyp.h5 : hyp.h6;
    std::printf("branch %s: %s\n", branch_name(branch),
                licensed ? "licensed" : "not licensed (hypothesis fails)");
    if (!licensed) continue;
    const RectangleResult iter = iterate_rectangle(cfg.model, branch, cfg.tol);
    print_rect("iterated  ", iter.rect);
    std::printf("  iterations=%d converged=%s residual=%.3g\n", iter.trace.iterations,
                verdict_str(iter.trace.converged), iter.trace.residual);
    try {
      const ClosedFormResult closed = closed_form_rectangle(cfg.model, branch, cfg.det_tol);
      print_rect("closed form", closed.rect);
      std::printf("  det_bar=%.6g det_lo=%.6g invariants_ok=%s\n", closed.coeffs.det_bar,
                  closed.coeffs.det_lo, verdict_str(closed.invariants_ok));
      const double delta = std::max(
          std::max(std::abs(iter.rect.lo1 - closed.rect.lo1),
                   std::abs(iter.rect.hi1 - closed.rect.hi1)),
          std::max(std::abs(iter.rect.lo2 - closed.rect.lo2),
                   std::abs(iter.rect.hi2 - closed.rect.hi2)));
      std::printf("  agreement delta=%.3g\n", delta);
      if (iter.trace.converged && closed.invariants_ok && delta <= 10.0 * cfg.tol) any_ok = true;
    } catch (const error& e) {
      std::printf("  closed form unavailable: %s\n", e.what());
    }
  }
  return any_ok ? kExitPositive : kExitNegative;
}

int cmd_stability(const std::string& config_path) {
  const ScenarioConfig cfg = parse_config(config_path);
  const HypothesisReport hyp = check_hypotheses(cfg.model);
  bool any_ok = false;
  for (const Branch branch : {Branch::R, Branch::S}) {
    const bool licensed = branch == Branch::R ? hyp.h5 : hyp.h6;
    if (!licensed) {
      std::printf("branch %s: not licensed\n", branch_name(branch));
      continue;
    }
    const RectangleResult iter = iterate_rectangle(cfg.model, branch, cfg.tol);
    if (!iter.trace.converged) {
      std::printf("branch %s: iteration did not converge\n", branch_name(branch));
      continue;
    }
    const StabilityProfile prof = check_average_condition(cfg.model, iter.rect);
    std::printf("branch %s: mu_estimate=%.12g slack=%.3g window=%.6g verdict=%s\n",
                branch_name(branch), prof.mu_estimate, prof.slack, prof.window,
                verdict_str(prof.verdict));
    if (prof.verdict) any_ok = true;
  }
  if (cfg.model.constants.chi1 == 0.0 && cfg.model.constants.chi2 == 0.0) {
    const CorollaryReport cor = check_corollary(cfg.model);
    std::printf("corollary (chi=0): verdict=%s margin1=%.6g margin2=%.6g\n", verdict_str(cor.ok),
                cor.margin1, cor.margin2);
  }
  return any_ok ? kExitPositive : kExitNegative;
}

int cmd_ode(const std::string& config_path, const std::string& out_csv, bool lv_system) {
  const ScenarioConfig cfg = parse_config(config_path);
  std::string csv;
  bool ordered = true;
  if (lv_system) {
    const OdeState2 init{cfg.initial_u.base, cfg.initial_v.base};
    const auto traj = solve_lv(cfg.model, init, 0.0, cfg.t_end, cfg.dt);
    csv = "t,u,v\n";
    for (std::size_t i = 0; i < traj.t.size(); ++i)
      csv += coexist::detail::format_g17(traj.t[i]) + ',' +
             coexist::detail::format_g17(traj.y[i].u) + ',' +
             coexist::detail::format_g17(traj.y[i].v) + '\n';
    std::printf("terminal (u, v) = (%.12g, %.12g)\n", traj.back().u, traj.back().v);
  } else {
    const std::vector<double> u0 = cfg.initial_u.sample(cfg.grid);
    const std::vector<double> v0 = cfg.initial_v.sample(cfg.grid);
    OdeState4 init;
    init.u_hi = *std::max_element(u0.begin(), u0.end());
    init.u_lo = *std::min_element(u0.begin(), u0.end());
    init.v_hi = *std::max_element(v0.begin(), v0.end());
    init.v_lo = *std::min_element(v0.begin(), v0.end());
    const auto traj = solve_comparison4(cfg.model, init, 0.0, cfg.t_end, cfg.dt);
    csv = "t,u_hi,u_lo,v_hi,v_lo\n";
    for (std::size_t i = 0; i < traj.t.size(); ++i) {
      const OdeState4& s = traj.y[i];
      if (!s.ordered()) ordered = false;
      csv += coexist::detail::format_g17(traj.t[i]) + ',' +
             coexist::detail::format_g17(s.u_hi) + ',' + coexist::detail::format_g17(s.u_lo) +
             ',' + coexist::detail::format_g17(s.v_hi) + ',' +
             coexist::detail::format_g17(s.v_lo) + '\n';
    }
    const OdeState4& last = traj.back();
    std::printf("terminal envelope u=[%.12g, %.12g] v=[%.12g, %.12g] ordering=%s\n", last.u_lo,
                last.u_hi, last.v_lo, last.v_hi, verdict_str(ordered));
  }
  if (!out_csv.empty()) {
    coexist::detail::write_text_file(out_csv, csv);
    std::printf("wrote %s\n", out_csv.c_str());
  }
  return ordered ? kExitPositive : kExitNegative;
}

int cmd_simulate(const std::string& config_path, const std::string& run_name,
                 const std::string& out_dir) {
  const ScenarioConfig cfg = parse_config(config_path);
  FieldInit init_u = cfg.initial_u;
  FieldInit init_v = cfg.initial_v;
  std::string name = run_name.empty() ? "default" : run_name;
  if (!run_name.empty()) {
    const auto it = std::find_if(cfg.runs.begin(), cfg.runs.end(),
                                 [&](const RunSpec& r) { return r.name == run_name; });
    if (it == cfg.runs.end()) fail(errc::validation_error, "unknown run '" + run_name + "'");
    if (it->init_u) init_u = *it->init_u;
    if (it->init_v) init_v = *it->init_v;
  }
  const SimulationResult sim =
      simulate(cfg.model, cfg.grid, init_u, init_v, cfg.t_end, cfg.dt, cfg.save_every);
  std::filesystem::create_directories(out_dir);
  const auto path = std::filesystem::path(out_dir) / (name + ".csv");
  coexist::detail::write_text_file(path, coexist::detail::diagnostics_csv(sim.diagnostics));
  const DiagRow& last = sim.diagnostics.rows.back();
  std::printf("run '%s' finished at t=%.6g: u in [%.9g, %.9g], v in [%.9g, %.9g]\n", name.c_str(),
              last.t, last.min_u, last.max_u, last.min_v, last.max_v);
  if (sim.diagnostics.a1_entry_time)
    std::printf("entered the H1 ultimate bound at t=%.6g\n", *sim.diagnostics.a1_entry_time);
  std::printf("wrote %s\n", path.string().c_str());
  return kExitPositive;
}

int cmd_certify(const std::string& config_path, const std::string& out_dir) {
  const ScenarioConfig cfg = parse_config(config_path);
  const CertificationReport rep = run_certify(cfg);
  print_hypotheses(rep.hypotheses);
  for (const BranchOutcome& b : rep.branches) {
    if (!b.licensed) continue;
    std::printf("branch %s:\n", branch_name(b.branch));
    if (b.iter) print_rect("iterated  ", b.iter->rect);
    if (b.closed) print_rect("closed form", b.closed->rect);
    if (b.agreement) std::printf("  agreement delta=%.3g\n", *b.agreement);
    if (b.stability)
      std::printf("  stability mu=%.12g verdict=%s\n", b.stability->mu_estimate,
                  verdict_str(b.stability->verdict));
  }
  for (const CheckItem& c : rep.checks) {
    const char* status = c.status == CheckItem::Status::pass   ? "pass"
                         : c.status == CheckItem::Status::fail ? "FAIL"
                                                               : "skip";
    std::printf("check %-32s %s%s%s\n", c.name.c_str(), status, c.detail.empty() ? "" : "  # ",
                c.detail.c_str());
  }
  std::printf("status: %s\n", rep.status.c_str());
  for (const std::string& r : rep.reasons) std::printf("  %s\n", r.c_str());
  if (!out_dir.empty()) {
    for (const auto& path : export_report(rep, out_dir))
      std::printf("wrote %s\n", path.string().c_str());
  }
  return rep.status == "certified" ? kExitPositive : kExitNegative;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certifier and simulator for two-species competition with chemotaxis"};
  app.require_subcommand(1);

  std::string config_path, sim_out_dir, certify_out_dir, run_name, out_csv;
  bool lv_system = false;

  CLI::App* check = app.add_subcommand("check", "evaluate the hypotheses (H1)-(H7)");
  check->add_option("config", config_path, "scenario config (JSON)")->required();

  CLI::App* rectangle =
      app.add_subcommand("rectangle", "attracting rectangle by iteration and closed form");
  rectangle->add_option("config", config_path, "scenario config (JSON)")->required();

  CLI::App* stability =
      app.add_subcommand("stability", "averaged stability condition on licensed branches");
  stability->add_option("config", config_path, "scenario config (JSON)")->required();

  CLI::App* ode = app.add_subcommand("ode", "integrate the comparison ODE system");
  ode->add_option("config", config_path, "scenario config (JSON)")->required();
  ode->add_option("--out", out_csv, "trajectory CSV path");
  ode->add_flag("--lv", lv_system, "integrate the plain two-species system instead");

  CLI::App* simulate = app.add_subcommand("simulate", "run one PDE simulation");
  simulate->add_option("config", config_path, "scenario config (JSON)")->required();
  simulate->add_option("--run", run_name, "named run from the config (default: base initials)");
  simulate->add_option("--out", sim_out_dir, "output directory for the diagnostics CSV")
      ->default_val(".");

  CLI::App* certify = app.add_subcommand("certify", "full certification pipeline");
  certify->add_option("config", config_path, "scenario config (JSON)")->required();
  certify->add_option("--out", certify_out_dir, "directory for report.json and CSV diagnostics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPositive : kExitError;
  }

  try {
    if (check->parsed()) return cmd_check(config_path);
    if (rectangle->parsed()) return cmd_rectangle(config_path);
    if (stability->parsed()) return cmd_stability(config_path);
    if (ode->parsed()) return cmd_ode(config_path, out_csv, lv_system);
    if (simulate->parsed()) return cmd_simulate(config_path, run_name, sim_out_dir);
    if (certify->parsed()) return cmd_certify(config_path, certify_out_dir);
  } catch (const coexist::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
