#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "coexist/errors.hpp"
#include "coexist/model.hpp"
#include "coexist/ode.hpp"
#include "coexist/pde.hpp"
#include "coexist/rectangle.hpp"
#include "coexist/stability.hpp"

namespace coexist {

using json = nlohmann::json;

/// One named simulation variant: optional overrides of the base initial
/// profiles plus an optional energy pairing with another run.
struct RunSpec {
  std::string name;
  std::optional<FieldInit> init_u, init_v;
  std::optional<std::string> pair_with;

  bool operator==(const RunSpec&) const = default;
};

struct ScenarioConfig {
  ModelSpec model;
  Grid1D grid;
  double dt = 0.0;
  double t_end = 0.0;
  int save_every = 100;
  FieldInit initial_u, initial_v;
  std::vector<RunSpec> runs;
  double tol = 1e-12;
  double det_tol = 1e-10;
  double eps = 0.01;
};

inline bool operator==(const FieldInit& a, const FieldInit& b) {
  return a.base == b.base && a.amp == b.amp && a.mode == b.mode;
}

inline bool operator==(const CoefficientField& a, const CoefficientField& b) {
  return a.mean == b.mean && a.time_amp == b.time_amp && a.time_freq == b.time_freq &&
         a.time_phase == b.time_phase && a.space_amp == b.space_amp &&
         a.space_mode == b.space_mode && a.inf == b.inf && a.sup == b.sup;
}

inline bool operator==(const ModelConstants& a, const ModelConstants& b) {
  return a.d1 == b.d1 && a.d2 == b.d2 && a.d3 == b.d3 && a.chi1 == b.chi1 &&
         a.chi2 == b.chi2 && a.k == b.k && a.l == b.l && a.lambda == b.lambda;
}

inline bool operator==(const ModelSpec& a, const ModelSpec& b) {
  return a.constants == b.constants && a.a0 == b.a0 && a.a1 == b.a1 && a.a2 == b.a2 &&
         a.b0 == b.b0 && a.b1 == b.b1 && a.b2 == b.b2;
}

inline bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  return a.model == b.model && a.grid == b.grid && a.dt == b.dt && a.t_end == b.t_end &&
         a.save_every == b.save_every && a.initial_u == b.initial_u &&
         a.initial_v == b.initial_v && a.runs == b.runs && a.tol == b.tol &&
         a.det_tol == b.det_tol && a.eps == b.eps;
}

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(std::vector<std::string>& problems) : problems_(problems) {}

  void unknown_keys(const json& obj, const std::string& where,
                    std::initializer_list<const char*> known) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool ok = false;
      for (const char* k : known)
        if (it.key() == k) ok = true;
      if (!ok) fail(errc::parse_error, "unknown key '" + where + "." + it.key() + "'");
    }
  }

  double number(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) {
      problems_.push_back("missing key " + where + "." + key);
      return 0.0;
    }
    if (!obj.at(key).is_number()) {
      problems_.push_back(where + "." + key + " must be a number");
      return 0.0;
    }
    return obj.at(key).get<double>();
  }

  double number_or(const json& obj, const std::string& where, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number()) {
      problems_.push_back(where + "." + key + " must be a number");
      return fallback;
    }
    return obj.at(key).get<double>();
  }

  int integer_or(const json& obj, const std::string& where, const char* key, int fallback) {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_number_integer()) {
      problems_.push_back(where + "." + key + " must be an integer");
      return fallback;
    }
    return obj.at(key).get<int>();
  }

  int integer(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) {
      problems_.push_back("missing key " + where + "." + key);
      return 0;
    }
    return integer_or(obj, where, key, 0);
  }

  const json& object(const json& obj, const std::string& where, const char* key) {
    static const json empty = json::object();
    if (!obj.contains(key)) {
      problems_.push_back("missing section " + where + "." + key);
      return empty;
    }
    if (!obj.at(key).is_object()) {
      problems_.push_back(where + "." + key + " must be an object");
      return empty;
    }
    return obj.at(key);
  }

  std::vector<std::string>& problems_;
};

inline CoefficientField parse_field(ConfigReader& r, const json& node, const std::string& where) {
  CoefficientField f;
  if (node.is_number()) {
    return constant_field(node.get<double>());
  }
  if (!node.is_object()) {
    r.problems_.push_back(where + " must be a number or an object");
    return f;
  }
  r.unknown_keys(node, where,
                 {"mean", "time_amp", "time_freq", "time_phase", "space_amp", "space_mode",
                  "inf", "sup"});
  f.mean = r.number(node, where, "mean");
  f.time_amp = r.number_or(node, where, "time_amp", 0.0);
  f.time_freq = r.number_or(node, where, "time_freq", 0.0);
  f.time_phase = r.number_or(node, where, "time_phase", 0.0);
  f.space_amp = r.number_or(node, where, "space_amp", 0.0);
  f.space_mode = r.integer_or(node, where, "space_mode", 0);
  const bool has_inf = node.contains("inf");
  const bool has_sup = node.contains("sup");
  if (has_inf != has_sup) {
    r.problems_.push_back(where + ": inf and sup must be given together");
  }
  if (has_inf && has_sup) {
    f.inf = r.number(node, where, "inf");
    f.sup = r.number(node, where, "sup");
    // Declared bounds are checked by sampling; the conservative envelope is
    // derived automatically when they are omitted.
    if (f.inf > 0.0 && f.inf <= f.sup) {
      const FieldBoundsReport rep = validate_field_bounds(f, 65, 65);
      if (!rep.pass) {
        std::ostringstream os;
        os << where << ": sampled value " << rep.value_at << " at (t=" << rep.t_at
           << ", x=" << rep.x_at << ") escapes declared [inf, sup]";
        r.problems_.push_back(os.str());
      }
    }
  } else {
    f.with_auto_bounds();
  }
  return f;
}

inline FieldInit parse_init(ConfigReader& r, const json& node, const std::string& where) {
  FieldInit init;
  if (!node.is_object()) {
    r.problems_.push_back(where + " must be an object");
    return init;
  }
  r.unknown_keys(node, where, {"base", "amp", "mode"});
  init.base = r.number(node, where, "base");
  init.amp = r.number_or(node, where, "amp", 0.0);
  init.mode = r.integer_or(node, where, "mode", 0);
  return init;
}

}  // namespace detail

/// Strict parse of an already-loaded JSON document. Unknown keys are a
/// ParseError; every other violation is collected and reported in a single
/// ValidationError.
inline ScenarioConfig parse_config_json(const json& root) {
  std::vector<std::string> problems;
  detail::ConfigReader r(problems);
  ScenarioConfig cfg;

  if (!root.is_object()) fail(errc::parse_error, "config must be a JSON object");
  r.unknown_keys(root, "config",
                 {"model", "grid", "time", "initial_u", "initial_v", "runs", "tolerances"});

  const json& model = r.object(root, "config", "model");
  if (model.is_object()) {
    r.unknown_keys(model, "model", {"constants", "a0", "a1", "a2", "b0", "b1", "b2"});
    const json& constants = r.object(model, "model", "constants");
    if (constants.is_object()) {
      r.unknown_keys(constants, "model.constants",
                     {"d1", "d2", "d3", "chi1", "chi2", "k", "l", "lambda"});
      cfg.model.constants.d1 = r.number(constants, "model.constants", "d1");
      cfg.model.constants.d2 = r.number(constants, "model.constants", "d2");
      cfg.model.constants.d3 = r.number(constants, "model.constants", "d3");
      cfg.model.constants.chi1 = r.number(constants, "model.constants", "chi1");
      cfg.model.constants.chi2 = r.number(constants, "model.constants", "chi2");
      cfg.model.constants.k = r.number(constants, "model.constants", "k");
      cfg.model.constants.l = r.number(constants, "model.constants", "l");
      cfg.model.constants.lambda = r.number(constants, "model.constants", "lambda");
    }
    const char* names[6] = {"a0", "a1", "a2", "b0", "b1", "b2"};
    CoefficientField* fields[6] = {&cfg.model.a0, &cfg.model.a1, &cfg.model.a2,
                                   &cfg.model.b0, &cfg.model.b1, &cfg.model.b2};
    for (int i = 0; i < 6; ++i) {
      if (!model.contains(names[i])) {
        problems.push_back(std::string("missing section model.") + names[i]);
        continue;
      }
      *fields[i] = detail::parse_field(r, model.at(names[i]), std::string("model.") + names[i]);
    }
  }

  const json& grid = r.object(root, "config", "grid");
  if (grid.is_object()) {
    r.unknown_keys(grid, "grid", {"length", "n_cells"});
    cfg.grid.length = r.number(grid, "grid", "length");
    cfg.grid.n_cells = r.integer(grid, "grid", "n_cells");
  }

  const json& time = r.object(root, "config", "time");
  if (time.is_object()) {
    r.unknown_keys(time, "time", {"dt", "t_end", "save_every"});
    cfg.dt = r.number(time, "time", "dt");
    cfg.t_end = r.number(time, "time", "t_end");
    cfg.save_every = r.integer_or(time, "time", "save_every", 100);
  }

  if (root.contains("initial_u"))
    cfg.initial_u = detail::parse_init(r, root.at("initial_u"), "initial_u");
  else
    problems.push_back("missing section initial_u");
  if (root.contains("initial_v"))
    cfg.initial_v = detail::parse_init(r, root.at("initial_v"), "initial_v");
  else
    problems.push_back("missing section initial_v");

  if (root.contains("runs")) {
    if (!root.at("runs").is_array()) {
      problems.push_back("runs must be an array");
    } else {
      for (std::size_t i = 0; i < root.at("runs").size(); ++i) {
        const json& node = root.at("runs")[i];
        const std::string where = "runs[" + std::to_string(i) + "]";
        if (!node.is_object()) {
          problems.push_back(where + " must be an object");
          continue;
        }
        r.unknown_keys(node, where, {"name", "initial_u", "initial_v", "pair_with"});
        RunSpec run;
        if (!node.contains("name") || !node.at("name").is_string())
          problems.push_back(where + ".name must be a string");
        else
          run.name = node.at("name").get<std::string>();
        if (node.contains("initial_u"))
          run.init_u = detail::parse_init(r, node.at("initial_u"), where + ".initial_u");
        if (node.contains("initial_v"))
          run.init_v = detail::parse_init(r, node.at("initial_v"), where + ".initial_v");
        if (node.contains("pair_with")) {
          if (!node.at("pair_with").is_string())
            problems.push_back(where + ".pair_with must be a string");
          else
            run.pair_with = node.at("pair_with").get<std::string>();
        }
        cfg.runs.push_back(std::move(run));
      }
    }
  }

  if (root.contains("tolerances")) {
    const json& tols = root.at("tolerances");
    if (!tols.is_object()) {
      problems.push_back("tolerances must be an object");
    } else {
      r.unknown_keys(tols, "tolerances", {"tol", "det_tol", "eps"});
      cfg.tol = r.number_or(tols, "tolerances", "tol", cfg.tol);
      cfg.det_tol = r.number_or(tols, "tolerances", "det_tol", cfg.det_tol);
      cfg.eps = r.number_or(tols, "tolerances", "eps", cfg.eps);
    }
  }

  for (const std::string& p : cfg.model.validate()) problems.push_back("model: " + p);
  if (cfg.grid.n_cells < 4) problems.push_back("grid.n_cells must be >= 4");
  if (!(cfg.grid.length > 0.0)) problems.push_back("grid.length must be > 0");
  if (!(cfg.dt > 0.0)) problems.push_back("time.dt must be > 0");
  if (!(cfg.t_end > 0.0)) problems.push_back("time.t_end must be > 0");
  if (cfg.save_every < 1) problems.push_back("time.save_every must be >= 1");
  if (!(cfg.tol > 0.0)) problems.push_back("tolerances.tol must be > 0");
  if (!(cfg.det_tol > 0.0)) problems.push_back("tolerances.det_tol must be > 0");
  if (!(cfg.eps > 0.0)) problems.push_back("tolerances.eps must be > 0");
  if (cfg.initial_u.base < 0.0) problems.push_back("initial_u.base must be >= 0");
  if (cfg.initial_v.base < 0.0) problems.push_back("initial_v.base must be >= 0");
  {
    std::vector<std::string> seen;
    for (const RunSpec& run : cfg.runs) {
      if (run.name.empty()) problems.push_back("run names must be nonempty");
      if (std::find(seen.begin(), seen.end(), run.name) != seen.end())
        problems.push_back("duplicate run name '" + run.name + "'");
      seen.push_back(run.name);
    }
    for (const RunSpec& run : cfg.runs) {
      if (run.pair_with &&
          std::find(seen.begin(), seen.end(), *run.pair_with) == seen.end())
        problems.push_back("run '" + run.name + "' pairs with unknown run '" + *run.pair_with +
                           "'");
      if (run.pair_with && *run.pair_with == run.name)
        problems.push_back("run '" + run.name + "' cannot pair with itself");
    }
  }

  if (!problems.empty()) {
    std::string what;
    for (const std::string& p : problems) {
      if (!what.empty()) what += "; ";
      what += p;
    }
    fail(errc::validation_error, what);
  }
  return cfg;
}

inline ScenarioConfig parse_config(const std::string& path) {
  if (!std::filesystem::exists(path)) fail(errc::file_not_found, path);
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "cannot open " + path);
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    fail(errc::parse_error, e.what());
  }
  return parse_config_json(root);
}

namespace detail {

inline json field_to_json(const CoefficientField& f) {
  return json{{"mean", f.mean},        {"time_amp", f.time_amp},
              {"time_freq", f.time_freq}, {"time_phase", f.time_phase},
              {"space_amp", f.space_amp}, {"space_mode", f.space_mode},
              {"inf", f.inf},          {"sup", f.sup}};
}

inline json init_to_json(const FieldInit& f) {
  return json{{"base", f.base}, {"amp", f.amp}, {"mode", f.mode}};
}

}  // namespace detail

/// Normalized configuration: every field written in full object form, so
/// parsing the output reproduces the same ScenarioConfig.
inline json config_to_json(const ScenarioConfig& cfg) {
  json model;
  model["constants"] = {{"d1", cfg.model.constants.d1},   {"d2", cfg.model.constants.d2},
                        {"d3", cfg.model.constants.d3},   {"chi1", cfg.model.constants.chi1},
                        {"chi2", cfg.model.constants.chi2}, {"k", cfg.model.constants.k},
                        {"l", cfg.model.constants.l},     {"lambda", cfg.model.constants.lambda}};
  model["a0"] = detail::field_to_json(cfg.model.a0);
  model["a1"] = detail::field_to_json(cfg.model.a1);
  model["a2"] = detail::field_to_json(cfg.model.a2);
  model["b0"] = detail::field_to_json(cfg.model.b0);
  model["b1"] = detail::field_to_json(cfg.model.b1);
  model["b2"] = detail::field_to_json(cfg.model.b2);

  json runs = json::array();
  for (const RunSpec& run : cfg.runs) {
    json node{{"name", run.name}};
    if (run.init_u) node["initial_u"] = detail::init_to_json(*run.init_u);
    if (run.init_v) node["initial_v"] = detail::init_to_json(*run.init_v);
    if (run.pair_with) node["pair_with"] = *run.pair_with;
    runs.push_back(node);
  }

  return json{
      {"model", model},
      {"grid", {{"length", cfg.grid.length}, {"n_cells", cfg.grid.n_cells}}},
      {"time", {{"dt", cfg.dt}, {"t_end", cfg.t_end}, {"save_every", cfg.save_every}}},
      {"initial_u", detail::init_to_json(cfg.initial_u)},
      {"initial_v", detail::init_to_json(cfg.initial_v)},
      {"runs", runs},
      {"tolerances", {{"tol", cfg.tol}, {"det_tol", cfg.det_tol}, {"eps", cfg.eps}}},
  };
}

// ---------------------------------------------------------------------------
// Certification pipeline
// ---------------------------------------------------------------------------

struct BranchOutcome {
  Branch branch = Branch::R;
  bool licensed = false;
  std::optional<RectangleResult> iter;
  std::optional<ClosedFormResult> closed;
  std::optional<double> agreement;
  std::optional<StabilityProfile> stability;
  bool rect_ok = false;
  std::vector<std::string> notes;

  std::optional<Rectangle> rect() const {
    if (iter && iter->trace.converged) return iter->rect;
    if (closed && closed->invariants_ok) return closed->rect;
    return std::nullopt;
  }
};

struct RunOutcome {
  std::string name;
  FieldInit init_u, init_v;
  std::optional<std::string> pair_with;
  bool completed = false;
  std::string error;
  RunDiagnostics diagnostics;
  SimState final_state;
  std::optional<double> envelope_entry;
};

struct EnergyOutcome {
  std::string run_a, run_b;
  EnergySeries series;
  double mu = 0.0;
  double epsilon0 = 0.0;  // required slack: max(rate/2 - mu, 0)
  bool ok = false;
};

struct H7Outcome {
  bool applicable = false;
  std::optional<double> homogeneity;  // worst final spatial max-min over runs
  bool homogenized = false;
  std::optional<bool> lyapunov_nonincreasing;  // absent when not evaluated
  std::optional<PullbackResult> pullback;
  std::vector<std::string> notes;
};

struct CheckItem {
  std::string name;
  enum class Status { pass, fail, skip } status;
  std::string detail;
};

struct CertificationReport {
  ScenarioConfig config;
  HypothesisReport hypotheses;
  std::vector<BranchOutcome> branches;
  std::vector<RunOutcome> runs;  // ordered by run name
  std::optional<InvarianceReport> invariance;
  std::vector<EnergyOutcome> energies;
  H7Outcome h7;
  std::optional<Branch> selected_branch;
  std::vector<CheckItem> checks;  // the certification path's checks
  std::string status;             // certified | partial | failed
  std::vector<std::string> reasons;
};

namespace detail {

inline int thread_cap() {
  if (const char* env = std::getenv("COEXIST_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

inline BranchOutcome evaluate_branch(const ScenarioConfig& cfg, Branch branch, bool licensed) {
  BranchOutcome out;
  out.branch = branch;
  out.licensed = licensed;
  if (!licensed) return out;
  out.iter = iterate_rectangle(cfg.model, branch, cfg.tol);
  if (!out.iter->trace.converged)
    out.notes.push_back(out.iter->trace.ordering_violated ? "iteration lost lo<=hi ordering"
                                                          : "iteration hit max_iter");
  try {
    out.closed = closed_form_rectangle(cfg.model, branch, cfg.det_tol);
    if (!out.closed->invariants_ok)
      out.notes.push_back("closed form: " + out.closed->invariant_note);
  } catch (const error& e) {
    out.notes.push_back(e.what());
  }
  if (out.iter->trace.converged && out.closed) {
    const Rectangle& a = out.iter->rect;
    const Rectangle& b = out.closed->rect;
    out.agreement = std::max(std::max(std::abs(a.lo1 - b.lo1), std::abs(a.hi1 - b.hi1)),
                             std::max(std::abs(a.lo2 - b.lo2), std::abs(a.hi2 - b.hi2)));
  }
  out.rect_ok = out.iter->trace.converged && out.closed && out.closed->invariants_ok &&
                out.agreement && *out.agreement <= 10.0 * cfg.tol;
  if (const auto rect = out.rect()) {
    out.stability = check_average_condition(cfg.model, *rect);
  }
  return out;
}

inline RunOutcome execute_run(const ScenarioConfig& cfg, const RunSpec& spec) {
  RunOutcome out;
  out.name = spec.name;
  out.init_u = spec.init_u.value_or(cfg.initial_u);
  out.init_v = spec.init_v.value_or(cfg.initial_v);
  out.pair_with = spec.pair_with;
  try {
    SimulationResult sim =
        simulate(cfg.model, cfg.grid, out.init_u, out.init_v, cfg.t_end, cfg.dt, cfg.save_every);
    out.diagnostics = std::move(sim.diagnostics);
    out.final_state = std::move(sim.final_state);
    out.completed = true;
  } catch (const error& e) {
    out.error = e.what();
  }
  return out;
}

inline void evaluate_h7_path(const ScenarioConfig& cfg, CertificationReport& rep) {
  rep.h7.applicable = rep.hypotheses.h7.has_value() && *rep.hypotheses.h7;
  if (!rep.h7.applicable) return;

  double worst = 0.0;
  bool any_run = false;
  for (const RunOutcome& run : rep.runs) {
    if (!run.completed) continue;
    any_run = true;
    const DiagRow& last = run.diagnostics.rows.back();
    worst = std::max({worst, last.max_u - last.min_u, last.max_v - last.min_v});
  }
  if (any_run) {
    rep.h7.homogeneity = worst;
    rep.h7.homogenized = worst < tol_num(cfg.grid, cfg.dt);
  } else {
    rep.h7.notes.push_back("no completed run available for the homogenization check");
  }

  const std::vector<double> u0 = cfg.initial_u.sample(cfg.grid);
  const std::vector<double> v0 = cfg.initial_v.sample(cfg.grid);
  OdeState4 init;
  init.u_hi = *std::max_element(u0.begin(), u0.end());
  init.u_lo = *std::min_element(u0.begin(), u0.end());
  init.v_hi = *std::max_element(v0.begin(), v0.end());
  init.v_lo = *std::min_element(v0.begin(), v0.end());
  if (init.u_lo > 0.0 && init.v_lo > 0.0) {
    try {
      const auto traj = solve_comparison4(cfg.model, init, 0.0, cfg.t_end, cfg.dt);
      const std::vector<double> L = lyapunov_ratio(traj);
      const double slack = 1e-12 * L.front();
      bool nonincreasing = true;
      for (std::size_t i = 1; i < L.size(); ++i) {
        if (L[i] > L[i - 1] + slack) {
          nonincreasing = false;
          break;
        }
      }
      rep.h7.lyapunov_nonincreasing = nonincreasing;
    } catch (const error& e) {
      rep.h7.notes.push_back(e.what());
    }
  } else {
    rep.h7.notes.push_back("initial data must be strictly positive for the contraction check");
  }

  try {
    std::vector<double> t_grid;
    for (int i = 0; i <= 40; ++i) t_grid.push_back(0.05 * i);
    rep.h7.pullback = pullback_entire_solution(cfg.model, 50.0, t_grid, 1e-8, cfg.dt);
    if (!rep.h7.pullback->certified)
      rep.h7.notes.push_back("pullback starts disagree; increase the pullback horizon");
  } catch (const error& e) {
    rep.h7.notes.push_back(e.what());
  }
}

struct PathEvaluation {
  std::string name;
  std::vector<CheckItem> checks;
  int fails = 0, skips = 0;

  void add(const std::string& check, CheckItem::Status status, std::string detail = {}) {
    checks.push_back({check, status, std::move(detail)});
    if (status == CheckItem::Status::fail) ++fails;
    if (status == CheckItem::Status::skip) ++skips;
  }
};

inline PathEvaluation evaluate_branch_path(const CertificationReport& rep,
                                           const BranchOutcome& branch) {
  PathEvaluation path;
  path.name = std::string("branch_") + branch_name(branch.branch);
  using S = CheckItem::Status;

  path.add("rectangle_agreement", branch.rect_ok ? S::pass : S::fail,
           branch.notes.empty() ? "" : branch.notes.front());
  if (branch.stability)
    path.add("stability_average", branch.stability->verdict ? S::pass : S::fail);
  else
    path.add("stability_average", S::skip, "no rectangle available");

  const bool branch_selected =
      rep.selected_branch && *rep.selected_branch == branch.branch;
  for (const RunOutcome& run : rep.runs) {
    const std::string check = "envelope_entry." + run.name;
    if (!run.completed)
      path.add(check, S::skip, run.error);
    else if (!branch_selected)
      path.add(check, S::skip, "checked against the selected branch only");
    else
      path.add(check, run.envelope_entry ? S::pass : S::fail);
  }
  if (branch_selected && rep.invariance)
    path.add("invariance_corners", rep.invariance->ok ? S::pass : S::fail);
  else
    path.add("invariance_corners", S::skip, "no rectangle selected");
  for (const EnergyOutcome& energy : rep.energies) {
    const std::string check = "energy_decay." + energy.run_a + "_" + energy.run_b;
    if (!branch_selected)
      path.add(check, S::skip, "checked against the selected branch only");
    else
      path.add(check, energy.ok ? S::pass : S::fail);
  }
  return path;
}

inline PathEvaluation evaluate_h7_path_checks(const CertificationReport& rep) {
  PathEvaluation path;
  path.name = "h7";
  using S = CheckItem::Status;
  if (rep.h7.homogeneity)
    path.add("h7_homogenization", rep.h7.homogenized ? S::pass : S::fail);
  else
    path.add("h7_homogenization", S::skip, "no completed run");
  if (rep.h7.lyapunov_nonincreasing)
    path.add("h7_lyapunov_nonincreasing", *rep.h7.lyapunov_nonincreasing ? S::pass : S::fail);
  else
    path.add("h7_lyapunov_nonincreasing", S::skip, "contraction run unavailable");
  if (rep.h7.pullback)
    path.add("h7_pullback_certificate", rep.h7.pullback->certified ? S::pass : S::fail);
  else
    path.add("h7_pullback_certificate", S::skip, "pullback unavailable");
  return path;
}

}  // namespace detail

/// Runs the full certification pipeline: hypotheses, both rectangle methods
/// on every licensed branch, the averaged stability condition, then the
/// simulation checks. Stage failures are captured in the report; only an
/// invalid spec aborts.
inline CertificationReport run_certify(const ScenarioConfig& cfg) {
  cfg.model.require_valid();
  cfg.grid.require_valid();

  CertificationReport rep;
  rep.config = cfg;
  rep.hypotheses = check_hypotheses(cfg.model);

  rep.branches.push_back(detail::evaluate_branch(cfg, Branch::R, rep.hypotheses.h5));
  rep.branches.push_back(detail::evaluate_branch(cfg, Branch::S, rep.hypotheses.h6));

  // Prefer a branch whose stability verdict holds; break ties toward R.
  for (const BranchOutcome& b : rep.branches)
    if (b.rect_ok && b.stability && b.stability->verdict && !rep.selected_branch)
      rep.selected_branch = b.branch;
  if (!rep.selected_branch)
    for (const BranchOutcome& b : rep.branches)
      if (b.rect_ok && !rep.selected_branch) rep.selected_branch = b.branch;

  // Simulation runs, optionally in parallel (COEXIST_THREADS caps the pool).
  {
    std::vector<RunSpec> ordered = cfg.runs;
    std::sort(ordered.begin(), ordered.end(),
              [](const RunSpec& a, const RunSpec& b) { return a.name < b.name; });
    rep.runs.resize(ordered.size());
    const int cap = std::max(1, std::min<int>(detail::thread_cap(), (int)ordered.size()));
    if (cap <= 1 || ordered.size() <= 1) {
      for (std::size_t i = 0; i < ordered.size(); ++i)
        rep.runs[i] = detail::execute_run(cfg, ordered[i]);
    } else {
      std::size_t next = 0;
      while (next < ordered.size()) {
        std::vector<std::future<RunOutcome>> batch;
        for (int j = 0; j < cap && next < ordered.size(); ++j, ++next)
          batch.push_back(std::async(std::launch::async, [&cfg, &ordered, next] {
            return detail::execute_run(cfg, ordered[next]);
          }));
        for (std::size_t j = 0; j < batch.size(); ++j)
          rep.runs[next - batch.size() + j] = batch[j].get();
      }
    }
  }

  std::optional<Rectangle> selected_rect;
  for (const BranchOutcome& b : rep.branches)
    if (rep.selected_branch && b.branch == *rep.selected_branch) selected_rect = b.rect();

  if (selected_rect) {
    for (RunOutcome& run : rep.runs)
      if (run.completed)
        run.envelope_entry = envelope_check(run.diagnostics, *selected_rect, cfg.eps);
    rep.invariance = invariance_check(cfg.model, cfg.grid, *selected_rect, cfg.dt, cfg.t_end);
  }

  // Energy decay between paired runs, compared against the selected branch mu.
  for (const RunOutcome& run : rep.runs) {
    if (!run.pair_with || !run.completed) continue;
    const auto other = std::find_if(rep.runs.begin(), rep.runs.end(), [&](const RunOutcome& r) {
      return r.name == *run.pair_with;
    });
    if (other == rep.runs.end() || !other->completed) continue;
    EnergyOutcome energy;
    energy.run_a = std::min(run.name, other->name);
    energy.run_b = std::max(run.name, other->name);
    const bool duplicate =
        std::any_of(rep.energies.begin(), rep.energies.end(), [&](const EnergyOutcome& e) {
          return e.run_a == energy.run_a && e.run_b == energy.run_b;
        });
    if (duplicate) continue;
    energy.series = energy_between(run.diagnostics, other->diagnostics);
    if (rep.selected_branch) {
      for (const BranchOutcome& b : rep.branches)
        if (b.branch == *rep.selected_branch && b.stability) energy.mu = b.stability->mu_estimate;
    }
    if (energy.series.rate_valid) {
      energy.epsilon0 = std::max(0.0, energy.series.fitted_rate / 2.0 - energy.mu);
      energy.ok = energy.series.fitted_rate < 0.0 && energy.epsilon0 < std::abs(energy.mu) &&
                  energy.series.energy.back() <= energy.series.energy.front();
    }
    rep.energies.push_back(std::move(energy));
  }

  detail::evaluate_h7_path(cfg, rep);

  // A certification path must pass every one of its checks; branch paths take
  // priority over the spatially-homogeneous (H7) path.
  std::vector<detail::PathEvaluation> paths;
  for (const BranchOutcome& b : rep.branches)
    if (b.licensed) paths.push_back(detail::evaluate_branch_path(rep, b));
  if (rep.h7.applicable) paths.push_back(detail::evaluate_h7_path_checks(rep));

  if (paths.empty()) {
    rep.status = "failed";
    rep.reasons.push_back("no hypothesis family licenses a certification path (need H5, H6 or H7)");
    for (const auto& [name, value] : rep.hypotheses.margins)
      if (value <= 0.0) rep.reasons.push_back("margin " + name + " is not positive");
    return rep;
  }

  const detail::PathEvaluation* best = &paths.front();
  for (const detail::PathEvaluation& p : paths) {
    auto rank = [](const detail::PathEvaluation& e) {
      return std::pair(e.fails, e.skips);
    };
    if (rank(p) < rank(*best)) best = &p;
  }
  rep.checks = best->checks;
  if (best->fails == 0 && best->skips == 0) {
    rep.status = "certified";
    rep.reasons.push_back("path " + best->name + " passed every check");
  } else if (best->fails == 0) {
    rep.status = "partial";
    for (const CheckItem& c : best->checks)
      if (c.status == CheckItem::Status::skip)
        rep.reasons.push_back("skipped " + c.name + (c.detail.empty() ? "" : ": " + c.detail));
  } else {
    rep.status = "failed";
    for (const CheckItem& c : best->checks)
      if (c.status == CheckItem::Status::fail)
        rep.reasons.push_back("failed " + c.name + (c.detail.empty() ? "" : ": " + c.detail));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Report serialization and export
// ---------------------------------------------------------------------------

namespace detail {

inline json rect_to_json(const Rectangle& r) {
  return json{{"lo1", r.lo1}, {"hi1", r.hi1}, {"lo2", r.lo2}, {"hi2", r.hi2},
              {"branch", branch_name(r.branch)}};
}

inline json hypotheses_to_json(const HypothesisReport& h) {
  json margins;
  for (const auto& [name, value] : h.margins) margins[name] = value;
  json out{{"h1", h.h1}, {"h2", h.h2}, {"h3", h.h3}, {"h4", h.h4},
           {"h5", h.h5}, {"h6", h.h6}, {"cond_1_5", h.cond_1_5}, {"margins", margins}};
  out["h7"] = h.h7 ? json(*h.h7) : json("not applicable");
  out["A_bar_1"] = h.A_bar_1 ? json(*h.A_bar_1) : json();
  out["A_bar_2"] = h.A_bar_2 ? json(*h.A_bar_2) : json();
  out["B_bar_1"] = h.B_bar_1 ? json(*h.B_bar_1) : json();
  out["B_bar_2"] = h.B_bar_2 ? json(*h.B_bar_2) : json();
  return out;
}

inline json branch_to_json(const BranchOutcome& b) {
  json out{{"branch", branch_name(b.branch)}, {"licensed", b.licensed},
           {"rectangle_ok", b.rect_ok}, {"notes", b.notes}};
  if (b.iter) {
    out["iteration"] = {{"rect", rect_to_json(b.iter->rect)},
                        {"converged", b.iter->trace.converged},
                        {"iterations", b.iter->trace.iterations},
                        {"residual", b.iter->trace.residual}};
  }
  if (b.closed) {
    out["closed_form"] = {{"rect", rect_to_json(b.closed->rect)},
                          {"det_bar", b.closed->coeffs.det_bar},
                          {"det_lo", b.closed->coeffs.det_lo},
                          {"invariants_ok", b.closed->invariants_ok}};
  }
  if (b.agreement) out["agreement_delta"] = *b.agreement;
  if (b.stability) {
    out["stability"] = {{"mu_estimate", b.stability->mu_estimate},
                        {"window", b.stability->window},
                        {"slack", b.stability->slack},
                        {"verdict", b.stability->verdict}};
  }
  return out;
}

inline json check_to_json(const CheckItem& c) {
  const char* status = c.status == CheckItem::Status::pass   ? "pass"
                       : c.status == CheckItem::Status::fail ? "fail"
                                                             : "skip";
  json out{{"name", c.name}, {"status", status}};
  if (!c.detail.empty()) out["detail"] = c.detail;
  return out;
}

}  // namespace detail

inline json report_to_json(const CertificationReport& rep) {
  json out;
  out["config"] = config_to_json(rep.config);
  out["hypotheses"] = detail::hypotheses_to_json(rep.hypotheses);
  json branches = json::array();
  for (const BranchOutcome& b : rep.branches) branches.push_back(detail::branch_to_json(b));
  out["branches"] = branches;
  out["selected_branch"] =
      rep.selected_branch ? json(branch_name(*rep.selected_branch)) : json();

  json runs = json::array();
  for (const RunOutcome& run : rep.runs) {
    json node{{"name", run.name}, {"completed", run.completed}};
    if (!run.error.empty()) node["error"] = run.error;
    if (run.completed) {
      const DiagRow& last = run.diagnostics.rows.back();
      node["final"] = {{"t", last.t},         {"min_u", last.min_u}, {"max_u", last.max_u},
                       {"min_v", last.min_v}, {"max_v", last.max_v}, {"mass_u", last.mass_u},
                       {"mass_v", last.mass_v}};
      if (run.diagnostics.a1_entry_time)
        node["a1_entry_time"] = *run.diagnostics.a1_entry_time;
    }
    node["envelope_entry"] = run.envelope_entry ? json(*run.envelope_entry) : json();
    runs.push_back(node);
  }
  out["runs"] = runs;

  if (rep.invariance) {
    json corners = json::array();
    for (const CornerRun& c : rep.invariance->corners)
      corners.push_back({{"init_u", c.init_u},
                         {"init_v", c.init_v},
                         {"stayed", c.stayed},
                         {"worst_excess", c.worst_excess}});
    out["invariance"] = {{"ok", rep.invariance->ok},
                         {"tolerance", rep.invariance->tolerance},
                         {"corners", corners}};
  }

  json energies = json::array();
  for (const EnergyOutcome& e : rep.energies) {
    energies.push_back({{"runs", {e.run_a, e.run_b}},
                        {"initial_energy", e.series.energy.front()},
                        {"final_energy", e.series.energy.back()},
                        {"fitted_rate", e.series.fitted_rate},
                        {"mu", e.mu},
                        {"epsilon0", e.epsilon0},
                        {"ok", e.ok}});
  }
  out["energy_pairs"] = energies;

  if (rep.h7.applicable) {
    json h7{{"homogenized", rep.h7.homogenized}, {"notes", rep.h7.notes}};
    h7["lyapunov_nonincreasing"] =
        rep.h7.lyapunov_nonincreasing ? json(*rep.h7.lyapunov_nonincreasing) : json();
    h7["homogeneity"] = rep.h7.homogeneity ? json(*rep.h7.homogeneity) : json();
    if (rep.h7.pullback)
      h7["pullback"] = {{"certified", rep.h7.pullback->certified},
                        {"deviation", rep.h7.pullback->deviation}};
    out["h7"] = h7;
  }

  json checks = json::array();
  for (const CheckItem& c : rep.checks) checks.push_back(detail::check_to_json(c));
  out["checks"] = checks;
  out["status"] = rep.status;
  out["reasons"] = rep.reasons;
  return out;
}

namespace detail {

inline std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(errc::io_error, "cannot write " + path.string());
  out << text;
  if (!out.good()) fail(errc::io_error, "failed writing " + path.string());
}

inline std::string diagnostics_csv(const RunDiagnostics& diag) {
  std::string text = "t,min_u,max_u,min_v,max_v,min_w,max_w,mass_u,mass_v\n";
  for (const DiagRow& r : diag.rows) {
    text += format_g17(r.t) + ',' + format_g17(r.min_u) + ',' + format_g17(r.max_u) + ',' +
            format_g17(r.min_v) + ',' + format_g17(r.max_v) + ',' + format_g17(r.min_w) + ',' +
            format_g17(r.max_w) + ',' + format_g17(r.mass_u) + ',' + format_g17(r.mass_v) + '\n';
  }
  return text;
}

inline std::string energy_csv(const EnergySeries& series) {
  std::string text = "t,energy\n";
  for (std::size_t i = 0; i < series.t.size(); ++i)
    text += format_g17(series.t[i]) + ',' + format_g17(series.energy[i]) + '\n';
  return text;
}

}  // namespace detail

/// Writes report.json plus one diagnostics CSV per completed run and one
/// energy CSV per paired run set; file names derive from the run names.
inline std::vector<std::filesystem::path> export_report(const CertificationReport& rep,
                                                        const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(errc::io_error, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  const auto report_path = out_dir / "report.json";
  detail::write_text_file(report_path, report_to_json(rep).dump(2) + "\n");
  written.push_back(report_path);

  for (const RunOutcome& run : rep.runs) {
    if (!run.completed) continue;
    const auto path = out_dir / (run.name + ".csv");
    detail::write_text_file(path, detail::diagnostics_csv(run.diagnostics));
    written.push_back(path);
  }
  for (const EnergyOutcome& e : rep.energies) {
    const auto path = out_dir / ("energy_" + e.run_a + "_" + e.run_b + ".csv");
    detail::write_text_file(path, detail::energy_csv(e.series));
    written.push_back(path);
  }
  return written;
}

}  // namespace coexist
