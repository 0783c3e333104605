#include "coexist/scenario.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "test_specs.hpp"

using namespace coexist;

namespace {

json minimal_config() {
  return json::parse(R"({
    "model": {
      "constants": {"d1": 1, "d2": 1, "d3": 1, "chi1": 0.1, "chi2": 0.1,
                    "k": 1, "l": 1, "lambda": 1},
      "a0": 3.0, "a1": 2.0, "a2": 0.5,
      "b0": 3.0, "b1": 0.5, "b2": 2.0
    },
    "grid": {"length": 1.0, "n_cells": 64},
    "time": {"dt": 1e-3, "t_end": 1.0},
    "initial_u": {"base": 1.2, "amp": 0.1, "mode": 1},
    "initial_v": {"base": 1.2}
  })");
}

std::filesystem::path write_temp(const json& j, const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "coexist_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream out(path);
  out << j.dump(2);
  return path;
}

TEST(ParseConfig, MinimalConfigGetsDocumentedDefaults) {
  const auto path = write_temp(minimal_config(), "minimal.json");
  const ScenarioConfig cfg = parse_config(path.string());
  EXPECT_EQ(cfg.save_every, 100);
  EXPECT_DOUBLE_EQ(cfg.tol, 1e-12);
  EXPECT_DOUBLE_EQ(cfg.det_tol, 1e-10);
  EXPECT_DOUBLE_EQ(cfg.eps, 0.01);
  EXPECT_TRUE(cfg.runs.empty());
  EXPECT_DOUBLE_EQ(cfg.model.a0.inf, 3.0);
  EXPECT_DOUBLE_EQ(cfg.model.a0.sup, 3.0);
}

TEST(ParseConfig, MissingLambdaNamesTheKey) {
  json j = minimal_config();
  j["model"]["constants"].erase("lambda");
  const auto path = write_temp(j, "missing_lambda.json");
  try {
    parse_config(path.string());
    FAIL() << "expected ValidationError";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::validation_error);
    EXPECT_NE(std::string(e.what()).find("lambda"), std::string::npos);
  }
}

TEST(ParseConfig, NegativeChiIsRejected) {
  json j = minimal_config();
  j["model"]["constants"]["chi1"] = -0.1;
  const auto path = write_temp(j, "neg_chi.json");
  try {
    parse_config(path.string());
    FAIL() << "expected ValidationError";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::validation_error);
    EXPECT_NE(std::string(e.what()).find("chi1"), std::string::npos);
  }
}

TEST(ParseConfig, UnknownKeyIsAParseError) {
  json j = minimal_config();
  j["model"]["constants"]["gamma"] = 1.0;
  const auto path = write_temp(j, "unknown_key.json");
  try {
    parse_config(path.string());
    FAIL() << "expected ParseError";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::parse_error);
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
  }
}

TEST(ParseConfig, MissingFileAndMalformedJson) {
  try {
    parse_config("/nonexistent/config.json");
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::file_not_found);
  }
  const auto dir = std::filesystem::temp_directory_path() / "coexist_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "broken.json";
  std::ofstream(path) << "{ not json";
  try {
    parse_config(path.string());
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::parse_error);
  }
}

TEST(ParseConfig, DeclaredBoundsAreSampled) {
  json j = minimal_config();
  j["model"]["a0"] = {{"mean", 3.0}, {"time_amp", 0.5}, {"time_freq", 1.0},
                      {"inf", 2.6},  {"sup", 3.5}};
  const auto path = write_temp(j, "tight_bounds.json");
  EXPECT_THROW(parse_config(path.string()), error);
}

TEST(ParseConfig, SelfPairingRejected) {
  json j = minimal_config();
  j["runs"] = json::array({json{{"name", "a"}, {"pair_with", "a"}}});
  const auto path = write_temp(j, "self_pair.json");
  try {
    parse_config(path.string());
    FAIL() << "expected ValidationError";
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::validation_error);
    EXPECT_NE(std::string(e.what()).find("pair"), std::string::npos);
  }
}

TEST(ParseConfig, RoundTripThroughNormalizedForm) {
  json j = minimal_config();
  j["runs"] = json::array({json{{"name", "a"}},
                           json{{"name", "b"},
                                {"initial_u", {{"base", 0.7}, {"amp", 0.2}, {"mode", 2}}},
                                {"pair_with", "a"}}});
  j["tolerances"] = {{"eps", 0.02}};
  const auto path = write_temp(j, "roundtrip.json");
  const ScenarioConfig cfg = parse_config(path.string());
  const json normalized = config_to_json(cfg);
  const ScenarioConfig cfg2 = parse_config_json(normalized);
  EXPECT_TRUE(cfg == cfg2);
  EXPECT_EQ(config_to_json(cfg2), normalized);
}

ScenarioConfig running_scenario_config() {
  json j = minimal_config();
  j["time"] = {{"dt", 1e-3}, {"t_end", 10.0}, {"save_every", 200}};
  j["runs"] = json::array(
      {json{{"name", "a"}},
       json{{"name", "b"},
            {"initial_u", {{"base", 0.7}, {"amp", 0.0}, {"mode", 0}}},
            {"initial_v", {{"base", 1.5}, {"amp", 0.1}, {"mode", 2}}},
            {"pair_with", "a"}}});
  return parse_config_json(j);
}

TEST(RunCertify, SymmetricScenarioCertifies) {
  const CertificationReport rep = run_certify(running_scenario_config());
  EXPECT_EQ(rep.status, "certified");
  EXPECT_TRUE(rep.hypotheses.h5);
  ASSERT_TRUE(rep.selected_branch.has_value());
  const BranchOutcome& r_branch = rep.branches.front();
  ASSERT_TRUE(r_branch.iter.has_value());
  EXPECT_NEAR(r_branch.iter->rect.hi1, 1.2, 1e-10);
  ASSERT_TRUE(r_branch.stability.has_value());
  EXPECT_NEAR(r_branch.stability->mu_estimate, -1.7928, 1e-10);
  for (const CheckItem& c : rep.checks) EXPECT_EQ(c.status, CheckItem::Status::pass)
      << c.name << " " << c.detail;
}

TEST(RunCertify, LargeChiFailsAtH1WithReasons) {
  ScenarioConfig cfg = running_scenario_config();
  cfg.model.constants.chi1 = 25.0;
  cfg.runs.clear();
  const CertificationReport rep = run_certify(cfg);
  EXPECT_EQ(rep.status, "failed");
  EXPECT_FALSE(rep.hypotheses.h1);
  ASSERT_FALSE(rep.reasons.empty());
  EXPECT_NE(rep.reasons.front().find("no hypothesis family"), std::string::npos);
}

TEST(RunCertify, CrashedRunYieldsPartialStatus) {
  // A coarse time step blows up the explicit reaction update from a large
  // init, so the named run aborts; the certification checks it feeds are
  // skipped rather than failed.
  ScenarioConfig cfg = running_scenario_config();
  cfg.dt = 1.0;
  cfg.t_end = 5.0;
  cfg.save_every = 1;
  cfg.runs.clear();
  RunSpec crash;
  crash.name = "crash";
  crash.init_u = FieldInit{3.0, 0.0, 0};
  cfg.runs.push_back(crash);
  const CertificationReport rep = run_certify(cfg);
  ASSERT_EQ(rep.runs.size(), 1u);
  EXPECT_FALSE(rep.runs.front().completed);
  EXPECT_EQ(rep.status, "partial");
  bool saw_skip = false;
  for (const CheckItem& c : rep.checks) {
    EXPECT_NE(c.status, CheckItem::Status::fail) << c.name;
    if (c.status == CheckItem::Status::skip) saw_skip = true;
  }
  EXPECT_TRUE(saw_skip);
}

TEST(RunCertify, DeterministicReportBytes) {
  const ScenarioConfig cfg = running_scenario_config();
  const std::string a = report_to_json(run_certify(cfg)).dump(2);
  const std::string b = report_to_json(run_certify(cfg)).dump(2);
  EXPECT_EQ(a, b);
}

TEST(RunCertify, StatusSoundness) {
  const CertificationReport rep = run_certify(running_scenario_config());
  if (rep.status == "certified") {
    for (const CheckItem& c : rep.checks) EXPECT_EQ(c.status, CheckItem::Status::pass);
  }
}

TEST(ExportReport, FileNamingContract) {
  const CertificationReport rep = run_certify(running_scenario_config());
  const auto dir = std::filesystem::temp_directory_path() / "coexist_test" / "export";
  std::filesystem::remove_all(dir);
  const auto files = export_report(rep, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "a.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "b.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "energy_a_b.csv"));

  std::ifstream in(dir / "a.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "t,min_u,max_u,min_v,max_v,min_w,max_w,mass_u,mass_v");

  const json report = json::parse(std::ifstream(dir / "report.json"));
  EXPECT_EQ(report.at("status"), "certified");
}

TEST(ExportReport, EmptyRunListWritesOnlyReport) {
  ScenarioConfig cfg = running_scenario_config();
  cfg.runs.clear();
  const CertificationReport rep = run_certify(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "coexist_test" / "export_empty";
  std::filesystem::remove_all(dir);
  const auto files = export_report(rep, dir);
  EXPECT_EQ(files.size(), 1u);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
}

}  // namespace
