#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "support.hpp"

using namespace rvlbm;
using namespace rvlbm::testing;
namespace fs = std::filesystem;

namespace {

const std::string kConfigDir = RVLBM_CONFIG_DIR;
const std::string kCli = RVLBM_CLI;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig reference(const std::string& name) { return load_config(slurp(kConfigDir + "/" + name)); }

const char* kMinimal = R"({
  "scheme": {
    "d": 1, "q": 2, "lambda": 1.0,
    "velocities": [[1], [-1]],
    "polynomials": [[{"exps": [0], "coef": 1}], [{"exps": [1], "coef": 1}]],
    "relaxation": [0, 1.5],
    "equilibrium": [0.75, 0.25]
  }
})";

nlohmann::json minimal() { return nlohmann::json::parse(kMinimal); }

std::string schema_path(const std::string& text) {
  try {
    load_config(text);
  } catch (const SchemaError& e) {
    return e.path();
  }
  return "<none>";
}

int run_cli(const std::string& args) {
  const int status = std::system((kCli + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("rvlbm_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(LoadConfig, MinimalD1Q2) {
  const auto cfg = load_config(kMinimal);
  EXPECT_NEAR(advection_vector(cfg.scheme)[0], 0.5, 1e-15);
  EXPECT_EQ(cfg.grid.n, std::vector<int>{64});
  EXPECT_EQ(cfg.analysis.u_sweep.size(), 3u);
  EXPECT_EQ(cfg.analysis.k_samples.size(), 8u);
  EXPECT_TRUE(cfg.warnings.empty());
}

TEST(LoadConfig, NonzeroMassRelaxation) {
  auto j = minimal();
  j["scheme"]["relaxation"] = {0.1, 1.5};
  try {
    load_config(j.dump());
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "s[0] must be 0");
  }
}

TEST(LoadConfig, NonLatticeVelocityNamesTheVelocity) {
  auto j = minimal();
  j["scheme"]["velocities"] = {{1}, {0.5}};
  try {
    load_config(j.dump());
    FAIL();
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("non-lattice velocity"), std::string::npos) << what;
    EXPECT_NE(what.find("v_1"), std::string::npos) << what;
  }
}

TEST(LoadConfig, SchemaErrorsCarryPointers) {
  EXPECT_EQ(schema_path("{not json"), "");
  auto j = minimal();
  j["scheme"].erase("relaxation");
  EXPECT_EQ(schema_path(j.dump()), "/scheme/relaxation");
  j = minimal();
  j["scheme"]["equilibrium"][1] = "x";
  EXPECT_EQ(schema_path(j.dump()), "/scheme/equilibrium/1");
  j = minimal();
  j["scheme"]["polynomials"][1][0]["exps"] = {1, 0};
  EXPECT_EQ(schema_path(j.dump()), "/scheme/polynomials/1/0/exps");
  j = minimal();
  j["scheme"]["u_tilde"] = {{"mode", "spin"}, {"value", {0.1}}};
  EXPECT_EQ(schema_path(j.dump()), "/scheme/u_tilde/mode");
  j = minimal();
  j["output"] = {{"format", "xml"}};
  EXPECT_EQ(schema_path(j.dump()), "/output/format");
}

TEST(LoadConfig, ValidationOfAnalysis) {
  auto j = minimal();
  j["analysis"] = {{"refinements", 4}};
  EXPECT_THROW(load_config(j.dump()), ValidationError);
  j["analysis"] = {{"dt0", 1.0}};
  EXPECT_THROW(load_config(j.dump()), ValidationError);
  j["analysis"] = {{"order", 4}};
  EXPECT_THROW(load_config(j.dump()), ValidationError);
  j["analysis"] = {{"u_sweep", {0.0, 0.25}}};
  const auto cfg = load_config(j.dump());
  EXPECT_EQ(cfg.analysis.u_sweep[1][0], 0.25);
}

TEST(LoadConfig, SingularBasisRejected) {
  auto j = minimal();
  j["scheme"]["q"] = 3;
  j["scheme"]["velocities"] = {{0}, {1}, {-1}};
  j["scheme"]["polynomials"] = nlohmann::json::parse(
      R"([[{"exps": [0], "coef": 1}], [{"exps": [1], "coef": 1}], [{"exps": [3], "coef": 1}, {"exps": [1], "coef": -1}]])");
  j["scheme"]["relaxation"] = {0, 1.2, 1.1};
  j["scheme"]["equilibrium"] = {0.5, 0.3, 0.2};
  EXPECT_THROW(load_config(j.dump()), ValidationError);
}

TEST(LoadConfig, ReferenceConfigsLoad) {
  for (const char* name : {"d1q2.json", "d1q3.json", "d2q5.json"}) {
    const auto cfg = reference(name);
    EXPECT_TRUE(cfg.warnings.empty()) << name;
    EXPECT_GE(cfg.analysis.k_samples.size(), 8u);
  }
}

TEST(Verify, ReferenceConfigsPass) {
  for (const char* name : {"d1q2.json", "d1q3.json", "d2q5.json"}) {
    const auto rep = run_verification(reference(name));
    EXPECT_TRUE(rep.pass) << name << "\n" << to_json(rep).dump(2).substr(0, 2000);
    ASSERT_NE(rep.section("transition_lemma"), nullptr);
  }
  EXPECT_TRUE(run_verification(reference("d1q3.json"))
                  .section("u_invariance")
                  ->detail["third_order_shift_dependence"]
                  .get<bool>());
}

TEST(Verify, CorruptedPredictorFailsOnlyTheOracleSection) {
  VerifyOptions opt;
  opt.predictor_fault = [](EquivalentEquation& eq) { eq.ops[1] *= -1.0; };
  const auto rep = run_verification(reference("d1q2.json"), opt);
  EXPECT_FALSE(rep.pass);
  for (const auto& s : rep.sections) {
    if (s.informational) continue;
    EXPECT_EQ(s.pass, s.name != "predictor_vs_oracle") << s.name;
  }
}

TEST(Verify, ReportsAreByteIdentical) {
  const auto cfg = reference("d1q3.json");
  EXPECT_EQ(to_json(run_verification(cfg)).dump(2), to_json(run_verification(cfg)).dump(2));
}

TEST(Convergence, UniformInitialDataIsAtFloor) {
  auto cfg = reference("d1q2.json");
  cfg.initial.type = InitialCondition::Type::uniform;
  const auto study = refinement_study(cfg.scheme, cfg.grid, cfg.initial, {64, 128, 256}, 20);
  EXPECT_TRUE(study.equilibrium.floor);
  EXPECT_TRUE(study.transition.floor);
  EXPECT_EQ(to_json(study)["transition"]["slope"], "floor");
}

TEST(Convergence, SlopesOnReferenceConfigs) {
  for (const char* name : {"d1q2.json", "d1q3.json", "d2q5.json"}) {
    const auto cfg = reference(name);
    const auto study = refinement_study(cfg.scheme, cfg.grid, cfg.initial, {64, 128, 256}, 20);
    EXPECT_NEAR(study.equilibrium.slope, 1.0, 0.15) << name;
    EXPECT_NEAR(study.transition.slope, 3.0, 0.3) << name;
    for (double r : study.transition.ratios) {
      EXPECT_GE(r, 6.5) << name;
      EXPECT_LE(r, 9.5) << name;
    }
  }
}

TEST(Simulate, UniformObservablesAreConstant) {
  auto cfg = reference("d2q5.json");
  cfg.initial.type = InitialCondition::Type::uniform;
  const auto res = run_simulation(cfg.scheme, cfg.grid, cfg.initial, 50, 20);
  for (const auto& o : res.observations) {
    EXPECT_NEAR(o.mass, res.observations.front().mass, 1e-12);
    EXPECT_LT(o.amplitude, 1e-14);
  }
}

TEST(Simulate, GrowthFactorMatchesOracle) {
  for (const char* name : {"d1q2.json", "d1q3.json", "d2q5.json"}) {
    const auto cfg = reference(name);
    const auto res = run_simulation(cfg.scheme, cfg.grid, cfg.initial, 100, 20);
    ASSERT_TRUE(res.growth_factor_measured.has_value());
    EXPECT_NEAR(*res.growth_factor_measured, *res.growth_factor_oracle, 1e-8) << name;
    EXPECT_LT(res.mass_drift, 1e-13);
  }
}

TEST(Simulate, SnapshotsAtRequestedSteps) {
  const auto cfg = reference("d1q2.json");
  std::vector<long> steps;
  run_simulation(cfg.scheme, cfg.grid, cfg.initial, 25, 20, 10,
                 [&](const StateField& s) { steps.push_back(s.step_count); });
  EXPECT_EQ(steps, (std::vector<long>{0, 10, 20, 25}));
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch_dir("cli");
  EXPECT_EQ(run_cli("verify --config " + kConfigDir + "/d1q2.json --output " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "verification_report.json"));

  auto bad = minimal();
  bad["scheme"]["relaxation"] = {0.1, 1.5};
  std::ofstream(dir / "bad.json") << bad.dump();
  EXPECT_EQ(run_cli("analyze --config " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run_cli("analyze --config " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(run_cli("analyze --config " + kConfigDir + "/d1q2.json --order 7"), 2);

  EXPECT_EQ(run_cli("verify --config " + kConfigDir + "/d1q2.json --format xml"), 2);
  EXPECT_EQ(run_cli("verify"), 2);
}

TEST(Cli, AnalyzeOutputs) {
  const auto dir = scratch_dir("analyze");
  ASSERT_EQ(run_cli("analyze --config " + kConfigDir + "/d1q2.json --order 2 --output " + dir.string()), 0);
  const auto j = nlohmann::json::parse(slurp(dir / "equivalent_equation.json"));
  EXPECT_EQ(j["equivalent_equation"]["operators"][1]["terms"][0]["multi_index"], std::vector<int>{2});
  EXPECT_NEAR(j["equivalent_equation"]["operators"][1]["terms"][0]["coefficient"].get<double>(),
              (1 / 1.5 - 0.5) * 0.75, 1e-15);
  EXPECT_FALSE(j.contains("shifted_frame_variant"));
  EXPECT_NE(slurp(dir / "equivalent_equation.txt").find("∂t ρ"), std::string::npos);

  ASSERT_EQ(run_cli("analyze --config " + kConfigDir + "/d1q3.json --output " + dir.string()), 0);
  const auto k = nlohmann::json::parse(slurp(dir / "equivalent_equation.json"));
  EXPECT_TRUE(k.contains("shifted_frame_variant"));

  ASSERT_EQ(run_cli("analyze --config " + kConfigDir + "/d1q2.json --order 1 --output " + dir.string()), 0);
  const auto o1 = nlohmann::json::parse(slurp(dir / "equivalent_equation.json"));
  EXPECT_EQ(o1["equivalent_equation"]["operators"].size(), 1u);
}

TEST(Cli, SimulateConvergenceDispersionOutputs) {
  const auto dir = scratch_dir("outputs");
  const std::string cfg = " --config " + kConfigDir + "/d1q2.json --output " + dir.string();
  ASSERT_EQ(run_cli("simulate" + cfg + " --format csv"), 0);
  EXPECT_TRUE(fs::exists(dir / "observables.csv"));
  EXPECT_TRUE(fs::exists(dir / "snapshot_000000.csv"));
  EXPECT_TRUE(fs::exists(dir / "snapshot_000100.meta.json"));
  ASSERT_EQ(run_cli("convergence" + cfg), 0);
  EXPECT_TRUE(fs::exists(dir / "convergence.json"));
  ASSERT_EQ(run_cli("dispersion" + cfg), 0);
  EXPECT_TRUE(fs::exists(dir / "dispersion.json"));
  EXPECT_TRUE(fs::exists(dir / "dispersion.csv"));
  const auto first = slurp(dir / "dispersion.json");
  ASSERT_EQ(run_cli("dispersion" + cfg), 0);
  EXPECT_EQ(first, slurp(dir / "dispersion.json"));
}
