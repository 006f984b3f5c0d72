// Copyright 2026 The perhom Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "perhom/cli.hpp"

using namespace perhom;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("perhom_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) const {
    const std::string cmd = "cd '" + dir_.string() + "' && '" PERHOM_CLI_PATH "' " + args + " >>cli.log 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  }
  json read_json(const std::string& rel) const {
    std::ifstream f(dir_ / rel);
    return json::parse(f);
  }
  std::string read_text(const std::string& rel) const {
    std::ifstream f(dir_ / rel, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  }
  void write_config(const std::string& rel, const Config& c) const {
    std::ofstream f(dir_ / rel);
    f << dump_config(c);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, EveryFixtureValidates) {
  for (const auto& name : fixtures::names()) {
    ASSERT_EQ(run("fixture " + name + " -o " + name + ".json"), cli::kOk) << name;
    EXPECT_EQ(run("validate " + name + ".json -o v_" + name), cli::kOk) << name;
    EXPECT_TRUE(read_json("v_" + name + "/validation.json")["ok"].get<bool>()) << name;
    EXPECT_EQ(read_json("v_" + name + "/validate.manifest.json")["format"], "perhom-manifest");
    EXPECT_EQ(read_json(name + ".manifest.json")["config_source"], "fixture:" + name);
  }
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("validate missing.json"), cli::kConfigFailure);
  {
    std::ofstream f(dir_ / "broken.json");
    f << "{\n  \"dimension\": 2,\n  \"kernel\": [\n";
  }
  EXPECT_EQ(run("validate broken.json"), cli::kConfigFailure);
  EXPECT_NE(read_text("cli.log").find("line 4"), std::string::npos) << read_text("cli.log");

  // A key-path diagnostic for a well-formed file with a bad value.
  Config c = fixtures::ex4_0_axes();
  write_config("axes.json", c);
  json j = read_json("axes.json");
  j["run"]["delta"] = 3.0;
  {
    std::ofstream f(dir_ / "bad_delta.json");
    f << j.dump(2);
  }
  EXPECT_EQ(run("validate bad_delta.json"), cli::kConfigFailure);
  EXPECT_NE(read_text("cli.log").find("/run/delta"), std::string::npos);

  // A kernel that turns negative is a validation failure.
  c.spec.kernel.f = TrigPoly::constant(2, 1.0) + TrigPoly::cos_z(2, {1, 0, 0}, 2.0);
  c.spec.kernel.kmin = 0.1;
  c.spec.kernel.kmax = 3.0;
  write_config("neg.json", c);
  EXPECT_EQ(run("validate neg.json -o neg"), cli::kValidationFailure);
  EXPECT_FALSE(read_json("neg/validation.json")["ok"].get<bool>());

  EXPECT_EQ(run("no_such_command"), cli::kConfigFailure);
  EXPECT_EQ(run("verify axes.json --regime nonsense"), cli::kConfigFailure);
}

TEST_F(Cli, EffectiveOnTranslationInvariantSpec) {
  Config c = fixtures::ex4_1_centered();
  c.spec.kernel = fixtures::constant_kernel(1);
  DriftField b;
  b.f = std::vector<TrigPoly>{TrigPoly::constant(1, 0.3)};
  c.spec.drift = b;
  write_config("ti.json", c);
  ASSERT_EQ(run("effective ti.json -o e --mixing-paths 20"), cli::kOk);
  const json e = read_json("e/effective.json");
  EXPECT_NEAR(e["bbar"][0].get<double>(), 0.3, 1e-14);
  EXPECT_EQ(e["mu"]["source"], "uniform");
  EXPECT_EQ(e["mu"]["tv_to_uniform"].get<double>(), 0.0);
  EXPECT_NEAR(e["kbar0"]["weighted_mean"].get<double>(), 1.0, 1e-14);
  // ϱ₀ = δ₊ + ½δ₋, φ = r^{3/2}: b_∞ = ∫_1^∞ r^{-3/2} dr·(1 − ½) = 1.
  EXPECT_NEAR(e["bbar_inf"][0].get<double>(), 1.0, 1e-8);
  EXPECT_TRUE(fs::exists(dir_ / "e/kbar0.csv"));
  EXPECT_EQ(read_text("e/mu.csv").substr(0, 20), "# perhom-measure v1\n");
  const json m = read_json("e/effective.manifest.json");
  EXPECT_EQ(m["artifacts"]["report"], "effective.json");
  EXPECT_EQ(m["regime"], "stable_center");
}

TEST_F(Cli, SimulateIsReproducibleAcrossWorkers) {
  write_config("st.json", fixtures::ex4_1_stable());
  ASSERT_EQ(run("simulate st.json -o a --paths 400 --eps 0.125 --workers 1"), cli::kOk);
  ASSERT_EQ(run("simulate st.json -o b --paths 400 --eps 0.125 --workers 3"), cli::kOk);
  const std::string ba = read_text("a/batch.bin"), bb = read_text("b/batch.bin");
  ASSERT_FALSE(ba.empty());
  EXPECT_EQ(ba, bb);
  EXPECT_EQ(read_text("a/batch.csv"), read_text("b/batch.csv"));

  const json ma = read_json("a/simulate.manifest.json");
  EXPECT_EQ(ma["parameters"]["eps"].get<double>(), 0.125);
  ASSERT_EQ(ma["overrides"].size(), 2u);
  EXPECT_EQ(ma["overrides"][0]["flag"], "--workers");
  EXPECT_EQ(ma["overrides"][1]["key"], "/run/paths");
  EXPECT_EQ(ma["overrides"][1]["value"], 400);
  // The worker count is part of the effective config, so only it changes the hash.
  EXPECT_NE(ma["config_hash"], read_json("b/simulate.manifest.json")["config_hash"]);

  ASSERT_EQ(run("simulate st.json -o c --paths 400 --eps 0.125 --workers 1"), cli::kOk);
  EXPECT_EQ(read_text("a/simulate.manifest.json"), read_text("c/simulate.manifest.json"));
  EXPECT_EQ(read_text("a/batch.bin"), read_text("c/batch.bin"));
}

TEST_F(Cli, CorrectorOnDiffusiveFixture) {
  write_config("diff.json", fixtures::ex4_1_diffusive());
  ASSERT_EQ(run("corrector diff.json -o c"), cli::kOk);
  const json j = read_json("c/covariance.json");
  const double A = j["A"]["A"][0][0].get<double>(), A0 = j["A_without_corrector"]["A"][0][0].get<double>();
  EXPECT_GT(A, 0.0);
  EXPECT_LT(A, A0);
  EXPECT_GE(j["corrector"]["sup_psi"].get<double>(), 0.1);
  EXPECT_EQ(read_text("c/corrector.csv").substr(0, 22), "# perhom-corrector v1\n");

  ASSERT_EQ(run("corrector diff.json -o f --method fourier"), cli::kOk);
  const double Af = read_json("f/covariance.json")["A"]["A"][0][0].get<double>();
  EXPECT_NEAR(Af, A, 0.05 * A);
  EXPECT_EQ(read_json("f/corrector.manifest.json")["overrides"][0]["value"], "fourier");

  write_config("st.json", fixtures::ex4_1_stable());
  EXPECT_EQ(run("corrector st.json -o s"), cli::kFailure);
}

TEST_F(Cli, VerifyStableFixturePasses) {
  write_config("st.json", fixtures::ex4_1_stable());
  ASSERT_EQ(run("verify st.json -o v"), cli::kOk) << read_text("cli.log");
  const json r = read_json("v/report.json");
  EXPECT_EQ(r["verdict"], "PASS");
  EXPECT_EQ(r["honesty"], kHonestyClause);
  EXPECT_EQ(r["rows"].size(), 3u);
  EXPECT_EQ(read_text("v/report.csv").substr(0, 23), "# perhom-convergence v1");
}

TEST_F(Cli, VerifyFailureExitCode) {
  // 60 paths cannot resolve KS ≤ 0.05.
  write_config("st.json", fixtures::ex4_1_stable());
  EXPECT_EQ(run("verify st.json -o v --paths 60 --ladder 0.125"), cli::kVerifyFail);
  EXPECT_EQ(read_json("v/report.json")["verdict"], "FAIL");
  EXPECT_EQ(read_json("v/verify.manifest.json")["overrides"][1]["key"], "/run/eps_ladder");
}
