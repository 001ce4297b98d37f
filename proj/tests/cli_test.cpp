#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "run_config.hpp"

namespace angle_i2p::cli {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root = fs::temp_directory_path() /
           ("angle_i2p_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root);
    fs::create_directories(root);
  }
  void TearDown() override { fs::remove_all(root); }

  int call(std::vector<std::string> args) {
    out.str("");
    err.str("");
    return run(args, out, err);
  }

  fs::path root;
  std::ostringstream out, err;
};

TEST(RunConfigTest, DocumentedDefaults) {
  RunConfig c;
  EXPECT_EQ(c.get("sigma_d"), "0.1");
  EXPECT_EQ(c.get("tau"), "0.2");
  EXPECT_EQ(c.get("num_keypoints"), "100");
  EXPECT_EQ(c.get("k_local"), "32");
  EXPECT_EQ(c.get("layers"), "3");
  EXPECT_EQ(c.get("d_model"), "128");
  EXPECT_EQ(c.get("heads"), "4");
  EXPECT_EQ(c.real("learning_rate"), 1e-4);
  EXPECT_EQ(c.real("weight_decay"), 1e-6);
  EXPECT_EQ(c.get("ablate_taus"), "0.2,0.4,0.5");
  EXPECT_EQ(c.integer("ransac_iterations"), 1000);
  EXPECT_NO_THROW(c.validate());
  for (const auto& k : RunConfig::keys()) EXPECT_FALSE(k.help.empty()) << k.name;
}

TEST(RunConfigTest, ValidationNamesTheKey) {
  RunConfig c;
  c.set("heads", "3");
  try {
    c.validate();
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "heads");
  }
  RunConfig d;
  d.set("outlier_ratio", "1.5");
  EXPECT_THROW(d.validate(), ConfigError);
  RunConfig m;
  m.set("consistency_mode", "euclid");
  EXPECT_THROW(m.validate(), ConfigError);
  EXPECT_THROW(m.set("no_such_key", "1"), ConfigError);
}

TEST(RunConfigTest, FileLoadingAndEcho) {
  RunConfig c;
  std::istringstream in("# comment\nseed = 12\n\n tau=0.4 # trailing\n");
  c.load(in);
  EXPECT_EQ(c.unsigned_integer("seed"), 12u);
  EXPECT_EQ(c.real("tau"), 0.4);
  std::ostringstream echo;
  c.write(echo);
  RunConfig back;
  std::istringstream again(echo.str());
  back.load(again);
  std::ostringstream echo2;
  back.write(echo2);
  EXPECT_EQ(echo.str(), echo2.str());
  std::istringstream bad("seed 12\n");
  EXPECT_THROW(c.load(bad), ConfigError);
}

TEST_F(CliTest, UnknownCommandPrintsUsage) {
  EXPECT_NE(call({"bogus"}), 0);
  EXPECT_NE(err.str().find("Usage"), std::string::npos);
  EXPECT_NE(call({}), 0);
}

TEST_F(CliTest, InvalidConfigNamesKey) {
  EXPECT_EQ(call({"generate", "--out", (root / "g").string(), "--outlier-ratio", "2"}), 2);
  EXPECT_NE(err.str().find("outlier_ratio"), std::string::npos);
  EXPECT_FALSE(fs::exists(root / "g"));
  EXPECT_EQ(call({"generate", "--set", "bogus_key=1"}), 2);
  EXPECT_NE(err.str().find("bogus_key"), std::string::npos);
  EXPECT_EQ(call({"train", "--out", (root / "t").string()}), 2);
  EXPECT_NE(err.str().find("'data'"), std::string::npos);
}

TEST_F(CliTest, PrecedenceDefaultsFileFlags) {
  {
    std::ofstream cfg(root / "run.cfg");
    cfg << "seed = 5\nscenes = 4\nn_points = 40\nsigma_d = 0.3\n";
  }
  ASSERT_EQ(call({"generate", "--config", (root / "run.cfg").string(), "--seed", "9", "--out",
                  (root / "g").string()}),
            0);
  RunConfig echoed;
  echoed.load_file(root / "g" / "config.txt");
  EXPECT_EQ(echoed.get("seed"), "9");       // flag beats file
  EXPECT_EQ(echoed.get("scenes"), "4");     // file beats default
  EXPECT_EQ(echoed.get("sigma_d"), "0.3");
  EXPECT_EQ(echoed.get("tau"), "0.2");      // default
  EXPECT_TRUE(fs::exists(root / "g" / "manifest.txt"));
  EXPECT_TRUE(fs::exists(root / "g" / "log.txt"));
}

TEST_F(CliTest, GenerateIsRerunnableFromItsConfig) {
  ASSERT_EQ(call({"generate", "--scenes", "5", "--outlier-ratio", "0.7", "--seed", "7", "--set",
                  "n_points=48", "--out", (root / "a").string()}),
            0);
  ASSERT_EQ(call({"generate", "--config", (root / "a" / "config.txt").string(), "--out",
                  (root / "b").string()}),
            0);
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), root / "a");
    EXPECT_EQ(slurp(entry.path()), slurp(root / "b" / rel)) << rel;
  }
  int scenes = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(root / "a" / "scenes")) ++scenes;
  EXPECT_EQ(scenes, 5);
}

TEST_F(CliTest, DefaultOutputDirectoryName) {
  const auto cwd = fs::current_path();
  fs::current_path(root);
  const int status = call({"selftest", "--seed", "4"});
  fs::current_path(cwd);
  EXPECT_EQ(status, 0);
  int found = 0;
  for (const auto& e : fs::directory_iterator(root)) {
    const auto name = e.path().filename().string();
    if (name.rfind("selftest_", 0) == 0 && name.size() > 11 && name.substr(name.size() - 2) == "_4") {
      ++found;
      EXPECT_TRUE(fs::exists(e.path() / "selftest.txt"));
      EXPECT_TRUE(fs::exists(e.path() / "config.txt"));
    }
  }
  EXPECT_EQ(found, 1);
}

TEST_F(CliTest, PassthroughFilterEqualsUnfiltered) {
  const auto data = (root / "data").string();
  ASSERT_EQ(call({"generate", "--scenes", "10", "--seed", "2", "--set", "n_points=64", "--out", data}), 0);
  ASSERT_EQ(call({"train", "--data", data, "--epochs", "1", "--set", "d_model=8", "--set", "heads=2",
                  "--set", "layers=1", "--out", (root / "model").string()}),
            0);
  const auto model = (root / "model" / "model.bin").string();
  EXPECT_TRUE(fs::exists(root / "model" / "history.csv"));
  ASSERT_EQ(call({"evaluate", "--data", data, "--out", (root / "plain").string()}), 0);
  ASSERT_EQ(call({"evaluate", "--data", data, "--model", model, "--tau", "0", "--out",
                  (root / "pass").string()}),
            0);
  EXPECT_EQ(slurp(root / "plain" / "metrics.csv"), slurp(root / "pass" / "metrics.csv"));
  EXPECT_EQ(slurp(root / "plain" / "summary.txt"), slurp(root / "pass" / "summary.txt"));

  const auto scene = (root / "data" / "scenes" / "scene_0000.txt").string();
  ASSERT_EQ(call({"filter", "--input", scene, "--model", model, "--out", (root / "f").string()}), 0);
  const auto scores = slurp(root / "f" / "scores.csv");
  EXPECT_EQ(scores.substr(0, 17), "index,score,kept\n");
  EXPECT_TRUE(fs::exists(root / "f" / "filtered.txt"));
}

TEST_F(CliTest, AblateEmitsTheTauSweep) {
  const auto data = (root / "data").string();
  ASSERT_EQ(call({"generate", "--scenes", "8", "--seed", "3", "--set", "n_points=48", "--out", data}), 0);
  ASSERT_EQ(call({"ablate", "--data", data, "--epochs", "1", "--set", "d_model=8", "--set", "heads=2",
                  "--set", "layers=1", "--set", "ransac_iterations=50", "--out", (root / "ab").string()}),
            0);
  const auto table = slurp(root / "ab" / "ablation.csv");
  for (const char* row : {"unfiltered,none", "full,0.2,", "full,0.4,", "full,0.5,",
                          "no_scale_alignment,0.2,", "distance_consistency,0.2,",
                          "no_cross_attention,0.2,", "no_reweight,0.2,"}) {
    EXPECT_NE(table.find(row), std::string::npos) << row;
  }
}

}  // namespace
}  // namespace angle_i2p::cli
