#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sys/wait.h>

#include "support.hpp"

#ifndef LIPSYNC_CLI
#error "LIPSYNC_CLI must name the command line binary"
#endif

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string err;
};

/// Runs the tool with `args`, capturing stderr.
Result cli(const std::string& args) {
  const fs::path err_file = fs::temp_directory_path() / "lipsync_cli_stderr.txt";
  const std::string cmd = std::string(LIPSYNC_CLI) + " " + args + " > /dev/null 2> '" + err_file.string() + "'";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(err_file);
  r.err.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, UsageErrorsAreJson) {
  const Result r = cli("verify");
  EXPECT_NE(r.code, 0);
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j.at("error"), "UsageError");
  EXPECT_TRUE(j.contains("message"));
  EXPECT_NE(cli("no-such-command").code, 0);
}

TEST(Cli, LibraryErrorsCarryTheirCode) {
  const fs::path root = testing_support::scratch_dir("cli_errors");
  const Result r = cli("dataset build --manifest " + q(root / "missing.json") + " --out " + q(root / "d"));
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(nlohmann::json::parse(r.err).at("error"), "MissingFile");
  EXPECT_FALSE(fs::exists(root / "d"));
}

TEST(Cli, ConfigFileSuppliesFlagsAndFlagsWin) {
  const fs::path root = testing_support::scratch_dir("cli_config");
  ASSERT_EQ(cli("synth corpus --seed 2 --n 1 --seconds 2 --out " + q(root / "corpus")).code, 0);
  ASSERT_EQ(cli("dataset build --manifest " + q(root / "corpus" / "manifest.json") + " --out " + q(root / "data")).code, 0);
  std::ofstream(root / "cfg.json") << R"({"epochs": 2, "hidden": 6, "delay": 4, "pca_k": 3})";
  ASSERT_EQ(cli("train keypoints --config " + q(root / "cfg.json") + " --data " + q(root / "data") + " --out " +
                q(root / "a.json") + " --epochs 1")
                .code,
            0);
  const auto cfg = lipsync::nn::read_json_file(root / "a.json").at("config");
  EXPECT_EQ(cfg.at("epochs"), 1);  // flag wins
  EXPECT_EQ(cfg.at("hidden_size"), 6);
  EXPECT_EQ(cfg.at("delay_frames"), 4);
  EXPECT_EQ(lipsync::nn::read_json_file(root / "a.json").at("loss_history").size(), 1u);
}

TEST(Cli, VerifyReportsMissingFrame) {
  const fs::path root = testing_support::scratch_dir("cli_verify");
  ASSERT_EQ(cli("synth corpus --seed 3 --n 1 --seconds 3 --out " + q(root / "corpus")).code, 0);
  ASSERT_EQ(cli("dataset build --manifest " + q(root / "corpus" / "manifest.json") + " --out " + q(root / "data")).code, 0);
  ASSERT_EQ(cli("train keypoints --data " + q(root / "data") + " --out " + q(root / "kp.json") + " --epochs 1 --hidden 4 --delay 3").code, 0);
  ASSERT_EQ(cli("train inpainter --data " + q(root / "data") + " --out " + q(root / "inp.json") + " --epochs 1").code, 0);
  const std::string render = "render --text 'ab cd' --target " + q(root / "corpus" / "clip_000000") + " --pca " +
                             q(root / "data" / "pca_basis.json") + " --kp " + q(root / "kp.json") + " --inpaint " +
                             q(root / "inp.json") + " --out " + q(root / "out");
  ASSERT_EQ(cli(render).code, 0);
  EXPECT_EQ(cli("verify --out " + q(root / "out")).code, 0);
  fs::remove(root / "out" / lipsync::frame_file_name(2));
  const Result r = cli("verify --out " + q(root / "out"));
  EXPECT_EQ(r.code, 1);
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j.at("error"), "VerificationFailed");
  EXPECT_NE(j.at("violations").dump().find(lipsync::frame_file_name(2)), std::string::npos);
  // a second render replaces the damaged directory as a whole
  ASSERT_EQ(cli(render).code, 0);
  EXPECT_EQ(cli("verify --out " + q(root / "out")).code, 0);
}
