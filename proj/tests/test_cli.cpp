#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>

#include "gift/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gift;

namespace {

struct Result {
  int code;
  std::string out;
};

Result gift_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + GIFT_CLI_PATH + " " + args + " 2>/dev/null";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("gift-cli-" + std::to_string(::getpid()) + "-" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string out() const { return "--out " + (dir_ / "run").string(); }
  fs::path dir_;
};

constexpr const char* kSmall = "--seed 3 --rule 'cyan object' --pairs 10 --validation 25 --top-k 4";

}  // namespace

TEST_F(CliTest, StagedRunMatchesOneShot) {
  const std::string staged = "--out " + (dir_ / "staged").string();
  for (const char* stage : {"gen", "cex", "caption", "summarize", "verify"}) {
    EXPECT_EQ(gift_cli(std::string(kSmall) + " " + staged + " " + stage).code, 0) << stage;
  }
  const auto r = gift_cli(std::string(kSmall) + " " + out() + " run");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("report.json"), std::string::npos);
  EXPECT_EQ(read_file(dir_ / "staged" / "report.json"), read_file(dir_ / "run" / "report.json"));
  const json report = json::parse(read_file(dir_ / "run" / "report.json"));
  EXPECT_EQ(report.at("candidates").at(0).at("concept"), "color=cyan");

  // Later stages pick the configuration up from the manifest.
  EXPECT_EQ(gift_cli(out() + " --top-k 2 summarize").code, 0);
  EXPECT_EQ(gift_cli(out() + " --top-k 2 verify").code, 0);

  const auto concept_eval = gift_cli(out() + " verify --concept 'cyan object'");
  ASSERT_EQ(concept_eval.code, 0);
  const json e = json::parse(concept_eval.out);
  EXPECT_EQ(e.at("concept"), "color=cyan");
  EXPECT_EQ(e.at("status"), "evaluated");
}

TEST_F(CliTest, HandWrittenCandidatesFile) {
  ASSERT_EQ(gift_cli(std::string(kSmall) + " " + out() + " gen").code, 0);
  write_file(dir_ / "c.txt", "cyan object\nlarge sphere\n");
  ASSERT_EQ(gift_cli(out() + " verify --candidates " + (dir_ / "c.txt").string()).code, 0);
  const json report = json::parse(read_file(dir_ / "run" / "report.json"));
  EXPECT_EQ(report.at("candidates").size(), 2u);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(gift_cli("--help").code, 0);
  EXPECT_EQ(gift_cli("").code, 1);
  EXPECT_EQ(gift_cli("run --no-such-flag").code, 1);
  EXPECT_EQ(gift_cli(out() + " --rule 'dense traffic' run").code, 1);
  EXPECT_EQ(gift_cli(out() + " --rank-key loss run").code, 1);
  write_file(dir_ / "bad.toml", "[stage1]\nparis = 3\n");
  EXPECT_EQ(gift_cli("--config " + (dir_ / "bad.toml").string() + " " + out() + " run").code, 1);
  EXPECT_EQ(gift_cli(out() + " cex").code, 2);  // no gen stage yet
  ASSERT_EQ(gift_cli(std::string(kSmall) + " " + out() + " gen").code, 0);
  EXPECT_EQ(gift_cli(out() + " --pairs 11 cex").code, 2);  // config mismatch
  EXPECT_EQ(gift_cli(out() + " verify --concept 'dense traffic'").code, 2);  // verify stage missing
}

TEST_F(CliTest, EndpointFailureExitCode) {
  ASSERT_EQ(gift_cli(std::string(kSmall) + " " + out() + " gen").code, 0);
  ASSERT_EQ(gift_cli(out() + " cex").code, 0);
  ASSERT_EQ(gift_cli(out() + " caption").code, 0);
  // Nothing listens on port 9 of localhost.
  EXPECT_EQ(gift_cli(out() + " --summarizer llm summarize", "GIFT_LLM_URL=http://127.0.0.1:9").code, 3);
  EXPECT_EQ(gift_cli(out() + " --summarizer llm summarize").code, 1);  // no endpoint configured
}

TEST_F(CliTest, TomlConfig) {
  write_file(dir_ / "run.toml",
             "seed = 2\n[classifier]\nrule = \"purple object\"\n[stage1]\npairs = 8\n"
             "[stage3]\ntop_k = 3\n[stage4]\nn_positive = 20\nn_negative = 20\n");
  ASSERT_EQ(gift_cli("--config " + (dir_ / "run.toml").string() + " " + out() + " run").code, 0);
  const json manifest = json::parse(read_file(dir_ / "run" / "manifest.json"));
  EXPECT_EQ(manifest.at("config").at("classifier").at("rule"), "purple object");
  const json report = json::parse(read_file(dir_ / "run" / "report.json"));
  EXPECT_EQ(report.at("candidates").at(0).at("concept"), "color=purple");
}
