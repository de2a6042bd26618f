#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <algorithm>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace qosc::testing;

namespace {

namespace fs = std::filesystem;

struct Run {
  int status;
  std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
  const auto out = (fs::temp_directory_path() / ("qosc_cli_" + std::to_string(::getpid()) + ".out")).string();
  const std::string cmd = env + " \"" QOSC_CLI "\" " + args + " > \"" + out + "\" 2>/dev/null";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream buf;
  buf << in.rdbuf();
  std::remove(out.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, buf.str()};
}

std::string temp_file(const std::string& name, const std::string& text) {
  const auto path = (fs::temp_directory_path() / name).string();
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST(Cli, ValidateFixture) {
  const auto r = run("validate " + fixture("running_example.repo.json"));
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "ok: 32 services, 1 queries, 18 concepts\n");
}

TEST(Cli, CorruptInputExitsTwo) {
  const auto path = temp_file("qosc_corrupt.json", "{ \"version\": ");
  EXPECT_EQ(run("validate " + path).status, 2);
  EXPECT_EQ(run("compose " + path).status, 2);
  EXPECT_EQ(run("validate /nonexistent.json").status, 2);
  std::remove(path.c_str());
}

TEST(Cli, ComposeFixture) {
  const auto r = run("compose " + fixture("running_example.repo.json"));
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["status"], "solution");
  EXPECT_TRUE(j["violations"].empty());
  EXPECT_LE(j["qos"]["response_time"].get<double>(), 400.0);
}

TEST(Cli, UnsatisfiableQueryExitsThree) {
  const auto path = temp_file("qosc_tight.json", to_text(worked_example(50, 0.8)));
  EXPECT_EQ(run("compose " + path).status, 3);
  std::remove(path.c_str());
}

TEST(Cli, ElapsedDeadlineExitsFour) {
  const auto repo = fixture("running_example.repo.json");
  EXPECT_EQ(run("compose " + repo + " --deadline-ms 0").status, 4);
  EXPECT_EQ(run("compose " + repo, "QOSC_DEADLINE_MS=0").status, 4);
}

TEST(Cli, BenchWritesTheCsvHeader) {
  const auto r = run("bench " + fixture("running_example.repo.json") + " --repetitions 1");
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), qosc::kBenchHeader);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 5);
  EXPECT_EQ(run("bench " + fixture("running_example.repo.json") + " --repetitions 0").status, 2);
}

TEST(Cli, AbstractReportsSizes) {
  const auto r = run("abstract " + fixture("running_example.repo.json"));
  ASSERT_EQ(r.status, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["sizes"], nlohmann::json({32, 18, 15, 15}));
}

TEST(Cli, GenIsDeterministic) {
  const auto config = temp_file("qosc_gen.json", R"({"seed": 3, "n_services": 20})");
  const auto a = run("gen " + config);
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, run("gen " + config).out);
  EXPECT_NE(a.out, run("gen " + config + " --seed 4").out);
  std::remove(config.c_str());
}

TEST(Cli, UnknownSubcommandExitsTwo) { EXPECT_EQ(run("frobnicate").status, 2); }
