// Drives the refswap binary as a subprocess.

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

#include "testing.hpp"

namespace refswap {
namespace {

using testing::run_command;
using testing::shell_quote;
using testing::TempDir;
namespace fs = std::filesystem;

struct Cli {
  fs::path config;
  std::string env;

  testing::CommandResult operator()(const std::string& args) const {
    std::string cmd = env + " " + shell_quote(REFSWAP_CLI) + " --log-level warn --config " +
                      shell_quote(config.string()) + " " + args;
    return run_command(cmd);
  }
};

Cli make_cli(const TempDir& dir, const json& extra = json::object()) {
  return Cli{testing::write_config(dir.path(), testing::synthetic_config(dir / "run", extra)), ""};
}

json last_line(const std::string& out) {
  std::string s = trim(out);
  auto nl = s.rfind('\n');
  return json::parse(nl == std::string::npos ? s : s.substr(nl + 1));
}

TEST(Cli, MissingPrerequisiteExitsTwo) {
  TempDir dir;
  EXPECT_EQ(make_cli(dir)("score").exit_code, 2);
}

TEST(Cli, InvalidConfigExitsOne) {
  TempDir dir;
  Cli cli = make_cli(dir, {{"swap", {{"strategy", "sideways"}}}});
  EXPECT_EQ(cli("ingest").exit_code, 1);
  EXPECT_EQ(run_command(shell_quote(REFSWAP_CLI) + " no-such-stage 2>/dev/null").exit_code, 1);
}

TEST(Cli, RepeatedSwapIsSkippedAndIdentical) {
  TempDir dir;
  Cli cli = make_cli(dir);
  ASSERT_EQ(cli("ingest").exit_code, 0);
  ASSERT_EQ(cli("annotate").exit_code, 0);
  auto first = cli("swap");
  ASSERT_EQ(first.exit_code, 0);
  EXPECT_FALSE(last_line(first.out)["skipped"].get<bool>());
  std::string bytes = read_file(dir / "run" / "swaps.jsonl");
  auto second = cli("swap");
  ASSERT_EQ(second.exit_code, 0);
  EXPECT_TRUE(last_line(second.out)["skipped"].get<bool>());
  EXPECT_EQ(read_file(dir / "run" / "swaps.jsonl"), bytes);
}

TEST(Cli, OfflinePipelineOpensNoSockets) {
  TempDir dir;
  Cli cli = make_cli(dir);
  fs::path log = dir / "sockets.log";
  cli.env = "LD_PRELOAD=" + shell_quote(REFSWAP_SOCKET_GUARD) +
            " REFSWAP_SOCKET_GUARD_LOG=" + shell_quote(log.string());
  for (const char* stage : {"ingest", "annotate", "swap", "generate", "judge", "score",
                            "report"}) {
    ASSERT_EQ(cli(std::string("--offline ") + stage).exit_code, 0) << stage;
  }
  EXPECT_FALSE(fs::exists(log)) << read_file(log);
  EXPECT_TRUE(fs::exists(dir / "run" / "report.md"));
}

TEST(Cli, SocketGuardRecordsAttempts) {
  TempDir dir;
  fs::path log = dir / "sockets.log";
  // Sanity check that the shim is effective: an HTTP backend run outside
  // offline mode must try to open a socket and get refused.
  json extra = {{"offline", false},
                {"backends",
                 {{"remote", {{"type", "http"}, {"model", "m"},
                              {"base_url", "http://127.0.0.1:9"}}}}},
                {"judge", {{"judges", {"remote"}}}},
                {"retry", {{"max_attempts", 1}}}};
  Cli cli = make_cli(dir, extra);
  cli.env = "LD_PRELOAD=" + shell_quote(REFSWAP_SOCKET_GUARD) +
            " REFSWAP_SOCKET_GUARD_LOG=" + shell_quote(log.string());
  for (const char* stage : {"ingest", "annotate", "swap", "generate"}) {
    ASSERT_EQ(cli(stage).exit_code, 0) << stage;
  }
  cli("judge");
  EXPECT_TRUE(fs::exists(log));
}

TEST(Cli, ReviewExportDropsRejected) {
  TempDir dir;
  Cli cli = make_cli(dir);
  for (const char* stage : {"ingest", "annotate", "swap", "generate"}) {
    ASSERT_EQ(cli(stage).exit_code, 0) << stage;
  }
  auto metas = read_jsonl<MetaEvalInstance>(dir / "run" / "meta_instances.jsonl");
  ASSERT_EQ(metas.size(), 100u);
  {
    std::ofstream log(dir / "run" / "decisions.jsonl");
    for (std::size_t i = 0; i < metas.size(); ++i) {
      for (ReviewStage st : kAllReviewStages) {
        bool reject = i < 3 && st == ReviewStage::kSwap;
        log << json{{"instance_id", metas[i].base.id},
                    {"stage", std::string(to_string(st))},
                    {"decision", reject ? "rejected" : "accepted"},
                    {"reviewer", "t"},
                    {"timestamp", "2024-01-01T00:00:00Z"}}
                   .dump()
            << "\n";
      }
    }
  }
  auto r = cli("review-serve --export");
  ASSERT_EQ(r.exit_code, 0);
  EXPECT_EQ(last_line(r.out)["exported"], 97);
  EXPECT_EQ(read_jsonl<MetaEvalInstance>(dir / "run" / "reviewed_meta_instances.jsonl").size(),
            97u);
  auto judged = cli("judge --input reviewed_meta_instances.jsonl");
  ASSERT_EQ(judged.exit_code, 0);
  EXPECT_EQ(last_line(judged.out)["counts"]["verdicts"], 97 * 4);
}

}  // namespace
}  // namespace refswap
