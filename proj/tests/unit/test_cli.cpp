#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "test_util.hpp"
#include "tracemark/cli.hpp"
#include "tracemark/media.hpp"
#include "tracemark/synth.hpp"

using namespace tracemark;
using Json = nlohmann::json;

namespace {

struct CliRun {
  int code;
  std::string out, err;

  Json last() const {
    std::istringstream in(out);
    std::string line, last_json;
    while (std::getline(in, line)) {
      if (!line.empty() && line.front() == '{') last_json = line;
    }
    return Json::parse(last_json);
  }
};

CliRun run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string p(const std::filesystem::path& path) { return path.string(); }

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, cli::kExitUsage);
  EXPECT_EQ(run({"phash", "--bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"trace"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"no-such-command"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
}

TEST(Cli, DomainFailureOnMissingFile) {
  const CliRun r = run({"phash", "/nonexistent/x.ppm"});
  EXPECT_EQ(r.code, cli::kExitDomainFailure);
  EXPECT_NE(r.err.find("error[io]"), std::string::npos) << r.err;
}

TEST(Cli, PhashAndMetrics) {
  testutil::TempDir dir;
  media::write_ppm(dir / "gray.ppm", testutil::solid(40, 40, 128, 128, 128));
  media::write_ppm(dir / "black.ppm", testutil::solid(40, 40, 0, 0, 0));
  const CliRun r = run({"phash", p(dir / "gray.ppm"), p(dir / "black.ppm")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("8000000000000000"), std::string::npos);
  EXPECT_EQ(r.last()["hamming"], 1);

  const CliRun m = run({"metrics", "mse", p(dir / "gray.ppm"), p(dir / "gray.ppm")});
  ASSERT_EQ(m.code, 0) << m.err;
  EXPECT_EQ(m.last()["mse"], 0.0);
  const CliRun s = run({"metrics", "ssim", p(dir / "gray.ppm"), p(dir / "gray.ppm")});
  EXPECT_EQ(s.last()["ssim"], 1.0);
}

TEST(Cli, Credential) {
  const CliRun r = run({"acpt", "credential", "--username", "user1", "--owner-fp", "HN", "--k1", "0,1,2,3,4,5,6,7"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.last()["encrypted_username"], "a1a97da2");
  EXPECT_EQ(run({"acpt", "credential", "--username", "u", "--k1", "0,0,1,2,3,4,5,6"}).code, cli::kExitDomainFailure);
}

TEST(Cli, LedgerAppendVerifyClaim) {
  testutil::TempDir dir;
  media::write_ppm(dir / "fp.ppm", synth::fingerprint_image(1));
  media::write_ppm(dir / "fp2.ppm", synth::fingerprint_image(2));
  const auto frames = synth::video(synth::Scene::kFlashcardRing, 3, 1).frames;
  for (std::size_t i = 0; i < frames.size(); ++i) media::write_ppm(dir / ("t" + std::to_string(i) + ".ppm"), frames[i]);
  const std::string ledger = p(dir / "own/ledger.ndjson");

  CliRun a = run({"ledger", "append", "--ledger", ledger, "--owner", "alice", "--fingerprint", p(dir / "fp.ppm"), "--image",
               p(dir / "t0.ppm"), "--image", p(dir / "t1.ppm"), "--note", "deck"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.last()["records"].size(), 2U);

  EXPECT_EQ(run({"ledger", "verify", "--ledger", ledger}).code, 0);
  const CliRun hit = run({"ledger", "claim", "--ledger", ledger, "--fingerprint", p(dir / "fp.ppm"), "--image", p(dir / "t1.ppm")});
  EXPECT_EQ(hit.code, 0) << hit.out;
  EXPECT_EQ(run({"ledger", "claim", "--ledger", ledger, "--fingerprint", p(dir / "fp2.ppm"), "--image", p(dir / "t1.ppm")}).code,
            cli::kExitDomainFailure);
  EXPECT_EQ(run({"ledger", "claim", "--ledger", ledger, "--fingerprint", p(dir / "fp.ppm"), "--image", p(dir / "t2.ppm")}).code,
            cli::kExitDomainFailure);

  std::string text;
  {
    std::ifstream in(ledger);
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  text[text.find("deck")] = 'D';
  std::ofstream(ledger, std::ios::trunc) << text;
  const CliRun v = run({"ledger", "verify", "--ledger", ledger});
  EXPECT_EQ(v.code, cli::kExitDomainFailure);
  EXPECT_EQ(v.last()["first_bad_seq"], 2);
}

TEST(Cli, WorkspaceResolvesRelativePaths) {
  testutil::TempDir dir;
  media::write_ppm(dir / "img.ppm", testutil::solid(8, 8, 128, 128, 128));
  ::setenv(cli::kWorkspaceEnv, dir.path().c_str(), 1);
  const CliRun r = run({"phash", "img.ppm"});
  ::unsetenv(cli::kWorkspaceEnv);
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST(Cli, EmbedThenTrace) {
  testutil::TempDir dir;
  const std::string data = p(dir / "digits");
  ASSERT_EQ(run({"synth", "digits", "--out", data, "--train", "1000", "--test", "300", "--seed", "1"}).code, 0);
  const std::string img = data + "/train-images-idx3-ubyte", lbl = data + "/train-labels-idx1-ubyte";
  const std::string timg = data + "/t10k-images-idx3-ubyte", tlbl = data + "/t10k-labels-idx1-ubyte";
  const CliRun base = run({"train-base", "--images", img, "--labels", lbl, "--test-images", timg, "--test-labels", tlbl,
                        "--epochs", "3", "--out", p(dir / "base.tnn")});
  ASSERT_EQ(base.code, 0) << base.err;

  for (auto [scene, user, seed] : {std::tuple{"flashcard-ring", "alice", "3"}, std::tuple{"flashcard-cross", "bob", "4"}}) {
    const std::string video = p(dir / (std::string(user) + ".y4m"));
    ASSERT_EQ(run({"synth", "video", "--scene", scene, "--frames", "80", "--seed", seed, "--out", video}).code, 0);
    const CliRun sel = run({"frames", "select", "--input", video, "-L", "30", "--d-min", "8", "--user", user, "--out",
                         p(dir / user)});
    ASSERT_EQ(sel.code, 0) << sel.err;
  }
  const CliRun em = run({"embed", "--model", p(dir / "base.tnn"), "--images", img, "--labels", lbl, "--triggers",
                      p(dir / "alice"), "--epochs", "15", "--out", p(dir / "alice.tnn")});
  ASSERT_EQ(em.code, 0) << em.err;

  const CliRun tr = run({"trace", "--model", p(dir / "alice.tnn"), "--triggers", p(dir / "alice"), "--triggers", p(dir / "bob")});
  EXPECT_EQ(tr.code, 0) << tr.out << tr.err;
  EXPECT_NE(tr.out.find("verdict=alice"), std::string::npos) << tr.out;
  EXPECT_EQ(tr.last()["verdict"], "alice");

  const CliRun none = run({"trace", "--model", p(dir / "base.tnn"), "--triggers", p(dir / "alice"), "--triggers", p(dir / "bob")});
  EXPECT_EQ(none.code, cli::kExitDomainFailure);
  EXPECT_EQ(none.last()["verdict"], "traceability failure");
}
