#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "cli.hpp"
#include "vpcrf/checkpoint.hpp"
#include "vpcrf/log.hpp"
#include "vpcrf/report.hpp"
#include "vpcrf/training.hpp"

namespace {

namespace fs = std::filesystem;
using namespace vpcrf;

const fs::path kFixtures = fs::path(VPCRF_FIXTURE_DIR) / "cli";
const fs::path kQuickstart = fs::path(VPCRF_DATA_DIR) / "quickstart";

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "vpcrf");
  std::ostringstream out, err;
  ScopedWarningCapture quiet;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / "vpcrf_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) { return read_text_file(p); }

// Untrained VP model over 16-d hashed embeddings.
fs::path hashed_checkpoint(const fs::path& dir) {
  Checkpoint c;
  c.params = ModelParams::init(Metric::VP);
  c.embeddings.kind = EmbeddingSpec::Kind::Hashed;
  c.embeddings.dim = 16;
  c.embeddings.seed = 0;
  const fs::path p = dir / "hashed.json";
  std::ofstream(p) << serialize_checkpoint(c);
  return p;
}

TEST(CliInspect, StatsTable) {
  const CliResult r = run({"inspect", (kFixtures / "sizes.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("avg_support_size\t3.00\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("n_query_sentences\t5\n"), std::string::npos);
  EXPECT_NE(r.out.find("n_labels\t5\n"), std::string::npos);
}

TEST(CliInspect, MalformedFileExitsTwo) {
  const CliResult r = run({"inspect", (kFixtures / "malformed.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("support sentence 0"), std::string::npos) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(CliUsage, BadArgumentsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"inspect"}).code, 2);
  EXPECT_EQ(run({"inspect", (kFixtures / "sizes.json").string(), "--format", "csv"}).code, 2);
  EXPECT_EQ(run({"synth-bench", "--config", (kFixtures / "bench_tiny.json").string(), "--metric",
                 "euclid"})
                .code,
            2);
}

TEST(CliTrain, QuickstartWritesCheckpointAndHistory) {
  const fs::path dir = scratch("train");
  const fs::path ckpt = dir / "model.json";
  const CliResult r = run({"train", "--config", (kQuickstart / "run.json").string(), "--out",
                     ckpt.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(ckpt));
  const std::string history = slurp(dir / "model.json.history.tsv");
  EXPECT_EQ(std::count(history.begin(), history.end(), '\n'), 6);
  EXPECT_EQ(history, r.out);
  EXPECT_NO_THROW(load_checkpoint(ckpt));
}

TEST(CliTrain, MissingDataPathExitsTwo) {
  const fs::path dir = scratch("missing");
  std::ofstream(dir / "run.json")
      << R"({"data": {"train": ["nowhere.json"], "val": "val.json"},
             "embeddings": {"kind": "hashed", "dim": 4}})";
  const CliResult r = run({"train", "--config", (dir / "run.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nowhere.json"), std::string::npos) << r.err;
}

TEST(CliTrain, UnknownConfigKeyExitsTwo) {
  const fs::path dir = scratch("unknown");
  std::ofstream(dir / "run.json") << R"({"data": {"train": ["a.json"], "val": "v.json"},
      "embeddings": {"kind": "hashed"}, "optimizer": "sgd"})";
  const CliResult r = run({"train", "--config", (dir / "run.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("optimizer"), std::string::npos);
}

TEST(CliTrain, SameSeedGivesIdenticalFiles) {
  const fs::path dir = scratch("determinism");
  for (const char* name : {"a.json", "b.json"}) {
    ASSERT_EQ(run({"train", "--config", (kQuickstart / "run.json").string(), "--seed", "3",
                   "--out", (dir / name).string()})
                  .code,
              0);
  }
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  EXPECT_EQ(slurp(dir / "a.json.history.tsv"), slurp(dir / "b.json.history.tsv"));
}

TEST(CliEval, PerfectPredictionScoresOne) {
  const fs::path ckpt = hashed_checkpoint(scratch("perfect"));
  const CliResult r = run({"eval", ckpt.string(), (kFixtures / "perfect.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("travel\tvp\t1.0000\t-\n"), std::string::npos) << r.out;
}

TEST(CliEval, ErrorTableMatchesHandCounts) {
  const fs::path dir = scratch("errors");
  const fs::path ckpt = hashed_checkpoint(dir);
  const CliResult r = run({"eval", ckpt.string(), (kFixtures / "mistakes.json").string(), "--errors",
                     "--out", (dir / "episodes.tsv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  // O-X from ["alpha"] gold O; X-O and X-X from ["beta","the"] gold B-a I-a.
  EXPECT_NE(r.out.find("model\tO-X\tX-O\tX-X\nvp\t1\t1\t1\n"), std::string::npos) << r.out;
  EXPECT_NE(slurp(dir / "episodes.tsv").find("episode\tprecision"), std::string::npos);
}

TEST(CliEval, FinetuneStepsMatchLibrary) {
  const fs::path dir = scratch("finetune");
  const fs::path ckpt = dir / "model.json";
  ASSERT_EQ(run({"train", "--config", (kQuickstart / "run.json").string(), "--out",
                 ckpt.string()})
                .code,
            0);
  const Checkpoint c = load_checkpoint(ckpt);
  const Provider provider = load_provider(c.embeddings);
  ScopedWarningCapture quiet;
  const DomainFile test = load_domain_file(kQuickstart / "test.json");
  const double lib = evaluate(c.params, test, provider, 3, c.config).f1.mean_f1;
  const CliResult r = run({"eval", ckpt.string(), (kQuickstart / "test.json").string(),
                     "--finetune-steps", "3", "--out", (dir / "ep.tsv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find(fmt::format("test\tvp+ft3\t{}\t-\n", format_real(lib))), std::string::npos)
      << r.out;

  // Per-episode rows equal fine-tuning each episode from the same checkpoint.
  std::vector<EpisodePredictions> preds;
  for (const auto& ep : test.episodes) {
    const auto tuned = finetune_on_support(c.params, ep, provider, 3, c.config);
    EpisodePredictions p;
    p.pred = decode_episode(tuned, ep, provider);
    for (const auto& q : ep.query) p.gold.push_back(q.tags);
    preds.push_back(std::move(p));
  }
  EXPECT_EQ(episode_f1(preds).mean_f1, lib);
}

TEST(CliDecode, TokenGoldPredLines) {
  const fs::path ckpt = hashed_checkpoint(scratch("decode"));
  const CliResult r = run({"decode", ckpt.string(), (kFixtures / "perfect.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.substr(0, 44), "boston B-city B-city\nyork I-city I-city\nthe ");
}

TEST(CliEval, DimensionMismatchRejected) {
  const fs::path dir = scratch("mismatch");
  Checkpoint c;
  c.params = ModelParams::init(Metric::VP, 8);
  c.embeddings.kind = EmbeddingSpec::Kind::Hashed;
  c.embeddings.dim = 4;
  std::ofstream(dir / "c.json") << serialize_checkpoint(c);
  const CliResult r = run({"eval", (dir / "c.json").string(), (kFixtures / "perfect.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("dimension"), std::string::npos);
}

TEST(CliSynthBench, AllMetricsWithStdAndStableOutput) {
  const fs::path dir = scratch("bench");
  const std::string cfg = (kFixtures / "bench_tiny.json").string();
  const CliResult a = run({"synth-bench", "--config", cfg, "--seeds", "2", "--out", dir.string()});
  ASSERT_EQ(a.code, 0) << a.err;
  for (const char* m : {"vp", "vpb", "dot", "rproj", "cosine", "sqeuclid", "scaled-dot",
                        "dot-bias"}) {
    EXPECT_NE(a.out.find(fmt::format("\t{}\t", m)), std::string::npos) << m;
  }
  EXPECT_EQ(a.out.find("\t-\n"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "run.json"));
  EXPECT_TRUE(fs::exists(dir / "embeddings.jsonl"));
  const CliResult b = run({"synth-bench", "--config", cfg, "--seeds", "2", "--format", "tsv"});
  EXPECT_EQ(a.out, b.out);
  const CliResult one = run({"synth-bench", "--config", cfg, "--metric", "vpb", "--format", "md"});
  EXPECT_EQ(one.out.rfind("| domain", 0), 0u);
  EXPECT_EQ(std::count(one.out.begin(), one.out.end(), '\n'), 3);
}

}  // namespace
