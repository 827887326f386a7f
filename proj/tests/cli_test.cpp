// Copyright (c) 2026 The yvec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "yvec/cli/commands.hpp"

namespace yvec::cli {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::size_t count_lines_with(const fs::path& p, const std::string& needle) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += line.find(needle) != std::string::npos;
  return n;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "yvec_cli_test";
    fs::remove_all(root_);
    ASSERT_EQ(cli({"synth", "--speakers", "3", "--utts", "3", "--seconds", "1", "--seed", "7",
                   "--trials", "12", "--out", (root_ / "corpus").string()})
                  .code,
              0);
    ASSERT_EQ(cli(train_args(root_ / "run", 2)).code, 0);
  }
  static std::vector<std::string> train_args(const fs::path& out, int epochs) {
    return {"train", "--manifest", manifest(), "--out", out.string(), "--width", "0.05",
            "--epochs", std::to_string(epochs), "--batch-size", "3", "--utterances-per-epoch",
            "6", "--crop-seconds", "0.5", "--lr", "1e-4", "--seed", "3"};
  }
  static std::string manifest() { return (root_ / "corpus" / "manifest.json").string(); }
  static std::string checkpoint() { return (root_ / "run" / "checkpoint.yvec").string(); }
  static fs::path dir(const std::string& name) { return root_ / name; }

  static fs::path root_;
};

fs::path Cli::root_;

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cli({"--help"}).code, kExitOk);
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"train", "--epochs", "many"}).code, kExitUsage);
  EXPECT_EQ(cli({"embed", "--manifest", manifest()}).code, kExitUsage);
}

TEST_F(Cli, SynthCountsAndDeterminism) {
  const auto a = dir("synth_a"), b = dir("synth_b");
  for (const auto& d : {a, b}) {
    ASSERT_EQ(cli({"synth", "--speakers", "2", "--utts", "2", "--seconds", "0.5", "--seed", "7",
                   "--trials", "4", "--out", d.string()})
                  .code,
              0);
  }
  std::size_t wavs = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.path().extension() != ".wav") continue;
    ++wavs;
    EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a))) << e.path();
  }
  EXPECT_EQ(wavs, 4u);
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  EXPECT_EQ(slurp(a / "trials.txt"), slurp(b / "trials.txt"));
  EXPECT_EQ(count_lines_with(a / "trials.txt", " "), 4u);
}

TEST_F(Cli, SynthNeedsTwoSpeakers) {
  const auto r = cli({"synth", "--speakers", "1", "--out", dir("one").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("nontarget"), std::string::npos) << r.err;
}

TEST_F(Cli, TrainWritesCheckpointLogAndSnapshot) {
  const auto run = dir("run");
  EXPECT_TRUE(fs::exists(run / "checkpoint.yvec"));
  EXPECT_TRUE(fs::exists(run / "checkpoint-e0001.yvec"));
  EXPECT_EQ(count_lines_with(run / "train.log.jsonl", "\"event\":\"epoch\""), 2u);
  const auto snapshot = read_json(run / "config.json");
  EXPECT_EQ(snapshot["model"]["encoder"]["name"], "yvector-5");
  const auto ck = trainer::load_checkpoint(run / "checkpoint.yvec");
  EXPECT_EQ(nlohmann::json(ck.model).dump(), snapshot["model"].dump());
  EXPECT_EQ(nlohmann::json(ck.train).dump(), snapshot["train"].dump());
  const auto files = read_json(run / "files.json");
  EXPECT_NE(std::find(files.begin(), files.end(), "checkpoint.yvec"), files.end());
}

TEST_F(Cli, PresetFlagSelectsGeometry) {
  auto args = train_args(dir("preset"), 1);
  args.insert(args.end(), {"--preset", "yvector-1"});
  ASSERT_EQ(cli(args).code, 0);
  const auto snapshot = read_json(dir("preset") / "config.json");
  EXPECT_EQ(snapshot["model"]["encoder"]["name"], "yvector-1");
  EXPECT_EQ(snapshot["model"]["encoder"]["multilevel_aggregation"], false);
}

TEST_F(Cli, ResumeContinuesEpochNumbering) {
  const auto run = dir("resume");
  ASSERT_EQ(cli(train_args(run, 1)).code, 0);
  auto args = train_args(run, 3);
  args.insert(args.end(), {"--resume", (run / "checkpoint.yvec").string()});
  ASSERT_EQ(cli(args).code, 0);
  std::ifstream in(run / "train.log.jsonl");
  std::vector<std::size_t> epochs;
  for (std::string line; std::getline(in, line);) {
    const auto j = nlohmann::json::parse(line);
    if (j.value("event", "") == "epoch") epochs.push_back(j["epoch"]);
  }
  EXPECT_EQ(epochs, (std::vector<std::size_t>{0, 1, 2}));
  // the two-leg run lands where the straight three-epoch run does
  ASSERT_EQ(cli(train_args(dir("straight"), 3)).code, 0);
  EXPECT_EQ(slurp(run / "checkpoint.yvec"), slurp(dir("straight") / "checkpoint.yvec"));
}

TEST_F(Cli, ConfigFileWithFlagOverrides) {
  const auto cfg = dir("cfg.json");
  std::ofstream(cfg) << R"({"preset": "yvector-2", "width": 0.05,
    "model": {"tdnn": {"embedding_dim": 24}},
    "train": {"epochs": 1, "batch_size": 3, "utterances_per_epoch": 3, "crop_seconds": 0.5},
    "paths": {"manifest": ")" << manifest() << R"("}, "seed": 4})";
  ASSERT_EQ(cli({"train", "--config", cfg.string(), "--out", dir("cfg_run").string(), "--lr",
                 "1e-5"})
                .code,
            0);
  const auto snap = read_json(dir("cfg_run") / "config.json");
  EXPECT_EQ(snap["model"]["encoder"]["name"], "yvector-2");
  EXPECT_EQ(snap["model"]["tdnn"]["embedding_dim"], 24);
  EXPECT_EQ(snap["train"]["lr0"], 1e-5);
  EXPECT_EQ(snap["train"]["seed"], 4);
}

TEST_F(Cli, UnknownConfigKeysAreRejected) {
  for (const std::string body : {R"({"trian": {}})", R"({"train": {"epoch": 3}})",
                                 R"({"model": {"encoder": {"dropout": 0.2}}})"}) {
    const auto cfg = dir("bad.json");
    std::ofstream(cfg) << body;
    const auto r = cli({"train", "--config", cfg.string(), "--manifest", manifest(), "--out",
                        dir("bad_run").string()});
    EXPECT_EQ(r.code, kExitUsage) << body;
    EXPECT_NE(r.err.find("unknown key"), std::string::npos) << r.err;
  }
}

TEST_F(Cli, MissingInputsAreRuntimeFailures) {
  EXPECT_EQ(cli({"train", "--manifest", dir("nope.json").string()}).code, kExitFailure);
  EXPECT_EQ(cli({"embed", "--checkpoint", dir("nope.yvec").string(), "--manifest", manifest(),
                 "--out", dir("e").string()})
                .code,
            kExitFailure);
}

TEST_F(Cli, EmbedOneRowPerUtteranceAndRepeatable) {
  for (const char* name : {"emb_a", "emb_b"}) {
    ASSERT_EQ(cli({"embed", "--checkpoint", checkpoint(), "--manifest", manifest(), "--out",
                   dir(name).string(), "--samples", "16000"})
                  .code,
              0);
  }
  const auto embs = aggregator::load_embeddings(dir("emb_a") / "embeddings.bin");
  ASSERT_EQ(embs.size(), 9u);
  const auto ck = trainer::load_checkpoint(checkpoint());
  EXPECT_EQ(embs.front().vector.size(), ck.model.tdnn.embedding_dim);
  EXPECT_EQ(slurp(dir("emb_a") / "embeddings.bin"), slurp(dir("emb_b") / "embeddings.bin"));
  EXPECT_EQ(slurp(dir("emb_a") / "embeddings.csv"), slurp(dir("emb_b") / "embeddings.csv"));
}

TEST_F(Cli, EmbedRejectsCorruptCheckpoint) {
  const auto bad = dir("corrupt.yvec");
  auto bytes = slurp(checkpoint());
  bytes[1] = 'X';
  std::ofstream(bad, std::ios::binary) << bytes;
  const auto r = cli({"embed", "--checkpoint", bad.string(), "--manifest", manifest(), "--out",
                      dir("e2").string()});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("magic"), std::string::npos) << r.err;
}

TEST_F(Cli, EvalSeparatedEmbeddings) {
  std::vector<aggregator::SpeakerEmbedding> embs = {
      {"a1", {1, 0}}, {"a2", {0.9f, 0.1f}}, {"b1", {0, 1}}, {"b2", {0.1f, 0.9f}}};
  const auto table = dir("toy.bin");
  aggregator::save_embeddings(table, embs);
  std::ofstream(dir("toy_trials.txt")) << "1 a1 a2\n1 b1 b2\n0 a1 b1\n0 a2 b2\n0 a1 b2\n";
  const auto r = cli({"eval", "--embeddings", table.string(), "--trials",
                      dir("toy_trials.txt").string(), "--out", dir("eval").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = read_json(dir("eval") / "report.json");
  EXPECT_EQ(report["eer"], 0.0);
  EXPECT_EQ(report["min_dcf"], 0.0);
  EXPECT_LE(report["ci_low"].get<double>(), report["eer"].get<double>());
  EXPECT_GE(report["ci_high"].get<double>(), report["eer"].get<double>());
  EXPECT_EQ(report["dcf"]["c_miss"], 1.0);
  EXPECT_EQ(report["dcf"]["c_fa"], 1.0);
  EXPECT_EQ(report["dcf"]["p_target"], 0.01);
  EXPECT_EQ(count_lines_with(dir("eval") / "scores.csv", ","), 6u);
  EXPECT_TRUE(fs::exists(dir("eval") / "roc.csv"));
}

TEST_F(Cli, EvalNamesUnresolvableTrialLine) {
  aggregator::save_embeddings(dir("small.bin"), {{"a", {1, 0}}, {"b", {0, 1}}});
  std::ofstream(dir("missing.txt")) << "1 a a\n0 a zz\n";
  const auto r = cli({"eval", "--embeddings", dir("small.bin").string(), "--trials",
                      dir("missing.txt").string(), "--out", dir("eval2").string()});
  EXPECT_EQ(r.code, kExitFailure);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("zz"), std::string::npos) << r.err;
}

TEST_F(Cli, CfrSourcesRowsAndStats) {
  ASSERT_EQ(cli({"cfr", "--checkpoint", checkpoint(), "--out", dir("cfr").string()}).code, 0);
  EXPECT_EQ(count_lines_with(dir("cfr") / "cfr.csv", ","), 1u + 4u * 129u);
  const auto stats = read_json(dir("cfr") / "cfr_stats.json");
  EXPECT_EQ(stats.size(), 4u);
  for (const auto& [source, s] : stats.items()) EXPECT_TRUE(s.contains("argmax_hz")) << source;
  EXPECT_EQ(cli({"cfr", "--checkpoint", checkpoint(), "--out", dir("cfr").string(), "--preset",
                 "multi-32"})
                .code,
            kExitFailure);
}

TEST_F(Cli, CfrOfImpulseFiltersIsFlat) {
  trainer::Model<float> model(trainer::make_model_config("yvector-5", 3, 0.05), 1);
  for (auto& p : model.params()) {
    if (p.name.find(".filter.weight") == std::string::npos) continue;
    const std::size_t k = p.value.dim(2);
    for (std::size_t i = 0; i < p.value.numel(); ++i) p.value[i] = i % k == 0 ? 1.0f : 0.0f;
  }
  const auto path = dir("impulse.yvec");
  trainer::save_checkpoint(path, trainer::make_checkpoint(model, trainer::TrainConfig{}, {}));
  ASSERT_EQ(cli({"cfr", "--checkpoint", path.string(), "--out", dir("cfr_flat").string()}).code, 0);
  const auto stats = read_json(dir("cfr_flat") / "cfr_stats.json");
  EXPECT_NEAR(stats["all"]["stddev_db"].get<double>(), 0.0, 1e-9);
  EXPECT_NEAR(stats["all"]["peak_minus_mean_db"].get<double>(), 0.0, 1e-9);
}

TEST_F(Cli, AblateCoversRequestedPresets) {
  const auto r = cli({"ablate", "--manifest", manifest(), "--out", dir("ablate").string(),
                      "--presets", "single-low,multi-32", "--steps", "1", "--batch-size", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = read_json(dir("ablate") / "ablation.json");
  EXPECT_EQ(report.size(), 2u);
  EXPECT_TRUE(report["multi-32"]["cfr"].contains("multi-32/all"));
  EXPECT_EQ(cli({"ablate", "--manifest", manifest(), "--out", dir("ablate").string(),
                 "--presets", "yvector-9"})
                .code,
            kExitUsage);
}

}  // namespace
}  // namespace yvec::cli
