#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gse/cli.hpp"
#include "gse/config.hpp"
#include "gse/corpus.hpp"
#include "gse/corruption.hpp"
#include "gse/error.hpp"
#include "gse/manifest.hpp"
#include "gse/wav.hpp"

using namespace gse;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "gse");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("gse_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream(path) << j.dump(2);
    return path;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

struct ScopedEnv {
    explicit ScopedEnv(const char* value) { setenv("GSE_SEED", value, 1); }
    ~ScopedEnv() { unsetenv("GSE_SEED"); }
};

}  // namespace

TEST(Config, DefaultsCarryTheTaskSplits) {
    const auto cfg = default_config();
    const auto& inpaint = cfg.task("inpaint");
    ASSERT_EQ(inpaint.splits.size(), 3u);
    EXPECT_EQ(inpaint.splits[2].params.drop_prob, 0.5);
    const auto& denoise = cfg.task("denoise");
    ASSERT_EQ(denoise.splits.size(), 4u);
    EXPECT_EQ(denoise.splits[3].name, "lvl4");
    EXPECT_EQ(denoise.splits[3].params.snr_lo_db, -20.0);
    EXPECT_EQ(cfg.train.adam_beta2, 0.98);
    EXPECT_THROW(cfg.task("nope"), ConfigError);
}

TEST(Config, UnknownKeysRejected) {
    EXPECT_THROW(config_from_json({{"corpus", {{"num_trian", 5}}}}), ConfigError);
    EXPECT_THROW(config_from_json({{"bogus", 1}}), ConfigError);
    EXPECT_NO_THROW(config_from_json({{"corpus", {{"num_train", 5}}}}));
}

TEST(Config, RoundTripThroughJson) {
    const auto cfg = default_config();
    EXPECT_EQ(to_json(config_from_json(to_json(cfg))), to_json(cfg));
}

TEST(Config, OverridesParseValues) {
    nlohmann::json j = nlohmann::json::object();
    apply_override(j, "train.total_updates=200");
    apply_override(j, "model.informativeness=0.5");
    EXPECT_EQ(j["train"]["total_updates"], 200);
    EXPECT_EQ(j["model"]["informativeness"], 0.5);
    const auto cfg = config_from_json({{"train", {{"total_updates", 200}}}});
    EXPECT_EQ(cfg.train.total_updates, 200);
    EXPECT_THROW(apply_override(j, "no_equals_sign"), ConfigError);
}

TEST(Config, SeedOverrideReachesEverySeed) {
    nlohmann::json j = to_json(default_config());
    override_seeds(j, 1234);
    const auto cfg = config_from_json(j);
    EXPECT_EQ(cfg.corpus.seed, 1234u);
    EXPECT_EQ(cfg.tokenizer.seed, 1234u);
    EXPECT_EQ(cfg.model.seed, 1234u);
    EXPECT_EQ(cfg.train.seed, 1234u);
    for (const auto& t : cfg.tasks) EXPECT_EQ(t.seed, 1234u);
}

TEST(Config, EnvironmentSeed) {
    {
        ScopedEnv env("77");
        ASSERT_TRUE(seed_from_environment().has_value());
        EXPECT_EQ(*seed_from_environment(), 77u);
    }
    {
        ScopedEnv env("seven");
        EXPECT_THROW(seed_from_environment(), ConfigError);
    }
    EXPECT_FALSE(seed_from_environment().has_value());
}

TEST(Manifest, IntegrityEnforcedAtLoad) {
    const auto dir = fresh_dir("manifest");
    write_wav(dir / "a.wav", Waveform::zeros(10));
    Manifest m;
    m.base_dir = dir;
    m.records = {{"a", "train", "a.wav", "", "", "", ""}};
    write_manifest(dir / "ok.jsonl", m);
    EXPECT_EQ(load_manifest(dir / "ok.jsonl").records.size(), 1u);

    m.records.push_back({"a", "test", "a.wav", "", "", "", ""});
    write_manifest(dir / "dup.jsonl", m);
    EXPECT_THROW(load_manifest(dir / "dup.jsonl"), IoError);

    m.records = {{"b", "train", "missing.wav", "", "", "", ""}};
    write_manifest(dir / "missing.jsonl", m);
    EXPECT_THROW(load_manifest(dir / "missing.jsonl"), IoError);
    EXPECT_NO_THROW(load_manifest(dir / "missing.jsonl", false));

    m.records = {{"c", "dev", "a.wav", "", "", "", ""}};
    write_manifest(dir / "split.jsonl", m);
    EXPECT_THROW(load_manifest(dir / "split.jsonl"), IoError);

    std::ofstream(dir / "bad.jsonl") << "{not json\n";
    EXPECT_THROW(load_manifest(dir / "bad.jsonl"), IoError);
}

TEST(Cli, UsageErrorsExitNonZero) {
    EXPECT_NE(cli({}), 0);
    EXPECT_NE(cli({"gen-corpus", "--run-dir", "/tmp/x", "--no-such-flag"}), 0);
    EXPECT_NE(cli({"frobnicate"}), 0);
    EXPECT_NE(cli({"evaluate", "--ref", "/nonexistent/ref.wav", "--deg", "/nonexistent/deg.wav"}), 0);
    EXPECT_NE(cli({"gen-corpus", "--run-dir", "/tmp/x", "--config", "/nonexistent/config.json"}), 0);
}

TEST(Cli, MissingStageInputsExitNonZero) {
    const auto dir = fresh_dir("missing");
    // nothing generated yet
    EXPECT_NE(cli({"tokenize", "fit", "--run-dir", dir.string()}), 0);
    EXPECT_NE(cli({"train", "--run-dir", dir.string(), "--task", "inpaint"}), 0);
}

TEST(Cli, ConfigSnapshotIsWrittenOnce) {
    const auto dir = fresh_dir("snapshot");
    const auto cfg = write_json(dir / "c.json", {{"corpus", {{"num_train", 4}, {"num_valid", 2}, {"num_test", 2}}}});
    const auto run = (dir / "run").string();
    ASSERT_EQ(cli({"gen-corpus", "--run-dir", run, "--config", cfg.string()}), 0);
    EXPECT_TRUE(fs::exists(dir / "run" / "config.json"));
    // same config again is fine, a different one is refused
    EXPECT_EQ(cli({"gen-corpus", "--run-dir", run}), 0);
    EXPECT_NE(cli({"gen-corpus", "--run-dir", run, "--set", "corpus.num_train=5"}), 0);
    const auto m = load_manifest(dir / "run" / "corpus" / "manifest.jsonl");
    EXPECT_EQ(m.records.size(), 8u);
    EXPECT_EQ(m.split("test").size(), 2u);
}

TEST(Cli, EvaluateIdenticalPairGivesUnitEstoi) {
    const auto dir = fresh_dir("pair");
    const auto wav = dir / "x.wav";
    write_wav(wav, generate_utterance(random_utterance_spec(3)).wave, WavEncoding::Float32);
    const auto out = dir / "scores.csv";
    ASSERT_EQ(cli({"evaluate", "--ref", wav.string(), "--deg", wav.string(), "--output", out.string()}), 0);
    std::stringstream ss(slurp(out));
    std::string header, row;
    std::getline(ss, header);
    std::getline(ss, row);
    const auto cols = split_csv(header);
    const auto vals = split_csv(row);
    ASSERT_EQ(cols.size(), vals.size());
    const auto it = std::find(cols.begin(), cols.end(), "estoi");
    ASSERT_NE(it, cols.end());
    EXPECT_EQ(vals[static_cast<std::size_t>(it - cols.begin())], "1.000000");
}

TEST(Cli, SimulateAndBeamformRoundTrip) {
    const auto dir = fresh_dir("array");
    write_wav(dir / "src.wav", generate_utterance(random_utterance_spec(4)).wave, WavEncoding::Float32);
    ASSERT_EQ(cli({"simulate", "--input", (dir / "src.wav").string(), "--output", (dir / "cap.wav").string(),
                   "--snr", "0", "--direction", "1,0,0"}),
              0);
    EXPECT_EQ(read_wav(dir / "cap.wav").num_channels(), 4u);
    ASSERT_EQ(cli({"beamform", "--input", (dir / "cap.wav").string(), "--output", (dir / "bf.wav").string(),
                   "--direction", "1,0,0"}),
              0);
    EXPECT_EQ(read_wav(dir / "bf.wav").num_channels(), 1u);
}

TEST(Cli, CorruptDropHalfAveragesHalf) {
    const auto dir = fresh_dir("drop");
    const auto cfg = write_json(dir / "c.json", {{"corpus",
                                                  {{"num_train", 2},
                                                   {"num_valid", 1},
                                                   {"num_test", 100},
                                                   {"min_seconds", 20.0},
                                                   {"max_seconds", 30.0}}}});
    const auto run = (dir / "run").string();
    ASSERT_EQ(cli({"gen-corpus", "--run-dir", run, "--config", cfg.string()}), 0);
    ASSERT_EQ(cli({"corrupt", "--run-dir", run, "--task", "inpaint", "--drop", "0.5"}), 0);
    const auto split_dir = dir / "run" / "corrupt" / "inpaint" / "p0.50-s20";
    const auto m = load_manifest(split_dir / "manifest.jsonl");
    ASSERT_EQ(m.records.size(), 100u);
    double dropped = 0.0, total = 0.0;
    for (const auto& r : m.records) {
        const auto side = nlohmann::json::parse(slurp(m.resolve(r.sidecar_path)));
        const auto mask = mask_from_rle(side.at("mask_rle"));
        for (auto v : mask) dropped += v == 0;
        total += static_cast<double>(mask.size());
    }
    EXPECT_NEAR(dropped / total, 0.5, 0.02);
}

TEST(Cli, ReportOrdersEnhancedBelowInputBelowSilenceOnInpainting) {
    const auto dir = fresh_dir("report");
    const nlohmann::json user = {
        {"corpus", {{"num_train", 200}, {"num_valid", 20}, {"num_test", 20}}},
        {"model", {{"hidden", 64}}},
        {"train", {{"total_updates", 1000}, {"eval_every", 100}}},
        {"tasks",
         {{{"name", "inpaint"},
           {"train", {{"kind", "inpaint"}, {"drop_prob", 0.5}, {"span_frames", 20}}},
           {"splits", {{{"name", "p0.5"}, {"params", {{"kind", "inpaint"}, {"drop_prob", 0.5}}}}}}}}}};
    const auto cfg = write_json(dir / "c.json", user);
    const auto run = dir / "run";
    ASSERT_EQ(cli({"run", "--run-dir", run.string(), "--config", cfg.string()}), 0);

    std::stringstream ss(slurp(run / "report.csv"));
    std::string line;
    std::getline(ss, line);
    const auto header = split_csv(line);
    ASSERT_EQ(header.size(), 3u);
    EXPECT_EQ(header[2], "inpaint/p0.5");
    std::map<std::string, double> uer;
    while (std::getline(ss, line)) {
        const auto cells = split_csv(line);
        if (cells[0] == "uer") uer[cells[1]] = std::stod(cells[2]);
    }
    ASSERT_EQ(uer.size(), 4u);
    EXPECT_LT(uer["enhanced"], uer["input"]);
    EXPECT_LT(uer["input"], uer["silence"]);
    EXPECT_LT(uer["enhanced"], uer["resynthesis"]);
}
