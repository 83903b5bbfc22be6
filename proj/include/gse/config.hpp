#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gse/corruption.hpp"
#include "gse/train.hpp"
#include "gse/vocoder.hpp"

namespace gse {

struct CorpusConfig {
    int num_train = 500;
    int num_valid = 50;
    int num_test = 50;
    double min_seconds = 2.0;
    double max_seconds = 4.0;
    std::uint64_t seed = 1;
};

struct TokenizerConfig {
    int codebook_size = 100;
    int max_iters = 50;
    std::uint64_t seed = 2;
};

struct ModelConfig {
    int hidden = 256;
    int depth = 2;
    int conv_kernel = 5;
    int visual_dim = 16;
    double informativeness = 1.0;  // keep rate of the visual side-channel
    std::uint64_t seed = 3;
};

/// Parameters of one corruption draw. `noise` picks the interferer for denoising:
/// white, pink, babble or mixed (one of the three per utterance).
struct CorruptionParams {
    CorruptionKind kind = CorruptionKind::Inpaint;
    double snr_lo_db = -20.0;
    double snr_hi_db = 20.0;
    double drop_prob = 0.5;
    int span_frames = 20;
    std::string noise = "mixed";
};

struct EvalSplit {
    std::string name;
    CorruptionParams params;
};

/// One enhancement task: how training data is corrupted and which test splits are scored.
struct TaskConfig {
    std::string name;
    CorruptionParams train;
    std::vector<EvalSplit> splits;
    std::uint64_t seed = 4;
};

struct EvalConfig {
    double max_lag_ms = 200.0;
    std::vector<std::string> methods{"input", "resynthesis", "enhanced", "silence"};
};

struct PipelineConfig {
    CorpusConfig corpus;
    TokenizerConfig tokenizer;
    VocoderConfig vocoder;
    ModelConfig model;
    TrainConfig train;
    std::vector<TaskConfig> tasks;
    EvalConfig eval;

    const TaskConfig& task(const std::string& name) const;
};

/// Defaults: inpainting at p = 0.5, s = 20 and denoising scored on lvl1..lvl4.
PipelineConfig default_config();

nlohmann::json to_json(const PipelineConfig& cfg);
nlohmann::json to_json(const CorruptionParams& p);
CorruptionParams corruption_params_from_json(const nlohmann::json& j, CorruptionParams defaults = {});

/// Merges `user` over the defaults. Unknown keys are rejected; `tasks` replaces the default list.
PipelineConfig config_from_json(const nlohmann::json& user);

/// Applies "section.key=value" overrides. The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);

/// Sets every key named "seed" (at any depth) to `seed`.
void override_seeds(nlohmann::json& j, std::uint64_t seed);

/// Reads GSE_SEED if set. Throws ConfigError if it is not an unsigned integer.
std::optional<std::uint64_t> seed_from_environment();

PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace gse
