#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include <json.hpp>

#include "gse/model.hpp"

namespace gse {

struct TrainConfig {
    int total_updates = 1000;
    int frozen_steps = 0;
    double peak_lr = 1e-3;
    double warmup_pct = 10.0;  // t1
    double hold_pct = 0.0;     // t2; decay covers the remainder
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.98;
    double adam_eps = 1e-8;
    double mask_prob = 0.0;
    int mask_span = 1;
    int batch_size = 8;
    int eval_every = 100;
    bool keep_best = true;  // return the parameters with the best held-out accuracy
    std::uint64_t seed = 0;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig defaults = {});

/// Tri-stage schedule: linear 0 → peak over the first t1% of updates, hold for
/// t2%, then linear decay to 5% of peak at step = total_updates.
double lr_at(int step, const TrainConfig& cfg);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;
    std::map<ParamGroup, long> steps;  // per group, so late-unfrozen groups get their own bias correction
    ModelParams m;
    ModelParams v;

    static AdamState zeros(const ModelShape& shape, double beta1, double beta2, double eps);
};

/// Bias-corrected Adam update applied to the groups in `active` (all when empty).
/// Throws NumericError if any active gradient is non-finite.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
               const std::vector<ParamGroup>& active = {});

nlohmann::json to_json(const AdamState& state);
AdamState adam_state_from_json(const nlohmann::json& j, const ModelShape& shape);

/// Zeroes spans of `span` frames (rows) so the expected masked fraction is `prob`.
RowMatrix spec_augment(const RowMatrix& audio25, double prob, int span, std::uint64_t seed);

struct TrainLogRow {
    int step = 0;
    double loss = 0.0;
    double lr = 0.0;
    std::optional<double> heldout_unit_acc;
};

struct TrainResult {
    ModelParams params;
    AdamState optimizer;
    std::vector<TrainLogRow> log;
    int best_step = 0;
    double best_heldout_acc = 0.0;
};

/// Per-example gradients are computed in parallel and summed in example order.
TrainResult train(const TrainConfig& cfg, const ModelShape& shape, const std::vector<Example>& train_set,
                  const std::vector<Example>& heldout_set);

/// Frame-level argmax accuracy.
double unit_accuracy(const ModelParams& params, const std::vector<Example>& set);

/// Per-dimension mean and 1/std over all audio frames (std floored at 1e-3).
void fit_input_normalisation(ModelParams& params, const std::vector<Example>& train_set);

void write_train_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& log);

struct Checkpoint {
    ModelParams params;
    AdamState optimizer;
    TrainConfig config;
    int step = 0;
    nlohmann::json extra;  // pipeline metadata (task, informativeness, ...)
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gse
