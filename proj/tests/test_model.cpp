#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "gse/error.hpp"
#include "gse/rng.hpp"
#include "gse/train.hpp"

using namespace gse;

namespace {

ModelShape small_shape() {
    ModelShape s;
    s.audio_dim = 6;
    s.visual_dim = 4;
    s.hidden = 8;
    s.depth = 2;
    s.vocab = 7;
    s.conv_kernel = 3;
    return s;
}

Example random_example(const ModelShape& s, int T, std::uint64_t seed) {
    Rng rng(seed);
    Example ex;
    ex.audio.resize(T, s.audio_dim);
    ex.visual.resize(T, s.visual_dim);
    for (Eigen::Index i = 0; i < ex.audio.size(); ++i) ex.audio.data()[i] = rng.gaussian();
    for (Eigen::Index i = 0; i < ex.visual.size(); ++i) ex.visual.data()[i] = rng.gaussian();
    for (int t = 0; t < 2 * T; ++t) ex.target.push_back(static_cast<int>(rng.index(s.vocab)));
    return ex;
}

// Small learnable task: unit = sign pattern of the first audio dims.
std::vector<Example> toy_set(const ModelShape& s, int n, std::uint64_t seed) {
    std::vector<Example> out;
    for (int i = 0; i < n; ++i) {
        auto ex = random_example(s, 10, seed + i);
        for (int t = 0; t < 20; ++t) {
            const auto row = ex.audio.row(t / 2);
            ex.target[t] = (row(0) > 0 ? 1 : 0) + (row(1) > 0 ? 2 : 0) + (t % 2 ? 3 : 0);
            ex.target[t] = std::min(ex.target[t], s.vocab - 1);
        }
        out.push_back(std::move(ex));
    }
    return out;
}

double mean_nll(const ModelParams& p, const Example& ex) {
    const RowMatrix lp = forward(p, ex.audio, ex.visual);
    double acc = 0.0;
    for (std::size_t t = 0; t < ex.target.size(); ++t) acc -= lp(static_cast<Eigen::Index>(t), ex.target[t]);
    return acc / static_cast<double>(ex.target.size());
}

}  // namespace

TEST(Model, OutputsTwoFramesPerInputFrame) {
    const auto s = small_shape();
    const auto p = ModelParams::random(s, 1);
    for (int T : {1, 2, 5, 13}) {
        const auto ex = random_example(s, T, T);
        const RowMatrix lp = forward(p, ex.audio, ex.visual);
        EXPECT_EQ(lp.rows(), 2 * T);
        EXPECT_EQ(lp.cols(), s.vocab);
        for (Eigen::Index t = 0; t < lp.rows(); ++t) EXPECT_NEAR(lp.row(t).array().exp().sum(), 1.0, 1e-12);
    }
}

TEST(Model, FrameCountMismatchRejected) {
    const auto s = small_shape();
    const auto p = ModelParams::random(s, 1);
    const auto ex = random_example(s, 5, 1);
    EXPECT_THROW(forward(p, ex.audio, ex.visual.topRows(4)), InputError);
}

TEST(Model, ZeroHeadGivesUniformRowsAndLogC) {
    const auto s = small_shape();
    auto p = ModelParams::random(s, 2);
    p.head.weight.setZero();
    p.head.bias.setZero();
    const auto ex = random_example(s, 6, 3);
    const RowMatrix lp = forward(p, ex.audio, ex.visual);
    for (Eigen::Index i = 0; i < lp.size(); ++i) EXPECT_NEAR(std::exp(lp.data()[i]), 1.0 / s.vocab, 1e-15);
    EXPECT_NEAR(loss_and_grad(p, ex).loss, std::log(static_cast<double>(s.vocab)), 1e-12);
}

TEST(Model, ConfidentModelLossBelowLogC) {
    const auto s = small_shape();
    auto p = ModelParams::random(s, 2);
    p.head.weight.setZero();
    p.head.bias.setZero();
    p.head.bias(3) = 5.0;
    auto ex = random_example(s, 4, 1);
    std::fill(ex.target.begin(), ex.target.end(), 3);
    EXPECT_LT(loss_and_grad(p, ex).loss, std::log(static_cast<double>(s.vocab)));
}

TEST(Model, TargetOutOfRangeRejected) {
    const auto s = small_shape();
    const auto p = ModelParams::random(s, 2);
    auto ex = random_example(s, 4, 1);
    ex.target[2] = s.vocab;
    EXPECT_THROW(loss_and_grad(p, ex), InputError);
}

TEST(Model, GradientMatchesCentralDifferences) {
    const auto s = small_shape();
    auto p = ModelParams::random(s, 5);
    const auto ex = random_example(s, 5, 6);
    const auto analytic = loss_and_grad(p, ex);
    auto grads = analytic.grads;
    auto g = tensors(grads);
    auto w = tensors(p);
    ASSERT_EQ(g.size(), w.size());
    const double h = 1e-5;
    for (std::size_t i = 0; i < w.size(); ++i) {
        for (std::size_t e = 0; e < w[i].size; ++e) {
            const double keep = w[i].data[e];
            w[i].data[e] = keep + h;
            const double up = mean_nll(p, ex);
            w[i].data[e] = keep - h;
            const double down = mean_nll(p, ex);
            w[i].data[e] = keep;
            const double numeric = (up - down) / (2.0 * h);
            const double a = g[i].data[e];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
            EXPECT_LT(rel, 1e-4) << w[i].name << "[" << e << "] analytic " << a << " numeric " << numeric;
        }
    }
}

TEST(Schedule, TriStageBoundaries) {
    TrainConfig cfg;
    cfg.total_updates = 1000;
    cfg.peak_lr = 3e-3;
    cfg.warmup_pct = 33.0;
    cfg.hold_pct = 0.0;
    EXPECT_EQ(lr_at(0, cfg), 0.0);
    EXPECT_NEAR(lr_at(330, cfg), cfg.peak_lr, 1e-12);
    EXPECT_NEAR(lr_at(165, cfg), cfg.peak_lr / 2.0, 1e-12);
    EXPECT_NEAR(lr_at(1000, cfg), 0.05 * cfg.peak_lr, 1e-12);
    EXPECT_NEAR(lr_at(665, cfg), 0.525 * cfg.peak_lr, 1e-12);
    for (int step = 331; step <= 1000; ++step) EXPECT_LT(lr_at(step, cfg), lr_at(step - 1, cfg));
}

TEST(Adam, DefaultBetasAndSerializedState) {
    const TrainConfig cfg;
    EXPECT_EQ(cfg.adam_beta1, 0.9);
    EXPECT_EQ(cfg.adam_beta2, 0.98);
    const auto st = AdamState::zeros(small_shape(), cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    const auto j = to_json(st);
    EXPECT_EQ(j.at("beta1").get<double>(), 0.9);
    EXPECT_EQ(j.at("beta2").get<double>(), 0.98);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    const auto s = small_shape();
    auto p = ModelParams::random(s, 1);
    const auto before = params_to_json(p);
    auto st = AdamState::zeros(s, 0.9, 0.98, 1e-8);
    for (int i = 0; i < 5; ++i) adam_step(p, ModelParams::zeros(s), st, 0.1);
    EXPECT_EQ(params_to_json(p), before);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
    const auto s = small_shape();
    auto p = ModelParams::zeros(s);
    auto g = ModelParams::zeros(s);
    g.head.bias.setConstant(-0.37);
    auto st = AdamState::zeros(s, 0.9, 0.98, 1e-8);
    double prev = 0.0;
    for (int i = 0; i < 200; ++i) {
        prev = p.head.bias(0);
        adam_step(p, g, st, 0.01);
    }
    EXPECT_NEAR(p.head.bias(0) - prev, 0.01, 1e-6);
}

TEST(Adam, ScalarQuadraticConverges) {
    const auto s = small_shape();
    auto p = ModelParams::zeros(s);
    p.head.bias(0) = 3.0;
    auto st = AdamState::zeros(s, 0.9, 0.98, 1e-8);
    int steps = 0;
    for (; steps < 500 && std::abs(p.head.bias(0)) >= 1e-3; ++steps) {
        auto g = ModelParams::zeros(s);
        g.head.bias(0) = 2.0 * p.head.bias(0);  // d/dx x²
        adam_step(p, g, st, 0.1);
    }
    EXPECT_LT(std::abs(p.head.bias(0)), 1e-3);
}

TEST(Adam, NonFiniteGradientAborts) {
    const auto s = small_shape();
    auto p = ModelParams::zeros(s);
    auto g = ModelParams::zeros(s);
    g.trunk[0].proj.weight(0, 0) = NAN;
    auto st = AdamState::zeros(s, 0.9, 0.98, 1e-8);
    EXPECT_THROW(adam_step(p, g, st, 0.1), NumericError);
}

TEST(SpecAugment, ZeroProbabilityIsIdentity) {
    const RowMatrix x = RowMatrix::Random(50, 3);
    EXPECT_EQ(spec_augment(x, 0.0, 1, 4), x);
}

TEST(SpecAugment, MaskedFractionMatchesProbability) {
    const RowMatrix x = RowMatrix::Ones(100000, 2);
    for (const auto& [prob, span] : {std::pair{0.35, 1}, std::pair{0.2, 5}}) {
        const auto y = spec_augment(x, prob, span, 12);
        const double masked = (y.col(0).array() == 0.0).cast<double>().mean();
        EXPECT_NEAR(masked, prob, 0.02);
    }
}

TEST(Train, OverfitsAToyTask) {
    const auto s = small_shape();
    const auto set = toy_set(s, 16, 100);
    TrainConfig cfg;
    cfg.total_updates = 400;
    cfg.peak_lr = 1e-2;
    cfg.keep_best = false;
    cfg.seed = 3;
    const auto res = train(cfg, s, set, {});
    EXPECT_GT(unit_accuracy(res.params, set), 0.9);
    EXPECT_LT(res.log.back().loss, res.log.front().loss);
}

TEST(Train, SeededRerunGivesIdenticalLossCurve) {
    const auto s = small_shape();
    const auto set = toy_set(s, 8, 1);
    TrainConfig cfg;
    cfg.total_updates = 30;
    cfg.mask_prob = 0.35;
    cfg.seed = 9;
    const auto a = train(cfg, s, set, set);
    const auto b = train(cfg, s, set, set);
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].loss, b.log[i].loss);
    EXPECT_EQ(params_to_json(a.params), params_to_json(b.params));
}

TEST(Train, FrozenPhaseKeepsPretrainedGroups) {
    const auto s = small_shape();
    const auto set = toy_set(s, 8, 1);
    TrainConfig cfg;
    cfg.total_updates = 20;
    cfg.frozen_steps = 20;
    cfg.keep_best = false;
    cfg.seed = 4;
    const auto res = train(cfg, s, set, {});
    auto init = ModelParams::random(s, mix_seed(cfg.seed, 1));
    auto trained = res.params;
    const auto a = tensors(init);
    const auto b = tensors(trained);
    bool head_moved = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool same = std::equal(a[i].data, a[i].data + a[i].size, b[i].data);
        if (is_pretrained_group(a[i].group))
            EXPECT_TRUE(same) << a[i].name;
        else
            head_moved |= !same;
    }
    EXPECT_TRUE(head_moved);
    EXPECT_EQ(res.optimizer.steps.count(ParamGroup::Trunk), 0u);
    EXPECT_EQ(res.optimizer.steps.at(ParamGroup::Head), 20);
}

TEST(Train, EmptyManifestRejected) {
    EXPECT_THROW(train(TrainConfig{}, small_shape(), {}, {}), ConfigError);
}

TEST(Checkpoint, RoundTripIsExact) {
    const auto s = small_shape();
    Checkpoint c;
    c.params = ModelParams::random(s, 8);
    c.optimizer = AdamState::zeros(s, 0.9, 0.98, 1e-8);
    auto g = ModelParams::random(s, 9);
    adam_step(c.params, g, c.optimizer, 1e-3);
    c.config.seed = 77;
    c.step = 1;
    c.extra = {{"task", "inpaint"}};
    const auto path = std::filesystem::temp_directory_path() / "gse_ckpt_test.json";
    save_checkpoint(path, c);
    const auto back = load_checkpoint(path);
    EXPECT_EQ(params_to_json(back.params), params_to_json(c.params));
    EXPECT_EQ(to_json(back.optimizer), to_json(c.optimizer));
    EXPECT_EQ(back.config.seed, 77u);
    EXPECT_EQ(back.extra, c.extra);
    EXPECT_EQ(back.optimizer.beta2, 0.98);
}
