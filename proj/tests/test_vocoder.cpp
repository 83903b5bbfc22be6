#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gse/corpus.hpp"
#include "gse/error.hpp"
#include "gse/metrics.hpp"
#include "gse/rng.hpp"
#include "gse/vocoder.hpp"
#include "oracles.hpp"

using namespace gse;

namespace {

PrototypeTable table_from(const RowMatrix& protos) {
    PrototypeTable t;
    t.mel_prototypes = protos;
    t.observed.assign(static_cast<std::size_t>(protos.rows()), true);
    t.n_mels = static_cast<int>(protos.cols());
    return t;
}

Codebook dummy_codebook(int K) {
    Codebook cb;
    cb.centroids = RowMatrix::Zero(K, 1);
    return cb;
}

FeatureMatrix mel_rows(const RowMatrix& v) {
    FeatureMatrix f;
    f.values = v;
    f.frame_rate = 50.0;
    return f;
}

}  // namespace

TEST(Prototypes, IdenticalFramesGiveThatFrame) {
    RowMatrix frames(4, 3);
    frames << 1, 2, 3, 1, 2, 3, 7, 8, 9, 7, 8, 9;
    UnitSequence u{{0, 0, 1, 1}, 50.0};
    VocoderConfig cfg;
    cfg.n_mels = 3;
    const auto t = build_prototypes(dummy_codebook(3), {{u, mel_rows(frames)}}, cfg);
    EXPECT_EQ(t.mel_prototypes.row(0), frames.row(0));
    EXPECT_EQ(t.mel_prototypes.row(1), frames.row(2));
    EXPECT_TRUE(t.observed[0]);
    EXPECT_FALSE(t.observed[2]);
    // unseen unit falls back to the global mean
    EXPECT_NEAR((t.mel_prototypes.row(2) - frames.colwise().mean()).norm(), 0.0, 1e-12);
}

TEST(Prototypes, TwoClustersAverage) {
    RowMatrix frames(2, 2);
    frames << 1, 10, 3, 20;
    VocoderConfig cfg;
    cfg.n_mels = 2;
    const auto t = build_prototypes(dummy_codebook(1), {{UnitSequence{{0, 0}, 50.0}, mel_rows(frames)}}, cfg);
    EXPECT_DOUBLE_EQ(t.mel_prototypes(0, 0), 2.0);
    EXPECT_DOUBLE_EQ(t.mel_prototypes(0, 1), 15.0);
}

TEST(Prototypes, EmptyCorpusAndFrameMismatchRejected) {
    EXPECT_THROW(build_prototypes(dummy_codebook(2), {}), ConfigError);
    EXPECT_THROW(build_prototypes(dummy_codebook(2), {{UnitSequence{{0, 1, 0}, 50.0}, mel_rows(RowMatrix::Zero(2, 80))}}),
                 InputError);
}

TEST(Prototypes, SyntheticCorpusPrototypesFinite) {
    std::vector<std::pair<UnitSequence, FeatureMatrix>> corpus;
    std::vector<FeatureMatrix> feats;
    for (std::uint64_t s = 0; s < 6; ++s) {
        const auto u = generate_utterance(random_utterance_spec(s));
        feats.push_back(unit_features(u.wave));
    }
    const auto cb = kmeans_fit(concat_features(feats), 20, 20, 1);
    for (std::uint64_t s = 0; s < 6; ++s) {
        const auto u = generate_utterance(random_utterance_spec(s));
        corpus.emplace_back(quantize(feats[s], cb), vocoder_mel(u.wave));
    }
    const auto t = build_prototypes(cb, corpus);
    EXPECT_TRUE(t.mel_prototypes.allFinite());
    std::vector<bool> seen(20, false);
    for (const auto& [u, m] : corpus)
        for (int k : u.units) seen[k] = true;
    for (int k = 0; k < 20; ++k) EXPECT_EQ(t.observed[k], seen[k]);
}

TEST(UnitsToMel, SmoothOneIsLookupAndConstantStaysConstant) {
    const RowMatrix protos = RowMatrix::Random(4, 5);
    const auto t = table_from(protos);
    const auto m = units_to_mel(UnitSequence{{2, 0, 3}, 50.0}, t, 1);
    EXPECT_EQ(m.values.row(0), protos.row(2));
    EXPECT_EQ(m.values.row(2), protos.row(3));
    const auto c = units_to_mel(UnitSequence{{1, 1, 1, 1, 1}, 50.0}, t, 3);
    for (int i = 0; i < 5; ++i) EXPECT_NEAR((c.values.row(i) - protos.row(1)).norm(), 0.0, 1e-12);
}

TEST(UnitsToMel, AlternatingUnitsGiveTwoToOneAverages) {
    RowMatrix protos(2, 1);
    protos << 0.0, 3.0;
    const auto m = units_to_mel(UnitSequence{{0, 1, 0, 1, 0, 1}, 50.0}, table_from(protos), 3);
    for (int t = 1; t < 5; ++t) {
        // centre a, neighbours b: (2b + a)/3
        const double expect = t % 2 == 0 ? (2 * 3.0 + 0.0) / 3.0 : (2 * 0.0 + 3.0) / 3.0;
        EXPECT_NEAR(m.values(t, 0), expect, 1e-12);
    }
}

TEST(UnitsToMel, OutOfRangeUnitRejected) {
    EXPECT_THROW(units_to_mel(UnitSequence{{0, 4}, 50.0}, table_from(RowMatrix::Zero(4, 2)), 1), InputError);
}

TEST(MelToLinear, ProjectionConsistency) {
    const auto u = generate_utterance(random_utterance_spec(5));
    const VocoderConfig cfg;
    const auto mel = vocoder_mel(u.wave, cfg);
    const auto mag = mel_to_linear(mel, cfg.mel(), cfg.win_len, cfg.hop);
    const RowMatrix fb = mel_filterbank(cfg.mel());
    const RowMatrix back = (mag.values.array().square().matrix() * fb.transpose());
    const RowMatrix target = mel.values.array().exp().matrix();
    EXPECT_LT((back - target).norm() / target.norm(), 0.1);
}

TEST(MelToLinear, FloorMelGivesNearZeroMagnitude) {
    const VocoderConfig cfg;
    const auto mag = mel_to_linear(mel_rows(RowMatrix::Constant(5, 80, std::log(kLogFloor))), cfg.mel(), cfg.win_len, cfg.hop);
    EXPECT_LT(mag.values.maxCoeff(), 1e-3);
}

TEST(GriffinLim, ConvergenceMostlyMonotone) {
    int decreasing = 0, steps = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto u = generate_utterance(random_utterance_spec(40 + s));
        const auto mag = magnitude(stft(u.wave, VocoderConfig{}.stft()));
        const auto res = griffin_lim(mag, 32, s);
        for (std::size_t i = 1; i < res.spectral_convergence.size(); ++i) {
            ++steps;
            decreasing += res.spectral_convergence[i] <= res.spectral_convergence[i - 1];
        }
    }
    EXPECT_GE(static_cast<double>(decreasing) / steps, 0.95);
}

TEST(GriffinLim, SineKeepsItsPeriod) {
    std::vector<double> x(16000);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * 200.0 * i / 16000.0);
    const auto mag = magnitude(stft(x, 16000, VocoderConfig{}.stft()));
    const auto y = griffin_lim(mag, 32, 1).wave.samples();
    EXPECT_NEAR(oracle::argmax_autocorrelation(y, 40, 120), 80, 1);
}

TEST(GriffinLim, ZeroMagnitudeGivesSilence) {
    const auto mag = magnitude(stft(Waveform::zeros(8000), VocoderConfig{}.stft()));
    const auto res = griffin_lim(mag, 8, 1);
    for (double v : res.wave.samples()) EXPECT_EQ(v, 0.0);
}

TEST(Vocode, DurationFollowsUnitCount) {
    const auto t = table_from(RowMatrix::Random(5, 80) - RowMatrix::Constant(5, 80, 3.0));
    for (int n : {10, 51, 150}) {
        UnitSequence u;
        for (int i = 0; i < n; ++i) u.units.push_back(i % 5);
        const auto w = vocode(u, t);
        EXPECT_LE(std::abs(static_cast<long>(w.num_samples()) - n * 320L), 320L);
    }
}

TEST(Vocode, ResynthesisBeatsMismatchedUtterance) {
    std::vector<Utterance> utts;
    std::vector<FeatureMatrix> feats;
    for (std::uint64_t s = 0; s < 12; ++s) {
        utts.push_back(generate_utterance(random_utterance_spec(200 + s)));
        feats.push_back(unit_features(utts.back().wave));
    }
    const auto cb = kmeans_fit(concat_features(feats), 40, 30, 1);
    std::vector<std::pair<UnitSequence, FeatureMatrix>> corpus;
    for (std::size_t i = 0; i < utts.size(); ++i) corpus.emplace_back(quantize(feats[i], cb), vocoder_mel(utts[i].wave));
    const auto t = build_prototypes(cb, corpus);
    VocoderConfig cfg;
    cfg.smooth = 1;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto y = vocode(quantize(feats[i], cb), t, cfg);
        const double own = estoi(utts[i].wave, y);
        const double other = estoi(utts[i].wave, utts[(i + 5) % utts.size()].wave);
        EXPECT_GT(own, other) << i;
    }
}
