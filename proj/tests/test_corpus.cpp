#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gse/corpus.hpp"
#include "gse/error.hpp"
#include "gse/fft.hpp"
#include "gse/rng.hpp"
#include "oracles.hpp"

using namespace gse;
using Eigen::Vector3d;

namespace {

UtteranceSpec single_symbol(int symbol, int frames, double pitch) {
    UtteranceSpec s;
    s.symbols = {symbol};
    s.durations = {frames};
    s.formants = {symbol_alphabet()[static_cast<std::size_t>(symbol)].formants};
    s.pitch_hz.assign(static_cast<std::size_t>(frames), pitch);
    s.amplitude.assign(static_cast<std::size_t>(frames), 1.0);
    s.seed = 5;
    return s;
}

int first_voiced_symbol() {
    const auto& a = symbol_alphabet();
    for (std::size_t i = 1; i < a.size(); ++i)
        if (a[i].voiced) return static_cast<int>(i);
    return -1;
}

// Averaged periodogram with 1024-point Hann segments.
std::vector<double> welch_psd(const std::vector<double>& x) {
    const int n = 1024;
    const auto w = hann_window(n);
    std::vector<double> psd(n / 2 + 1, 0.0), seg(n);
    std::vector<cdouble> bins(n / 2 + 1);
    int count = 0;
    for (std::size_t start = 0; start + n <= x.size(); start += n / 2, ++count) {
        for (int i = 0; i < n; ++i) seg[i] = w[i] * x[start + i];
        fft::rfft(seg, bins);
        for (std::size_t k = 0; k < bins.size(); ++k) psd[k] += std::norm(bins[k]);
    }
    for (double& v : psd) v /= count;
    return psd;
}

double band_density(const std::vector<double>& psd, double lo, double hi) {
    double acc = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < psd.size(); ++k) {
        const double f = k * 16000.0 / 1024.0;
        if (f >= lo && f < hi) {
            acc += psd[k];
            ++n;
        }
    }
    return acc / n;
}

}  // namespace

TEST(Alphabet, SizeAndFormantsBelowNyquist) {
    const auto& a = symbol_alphabet();
    EXPECT_GE(a.size(), 12u);
    EXPECT_LE(a.size(), 40u);
    EXPECT_TRUE(a[0].formants.empty());
    for (std::size_t i = 1; i < a.size(); ++i) {
        EXPECT_GE(a[i].formants.size(), 2u);
        EXPECT_LE(a[i].formants.size(), 3u);
        for (const auto& f : a[i].formants) EXPECT_LT(f.freq_hz, 8000.0);
    }
}

TEST(Utterance, ConstantPitchGivesPeriodOf160Samples) {
    const auto u = generate_utterance(single_symbol(first_voiced_symbol(), 50, 100.0));
    const auto& x = u.wave.samples();
    const std::vector<double> core(x.begin() + 3200, x.end() - 3200);
    EXPECT_NEAR(oracle::argmax_autocorrelation(core, 100, 260), 160, 1);
}

TEST(Utterance, ZeroEnvelopeIsSilent) {
    auto s = single_symbol(first_voiced_symbol(), 20, 120.0);
    std::fill(s.amplitude.begin(), s.amplitude.end(), 0.0);
    const auto u = generate_utterance(s);
    for (double v : u.wave.samples()) EXPECT_EQ(v, 0.0);
}

TEST(Utterance, SameSeedSameWaveformAndPeakHalf) {
    const auto spec = random_utterance_spec(12);
    const auto a = generate_utterance(spec);
    const auto b = generate_utterance(random_utterance_spec(12));
    EXPECT_EQ(a.wave.samples(), b.wave.samples());
    EXPECT_EQ(a.frame_symbols, b.frame_symbols);
    double peak = 0.0;
    for (double v : a.wave.samples()) peak = std::max(peak, std::abs(v));
    EXPECT_NEAR(peak, 0.5, 1e-12);
}

TEST(Utterance, LabelsAndLengthsAgree) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto spec = random_utterance_spec(seed);
        spec.validate();
        const auto u = generate_utterance(spec);
        EXPECT_EQ(u.frame_symbols.size(), static_cast<std::size_t>(spec.total_frames()));
        EXPECT_EQ(u.wave.num_samples(), u.frame_symbols.size() * 320);
        EXPECT_EQ(u.wave.num_samples() % 640, 0u);
        EXPECT_GE(u.wave.num_samples(), 2 * 16000u);
        EXPECT_LE(u.wave.num_samples(), 4 * 16000u + 640);
        EXPECT_EQ(u.frame_symbols.front(), 0);
        EXPECT_EQ(u.frame_symbols.back(), 0);
        for (double p : spec.pitch_hz) {
            EXPECT_GE(p, 80.0);
            EXPECT_LE(p, 300.0);
        }
    }
}

TEST(Utterance, FormantAtNyquistRejected) {
    auto s = single_symbol(first_voiced_symbol(), 10, 100.0);
    s.formants[0][0].freq_hz = 8000.0;
    EXPECT_THROW(generate_utterance(s), ConfigError);
}

TEST(Noise, WhiteIsSpectrallyFlat) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto psd = welch_psd(generate_noise(NoiseKind::White, 64000, seed).samples());
        double log_mean = 0.0, mean = 0.0;
        for (std::size_t k = 1; k + 1 < psd.size(); ++k) {
            log_mean += std::log(psd[k]);
            mean += psd[k];
        }
        const double n = static_cast<double>(psd.size() - 2);
        EXPECT_GT(std::exp(log_mean / n) / (mean / n), 0.9) << seed;
    }
}

TEST(Noise, PinkFallsThreeDbPerOctave) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto psd = welch_psd(generate_noise(NoiseKind::Pink, 160000, seed).samples());
        double prev = band_density(psd, 200.0, 400.0);
        for (double lo : {400.0, 800.0, 1600.0}) {
            const double cur = band_density(psd, lo, 2.0 * lo);
            const double drop = 10.0 * std::log10(prev / cur);
            EXPECT_NEAR(drop, 3.0, 1.0) << "seed " << seed << " band " << lo;
            prev = cur;
        }
    }
}

TEST(Noise, DeterministicAndUnitRms) {
    for (auto kind : {NoiseKind::White, NoiseKind::Pink, NoiseKind::Babble}) {
        const auto a = generate_noise(kind, 40000, 3).samples();
        EXPECT_EQ(a, generate_noise(kind, 40000, 3).samples());
        double e = 0.0;
        for (double v : a) e += v * v;
        EXPECT_NEAR(std::sqrt(e / a.size()), 1.0, 1e-9);
    }
}

TEST(FractionalDelay, IntegerDelayIsAShift) {
    Rng rng(1);
    std::vector<double> x(2000);
    for (double& v : x) v = rng.gaussian();
    const auto y = fractional_delay(x, 5.0);
    for (std::size_t i = 5; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i - 5], 1e-12);
}

TEST(Capture, BroadsideCopiesAgree) {
    const auto src = generate_utterance(random_utterance_spec(3)).wave;
    const auto cap = simulate_capture(src, square_array(0.05), Vector3d(0, 0, 1), 0.0, 1);
    ASSERT_EQ(cap.target.num_channels(), 4u);
    for (std::size_t m = 1; m < 4; ++m)
        EXPECT_GT(oracle::snr_db(cap.target.channels[0], cap.target.channels[m]), 50.0);
}

TEST(Capture, ReferenceSnrAsRequested) {
    const auto src = generate_utterance(random_utterance_spec(4)).wave;
    for (double snr : {-5.0, 0.0, 10.0}) {
        const auto cap = simulate_capture(src, square_array(0.05), Vector3d(1, 0, 0), snr, 2);
        double es = 0.0, en = 0.0;
        for (std::size_t i = 0; i < src.num_samples(); ++i) {
            es += cap.target.channels[1][i] * cap.target.channels[1][i];
            en += cap.noise.channels[1][i] * cap.noise.channels[1][i];
            ASSERT_DOUBLE_EQ(cap.mix.channels[1][i], cap.target.channels[1][i] + cap.noise.channels[1][i]);
        }
        EXPECT_NEAR(10.0 * std::log10(es / en), snr, 0.1);
    }
}

TEST(Capture, InterChannelDelayMatchesGeometry) {
    const auto src = generate_utterance(random_utterance_spec(5)).wave;
    ArrayGeometry g;
    g.mic_positions = {{0.0, 0.0, 0.0}, {0.343, 0.0, 0.0}};  // 1 ms = 16 samples endfire
    g.reference_mic = 0;
    const auto cap = simulate_capture(src, g, Vector3d(1, 0, 0), 0.0, 3);
    const auto& a = cap.target.channels[0];
    const auto& b = cap.target.channels[1];
    // sub-sample cross-correlation peak by parabolic interpolation
    auto xc = [&](int lag) {
        double acc = 0.0;
        for (std::size_t i = 40; i + 40 < a.size(); ++i) acc += a[i] * b[i + lag];
        return acc;
    };
    int best = 0;
    for (int lag = -30; lag <= 30; ++lag)
        if (xc(lag) > xc(best)) best = lag;
    const double l = xc(best - 1), c = xc(best), r = xc(best + 1);
    const double peak = best + 0.5 * (l - r) / (l - 2.0 * c + r);
    EXPECT_NEAR(peak, 16.0, 0.5);
}
