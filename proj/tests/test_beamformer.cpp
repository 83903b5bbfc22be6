#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gse/beamformer.hpp"
#include "gse/corpus.hpp"
#include "gse/error.hpp"
#include "gse/metrics.hpp"
#include "gse/rng.hpp"
#include "oracles.hpp"

using namespace gse;
using Eigen::Vector3d;

namespace {

ArrayGeometry line_array(double spacing, int reference = 0) {
    ArrayGeometry g;
    g.mic_positions = {{0.0, 0.0, 0.0}, {spacing, 0.0, 0.0}};
    g.reference_mic = reference;
    return g;
}

Eigen::MatrixXcd random_hpd(int m, Rng& rng) {
    Eigen::MatrixXcd a(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) a(i, j) = cdouble(rng.gaussian(), rng.gaussian());
    Eigen::MatrixXcd phi = a * a.adjoint();
    phi.diagonal().array() += 0.1;
    return phi;
}

Waveform speech(std::uint64_t seed) { return generate_utterance(random_utterance_spec(seed)).wave; }

}  // namespace

TEST(Steering, SingleMicIsOne) {
    ArrayGeometry g;
    g.mic_positions = {{0.3, 0.1, 0.0}};
    g.reference_mic = 0;
    const auto s = steering_vector(g, Vector3d(1, 0, 0), 1024, 16000);
    for (Eigen::Index k = 0; k < s.vectors.rows(); ++k) EXPECT_EQ(s.vectors(k, 0), cdouble(1.0, 0.0));
}

TEST(Steering, BroadsideGivesEqualPhases) {
    const auto s = steering_vector(line_array(0.1), Vector3d(0, 1, 0), 1024, 16000);
    for (Eigen::Index k = 0; k < s.vectors.rows(); ++k) {
        EXPECT_NEAR(std::abs(s.vectors(k, 0) - 1.0), 0.0, 1e-15);
        EXPECT_NEAR(std::abs(s.vectors(k, 1) - 1.0), 0.0, 1e-15);
    }
}

TEST(Steering, EndfirePhaseMatchesPathDifference) {
    // 27440 Hz with 1024 bins puts 1715 Hz on bin 64 and 857.5 Hz on bin 32.
    // A 10 cm endfire path at 343 m/s is half a cycle at 1715 Hz, a quarter at 857.5 Hz.
    const auto s = steering_vector(line_array(0.1), Vector3d(1, 0, 0), 1024, 27440);
    EXPECT_NEAR(std::abs(std::arg(s.vectors(64, 1) / s.vectors(64, 0))), std::numbers::pi, 1e-9);
    EXPECT_NEAR(std::abs(std::arg(s.vectors(32, 1) / s.vectors(32, 0))), std::numbers::pi / 2.0, 1e-9);
}

TEST(Steering, ReferenceHasUnitMagnitudeZeroPhase) {
    const Vector3d dir = Vector3d(1, 2, 0.5).normalized();
    const auto s = steering_vector(square_array(0.05), dir, 1024, 16000);
    for (Eigen::Index k = 0; k < s.vectors.rows(); ++k) EXPECT_EQ(s.vectors(k, 1), cdouble(1.0, 0.0));
}

TEST(Steering, NonUnitDirectionRejected) {
    EXPECT_THROW(steering_vector(line_array(0.1), Vector3d(2, 0, 0), 1024, 16000), ConfigError);
}

TEST(DiffuseCovariance, DiagonalLowFrequencyAndSincZero) {
    const double loading = 1e-4;
    const auto near = diffuse_covariance(line_array(0.1), 1024, 16000, loading);
    // bin 0: all-ones plus loading on the diagonal
    EXPECT_NEAR(std::abs(near.matrices[0](0, 1) - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(near.matrices[0](0, 0).real(), 1.0 + loading, 1e-15);
    for (const auto& phi : near.matrices) {
        EXPECT_NEAR((phi - phi.adjoint()).cwiseAbs().maxCoeff(), 0.0, 1e-12);
        EXPECT_NEAR(phi(0, 0).real(), 1.0 + loading, 1e-15);
        EXPECT_EQ(Eigen::LLT<Eigen::MatrixXcd>(phi).info(), Eigen::Success);
    }
    // 2·1000·0.1715/343 = 1 and 1000 Hz = bin 64 of a 1024-point FFT
    const auto cov = diffuse_covariance(line_array(0.1715), 1024, 16000, loading);
    EXPECT_NEAR(cov.matrices[64](0, 1).real(), 0.0, 1e-15);
}

TEST(Mvdr, SingleMicIsUnitWeight) {
    ArrayGeometry g;
    g.mic_positions = {{0.0, 0.0, 0.0}};
    g.reference_mic = 0;
    const auto w = mvdr_weights(diffuse_covariance(g, 1024, 16000), steering_vector(g, Vector3d(1, 0, 0), 1024, 16000), 0);
    for (Eigen::Index k = 0; k < w.weights.rows(); ++k) EXPECT_NEAR(std::abs(w.weights(k, 0) - 1.0), 0.0, 1e-15);
}

TEST(Mvdr, IdentityCovarianceGivesMatchedFilter) {
    const auto g = square_array(0.05);
    const auto s = steering_vector(g, Vector3d(0.6, 0.8, 0.0), 1024, 16000);
    CovarianceSet cov;
    cov.matrices.assign(513, Eigen::MatrixXcd::Identity(4, 4));
    const auto w = mvdr_weights(cov, s, 1);
    EXPECT_NEAR((w.weights - s.vectors / 4.0).cwiseAbs().maxCoeff(), 0.0, 1e-14);
}

TEST(Mvdr, DistortionlessAtEveryBin) {
    const auto g = square_array(0.05);
    for (const Vector3d& dir : {Vector3d(1, 0, 0), Vector3d(0.6, 0.8, 0.0), Vector3d(0, 0, 1)}) {
        const auto s = steering_vector(g, dir, 1024, 16000);
        const auto w = mvdr_weights(diffuse_covariance(g, 1024, 16000), s, 1);
        for (Eigen::Index k = 0; k < w.weights.rows(); ++k) {
            const cdouble r = w.weights.row(k).conjugate().dot(s.vectors.row(k).conjugate());
            EXPECT_LT(std::abs(r - 1.0), 1e-10) << k;
        }
    }
}

TEST(Mvdr, ConstrainedMinimalityAgainstRandomFeasibleVectors) {
    Rng rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::MatrixXcd phi = random_hpd(4, rng);
        Eigen::VectorXcd d(4);
        for (int m = 0; m < 4; ++m) d(m) = std::polar(1.0, rng.uniform(0.0, 2.0 * std::numbers::pi));
        CovarianceSet cov{{phi}};
        SteeringSet steer;
        steer.vectors = d.transpose();
        const Eigen::VectorXcd w = mvdr_weights(cov, steer, 0).weights.row(0).transpose();
        const double best = output_noise_power(w, phi);
        for (int i = 0; i < 1000; ++i) {
            Eigen::VectorXcd v(4);
            for (int m = 0; m < 4; ++m) v(m) = cdouble(rng.gaussian(), rng.gaussian());
            // project onto vᴴd = 1
            v += d * std::conj((1.0 - v.dot(d)) / d.squaredNorm());
            ASSERT_NEAR(std::abs(v.dot(d) - 1.0), 0.0, 1e-12);
            EXPECT_LE(best, output_noise_power(v, phi) * (1.0 + 1e-12));
        }
    }
}

TEST(Mvdr, SingularCovarianceReportsBin) {
    CovarianceSet cov;
    cov.matrices.assign(3, Eigen::MatrixXcd::Identity(2, 2));
    cov.matrices[2] = Eigen::MatrixXcd::Zero(2, 2);
    SteeringSet s;
    s.vectors = Eigen::MatrixXcd::Ones(3, 2);
    try {
        mvdr_weights(cov, s, 0);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("bin 2"), std::string::npos);
    }
}

TEST(Beamform, SingleChannelPassThrough) {
    const auto x = speech(1);
    WeightSet w;
    w.weights = Eigen::MatrixXcd::Ones(513, 1);
    const auto y = beamform(x, w);
    EXPECT_GT(oracle::snr_db(x.samples(), y.samples()), 60.0);
}

TEST(Beamform, ChannelCountMismatchRejected) {
    WeightSet w;
    w.weights = Eigen::MatrixXcd::Ones(513, 4);
    EXPECT_THROW(beamform(Waveform::zeros(1000, 2), w), ConfigError);
}

TEST(Beamform, NoiselessCaptureReconstructsReferenceMic) {
    const auto g = square_array(0.05);
    const Vector3d dir = Vector3d(0.6, 0.8, 0.0);
    const auto cap = simulate_capture(speech(2), g, dir, 0.0, 3);
    const auto y = mvdr_beamform(cap.target, g, dir).samples();
    const auto& ref = cap.target.channels[1];
    const std::size_t edge = 2048;
    EXPECT_GT(oracle::snr_db(ref, y, edge, ref.size() - edge), 40.0);
}

TEST(Beamform, DiffuseNoiseGainAtLeast3dB) {
    const auto g = square_array(0.05);
    const Vector3d dir = Vector3d(1.0, 0.0, 0.0);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto cap = simulate_capture(speech(10 + seed), g, dir, 0.0, seed);
        const auto& clean_ref = cap.target.channels[1];
        const double before = si_snr(clean_ref, cap.mix.channels[1]);
        const auto y = mvdr_beamform(cap.mix, g, dir).samples();
        const double after = si_snr(clean_ref, y);
        EXPECT_GE(after - before, 3.0) << "seed " << seed;
    }
}
