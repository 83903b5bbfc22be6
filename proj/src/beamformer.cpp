#include "gse/beamformer.hpp"

#include <cmath>
#include <numbers>

#include "gse/error.hpp"
#include "gse/kernels.hpp"

namespace gse {
namespace {

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

double bin_frequency(int k, int fft_len, int sample_rate) {
    return static_cast<double>(k) * sample_rate / fft_len;
}

}  // namespace

void ArrayGeometry::validate() const {
    if (mic_positions.empty()) throw ConfigError("array geometry has no microphones");
    if (reference_mic < 0 || static_cast<std::size_t>(reference_mic) >= mic_positions.size())
        throw ConfigError("reference microphone index " + std::to_string(reference_mic) + " out of range");
    if (!(speed_of_sound > 0.0)) throw ConfigError("speed of sound must be positive");
}

std::vector<double> ArrayGeometry::relative_delays(const Eigen::Vector3d& direction) const {
    validate();
    if (std::abs(direction.norm() - 1.0) > 1e-9) throw ConfigError("steering direction must be a unit vector");
    const Eigen::Vector3d& ref = mic_positions[static_cast<std::size_t>(reference_mic)];
    std::vector<double> tau(mic_positions.size());
    for (std::size_t m = 0; m < mic_positions.size(); ++m)
        tau[m] = (mic_positions[m] - ref).dot(direction) / speed_of_sound;
    return tau;
}

ArrayGeometry square_array(double spacing, int reference_mic) {
    const double h = spacing / 2.0;
    ArrayGeometry g;
    g.mic_positions = {{-h, -h, 0.0}, {h, -h, 0.0}, {h, h, 0.0}, {-h, h, 0.0}};
    g.reference_mic = reference_mic;
    return g;
}

SteeringSet steering_vector(const ArrayGeometry& geometry, const Eigen::Vector3d& direction, int fft_len,
                            int sample_rate) {
    const auto tau = geometry.relative_delays(direction);
    const int nb = fft_len / 2 + 1;
    SteeringSet s;
    s.vectors.resize(nb, static_cast<Eigen::Index>(tau.size()));
    for (int k = 0; k < nb; ++k) {
        const double f = bin_frequency(k, fft_len, sample_rate);
        for (std::size_t m = 0; m < tau.size(); ++m)
            s.vectors(k, static_cast<Eigen::Index>(m)) = std::polar(1.0, -2.0 * std::numbers::pi * f * tau[m]);
    }
    return s;
}

CovarianceSet diffuse_covariance(const ArrayGeometry& geometry, int fft_len, int sample_rate, double loading) {
    geometry.validate();
    if (!(loading > 0.0)) throw ConfigError("diffuse_covariance: loading must be positive");
    const auto mics = static_cast<Eigen::Index>(geometry.num_mics());
    const int nb = fft_len / 2 + 1;
    CovarianceSet cov;
    cov.matrices.reserve(static_cast<std::size_t>(nb));
    for (int k = 0; k < nb; ++k) {
        const double f = bin_frequency(k, fft_len, sample_rate);
        Eigen::MatrixXcd phi(mics, mics);
        for (Eigen::Index i = 0; i < mics; ++i)
            for (Eigen::Index j = 0; j < mics; ++j) {
                const double dist = (geometry.mic_positions[i] - geometry.mic_positions[j]).norm();
                phi(i, j) = sinc(2.0 * f * dist / geometry.speed_of_sound);
            }
        const double load = loading * phi.trace().real() / static_cast<double>(mics);
        phi.diagonal().array() += load;
        cov.matrices.push_back(std::move(phi));
    }
    return cov;
}

WeightSet mvdr_weights(const CovarianceSet& cov, const SteeringSet& steering, int reference_mic) {
    const Eigen::Index nb = steering.vectors.rows();
    const Eigen::Index mics = steering.vectors.cols();
    if (static_cast<Eigen::Index>(cov.matrices.size()) != nb)
        throw ConfigError("mvdr_weights: covariance and steering bin counts differ");
    if (reference_mic < 0 || reference_mic >= mics) throw ConfigError("mvdr_weights: reference mic out of range");

    WeightSet out;
    out.weights.resize(nb, mics);
    for (Eigen::Index k = 0; k < nb; ++k) {
        const auto& phi = cov.matrices[static_cast<std::size_t>(k)];
        if (phi.rows() != mics || phi.cols() != mics)
            throw ConfigError("mvdr_weights: covariance at bin " + std::to_string(k) + " has the wrong size");
        const Eigen::VectorXcd d = steering.vectors.row(k).transpose();
        Eigen::LLT<Eigen::MatrixXcd> llt(phi);
        if (llt.info() != Eigen::Success)
            throw NumericError("mvdr_weights: covariance not positive definite at bin " + std::to_string(k));
        const Eigen::VectorXcd phi_inv_d = llt.solve(d);
        const cdouble denom = d.dot(phi_inv_d);  // dᴴΦ⁻¹d
        if (!(std::abs(denom) > 0.0) || !std::isfinite(std::abs(denom)))
            throw NumericError("mvdr_weights: degenerate solve at bin " + std::to_string(k));
        const Eigen::VectorXcd w = phi_inv_d / denom;
        const cdouble response = w.dot(d);  // wᴴd
        if (std::abs(response - 1.0) > 1e-10)
            throw NumericError("mvdr_weights: distortionless constraint violated at bin " + std::to_string(k));
        out.weights.row(k) = w.transpose();
    }
    return out;
}

double output_noise_power(const Eigen::VectorXcd& w, const Eigen::MatrixXcd& phi) {
    return w.dot(phi * w).real();
}

Waveform beamform(const Waveform& capture, const WeightSet& weights, int fft_len) {
    capture.validate();
    if (static_cast<std::size_t>(weights.weights.cols()) != capture.num_channels())
        throw ConfigError("beamform: capture has " + std::to_string(capture.num_channels()) +
                          " channels, weights expect " + std::to_string(weights.weights.cols()));
    if (weights.weights.rows() != fft_len / 2 + 1) throw ConfigError("beamform: weight bin count does not match fft_len");
    std::vector<ComplexSpectrogram> specs;
    specs.reserve(capture.num_channels());
    for (const auto& ch : capture.channels)
        specs.push_back(stft(ch, capture.sample_rate, StftConfig{fft_len, 0, fft_len / 2}));
    ComplexSpectrogram out;
    kernels::omp::filter_and_sum(specs, weights.weights, out);
    return istft(out);
}

Waveform mvdr_beamform(const Waveform& capture, const ArrayGeometry& geometry, const Eigen::Vector3d& direction,
                       double loading) {
    const auto steering = steering_vector(geometry, direction, kBeamformerFftLength, capture.sample_rate);
    const auto cov = diffuse_covariance(geometry, kBeamformerFftLength, capture.sample_rate, loading);
    return beamform(capture, mvdr_weights(cov, steering, geometry.reference_mic), kBeamformerFftLength);
}

}  // namespace gse
