#pragma once

#include <vector>

#include <Eigen/Dense>

#include "gse/signal.hpp"

namespace gse {

struct ArrayGeometry {
    std::vector<Eigen::Vector3d> mic_positions;  // metres
    int reference_mic = 1;                       // zero-based: the second microphone
    double speed_of_sound = 343.0;

    std::size_t num_mics() const { return mic_positions.size(); }
    void validate() const;

    /// Far-field propagation delay of each mic relative to the reference, in seconds.
    /// `direction` is the unit vector along which the wavefront travels.
    std::vector<double> relative_delays(const Eigen::Vector3d& direction) const;
};

/// Square planar array in the xy-plane centred on the origin.
ArrayGeometry square_array(double spacing, int reference_mic = 1);

struct SteeringSet {
    Eigen::MatrixXcd vectors;  // [bins × mics]
};

struct CovarianceSet {
    std::vector<Eigen::MatrixXcd> matrices;  // one [mics × mics] per bin
};

struct WeightSet {
    Eigen::MatrixXcd weights;  // [bins × mics]
};

inline constexpr int kBeamformerFftLength = 1024;  // 64 ms at 16 kHz

/// d_m(f) = exp(-j·2π·f·τ_m) with τ relative to the reference mic.
SteeringSet steering_vector(const ArrayGeometry& geometry, const Eigen::Vector3d& direction, int fft_len,
                            int sample_rate);

/// Spherically isotropic noise coherence sinc(2·f·d_ij/c) with loading·trace/M on the diagonal.
CovarianceSet diffuse_covariance(const ArrayGeometry& geometry, int fft_len, int sample_rate,
                                 double loading = 1e-2);

/// w = Φ⁻¹d / (dᴴΦ⁻¹d) per bin. Throws NumericError naming the bin if Φ is not
/// positive definite or the distortionless constraint fails by more than 1e-10.
WeightSet mvdr_weights(const CovarianceSet& cov, const SteeringSet& steering, int reference_mic);

/// wᴴΦw at one bin.
double output_noise_power(const Eigen::VectorXcd& w, const Eigen::MatrixXcd& phi);

/// Filter-and-sum in the STFT domain (Hann, 50% overlap) and weighted overlap-add resynthesis.
Waveform beamform(const Waveform& capture, const WeightSet& weights, int fft_len = kBeamformerFftLength);

/// Diffuse-noise MVDR steered along `direction`, end to end.
Waveform mvdr_beamform(const Waveform& capture, const ArrayGeometry& geometry, const Eigen::Vector3d& direction,
                       double loading = 1e-2);

}  // namespace gse
