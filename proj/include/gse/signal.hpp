#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gse {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using cdouble = std::complex<double>;

inline constexpr int kDefaultSampleRate = 16000;

struct Waveform {
    std::vector<std::vector<double>> channels;
    int sample_rate = kDefaultSampleRate;

    static Waveform mono(std::vector<double> samples, int sample_rate = kDefaultSampleRate);
    static Waveform zeros(std::size_t num_samples, std::size_t num_channels = 1,
                          int sample_rate = kDefaultSampleRate);

    std::size_t num_channels() const { return channels.size(); }
    std::size_t num_samples() const { return channels.empty() ? 0 : channels.front().size(); }
    bool is_mono() const { return channels.size() == 1; }

    /// Channel 0; throws InputError unless the waveform is mono.
    const std::vector<double>& samples() const;
    std::vector<double>& samples();

    /// Throws InputError on ragged channels or non-finite samples.
    void validate() const;
};

/// Hann-windowed short-time spectrum. The window spans `win_len` samples and is
/// zero-padded to `fft_len` before the DFT; frame t is centred on sample t·hop.
struct ComplexSpectrogram {
    std::vector<cdouble> bins;  // row-major [frames × num_bins()]
    std::size_t frames = 0;
    int fft_len = 0;
    int win_len = 0;
    int hop = 0;
    int sample_rate = kDefaultSampleRate;
    std::size_t num_samples = 0;  // length of the analysed signal

    std::size_t num_bins() const { return static_cast<std::size_t>(fft_len) / 2 + 1; }
    cdouble& at(std::size_t t, std::size_t k) { return bins[t * num_bins() + k]; }
    const cdouble& at(std::size_t t, std::size_t k) const { return bins[t * num_bins() + k]; }
    std::span<cdouble> frame(std::size_t t) { return {bins.data() + t * num_bins(), num_bins()}; }
    std::span<const cdouble> frame(std::size_t t) const {
        return {bins.data() + t * num_bins(), num_bins()};
    }
};

/// Non-negative magnitude (or power) spectrogram with the framing of the STFT it came from.
struct MagnitudeSpectrogram {
    RowMatrix values;  // [frames × bins]
    int fft_len = 0;
    int win_len = 0;
    int hop = 0;
    int sample_rate = kDefaultSampleRate;
    std::size_t num_samples = 0;
};

enum class FeatureKind { LogMel, Mfcc, FbankStacked, Activations };

std::string to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& name);

struct FeatureMatrix {
    RowMatrix values;  // [frames × dim]
    double frame_rate = 0.0;
    FeatureKind kind = FeatureKind::LogMel;

    Eigen::Index frames() const { return values.rows(); }
    Eigen::Index dim() const { return values.cols(); }
};

struct MelFilterbankConfig {
    int n_mels = 23;
    double f_min = 0.0;
    double f_max = 8000.0;
    int fft_len = 512;
    int sample_rate = kDefaultSampleRate;
};

/// Short-time analysis settings. win_len = 0 means "same as fft_len".
struct StftConfig {
    int fft_len = 1024;
    int win_len = 0;
    int hop = 512;

    int window_length() const { return win_len > 0 ? win_len : fft_len; }
};

/// Feature front-end: 25 ms Hann window in a 512-point FFT, 23 mel bands.
struct MfccConfig {
    int sample_rate = kDefaultSampleRate;
    int fft_len = 512;
    int win_len = 400;
    int hop = 160;
    int n_mels = 23;
    int n_coeffs = 13;
    double f_min = 0.0;
    double f_max = 0.0;  // 0 → Nyquist

    StftConfig stft() const { return {fft_len, win_len, hop}; }
    MelFilterbankConfig mel() const;
};

inline constexpr double kLogFloor = 1e-10;

bool is_power_of_two(int n);

/// Periodic Hann window of length n.
std::vector<double> hann_window(int n);

ComplexSpectrogram stft(std::span<const double> samples, int sample_rate, const StftConfig& cfg);
ComplexSpectrogram stft(const Waveform& wave, int fft_len, int hop);
ComplexSpectrogram stft(const Waveform& wave, const StftConfig& cfg);

/// Weighted overlap-add inverse with window-square normalisation.
Waveform istft(const ComplexSpectrogram& spec);

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec);

/// Triangular filters on the HTK mel scale, apex 1 at each centre frequency. [n_mels × bins]
RowMatrix mel_filterbank(const MelFilterbankConfig& cfg);

/// log(filterbank · |X|² + 1e-10), one row per frame.
FeatureMatrix log_mel(const ComplexSpectrogram& spec, const MelFilterbankConfig& cfg);
FeatureMatrix log_mel_from_power(const RowMatrix& power, const MelFilterbankConfig& cfg,
                                 double frame_rate);

/// Orthonormal DCT-II basis, rows = coefficients. [n_coeffs × n_inputs]
RowMatrix dct_matrix(int n_coeffs, int n_inputs);

FeatureMatrix mfcc_from_log_mel(const FeatureMatrix& log_mel, int n_coeffs);
FeatureMatrix mfcc(const Waveform& wave, int n_coeffs);
FeatureMatrix mfcc(const Waveform& wave, const MfccConfig& cfg);

/// 23-band log-mel "FBank" features at the configured hop.
FeatureMatrix fbank(const Waveform& wave, const MfccConfig& cfg);

/// Appends first and second order regression deltas over ±window frames.
FeatureMatrix add_deltas(const FeatureMatrix& feat, int window = 2);

/// Concatenates each group of `factor` consecutive frames; the trailing group
/// is padded by repeating the last input frame.
FeatureMatrix stack_frames(const FeatureMatrix& feat, int factor);

/// Number of centred frames produced for a signal of `num_samples` samples.
std::size_t frame_count(std::size_t num_samples, int hop);

}  // namespace gse
