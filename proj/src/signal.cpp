#include "gse/signal.hpp"

#include <cmath>
#include <numbers>

#include "gse/error.hpp"
#include "gse/fft.hpp"
#include "gse/kernels.hpp"

namespace gse {

Waveform Waveform::mono(std::vector<double> samples, int sample_rate) {
    Waveform w;
    w.channels.push_back(std::move(samples));
    w.sample_rate = sample_rate;
    return w;
}

Waveform Waveform::zeros(std::size_t num_samples, std::size_t num_channels, int sample_rate) {
    Waveform w;
    w.channels.assign(num_channels, std::vector<double>(num_samples, 0.0));
    w.sample_rate = sample_rate;
    return w;
}

const std::vector<double>& Waveform::samples() const {
    if (!is_mono()) throw InputError("expected a mono waveform, got " + std::to_string(num_channels()) + " channels");
    return channels.front();
}

std::vector<double>& Waveform::samples() {
    if (!is_mono()) throw InputError("expected a mono waveform, got " + std::to_string(num_channels()) + " channels");
    return channels.front();
}

void Waveform::validate() const {
    if (channels.empty()) throw InputError("waveform has no channels");
    if (sample_rate <= 0) throw InputError("waveform sample rate must be positive");
    const std::size_t n = channels.front().size();
    for (const auto& ch : channels) {
        if (ch.size() != n) throw InputError("waveform channels differ in length");
        for (double v : ch)
            if (!std::isfinite(v)) throw InputError("waveform contains non-finite samples");
    }
}

std::string to_string(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::LogMel: return "log-mel";
        case FeatureKind::Mfcc: return "mfcc";
        case FeatureKind::FbankStacked: return "fbank-stacked";
        case FeatureKind::Activations: return "activations";
    }
    return "unknown";
}

FeatureKind feature_kind_from_string(const std::string& name) {
    if (name == "log-mel") return FeatureKind::LogMel;
    if (name == "mfcc") return FeatureKind::Mfcc;
    if (name == "fbank-stacked") return FeatureKind::FbankStacked;
    if (name == "activations") return FeatureKind::Activations;
    throw ConfigError("unknown feature kind '" + name + "'");
}

MelFilterbankConfig MfccConfig::mel() const {
    return {n_mels, f_min, f_max > 0.0 ? f_max : sample_rate / 2.0, fft_len, sample_rate};
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::vector<double> hann_window(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    return w;
}

std::size_t frame_count(std::size_t num_samples, int hop) {
    return num_samples == 0 ? 0 : num_samples / static_cast<std::size_t>(hop) + 1;
}

ComplexSpectrogram stft(std::span<const double> samples, int sample_rate, const StftConfig& cfg) {
    const int win = cfg.window_length();
    if (!is_power_of_two(cfg.fft_len))
        throw ConfigError("stft: fft_len " + std::to_string(cfg.fft_len) + " is not a power of two");
    if (win < 2 || win > cfg.fft_len) throw ConfigError("stft: window length must be in [2, fft_len]");
    if (cfg.hop <= 0 || cfg.hop > win) throw ConfigError("stft: hop must be in [1, window length]");

    ComplexSpectrogram spec;
    spec.fft_len = cfg.fft_len;
    spec.win_len = win;
    spec.hop = cfg.hop;
    spec.sample_rate = sample_rate;
    spec.num_samples = samples.size();
    spec.frames = frame_count(samples.size(), cfg.hop);
    if (spec.frames == 0) return spec;

    const std::size_t pad = static_cast<std::size_t>(win) / 2;
    const std::size_t needed = (spec.frames - 1) * cfg.hop + static_cast<std::size_t>(win);
    std::vector<double> padded(std::max(samples.size() + 2 * pad, needed), 0.0);
    std::copy(samples.begin(), samples.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));

    const auto window = hann_window(win);
    spec.bins.resize(spec.frames * spec.num_bins());
    kernels::omp::frame_spectra({padded, window, cfg.fft_len, cfg.hop, spec.frames}, spec.bins);
    return spec;
}

ComplexSpectrogram stft(const Waveform& wave, int fft_len, int hop) {
    return stft(wave.samples(), wave.sample_rate, StftConfig{fft_len, 0, hop});
}

ComplexSpectrogram stft(const Waveform& wave, const StftConfig& cfg) {
    return stft(wave.samples(), wave.sample_rate, cfg);
}

Waveform istft(const ComplexSpectrogram& spec) {
    const int win = spec.win_len > 0 ? spec.win_len : spec.fft_len;
    if (!is_power_of_two(spec.fft_len)) throw ConfigError("istft: fft_len is not a power of two");
    if (spec.hop <= 0 || win % spec.hop != 0 || win / spec.hop < 2)
        throw ConfigError("istft: hop " + std::to_string(spec.hop) + " with window " + std::to_string(win) +
                          " is not an overlap-add compliant Hann setting");
    if (spec.frames == 0) return Waveform::mono(std::vector<double>(spec.num_samples, 0.0), spec.sample_rate);

    const auto window = hann_window(win);
    const std::size_t pad = static_cast<std::size_t>(win) / 2;
    const std::size_t length = (spec.frames - 1) * spec.hop + static_cast<std::size_t>(win);
    std::vector<double> acc(length, 0.0), norm(length, 0.0);
    std::vector<double> frame(static_cast<std::size_t>(spec.fft_len));
    for (std::size_t t = 0; t < spec.frames; ++t) {
        fft::irfft(spec.frame(t), frame);
        const std::size_t start = t * spec.hop;
        for (int i = 0; i < win; ++i) {
            acc[start + i] += frame[i] * window[i];
            norm[start + i] += window[i] * window[i];
        }
    }
    std::vector<double> out(spec.num_samples, 0.0);
    for (std::size_t n = 0; n < spec.num_samples && n + pad < length; ++n) {
        const double w = norm[n + pad];
        out[n] = w > 1e-10 ? acc[n + pad] / w : 0.0;
    }
    return Waveform::mono(std::move(out), spec.sample_rate);
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec) {
    MagnitudeSpectrogram mag;
    mag.fft_len = spec.fft_len;
    mag.win_len = spec.win_len;
    mag.hop = spec.hop;
    mag.sample_rate = spec.sample_rate;
    mag.num_samples = spec.num_samples;
    const auto nb = static_cast<Eigen::Index>(spec.num_bins());
    mag.values.resize(static_cast<Eigen::Index>(spec.frames), nb);
    for (Eigen::Index t = 0; t < mag.values.rows(); ++t)
        for (Eigen::Index k = 0; k < nb; ++k) mag.values(t, k) = std::abs(spec.at(t, k));
    return mag;
}

namespace {
double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }
}  // namespace

RowMatrix mel_filterbank(const MelFilterbankConfig& cfg) {
    if (!is_power_of_two(cfg.fft_len)) throw ConfigError("mel_filterbank: fft_len is not a power of two");
    if (cfg.n_mels < 1) throw ConfigError("mel_filterbank: n_mels must be positive");
    if (!(cfg.f_min >= 0.0 && cfg.f_min < cfg.f_max && cfg.f_max <= cfg.sample_rate / 2.0))
        throw ConfigError("mel_filterbank: need 0 <= f_min < f_max <= sample_rate/2");

    const int nb = cfg.fft_len / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.f_min);
    const double mel_hi = hz_to_mel(cfg.f_max);
    std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (cfg.n_mels + 1));

    RowMatrix fb = RowMatrix::Zero(cfg.n_mels, nb);
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double lo = edges[m], centre = edges[m + 1], hi = edges[m + 2];
        for (int k = 0; k < nb; ++k) {
            const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_len;
            const double rise = (f - lo) / (centre - lo);
            const double fall = (hi - f) / (hi - centre);
            fb(m, k) = std::max(0.0, std::min(rise, fall));
        }
        if (fb.row(m).sum() <= 0.0)
            throw ConfigError("mel_filterbank: filter " + std::to_string(m) +
                              " covers no FFT bin; use a longer FFT or fewer mel bands");
    }
    return fb;
}

FeatureMatrix log_mel_from_power(const RowMatrix& power, const MelFilterbankConfig& cfg, double frame_rate) {
    const RowMatrix fb = mel_filterbank(cfg);
    if (power.rows() > 0 && power.cols() != fb.cols())
        throw ConfigError("log_mel: spectrum has " + std::to_string(power.cols()) + " bins, filterbank expects " +
                          std::to_string(fb.cols()));
    FeatureMatrix out;
    out.kind = FeatureKind::LogMel;
    out.frame_rate = frame_rate;
    out.values = (power * fb.transpose()).array().unaryExpr([](double e) { return std::log(e + kLogFloor); });
    return out;
}

FeatureMatrix log_mel(const ComplexSpectrogram& spec, const MelFilterbankConfig& cfg) {
    if (cfg.fft_len != spec.fft_len)
        throw ConfigError("log_mel: filterbank fft_len " + std::to_string(cfg.fft_len) +
                          " does not match spectrogram fft_len " + std::to_string(spec.fft_len));
    const auto nb = static_cast<Eigen::Index>(spec.num_bins());
    RowMatrix power(static_cast<Eigen::Index>(spec.frames), nb);
    for (Eigen::Index t = 0; t < power.rows(); ++t)
        for (Eigen::Index k = 0; k < nb; ++k) power(t, k) = std::norm(spec.at(t, k));
    return log_mel_from_power(power, cfg, static_cast<double>(spec.sample_rate) / spec.hop);
}

RowMatrix dct_matrix(int n_coeffs, int n_inputs) {
    RowMatrix m(n_coeffs, n_inputs);
    for (int k = 0; k < n_coeffs; ++k) {
        const double scale = k == 0 ? std::sqrt(1.0 / n_inputs) : std::sqrt(2.0 / n_inputs);
        for (int n = 0; n < n_inputs; ++n)
            m(k, n) = scale * std::cos(std::numbers::pi * k * (2.0 * n + 1.0) / (2.0 * n_inputs));
    }
    return m;
}

FeatureMatrix mfcc_from_log_mel(const FeatureMatrix& log_mel, int n_coeffs) {
    if (n_coeffs < 1 || n_coeffs > log_mel.dim())
        throw ConfigError("mfcc: n_coeffs " + std::to_string(n_coeffs) + " must be in [1, n_mels=" +
                          std::to_string(log_mel.dim()) + "]");
    FeatureMatrix out;
    out.kind = FeatureKind::Mfcc;
    out.frame_rate = log_mel.frame_rate;
    out.values = log_mel.values * dct_matrix(n_coeffs, static_cast<int>(log_mel.dim())).transpose();
    return out;
}

FeatureMatrix fbank(const Waveform& wave, const MfccConfig& cfg) {
    return log_mel(stft(wave.samples(), wave.sample_rate, cfg.stft()), cfg.mel());
}

FeatureMatrix mfcc(const Waveform& wave, const MfccConfig& cfg) {
    if (cfg.n_coeffs > cfg.n_mels)
        throw ConfigError("mfcc: n_coeffs " + std::to_string(cfg.n_coeffs) + " exceeds n_mels " +
                          std::to_string(cfg.n_mels));
    if (wave.sample_rate != cfg.sample_rate) throw ConfigError("mfcc: waveform sample rate differs from config");
    return mfcc_from_log_mel(fbank(wave, cfg), cfg.n_coeffs);
}

FeatureMatrix mfcc(const Waveform& wave, int n_coeffs) {
    MfccConfig cfg;
    cfg.sample_rate = wave.sample_rate;
    cfg.n_coeffs = n_coeffs;
    return mfcc(wave, cfg);
}

namespace {
RowMatrix regression_delta(const RowMatrix& x, int window) {
    const Eigen::Index frames = x.rows();
    RowMatrix d = RowMatrix::Zero(frames, x.cols());
    double denom = 0.0;
    for (int n = 1; n <= window; ++n) denom += 2.0 * n * n;
    for (Eigen::Index t = 0; t < frames; ++t) {
        for (int n = 1; n <= window; ++n) {
            const Eigen::Index ahead = std::min<Eigen::Index>(t + n, frames - 1);
            const Eigen::Index behind = std::max<Eigen::Index>(t - n, 0);
            d.row(t) += n * (x.row(ahead) - x.row(behind));
        }
        d.row(t) /= denom;
    }
    return d;
}
}  // namespace

FeatureMatrix add_deltas(const FeatureMatrix& feat, int window) {
    if (window < 1) throw ConfigError("add_deltas: window must be >= 1");
    const RowMatrix d1 = regression_delta(feat.values, window);
    const RowMatrix d2 = regression_delta(d1, window);
    FeatureMatrix out = feat;
    out.values.resize(feat.frames(), 3 * feat.dim());
    out.values << feat.values, d1, d2;
    return out;
}

FeatureMatrix stack_frames(const FeatureMatrix& feat, int factor) {
    if (factor < 1) throw ConfigError("stack_frames: factor must be >= 1");
    const Eigen::Index frames = feat.frames();
    const Eigen::Index dim = feat.dim();
    const Eigen::Index out_frames = (frames + factor - 1) / factor;
    FeatureMatrix out;
    out.kind = factor == 1 ? feat.kind : FeatureKind::FbankStacked;
    out.frame_rate = feat.frame_rate / factor;
    out.values.resize(out_frames, dim * factor);
    for (Eigen::Index t = 0; t < out_frames; ++t)
        for (int j = 0; j < factor; ++j) {
            const Eigen::Index src = std::min<Eigen::Index>(t * factor + j, frames - 1);
            out.values.block(t, j * dim, 1, dim) = feat.values.row(src);
        }
    return out;
}

}  // namespace gse
