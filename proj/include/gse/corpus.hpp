#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gse/beamformer.hpp"
#include "gse/signal.hpp"

namespace gse {

inline constexpr int kFrameSamples = 320;  // 20 ms at 16 kHz

struct Formant {
    double freq_hz;
    double bandwidth_hz;
};

/// One pseudo-phone: up to three resonances and a voicing flag.
struct SymbolDef {
    std::vector<Formant> formants;
    bool voiced = true;
};

/// Fixed alphabet. Symbol 0 is silence; the rest are voiced or unvoiced pseudo-phones.
const std::vector<SymbolDef>& symbol_alphabet();
int alphabet_size();

struct UtteranceSpec {
    std::vector<int> symbols;
    std::vector<int> durations;                  // frames of 20 ms per symbol
    std::vector<std::vector<Formant>> formants;  // per symbol occurrence
    std::vector<double> pitch_hz;                // per frame
    std::vector<double> amplitude;               // per frame
    double speed = 1.0;
    int sample_rate = kDefaultSampleRate;
    std::uint64_t seed = 0;

    int total_frames() const;
    /// Throws ConfigError when lengths disagree, pitch leaves [80, 300] Hz or a formant reaches Nyquist.
    void validate() const;
};

struct CorpusLengths {
    double min_seconds = 2.0;
    double max_seconds = 4.0;
};

/// Random speaker (pitch, formant scale, speed) and symbol string. The total
/// length is a multiple of 40 ms with silence at both ends.
UtteranceSpec random_utterance_spec(std::uint64_t seed, const CorpusLengths& lengths = {});

struct Utterance {
    Waveform wave;
    std::vector<int> frame_symbols;  // one label per 20 ms frame
};

/// Glottal pulse train (or noise for unvoiced symbols) through per-symbol
/// resonator cascades, amplitude-enveloped and peak-normalised to 0.5.
Utterance generate_utterance(const UtteranceSpec& spec);

enum class NoiseKind { White, Pink, Babble };

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);

/// Noise of `num_samples` samples with unit RMS (babble: peak 0.5 before scaling).
Waveform generate_noise(NoiseKind kind, std::size_t num_samples, std::uint64_t seed,
                        int sample_rate = kDefaultSampleRate);

/// Delays x by `delay` samples (may be fractional or negative) with a Kaiser-windowed sinc.
std::vector<double> fractional_delay(const std::vector<double>& x, double delay, int half_taps = 32);

struct Capture {
    Waveform mix;     // target + noise
    Waveform target;  // noiseless far-field image at each mic
    Waveform noise;   // diffuse component
};

Capture simulate_capture(const Waveform& source, const ArrayGeometry& geometry, const Eigen::Vector3d& direction,
                         double diffuse_snr_db, std::uint64_t seed);

}  // namespace gse
