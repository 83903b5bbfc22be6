#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gse/signal.hpp"
#include "gse/tokenizer.hpp"

namespace gse {

// Deterministic unit-to-speech decoder: one log-mel prototype per unit,
// pseudo-inverse mel inversion and Griffin-Lim phase recovery.

struct VocoderConfig {
    int sample_rate = kDefaultSampleRate;
    int fft_len = 1024;
    int win_len = 640;  // 40 ms window at a 20 ms hop: 50% overlap
    int hop = 320;
    int n_mels = 80;
    int smooth = 3;
    int griffin_lim_iters = 32;
    double momentum = 0.0;
    std::uint64_t seed = 0;

    StftConfig stft() const { return {fft_len, win_len, hop}; }
    MelFilterbankConfig mel() const { return {n_mels, 0.0, sample_rate / 2.0, fft_len, sample_rate}; }
};

struct PrototypeTable {
    RowMatrix mel_prototypes;  // [K × n_mels], log-mel
    std::vector<bool> observed;  // false → global-mean fallback
    int n_mels = 80;
    int hop = 320;

    int size() const { return static_cast<int>(mel_prototypes.rows()); }
};

/// 80-band log-mel at the vocoder framing (50 Hz).
FeatureMatrix vocoder_mel(const Waveform& wave, const VocoderConfig& cfg = {});

/// Mean log-mel frame per unit; units never observed get the global mean frame.
PrototypeTable build_prototypes(const Codebook& codebook,
                                const std::vector<std::pair<UnitSequence, FeatureMatrix>>& corpus,
                                const VocoderConfig& cfg = {});

/// Prototype lookup followed by a centred moving average over `smooth` frames
/// (edges replicate the boundary frame).
FeatureMatrix units_to_mel(const UnitSequence& units, const PrototypeTable& table, int smooth = 3);

/// exp → filterbank pseudo-inverse → clamp at 0 → sqrt; frames × (fft_len/2+1).
MagnitudeSpectrogram mel_to_linear(const FeatureMatrix& mel, const MelFilterbankConfig& cfg, int win_len, int hop);

struct GriffinLimResult {
    Waveform wave;
    std::vector<double> spectral_convergence;  // ‖|STFT(x)| - mag‖ / ‖mag‖ after each iteration
};

/// Random-phase start from `seed`, then `iters` rounds of phase re-estimation.
GriffinLimResult griffin_lim(const MagnitudeSpectrogram& mag, int iters, std::uint64_t seed = 0,
                             double momentum = 0.0);

/// units → mel → magnitude → waveform of (|units| - 1)·hop samples.
Waveform vocode(const UnitSequence& units, const PrototypeTable& table, const VocoderConfig& cfg = {});

nlohmann::json to_json(const PrototypeTable& table);
PrototypeTable prototypes_from_json(const nlohmann::json& j);
void save_prototypes(const std::filesystem::path& path, const PrototypeTable& table);
PrototypeTable load_prototypes(const std::filesystem::path& path);

}  // namespace gse
