#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gse/signal.hpp"

namespace gse {

enum class CorruptionKind { Denoise, Separate, Inpaint, Silence };

std::string to_string(CorruptionKind kind);
CorruptionKind corruption_kind_from_string(const std::string& name);

struct CorruptionSpec {
    CorruptionKind kind = CorruptionKind::Denoise;
    double snr_lo_db = -20.0;
    double snr_hi_db = 20.0;
    int span_frames = 20;
    double drop_prob = 0.5;
    int frame_ms = 20;
    std::uint64_t seed = 0;

    /// Throws ConfigError when lo > hi, drop_prob ∉ (0,1) or span_frames < 1.
    void validate() const;
};

struct CorruptionRecord {
    Waveform corrupted;
    std::vector<std::uint8_t> mask;  // per frame_ms frame: 1 kept, 0 dropped
    Waveform scaled_interferer;      // empty unless Denoise/Separate
    std::optional<double> realized_snr_db;
    CorruptionSpec spec;
};

/// Named evaluation bands for additive corruption.
struct SnrBand {
    std::string name;
    double lo_db;
    double hi_db;
};

/// lvl1..lvl4 = [10,20] / [0,10] / [-10,0] / [-20,-10] dB.
const std::vector<SnrBand>& snr_levels();
const SnrBand& snr_level(const std::string& name);

/// Number of frame_ms frames covering `num_samples` (last partial frame counts).
std::size_t mask_length(std::size_t num_samples, int sample_rate, int frame_ms);

/// Energy Σx².
double energy(const std::vector<double>& x);

/// Adds `interferer`, looped from a seeded circular offset or truncated to the
/// clean length, scaled so the clean-to-interferer energy ratio is snr_db.
CorruptionRecord mix_at_snr(const Waveform& clean, const Waveform& interferer, double snr_db,
                            std::uint64_t seed = 0);

/// Full linear convolution truncated to the clean length.
Waveform apply_rir(const Waveform& clean, const Waveform& impulse);

/// Span-start probability that makes the expected dropped fraction equal drop_prob.
double span_start_probability(double drop_prob, int span_frames);

/// Left-to-right span process over `frames` frames: at each frame outside an
/// active span, a span of exactly span_frames starts with the rate above when
/// it fits in the remaining frames. Returns 1 = kept, 0 = dropped.
std::vector<std::uint8_t> sample_span_mask(std::size_t frames, int span_frames, double drop_prob,
                                           std::uint64_t seed);

CorruptionRecord drop_spans(const Waveform& clean, const CorruptionSpec& spec);

CorruptionRecord silence(const Waveform& clean, int frame_ms = 20);

/// Sidecar: kind, seed, parameters, realized SNR and a run-length encoded mask
/// as [[value, run], ...].
nlohmann::json to_json(const CorruptionRecord& record);
std::vector<std::uint8_t> mask_from_rle(const nlohmann::json& rle);
nlohmann::json mask_to_rle(const std::vector<std::uint8_t>& mask);

}  // namespace gse
