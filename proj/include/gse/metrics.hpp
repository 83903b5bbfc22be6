#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "gse/signal.hpp"
#include "gse/tokenizer.hpp"

namespace gse {

/// Band-limited rational resampling with a Kaiser-windowed sinc kernel.
std::vector<double> resample(const std::vector<double>& x, int from_rate, int to_rate);

/// Extended STOI. The degraded signal is trimmed or zero-padded to the
/// reference length. Throws DegenerateInputError when fewer than 30 speech
/// frames remain after silence removal.
double estoi(const Waveform& reference, const Waveform& degraded);

/// Mel-cepstral distortion in dB over c1..c12, frame-aligned, no time warping.
double mcd(const Waveform& reference, const Waveform& degraded);

/// Same as mcd() on precomputed cepstra [frames × coeffs]; column 0 is skipped.
double mcd_from_cepstra(const RowMatrix& reference, const RowMatrix& degraded);

/// Scale-invariant SNR in dB, clamped to [-100, 100].
double si_snr(const Waveform& reference, const Waveform& degraded);
double si_snr(const std::vector<double>& reference, const std::vector<double>& degraded);

/// Collapses runs of repeated units.
std::vector<int> dedup_runs(const std::vector<int>& units);

/// Levenshtein distance with unit costs.
std::size_t edit_distance(const std::vector<int>& a, const std::vector<int>& b);

/// edit_distance on run-deduplicated sequences divided by the deduplicated reference length.
double unit_error_rate(const UnitSequence& reference, const UnitSequence& hypothesis);

struct SyncResult {
    double offset_ms = 0.0;   // positive: degraded lags the reference
    double confidence = 0.0;  // peak minus mean correlation over the lag window
};

/// Normalised cross-correlation of 50 Hz log-energy envelopes.
SyncResult sync_offset(const Waveform& reference, const Waveform& degraded, double max_lag_ms = 500.0);

struct UtteranceScores {
    std::string id;
    std::string split;
    double estoi = 0.0;
    double mcd_db = 0.0;
    double si_snr_db = 0.0;
    double uer = 0.0;
    double sync_offset_ms = 0.0;
    double sync_confidence = 0.0;
};

struct EvalReport {
    std::vector<UtteranceScores> rows;
    UtteranceScores aggregate;  // means over rows, id "mean"
    std::size_t count = 0;
};

EvalReport make_report(std::vector<UtteranceScores> rows);

/// Header, one row per utterance, then the aggregate row. Fixed 6-decimal formatting.
std::string to_csv(const EvalReport& report);
nlohmann::json summary_json(const EvalReport& report);

}  // namespace gse
