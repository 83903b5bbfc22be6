#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gse/config.hpp"
#include "gse/corruption.hpp"
#include "gse/metrics.hpp"
#include "gse/model.hpp"
#include "gse/tokenizer.hpp"
#include "gse/train.hpp"
#include "gse/vocoder.hpp"

namespace gse {

// In-memory building blocks shared by the CLI stages and the experiment harness.

inline constexpr int kSamplesPer25HzFrame = 640;
inline constexpr int kFbankStack = 4;

struct CorpusItem {
    std::string id;
    std::string split;
    Waveform wave;
    std::vector<int> symbols;  // 50 Hz labels
};

/// Train, valid and test utterances in that order with ids utt00000, utt00001, ...
std::vector<CorpusItem> generate_corpus(const CorpusConfig& cfg);

std::vector<const CorpusItem*> select_split(const std::vector<CorpusItem>& corpus, const std::string& split);

/// Corrupts one utterance. For separation the interferer is drawn from `pool`
/// (excluding the utterance itself); denoising draws noise from `params.noise`.
/// The SNR is drawn uniformly from [snr_lo_db, snr_hi_db].
CorruptionRecord corrupt_item(const CorpusItem& item, const CorruptionParams& params,
                              const std::vector<const CorpusItem*>& pool, std::uint64_t seed);

struct TokenizerArtifacts {
    Codebook codebook;
    PrototypeTable prototypes;
};

TokenizerArtifacts fit_tokenizer(const std::vector<const Waveform*>& waves, const TokenizerConfig& cfg,
                                 const VocoderConfig& vocoder);

/// quantize(unit_features(wave)): one unit per 20 ms hop, N/320 + 1 units.
UnitSequence tokenize(const Waveform& wave, const Codebook& codebook);

/// Number of 40 ms model frames covered by the waveform.
int model_frames(const Waveform& wave);

/// 23-band FBank at 10 ms stacked ×4 (92 dims, 25 Hz), truncated to model_frames().
RowMatrix audio_features(const Waveform& wave);

/// Noise-immune content side-channel at 25 Hz: frame j holds fixed embeddings of
/// the symbols at 50 Hz frames 2j and 2j+1; each frame is zeroed with probability
/// 1 - informativeness.
RowMatrix visual_surrogate(const std::vector<int>& symbols50, int frames25, int dim, double informativeness,
                           std::uint64_t seed);

/// Model input from the corrupted audio and the clean utterance's symbols;
/// targets are the clean units truncated to 2T.
Example make_example(const Waveform& corrupted, const std::vector<int>& symbols, const UnitSequence& clean_units,
                     const ModelConfig& model, std::uint64_t seed);

ModelShape model_shape(const ModelConfig& model, int vocab);

/// Predicted 50 Hz units with the last unit repeated so vocoding restores the input length.
UnitSequence enhance_units(const ModelParams& params, const Example& example);

/// Vocoded waveform for a unit sequence of N/320 + 1 units, trimmed or padded to `num_samples`.
Waveform resynthesize(const UnitSequence& units, const PrototypeTable& prototypes, const VocoderConfig& cfg,
                      std::size_t num_samples);

/// All metrics of one output against its clean reference. UER compares the units of
/// the clean signal with the units recovered from the output waveform.
UtteranceScores score_output(const std::string& id, const std::string& split, const Waveform& clean,
                             const Waveform& output, const Codebook& codebook, double max_lag_ms);

/// Deduplicated unit error rate between model predictions and targets, averaged over a set.
double heldout_uer(const ModelParams& params, const std::vector<Example>& set);

}  // namespace gse
