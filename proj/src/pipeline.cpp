#include "gse/pipeline.hpp"

#include <cstdio>
#include <map>
#include <mutex>

#include "gse/corpus.hpp"
#include "gse/error.hpp"
#include "gse/rng.hpp"

namespace gse {

namespace {

constexpr std::uint64_t kVisualTableSeed = 0x11f5a11ULL;

std::string utterance_id(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "utt%05d", index);
    return buf;
}

}  // namespace

std::vector<CorpusItem> generate_corpus(const CorpusConfig& cfg) {
    std::vector<CorpusItem> out;
    const CorpusLengths lengths{cfg.min_seconds, cfg.max_seconds};
    const int total = cfg.num_train + cfg.num_valid + cfg.num_test;
    out.resize(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < total; ++i) {
        auto utt = generate_utterance(random_utterance_spec(mix_seed(cfg.seed, static_cast<std::uint64_t>(i)), lengths));
        auto& item = out[static_cast<std::size_t>(i)];
        item.id = utterance_id(i);
        item.split = i < cfg.num_train ? "train" : (i < cfg.num_train + cfg.num_valid ? "valid" : "test");
        item.wave = std::move(utt.wave);
        item.symbols = std::move(utt.frame_symbols);
    }
    return out;
}

std::vector<const CorpusItem*> select_split(const std::vector<CorpusItem>& corpus, const std::string& split) {
    std::vector<const CorpusItem*> out;
    for (const auto& item : corpus)
        if (item.split == split) out.push_back(&item);
    return out;
}

CorruptionRecord corrupt_item(const CorpusItem& item, const CorruptionParams& params,
                              const std::vector<const CorpusItem*>& pool, std::uint64_t seed) {
    Rng rng(seed);
    CorruptionSpec spec;
    spec.kind = params.kind;
    spec.snr_lo_db = params.snr_lo_db;
    spec.snr_hi_db = params.snr_hi_db;
    spec.drop_prob = params.drop_prob;
    spec.span_frames = params.span_frames;
    spec.seed = seed;
    const std::size_t n = item.wave.num_samples();
    switch (params.kind) {
        case CorruptionKind::Inpaint:
            spec.seed = mix_seed(seed, 1);
            return drop_spans(item.wave, spec);
        case CorruptionKind::Silence:
            return silence(item.wave);
        case CorruptionKind::Denoise: {
            const double snr = rng.uniform(params.snr_lo_db, params.snr_hi_db);
            static const char* kinds[] = {"white", "pink", "babble"};
            const std::string kind = params.noise == "mixed" ? kinds[rng.index(3)] : params.noise;
            const auto noise = generate_noise(noise_kind_from_string(kind), n, mix_seed(seed, 2), item.wave.sample_rate);
            auto rec = mix_at_snr(item.wave, noise, snr, mix_seed(seed, 3));
            rec.spec = spec;
            return rec;
        }
        case CorruptionKind::Separate: {
            const double snr = rng.uniform(params.snr_lo_db, params.snr_hi_db);
            std::vector<const CorpusItem*> others;
            for (const auto* p : pool)
                if (p->id != item.id) others.push_back(p);
            if (others.empty()) throw ConfigError("separation needs at least two utterances in the pool");
            const CorpusItem* other = others[rng.index(others.size())];
            auto rec = mix_at_snr(item.wave, other->wave, snr, mix_seed(seed, 3));
            rec.spec = spec;
            return rec;
        }
    }
    throw ConfigError("unsupported corruption kind");
}

TokenizerArtifacts fit_tokenizer(const std::vector<const Waveform*>& waves, const TokenizerConfig& cfg,
                                 const VocoderConfig& vocoder) {
    if (waves.empty()) throw ConfigError("fit_tokenizer: no training audio");
    std::vector<FeatureMatrix> feats(waves.size());
    std::vector<FeatureMatrix> mels(waves.size());
    const auto count = static_cast<std::ptrdiff_t>(waves.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        feats[i] = unit_features(*waves[i]);
        mels[i] = vocoder_mel(*waves[i], vocoder);
    }
    TokenizerArtifacts art;
    art.codebook = kmeans_fit(concat_features(feats), cfg.codebook_size, cfg.max_iters, cfg.seed);
    std::vector<std::pair<UnitSequence, FeatureMatrix>> pairs;
    pairs.reserve(waves.size());
    for (std::size_t i = 0; i < waves.size(); ++i) pairs.emplace_back(quantize(feats[i], art.codebook), std::move(mels[i]));
    art.prototypes = build_prototypes(art.codebook, pairs, vocoder);
    return art;
}

UnitSequence tokenize(const Waveform& wave, const Codebook& codebook) {
    return quantize(unit_features(wave), codebook);
}

int model_frames(const Waveform& wave) { return static_cast<int>(wave.num_samples() / kSamplesPer25HzFrame); }

RowMatrix audio_features(const Waveform& wave) {
    const int T = model_frames(wave);
    if (T < 1) throw DegenerateInputError("audio shorter than one 40 ms model frame");
    const auto stacked = stack_frames(fbank(wave, MfccConfig{}), kFbankStack);
    if (stacked.frames() < T) throw NumericError("audio_features: stacked FBank shorter than expected");
    return stacked.values.topRows(T);
}

RowMatrix visual_surrogate(const std::vector<int>& symbols50, int frames25, int dim, double informativeness,
                           std::uint64_t seed) {
    if (dim < 2 || dim % 2 != 0) throw ConfigError("visual_surrogate: dim must be even and >= 2");
    if (static_cast<int>(symbols50.size()) < 2 * frames25)
        throw InputError("visual_surrogate: fewer symbol frames than 2 x model frames");
    const int half = dim / 2;
    static std::mutex table_mutex;
    static std::map<int, RowMatrix> tables;
    RowMatrix table;
    {
        std::lock_guard lock(table_mutex);
        auto it = tables.find(half);
        if (it == tables.end()) {
            Rng rng(kVisualTableSeed);
            RowMatrix t(alphabet_size(), half);
            for (Eigen::Index r = 0; r < t.rows(); ++r)
                for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = rng.gaussian();
            it = tables.emplace(half, std::move(t)).first;
        }
        table = it->second;
    }
    RowMatrix out = RowMatrix::Zero(frames25, dim);
    Rng rng(seed);
    for (int j = 0; j < frames25; ++j) {
        const bool keep = rng.bernoulli(informativeness);
        if (!keep) continue;
        const int a = symbols50[2 * static_cast<std::size_t>(j)];
        const int b = symbols50[2 * static_cast<std::size_t>(j) + 1];
        if (a < 0 || a >= table.rows() || b < 0 || b >= table.rows())
            throw InputError("visual_surrogate: symbol outside the alphabet");
        out.row(j).head(half) = table.row(a);
        out.row(j).tail(half) = table.row(b);
    }
    return out;
}

Example make_example(const Waveform& corrupted, const std::vector<int>& symbols, const UnitSequence& clean_units,
                     const ModelConfig& model, std::uint64_t seed) {
    Example ex;
    ex.audio = audio_features(corrupted);
    const int T = static_cast<int>(ex.audio.rows());
    ex.visual = visual_surrogate(symbols, T, model.visual_dim, model.informativeness, seed);
    if (static_cast<int>(clean_units.units.size()) < 2 * T)
        throw InputError("make_example: fewer clean units than 2 x model frames");
    ex.target.assign(clean_units.units.begin(), clean_units.units.begin() + 2 * T);
    return ex;
}

ModelShape model_shape(const ModelConfig& model, int vocab) {
    ModelShape s;
    s.audio_dim = 23 * kFbankStack;
    s.visual_dim = model.visual_dim;
    s.hidden = model.hidden;
    s.depth = model.depth;
    s.vocab = vocab;
    s.conv_kernel = model.conv_kernel;
    s.validate();
    return s;
}

UnitSequence enhance_units(const ModelParams& params, const Example& example) {
    UnitSequence u;
    u.units = predict_units(params, example.audio, example.visual);
    if (!u.units.empty()) u.units.push_back(u.units.back());
    return u;
}

Waveform resynthesize(const UnitSequence& units, const PrototypeTable& prototypes, const VocoderConfig& cfg,
                      std::size_t num_samples) {
    Waveform w = vocode(units, prototypes, cfg);
    w.samples().resize(num_samples, 0.0);
    return w;
}

UtteranceScores score_output(const std::string& id, const std::string& split, const Waveform& clean,
                             const Waveform& output, const Codebook& codebook, double max_lag_ms) {
    UtteranceScores s;
    s.id = id;
    s.split = split;
    s.estoi = estoi(clean, output);
    s.mcd_db = mcd(clean, output);
    s.si_snr_db = si_snr(clean, output);
    s.uer = unit_error_rate(tokenize(clean, codebook), tokenize(output, codebook));
    try {
        const auto sync = sync_offset(clean, output, max_lag_ms);
        s.sync_offset_ms = sync.offset_ms;
        s.sync_confidence = sync.confidence;
    } catch (const DegenerateInputError&) {
        // Silent output carries no timing evidence.
        s.sync_offset_ms = 0.0;
        s.sync_confidence = 0.0;
    }
    return s;
}

double heldout_uer(const ModelParams& params, const std::vector<Example>& set) {
    if (set.empty()) throw ConfigError("heldout_uer: empty set");
    std::vector<double> uer(set.size());
    const auto count = static_cast<std::ptrdiff_t>(set.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        UnitSequence ref{set[i].target, 50.0};
        UnitSequence hyp{predict_units(params, set[i].audio, set[i].visual), 50.0};
        uer[i] = unit_error_rate(ref, hyp);
    }
    double sum = 0.0;
    for (double v : uer) sum += v;
    return sum / static_cast<double>(set.size());
}

}  // namespace gse
