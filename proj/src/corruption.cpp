#include "gse/corruption.hpp"

#include <cmath>

#include "gse/error.hpp"
#include "gse/rng.hpp"

namespace gse {

std::string to_string(CorruptionKind kind) {
    switch (kind) {
        case CorruptionKind::Denoise: return "denoise";
        case CorruptionKind::Separate: return "separate";
        case CorruptionKind::Inpaint: return "inpaint";
        case CorruptionKind::Silence: return "silence";
    }
    return "unknown";
}

CorruptionKind corruption_kind_from_string(const std::string& name) {
    if (name == "denoise") return CorruptionKind::Denoise;
    if (name == "separate") return CorruptionKind::Separate;
    if (name == "inpaint") return CorruptionKind::Inpaint;
    if (name == "silence") return CorruptionKind::Silence;
    throw ConfigError("unknown corruption kind '" + name + "'");
}

void CorruptionSpec::validate() const {
    if (snr_lo_db > snr_hi_db) throw ConfigError("corruption: snr range lo > hi");
    if (!(drop_prob > 0.0 && drop_prob < 1.0)) throw ConfigError("corruption: drop_prob must be in (0,1)");
    if (span_frames < 1) throw ConfigError("corruption: span_frames must be >= 1");
    if (frame_ms < 1) throw ConfigError("corruption: frame_ms must be >= 1");
}

const std::vector<SnrBand>& snr_levels() {
    static const std::vector<SnrBand> levels{
        {"lvl1", 10.0, 20.0}, {"lvl2", 0.0, 10.0}, {"lvl3", -10.0, 0.0}, {"lvl4", -20.0, -10.0}};
    return levels;
}

const SnrBand& snr_level(const std::string& name) {
    for (const auto& band : snr_levels())
        if (band.name == name) return band;
    throw ConfigError("unknown SNR level '" + name + "' (expected lvl1..lvl4)");
}

std::size_t mask_length(std::size_t num_samples, int sample_rate, int frame_ms) {
    const std::size_t frame = static_cast<std::size_t>(sample_rate) * frame_ms / 1000;
    return (num_samples + frame - 1) / frame;
}

double energy(const std::vector<double>& x) {
    double e = 0.0;
    for (double v : x) e += v * v;
    return e;
}

CorruptionRecord mix_at_snr(const Waveform& clean, const Waveform& interferer, double snr_db, std::uint64_t seed) {
    const auto& x = clean.samples();
    const auto& n = interferer.samples();
    if (clean.sample_rate != interferer.sample_rate) throw ConfigError("mix_at_snr: sample rates differ");
    if (n.empty()) throw DegenerateInputError("mix_at_snr: empty interferer");

    std::vector<double> fitted(x.size());
    if (n.size() >= x.size()) {
        std::copy(n.begin(), n.begin() + static_cast<std::ptrdiff_t>(x.size()), fitted.begin());
    } else {
        Rng rng(seed);
        const std::size_t offset = rng.index(n.size());
        for (std::size_t i = 0; i < x.size(); ++i) fitted[i] = n[(offset + i) % n.size()];
    }

    const double e_clean = energy(x);
    const double e_noise = energy(fitted);
    if (e_clean <= 0.0) throw DegenerateInputError("mix_at_snr: clean signal has zero energy");
    if (e_noise <= 0.0) throw DegenerateInputError("mix_at_snr: interferer has zero energy");

    const double gain = std::sqrt(e_clean / (e_noise * std::pow(10.0, snr_db / 10.0)));
    CorruptionRecord rec;
    rec.scaled_interferer = Waveform::mono(std::move(fitted), clean.sample_rate);
    auto& scaled = rec.scaled_interferer.samples();
    std::vector<double> mixed(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        scaled[i] *= gain;
        mixed[i] = x[i] + scaled[i];
    }
    rec.corrupted = Waveform::mono(std::move(mixed), clean.sample_rate);
    rec.realized_snr_db = 10.0 * std::log10(e_clean / energy(scaled));
    rec.mask.assign(mask_length(x.size(), clean.sample_rate, rec.spec.frame_ms), 1);
    rec.spec.kind = CorruptionKind::Denoise;
    rec.spec.snr_lo_db = rec.spec.snr_hi_db = snr_db;
    rec.spec.seed = seed;
    return rec;
}

Waveform apply_rir(const Waveform& clean, const Waveform& impulse) {
    const auto& x = clean.samples();
    const auto& h = impulse.samples();
    if (h.empty()) throw ConfigError("apply_rir: empty impulse response");
    if (clean.sample_rate != impulse.sample_rate) throw ConfigError("apply_rir: sample rates differ");
    std::vector<double> y(x.size(), 0.0);
    for (std::size_t n = 0; n < x.size(); ++n) {
        const std::size_t taps = std::min(h.size(), n + 1);
        double acc = 0.0;
        for (std::size_t k = 0; k < taps; ++k) acc += h[k] * x[n - k];
        y[n] = acc;
    }
    return Waveform::mono(std::move(y), clean.sample_rate);
}

double span_start_probability(double drop_prob, int span_frames) {
    return drop_prob / (span_frames * (1.0 - drop_prob) + drop_prob);
}

std::vector<std::uint8_t> sample_span_mask(std::size_t frames, int span_frames, double drop_prob, std::uint64_t seed) {
    std::vector<std::uint8_t> mask(frames, 1);
    if (drop_prob <= 0.0) return mask;
    const double q = span_start_probability(drop_prob, span_frames);
    const auto span = static_cast<std::size_t>(span_frames);
    Rng rng(seed);
    std::size_t t = 0;
    while (t < frames) {
        if (t + span <= frames && rng.uniform() < q) {
            std::fill(mask.begin() + static_cast<std::ptrdiff_t>(t),
                      mask.begin() + static_cast<std::ptrdiff_t>(t + span), 0);
            t += span;
        } else {
            ++t;
        }
    }
    return mask;
}

CorruptionRecord drop_spans(const Waveform& clean, const CorruptionSpec& spec) {
    spec.validate();
    if (spec.kind != CorruptionKind::Inpaint) throw ConfigError("drop_spans: spec kind must be inpaint");
    const auto& x = clean.samples();
    const std::size_t frame = static_cast<std::size_t>(clean.sample_rate) * spec.frame_ms / 1000;
    if (static_cast<std::size_t>(spec.span_frames) * frame > x.size())
        throw DegenerateInputError("drop_spans: a single span is longer than the signal");

    CorruptionRecord rec;
    rec.spec = spec;
    rec.mask = sample_span_mask(mask_length(x.size(), clean.sample_rate, spec.frame_ms), spec.span_frames,
                                spec.drop_prob, spec.seed);
    std::vector<double> y = x;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (rec.mask[i / frame] == 0) y[i] = 0.0;
    rec.corrupted = Waveform::mono(std::move(y), clean.sample_rate);
    return rec;
}

CorruptionRecord silence(const Waveform& clean, int frame_ms) {
    const auto& x = clean.samples();
    CorruptionRecord rec;
    rec.spec.kind = CorruptionKind::Silence;
    rec.spec.frame_ms = frame_ms;
    rec.corrupted = Waveform::zeros(x.size(), 1, clean.sample_rate);
    rec.mask.assign(mask_length(x.size(), clean.sample_rate, frame_ms), 0);
    return rec;
}

nlohmann::json mask_to_rle(const std::vector<std::uint8_t>& mask) {
    nlohmann::json runs = nlohmann::json::array();
    std::size_t i = 0;
    while (i < mask.size()) {
        std::size_t j = i;
        while (j < mask.size() && mask[j] == mask[i]) ++j;
        runs.push_back({static_cast<int>(mask[i]), j - i});
        i = j;
    }
    return runs;
}

std::vector<std::uint8_t> mask_from_rle(const nlohmann::json& rle) {
    std::vector<std::uint8_t> mask;
    for (const auto& run : rle) {
        const int value = run.at(0).get<int>();
        const auto length = run.at(1).get<std::size_t>();
        if (value != 0 && value != 1) throw IoError("mask run value must be 0 or 1");
        mask.insert(mask.end(), length, static_cast<std::uint8_t>(value));
    }
    return mask;
}

nlohmann::json to_json(const CorruptionRecord& record) {
    nlohmann::json j;
    j["kind"] = to_string(record.spec.kind);
    j["seed"] = record.spec.seed;
    j["frame_ms"] = record.spec.frame_ms;
    j["realized_snr_db"] = record.realized_snr_db ? nlohmann::json(*record.realized_snr_db) : nlohmann::json(nullptr);
    switch (record.spec.kind) {
        case CorruptionKind::Denoise:
        case CorruptionKind::Separate:
            j["snr_db_range"] = {record.spec.snr_lo_db, record.spec.snr_hi_db};
            break;
        case CorruptionKind::Inpaint:
            j["span_frames"] = record.spec.span_frames;
            j["drop_prob"] = record.spec.drop_prob;
            break;
        case CorruptionKind::Silence: break;
    }
    j["mask_rle"] = mask_to_rle(record.mask);
    return j;
}

}  // namespace gse
