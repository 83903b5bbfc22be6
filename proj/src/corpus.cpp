#include "gse/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gse/error.hpp"
#include "gse/fft.hpp"
#include "gse/rng.hpp"

namespace gse {

namespace {

constexpr double kMinPitch = 80.0;
constexpr double kMaxPitch = 300.0;
constexpr std::uint64_t kAlphabetSeed = 0x5eed0a1fULL;

std::vector<SymbolDef> build_alphabet() {
    // Vowel-like symbols spread over an F1/F2 grid, plus a few noise-excited ones.
    std::vector<SymbolDef> a;
    a.push_back({{}, false});  // silence
    const double f1[] = {300, 450, 650, 800};
    const double f2[] = {900, 1300, 1800, 2300};
    Rng rng(kAlphabetSeed);
    for (double x : f1)
        for (double y : f2) {
            if (y < x + 400) continue;
            const double f3 = 2500.0 + 600.0 * rng.uniform();
            a.push_back({{{x, 60.0}, {y, 90.0}, {f3, 150.0}}, true});
        }
    a.push_back({{{2500.0, 300.0}, {4500.0, 500.0}}, false});
    a.push_back({{{3500.0, 400.0}, {6000.0, 600.0}}, false});
    a.push_back({{{1500.0, 250.0}, {3000.0, 400.0}}, false});
    return a;
}

struct Biquad {
    double a1 = 0.0, a2 = 0.0, g = 0.0;
    double y1 = 0.0, y2 = 0.0;

    void set(const Formant& f, int sample_rate) {
        const double r = std::exp(-std::numbers::pi * f.bandwidth_hz / sample_rate);
        const double theta = 2.0 * std::numbers::pi * f.freq_hz / sample_rate;
        a1 = -2.0 * r * std::cos(theta);
        a2 = r * r;
        g = (1.0 - r) * std::sqrt(1.0 - 2.0 * r * std::cos(2.0 * theta) + r * r);  // unit gain at the peak
    }
    double step(double x) {
        const double y = g * x - a1 * y1 - a2 * y2;
        y2 = y1;
        y1 = y;
        return y;
    }
};

double kaiser(double r, double beta) {
    auto i0 = [](double x) {
        double sum = 1.0, term = 1.0;
        for (int k = 1; k < 64; ++k) {
            term *= (x / (2.0 * k)) * (x / (2.0 * k));
            sum += term;
            if (term < 1e-17 * sum) break;
        }
        return sum;
    };
    return i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0(beta);
}

}  // namespace

const std::vector<SymbolDef>& symbol_alphabet() {
    static const std::vector<SymbolDef> alphabet = build_alphabet();
    return alphabet;
}

int alphabet_size() { return static_cast<int>(symbol_alphabet().size()); }

int UtteranceSpec::total_frames() const {
    int n = 0;
    for (int d : durations) n += d;
    return n;
}

void UtteranceSpec::validate() const {
    if (symbols.empty()) throw ConfigError("utterance spec: no symbols");
    if (durations.size() != symbols.size() || formants.size() != symbols.size())
        throw ConfigError("utterance spec: symbols, durations and formant sets differ in length");
    for (int d : durations)
        if (d < 1) throw ConfigError("utterance spec: durations must be at least one frame");
    const auto frames = static_cast<std::size_t>(total_frames());
    if (pitch_hz.size() != frames || amplitude.size() != frames)
        throw ConfigError("utterance spec: pitch and amplitude need one value per frame");
    for (double p : pitch_hz)
        if (p < kMinPitch || p > kMaxPitch) throw ConfigError("utterance spec: pitch outside [80, 300] Hz");
    for (int s : symbols)
        if (s < 0 || s >= alphabet_size()) throw ConfigError("utterance spec: unknown symbol");
    for (const auto& set : formants)
        for (const auto& f : set)
            if (f.freq_hz <= 0.0 || f.freq_hz >= sample_rate / 2.0 || f.bandwidth_hz <= 0.0)
                throw ConfigError("utterance spec: formant " + std::to_string(f.freq_hz) +
                                  " Hz is not below Nyquist");
    if (!(speed > 0.0)) throw ConfigError("utterance spec: speed must be positive");
}

UtteranceSpec random_utterance_spec(std::uint64_t seed, const CorpusLengths& lengths) {
    if (lengths.min_seconds <= 0.0 || lengths.max_seconds < lengths.min_seconds)
        throw ConfigError("corpus lengths must satisfy 0 < min <= max");
    Rng rng(seed);
    UtteranceSpec spec;
    spec.seed = seed;
    spec.speed = rng.uniform(0.85, 1.15);
    const double base_pitch = rng.uniform(90.0, 240.0);
    const double formant_scale = rng.uniform(0.92, 1.08);
    const double seconds = rng.uniform(lengths.min_seconds, lengths.max_seconds);
    int total = 2 * static_cast<int>(std::lround(seconds * 25.0));  // multiple of 40 ms
    total = std::max(total, 16);

    const auto& alphabet = symbol_alphabet();
    auto push = [&](int symbol, int frames) {
        spec.symbols.push_back(symbol);
        spec.durations.push_back(frames);
        std::vector<Formant> set = alphabet[symbol].formants;
        for (auto& f : set) f.freq_hz = std::min(f.freq_hz * formant_scale, spec.sample_rate / 2.0 - 200.0);
        spec.formants.push_back(std::move(set));
    };
    const int lead = 3 + static_cast<int>(rng.index(4));
    const int tail = 3 + static_cast<int>(rng.index(4));
    push(0, lead);
    int used = lead;
    int previous = 0;
    while (used < total - tail) {
        int symbol;
        do {
            symbol = 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(alphabet_size() - 1)));
        } while (symbol == previous);
        int frames = static_cast<int>(std::lround((4 + static_cast<int>(rng.index(9))) * spec.speed));
        frames = std::clamp(frames, 3, total - tail - used);
        push(symbol, frames);
        used += frames;
        previous = symbol;
    }
    push(0, total - used);

    const double rate = rng.uniform(0.5, 1.5);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double slope = rng.uniform(-0.15, 0.05);
    for (int t = 0; t < total; ++t) {
        const double x = static_cast<double>(t) / total;
        const double p = base_pitch * (1.0 + slope * x + 0.08 * std::sin(2.0 * std::numbers::pi * rate * x + phase));
        spec.pitch_hz.push_back(std::clamp(p, kMinPitch, kMaxPitch));
    }
    for (std::size_t i = 0; i < spec.symbols.size(); ++i) {
        const double gain = spec.symbols[i] == 0 ? 0.0 : (alphabet[spec.symbols[i]].voiced ? 1.0 : 0.35);
        const double level = gain * rng.uniform(0.7, 1.0);
        for (int f = 0; f < spec.durations[i]; ++f) spec.amplitude.push_back(level);
    }
    return spec;
}

Utterance generate_utterance(const UtteranceSpec& spec) {
    spec.validate();
    const auto& alphabet = symbol_alphabet();
    const int frames = spec.total_frames();
    const std::size_t n = static_cast<std::size_t>(frames) * kFrameSamples;

    Utterance out;
    out.frame_symbols.reserve(static_cast<std::size_t>(frames));
    std::vector<std::size_t> symbol_of_frame;
    for (std::size_t i = 0; i < spec.symbols.size(); ++i)
        for (int f = 0; f < spec.durations[i]; ++f) {
            out.frame_symbols.push_back(spec.symbols[i]);
            symbol_of_frame.push_back(i);
        }

    auto frame_interp = [&](std::size_t i, const std::vector<double>& per_frame) {
        const double pos = (static_cast<double>(i) + 0.5) / kFrameSamples - 0.5;
        const auto f0 = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, frames - 1.0));
        const std::size_t f1 = std::min<std::size_t>(f0 + 1, static_cast<std::size_t>(frames) - 1);
        const double w = std::clamp(pos - static_cast<double>(f0), 0.0, 1.0);
        return (1.0 - w) * per_frame[f0] + w * per_frame[f1];
    };

    // Continuous excitation: pulse train following the pitch contour, plus noise.
    Rng rng(mix_seed(spec.seed, 17));
    std::vector<double> pulses(n, 0.0), noise(n);
    double phase = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        phase += frame_interp(i, spec.pitch_hz) / spec.sample_rate;
        if (phase >= 1.0) {
            phase -= 1.0;
            pulses[i] = 1.0;
        }
        noise[i] = rng.gaussian();
    }

    // Each symbol occurrence is filtered from rest over its span widened by a
    // crossfade region, normalised to unit RMS and blended with linear ramps.
    constexpr long kFade = kFrameSamples / 2;
    std::vector<double> y(n, 0.0);
    long begin = 0;
    for (std::size_t k = 0; k < spec.symbols.size(); ++k) {
        const long end = begin + static_cast<long>(spec.durations[k]) * kFrameSamples;
        const int symbol = spec.symbols[k];
        if (symbol != 0) {
            const long lo = std::max(0L, begin - kFade);
            const long hi = std::min(static_cast<long>(n), end + kFade);
            const auto& src = alphabet[symbol].voiced ? pulses : noise;
            std::array<Biquad, 3> filters{};
            for (std::size_t f = 0; f < filters.size(); ++f) {
                if (f < spec.formants[k].size()) {
                    filters[f].set(spec.formants[k][f], spec.sample_rate);
                } else {
                    filters[f].g = 1.0;
                }
            }
            std::vector<double> seg(static_cast<std::size_t>(hi - lo));
            double core = 0.0;
            for (long i = lo; i < hi; ++i) {
                double v = src[static_cast<std::size_t>(i)];
                for (auto& f : filters) v = f.step(v);
                seg[static_cast<std::size_t>(i - lo)] = v;
                if (i >= begin && i < end) core += v * v;
            }
            const double rms = std::sqrt(core / static_cast<double>(end - begin));
            if (rms > 0.0) {
                for (long i = lo; i < hi; ++i) {
                    double w = 1.0;
                    if (begin > 0) w = std::min(w, static_cast<double>(i - (begin - kFade)) / (2.0 * kFade));
                    if (end < static_cast<long>(n)) w = std::min(w, static_cast<double>((end + kFade) - i) / (2.0 * kFade));
                    y[static_cast<std::size_t>(i)] += std::clamp(w, 0.0, 1.0) * seg[static_cast<std::size_t>(i - lo)] / rms;
                }
            }
        }
        begin = end;
    }
    for (std::size_t i = 0; i < n; ++i) y[i] *= frame_interp(i, spec.amplitude);
    double peak = 0.0;
    for (double v : y) peak = std::max(peak, std::abs(v));
    if (peak > 0.0)
        for (double& v : y) v *= 0.5 / peak;
    out.wave = Waveform::mono(std::move(y), spec.sample_rate);
    return out;
}

std::string to_string(NoiseKind kind) {
    switch (kind) {
        case NoiseKind::White: return "white";
        case NoiseKind::Pink: return "pink";
        case NoiseKind::Babble: return "babble";
    }
    return "white";
}

NoiseKind noise_kind_from_string(const std::string& name) {
    if (name == "white") return NoiseKind::White;
    if (name == "pink") return NoiseKind::Pink;
    if (name == "babble") return NoiseKind::Babble;
    throw ConfigError("unknown noise kind '" + name + "' (expected white, pink or babble)");
}

namespace {

void normalise_rms(std::vector<double>& x) {
    double e = 0.0;
    for (double v : x) e += v * v;
    if (e <= 0.0) return;
    const double g = 1.0 / std::sqrt(e / static_cast<double>(x.size()));
    for (double& v : x) v *= g;
}

}  // namespace

Waveform generate_noise(NoiseKind kind, std::size_t num_samples, std::uint64_t seed, int sample_rate) {
    if (num_samples == 0) throw ConfigError("generate_noise: duration must be positive");
    std::vector<double> x(num_samples, 0.0);
    Rng rng(seed);
    switch (kind) {
        case NoiseKind::White:
            for (double& v : x) v = rng.gaussian();
            break;
        case NoiseKind::Pink: {
            for (double& v : x) v = rng.gaussian();
            std::vector<cdouble> spec(num_samples / 2 + 1);
            fft::rfft(x, spec);
            spec[0] = 0.0;
            for (std::size_t k = 1; k < spec.size(); ++k) spec[k] /= std::sqrt(static_cast<double>(k));
            fft::irfft(spec, x);
            break;
        }
        case NoiseKind::Babble: {
            for (int talker = 0; talker < 6; ++talker) {
                std::size_t filled = 0;
                std::uint64_t salt = 0;
                while (filled < num_samples) {
                    const auto utt = generate_utterance(random_utterance_spec(mix_seed(seed, 100 * talker + salt++)));
                    const auto& s = utt.wave.samples();
                    const std::size_t take = std::min(s.size(), num_samples - filled);
                    for (std::size_t i = 0; i < take; ++i) x[filled + i] += s[i];
                    filled += take;
                }
            }
            break;
        }
    }
    normalise_rms(x);
    return Waveform::mono(std::move(x), sample_rate);
}

std::vector<double> fractional_delay(const std::vector<double>& x, double delay, int half_taps) {
    const long n = static_cast<long>(x.size());
    std::vector<double> y(x.size(), 0.0);
    const double frac = delay - std::round(delay);
    const long shift = static_cast<long>(std::round(delay));
    if (std::abs(frac) < 1e-12) {
        for (long i = 0; i < n; ++i) {
            const long src = i - shift;
            if (src >= 0 && src < n) y[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(src)];
        }
        return y;
    }
    std::vector<double> h(static_cast<std::size_t>(2 * half_taps + 1));
    for (int k = -half_taps; k <= half_taps; ++k) {
        const double t = k - frac;
        const double sinc = std::sin(std::numbers::pi * t) / (std::numbers::pi * t);
        h[static_cast<std::size_t>(k + half_taps)] = sinc * kaiser(t / (half_taps + 1.0), 8.0);
    }
    // y[i] = Σ_k h[k]·x[i - shift - k]
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int k = -half_taps; k <= half_taps; ++k) {
            const long src = i - shift - k;
            if (src >= 0 && src < n) acc += h[static_cast<std::size_t>(k + half_taps)] * x[static_cast<std::size_t>(src)];
        }
        y[static_cast<std::size_t>(i)] = acc;
    }
    return y;
}

Capture simulate_capture(const Waveform& source, const ArrayGeometry& geometry, const Eigen::Vector3d& direction,
                         double diffuse_snr_db, std::uint64_t seed) {
    const auto& s = source.samples();
    if (s.empty()) throw InputError("simulate_capture: empty source");
    const auto tau = geometry.relative_delays(direction);
    const std::size_t mics = geometry.num_mics();
    const std::size_t n = s.size();
    const int sr = source.sample_rate;

    Capture cap;
    cap.target.sample_rate = cap.noise.sample_rate = cap.mix.sample_rate = sr;
    for (std::size_t m = 0; m < mics; ++m) cap.target.channels.push_back(fractional_delay(s, tau[m] * sr));

    // Independent white channels mixed per bin by the square root of the diffuse coherence.
    const StftConfig cfg{kBeamformerFftLength, 0, kBeamformerFftLength / 2};
    std::vector<ComplexSpectrogram> white;
    for (std::size_t m = 0; m < mics; ++m)
        white.push_back(stft(generate_noise(NoiseKind::White, n, mix_seed(seed, m), sr).samples(), sr, cfg));
    const auto coherence = diffuse_covariance(geometry, cfg.fft_len, sr, 1e-9);
    std::vector<ComplexSpectrogram> shaped = white;
    const auto M = static_cast<Eigen::Index>(mics);
    for (std::size_t k = 0; k < white.front().num_bins(); ++k) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(coherence.matrices[k]);
        const Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        const Eigen::MatrixXcd root = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().adjoint();
        Eigen::VectorXcd in(M);
        for (std::size_t t = 0; t < white.front().frames; ++t) {
            for (Eigen::Index m = 0; m < M; ++m) in(m) = white[m].at(t, k);
            const Eigen::VectorXcd out = root * in;
            for (Eigen::Index m = 0; m < M; ++m) shaped[m].at(t, k) = out(m);
        }
    }
    for (std::size_t m = 0; m < mics; ++m) cap.noise.channels.push_back(istft(shaped[m]).samples());

    const auto ref = static_cast<std::size_t>(geometry.reference_mic);
    double es = 0.0, en = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        es += cap.target.channels[ref][i] * cap.target.channels[ref][i];
        en += cap.noise.channels[ref][i] * cap.noise.channels[ref][i];
    }
    if (en <= 0.0 || es <= 0.0) throw DegenerateInputError("simulate_capture: zero-energy source or noise");
    const double gain = std::sqrt(es / (en * std::pow(10.0, diffuse_snr_db / 10.0)));
    cap.mix.channels.resize(mics);
    for (std::size_t m = 0; m < mics; ++m) {
        for (double& v : cap.noise.channels[m]) v *= gain;
        cap.mix.channels[m].resize(n);
        for (std::size_t i = 0; i < n; ++i) cap.mix.channels[m][i] = cap.target.channels[m][i] + cap.noise.channels[m][i];
    }
    return cap;
}

}  // namespace gse
