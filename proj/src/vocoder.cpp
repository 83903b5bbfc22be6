#include "gse/vocoder.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "gse/error.hpp"
#include "gse/rng.hpp"

namespace gse {

FeatureMatrix vocoder_mel(const Waveform& wave, const VocoderConfig& cfg) {
    return log_mel(stft(wave.samples(), wave.sample_rate, cfg.stft()), cfg.mel());
}

PrototypeTable build_prototypes(const Codebook& codebook,
                                const std::vector<std::pair<UnitSequence, FeatureMatrix>>& corpus,
                                const VocoderConfig& cfg) {
    if (corpus.empty()) throw ConfigError("build_prototypes: empty corpus");
    const int K = codebook.size();
    const int dim = static_cast<int>(corpus.front().second.dim());
    RowMatrix sums = RowMatrix::Zero(K, dim);
    std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
    Eigen::RowVectorXd global = Eigen::RowVectorXd::Zero(dim);
    std::size_t total = 0;
    for (const auto& [units, mel] : corpus) {
        if (static_cast<Eigen::Index>(units.units.size()) != mel.frames())
            throw InputError("build_prototypes: unit and mel frame counts differ (" +
                             std::to_string(units.units.size()) + " vs " + std::to_string(mel.frames()) + ")");
        if (mel.dim() != dim) throw InputError("build_prototypes: mel width differs across utterances");
        for (std::size_t t = 0; t < units.units.size(); ++t) {
            const int u = units.units[t];
            if (u < 0 || u >= K) throw InputError("build_prototypes: unit outside codebook");
            sums.row(u) += mel.values.row(static_cast<Eigen::Index>(t));
            ++counts[u];
            global += mel.values.row(static_cast<Eigen::Index>(t));
            ++total;
        }
    }
    if (total == 0) throw ConfigError("build_prototypes: corpus has no frames");
    global /= static_cast<double>(total);

    PrototypeTable table;
    table.n_mels = dim;
    table.hop = cfg.hop;
    table.mel_prototypes.resize(K, dim);
    table.observed.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        table.observed[k] = counts[k] > 0;
        table.mel_prototypes.row(k) = counts[k] > 0 ? Eigen::RowVectorXd(sums.row(k) / static_cast<double>(counts[k]))
                                                    : global;
    }
    return table;
}

FeatureMatrix units_to_mel(const UnitSequence& units, const PrototypeTable& table, int smooth) {
    if (smooth < 1 || smooth % 2 == 0) throw ConfigError("units_to_mel: smooth must be odd and >= 1");
    const auto T = static_cast<Eigen::Index>(units.units.size());
    RowMatrix lookup(T, table.n_mels);
    for (Eigen::Index t = 0; t < T; ++t) {
        const int u = units.units[t];
        if (u < 0 || u >= table.size()) throw InputError("units_to_mel: unit " + std::to_string(u) + " outside table");
        lookup.row(t) = table.mel_prototypes.row(u);
    }
    FeatureMatrix out;
    out.kind = FeatureKind::LogMel;
    out.frame_rate = units.frame_rate;
    out.values = RowMatrix::Zero(T, table.n_mels);
    const int half = smooth / 2;
    for (Eigen::Index t = 0; t < T; ++t) {
        for (int j = -half; j <= half; ++j) {
            const Eigen::Index src = std::clamp<Eigen::Index>(t + j, 0, T - 1);
            out.values.row(t) += lookup.row(src);
        }
        out.values.row(t) /= smooth;
    }
    return out;
}

MagnitudeSpectrogram mel_to_linear(const FeatureMatrix& mel, const MelFilterbankConfig& cfg, int win_len, int hop) {
    const RowMatrix fb = mel_filterbank(cfg);
    if (mel.dim() != fb.rows())
        throw ConfigError("mel_to_linear: mel width " + std::to_string(mel.dim()) + " does not match filterbank");
    const Eigen::MatrixXd pinv = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(fb).pseudoInverse();
    const RowMatrix power_mel = mel.values.array().exp();
    MagnitudeSpectrogram mag;
    mag.fft_len = cfg.fft_len;
    mag.win_len = win_len;
    mag.hop = hop;
    mag.sample_rate = cfg.sample_rate;
    mag.num_samples = mel.frames() > 0 ? static_cast<std::size_t>(mel.frames() - 1) * hop : 0;
    mag.values = (power_mel * pinv.transpose()).array().max(0.0).sqrt();
    return mag;
}

namespace {

double spectral_convergence(const ComplexSpectrogram& est, const MagnitudeSpectrogram& target) {
    double num = 0.0, den = 0.0;
    const auto nb = static_cast<Eigen::Index>(est.num_bins());
    for (Eigen::Index t = 0; t < target.values.rows(); ++t)
        for (Eigen::Index k = 0; k < nb; ++k) {
            const double diff = std::abs(est.at(t, k)) - target.values(t, k);
            num += diff * diff;
            den += target.values(t, k) * target.values(t, k);
        }
    return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

}  // namespace

GriffinLimResult griffin_lim(const MagnitudeSpectrogram& mag, int iters, std::uint64_t seed, double momentum) {
    if (iters < 1) throw ConfigError("griffin_lim: iters must be >= 1");
    ComplexSpectrogram spec;
    spec.fft_len = mag.fft_len;
    spec.win_len = mag.win_len;
    spec.hop = mag.hop;
    spec.sample_rate = mag.sample_rate;
    spec.num_samples = mag.num_samples;
    spec.frames = static_cast<std::size_t>(mag.values.rows());
    const auto nb = static_cast<Eigen::Index>(spec.num_bins());
    if (mag.values.cols() != nb) throw ConfigError("griffin_lim: magnitude width does not match fft_len");
    if (frame_count(spec.num_samples, spec.hop) != spec.frames)
        throw ConfigError("griffin_lim: signal length inconsistent with frame count");

    Rng rng(seed);
    spec.bins.resize(spec.frames * spec.num_bins());
    for (Eigen::Index t = 0; t < mag.values.rows(); ++t)
        for (Eigen::Index k = 0; k < nb; ++k)
            spec.at(t, k) = std::polar(mag.values(t, k), 2.0 * std::numbers::pi * rng.uniform());

    GriffinLimResult result;
    std::vector<cdouble> previous(spec.bins.size());
    for (int it = 0; it < iters; ++it) {
        const Waveform x = istft(spec);
        const ComplexSpectrogram rebuilt = stft(x.samples(), x.sample_rate, {spec.fft_len, spec.win_len, spec.hop});
        result.spectral_convergence.push_back(spectral_convergence(rebuilt, mag));
        for (std::size_t i = 0; i < spec.bins.size(); ++i) {
            cdouble proj = rebuilt.bins[i];
            if (momentum > 0.0) {
                const cdouble accelerated = proj + momentum * (proj - previous[i]);
                previous[i] = proj;
                proj = accelerated;
            }
            const double m = mag.values(static_cast<Eigen::Index>(i / spec.num_bins()),
                                        static_cast<Eigen::Index>(i % spec.num_bins()));
            const double a = std::abs(proj);
            spec.bins[i] = a > 0.0 ? proj * (m / a) : cdouble(m, 0.0);
        }
    }
    result.wave = istft(spec);
    return result;
}

Waveform vocode(const UnitSequence& units, const PrototypeTable& table, const VocoderConfig& cfg) {
    const auto mel = units_to_mel(units, table, cfg.smooth);
    const auto mag = mel_to_linear(mel, cfg.mel(), cfg.win_len, cfg.hop);
    if (mag.values.rows() == 0) return Waveform::mono({}, cfg.sample_rate);
    return griffin_lim(mag, cfg.griffin_lim_iters, cfg.seed, cfg.momentum).wave;
}

nlohmann::json to_json(const PrototypeTable& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index k = 0; k < table.mel_prototypes.rows(); ++k)
        rows.push_back(std::vector<double>(table.mel_prototypes.row(k).begin(), table.mel_prototypes.row(k).end()));
    std::vector<int> observed(table.observed.begin(), table.observed.end());
    return {{"K", table.size()}, {"n_mels", table.n_mels}, {"hop", table.hop}, {"observed", observed},
            {"mel_prototypes", rows}};
}

PrototypeTable prototypes_from_json(const nlohmann::json& j) {
    PrototypeTable t;
    const int K = j.at("K").get<int>();
    t.n_mels = j.at("n_mels").get<int>();
    t.hop = j.at("hop").get<int>();
    const auto observed = j.at("observed").get<std::vector<int>>();
    t.observed.assign(observed.begin(), observed.end());
    t.mel_prototypes.resize(K, t.n_mels);
    const auto& rows = j.at("mel_prototypes");
    if (static_cast<int>(rows.size()) != K || static_cast<int>(observed.size()) != K)
        throw IoError("prototype table: row count differs from K");
    for (int k = 0; k < K; ++k) {
        const auto row = rows[k].get<std::vector<double>>();
        if (static_cast<int>(row.size()) != t.n_mels) throw IoError("prototype table: row width differs from n_mels");
        for (int d = 0; d < t.n_mels; ++d) t.mel_prototypes(k, d) = row[d];
    }
    return t;
}

void save_prototypes(const std::filesystem::path& path, const PrototypeTable& table) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json(table).dump() << '\n';
}

PrototypeTable load_prototypes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return prototypes_from_json(nlohmann::json::parse(in));
}

}  // namespace gse
