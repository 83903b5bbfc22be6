#include "gse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>

#include "gse/error.hpp"
#include "gse/fft.hpp"

namespace gse {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

double bessel_i0(double x) {
    double sum = 1.0, term = 1.0;
    for (int k = 1; k < 64; ++k) {
        term *= (x / (2.0 * k)) * (x / (2.0 * k));
        sum += term;
        if (term < 1e-17 * sum) break;
    }
    return sum;
}

// STOI constants.
constexpr int kStoiRate = 10000;
constexpr int kStoiFrame = 256;
constexpr int kStoiFft = 512;
constexpr int kStoiBands = 15;
constexpr double kStoiMinFreq = 150.0;
constexpr int kStoiSegment = 30;
constexpr double kStoiDynRange = 40.0;

// Symmetric Hann of length n+2 with the zero end points dropped.
std::vector<double> inner_hann(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 1) / (n + 1));
    return w;
}

void remove_silent_frames(std::vector<double>& x, std::vector<double>& y) {
    const int hop = kStoiFrame / 2;
    const auto w = inner_hann(kStoiFrame);
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i + kStoiFrame < x.size(); i += hop) starts.push_back(i);
    std::vector<double> energy(starts.size());
    for (std::size_t f = 0; f < starts.size(); ++f) {
        double e = 0.0;
        for (int n = 0; n < kStoiFrame; ++n) {
            const double v = w[n] * x[starts[f] + n];
            e += v * v;
        }
        energy[f] = 20.0 * std::log10(std::sqrt(e) + kEps);
    }
    const double top = energy.empty() ? 0.0 : *std::max_element(energy.begin(), energy.end());
    std::vector<std::size_t> kept;
    for (std::size_t f = 0; f < starts.size(); ++f)
        if (top - kStoiDynRange - energy[f] < 0.0) kept.push_back(starts[f]);

    auto rebuild = [&](const std::vector<double>& s) {
        if (kept.empty()) return std::vector<double>{};
        std::vector<double> out((kept.size() - 1) * hop + kStoiFrame, 0.0);
        for (std::size_t f = 0; f < kept.size(); ++f)
            for (int n = 0; n < kStoiFrame; ++n) out[f * hop + n] += w[n] * s[kept[f] + n];
        return out;
    };
    auto xs = rebuild(x);
    auto ys = rebuild(y);
    x = std::move(xs);
    y = std::move(ys);
}

// Third-octave band envelopes [bands × frames].
RowMatrix third_octave_envelopes(const std::vector<double>& x) {
    const int hop = kStoiFrame / 2;
    const auto w = inner_hann(kStoiFrame);
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i + kStoiFrame < x.size(); i += hop) starts.push_back(i);
    const int nb = kStoiFft / 2 + 1;

    std::vector<int> lo(kStoiBands), hi(kStoiBands);
    auto nearest_bin = [&](double f) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int k = 0; k < nb; ++k) {
            const double d = std::abs(k * static_cast<double>(kStoiRate) / kStoiFft - f);
            if (d < best_d) { best_d = d; best = k; }
        }
        return best;
    };
    for (int b = 0; b < kStoiBands; ++b) {
        lo[b] = nearest_bin(kStoiMinFreq * std::pow(2.0, (2.0 * b - 1.0) / 6.0));
        hi[b] = nearest_bin(kStoiMinFreq * std::pow(2.0, (2.0 * b + 1.0) / 6.0));
    }

    RowMatrix env(kStoiBands, static_cast<Eigen::Index>(starts.size()));
    std::vector<double> frame(kStoiFft);
    std::vector<cdouble> spec(nb);
    for (std::size_t f = 0; f < starts.size(); ++f) {
        std::fill(frame.begin(), frame.end(), 0.0);
        for (int n = 0; n < kStoiFrame; ++n) frame[n] = w[n] * x[starts[f] + n];
        fft::rfft(frame, spec);
        for (int b = 0; b < kStoiBands; ++b) {
            double p = 0.0;
            for (int k = lo[b]; k < hi[b]; ++k) p += std::norm(spec[k]);
            env(b, static_cast<Eigen::Index>(f)) = std::sqrt(p);
        }
    }
    return env;
}

// Subtract the mean and scale to unit norm along rows, then along columns.
RowMatrix row_col_normalise(const RowMatrix& seg) {
    RowMatrix out = seg;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        out.row(r).array() -= out.row(r).mean();
        out.row(r) /= out.row(r).norm() + kEps;
    }
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
        out.col(c).array() -= out.col(c).mean();
        out.col(c) /= out.col(c).norm() + kEps;
    }
    return out;
}

std::vector<double> fit_length(const std::vector<double>& x, std::size_t n) {
    std::vector<double> out(n, 0.0);
    std::copy_n(x.begin(), std::min(n, x.size()), out.begin());
    return out;
}

void require_comparable(const Waveform& a, const Waveform& b, const char* who) {
    if (a.sample_rate != b.sample_rate)
        throw InputError(std::string(who) + ": sample rates differ (" + std::to_string(a.sample_rate) + " vs " +
                         std::to_string(b.sample_rate) + ")");
}

}  // namespace

std::vector<double> resample(const std::vector<double>& x, int from_rate, int to_rate) {
    if (from_rate <= 0 || to_rate <= 0) throw ConfigError("resample: rates must be positive");
    if (from_rate == to_rate) return x;
    const int g = std::gcd(from_rate, to_rate);
    const long up = to_rate / g, down = from_rate / g;
    const double cutoff = std::min(1.0, static_cast<double>(up) / down);  // in input-rate Nyquist units
    constexpr int kZeros = 16;
    constexpr double kBeta = 5.0;
    const double half_width = kZeros / cutoff;
    const double i0_beta = bessel_i0(kBeta);
    const std::size_t n_out = (x.size() * up + down - 1) / down;
    std::vector<double> y(n_out, 0.0);
    for (std::size_t m = 0; m < n_out; ++m) {
        const double t = static_cast<double>(m) * down / up;
        const long first = static_cast<long>(std::ceil(t - half_width));
        const long last = static_cast<long>(std::floor(t + half_width));
        double acc = 0.0;
        for (long n = std::max(0L, first); n <= std::min<long>(last, static_cast<long>(x.size()) - 1); ++n) {
            const double tau = n - t;
            const double r = tau / half_width;
            const double win = bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
            const double arg = cutoff * tau;
            const double sinc = arg == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
            acc += x[static_cast<std::size_t>(n)] * cutoff * sinc * win;
        }
        y[m] = acc;
    }
    return y;
}

double estoi(const Waveform& reference, const Waveform& degraded) {
    require_comparable(reference, degraded, "estoi");
    auto x = resample(reference.samples(), reference.sample_rate, kStoiRate);
    auto y = resample(fit_length(degraded.samples(), reference.num_samples()), degraded.sample_rate, kStoiRate);
    remove_silent_frames(x, y);
    const RowMatrix xe = third_octave_envelopes(x);
    const RowMatrix ye = third_octave_envelopes(y);
    const Eigen::Index frames = xe.cols();
    if (frames < kStoiSegment)
        throw DegenerateInputError("estoi: " + std::to_string(frames) + " speech frames, need at least " +
                                   std::to_string(kStoiSegment));
    double total = 0.0;
    const Eigen::Index segments = frames - kStoiSegment + 1;
    for (Eigen::Index m = 0; m < segments; ++m) {
        const RowMatrix xn = row_col_normalise(xe.middleCols(m, kStoiSegment));
        const RowMatrix yn = row_col_normalise(ye.middleCols(m, kStoiSegment));
        total += (xn.array() * yn.array()).sum() / kStoiSegment;
    }
    return std::clamp(total / static_cast<double>(segments), -1.0, 1.0);
}

double mcd_from_cepstra(const RowMatrix& reference, const RowMatrix& degraded) {
    if (reference.rows() != degraded.rows() || reference.cols() != degraded.cols())
        throw InputError("mcd: cepstra shapes differ");
    if (reference.rows() == 0) throw DegenerateInputError("mcd: no frames");
    const double scale = 10.0 * std::numbers::sqrt2 / std::numbers::ln10;
    double sum = 0.0;
    for (Eigen::Index t = 0; t < reference.rows(); ++t) {
        double d2 = 0.0;
        for (Eigen::Index c = 1; c < reference.cols(); ++c) {
            const double d = reference(t, c) - degraded(t, c);
            d2 += d * d;
        }
        sum += std::sqrt(d2);
    }
    return scale * sum / static_cast<double>(reference.rows());
}

double mcd(const Waveform& reference, const Waveform& degraded) {
    require_comparable(reference, degraded, "mcd");
    const MfccConfig cfg;
    const FeatureMatrix a = mfcc(reference, cfg);
    const FeatureMatrix b = mfcc(degraded, cfg);
    if (std::abs(a.frames() - b.frames()) > 1)
        throw InputError("mcd: lengths differ by more than one frame (" + std::to_string(a.frames()) + " vs " +
                         std::to_string(b.frames()) + ")");
    const Eigen::Index n = std::min(a.frames(), b.frames());
    return mcd_from_cepstra(a.values.topRows(n), b.values.topRows(n));
}

double si_snr(const std::vector<double>& reference, const std::vector<double>& degraded) {
    if (reference.size() != degraded.size())
        throw InputError("si_snr: lengths differ (" + std::to_string(reference.size()) + " vs " +
                         std::to_string(degraded.size()) + ")");
    const auto n = static_cast<double>(reference.size());
    const double mr = std::accumulate(reference.begin(), reference.end(), 0.0) / n;
    const double md = std::accumulate(degraded.begin(), degraded.end(), 0.0) / n;
    double rr = 0.0, rd = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        rr += (reference[i] - mr) * (reference[i] - mr);
        rd += (reference[i] - mr) * (degraded[i] - md);
    }
    if (rr <= 0.0) throw DegenerateInputError("si_snr: reference is zero after mean removal");
    const double alpha = rd / rr;
    double target = 0.0, residual = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double t = alpha * (reference[i] - mr);
        const double e = (degraded[i] - md) - t;
        target += t * t;
        residual += e * e;
    }
    if (target <= 0.0) return -100.0;
    if (residual <= 0.0) return 100.0;
    return std::clamp(10.0 * std::log10(target / residual), -100.0, 100.0);
}

double si_snr(const Waveform& reference, const Waveform& degraded) {
    require_comparable(reference, degraded, "si_snr");
    return si_snr(reference.samples(), degraded.samples());
}

std::vector<int> dedup_runs(const std::vector<int>& units) {
    std::vector<int> out;
    for (int u : units)
        if (out.empty() || out.back() != u) out.push_back(u);
    return out;
}

std::size_t edit_distance(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double unit_error_rate(const UnitSequence& reference, const UnitSequence& hypothesis) {
    const auto ref = dedup_runs(reference.units);
    if (ref.empty()) throw DegenerateInputError("unit_error_rate: empty reference");
    const auto hyp = dedup_runs(hypothesis.units);
    return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

namespace {

std::vector<double> log_energy_envelope(const std::vector<double>& x, int frame) {
    const std::size_t n = x.size() / static_cast<std::size_t>(frame);
    std::vector<double> env(n);
    for (std::size_t t = 0; t < n; ++t) {
        double e = 0.0;
        for (int i = 0; i < frame; ++i) e += x[t * frame + i] * x[t * frame + i];
        env[t] = std::log(e / frame + kLogFloor);
    }
    return env;
}

double pearson(const double* a, const double* b, std::size_t n) {
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) { ma += a[i]; mb += b[i]; }
    ma /= n;
    mb /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

SyncResult sync_offset(const Waveform& reference, const Waveform& degraded, double max_lag_ms) {
    require_comparable(reference, degraded, "sync_offset");
    if (max_lag_ms < 0.0 || max_lag_ms > 500.0) throw ConfigError("sync_offset: max_lag_ms must be in [0, 500]");
    const int frame = reference.sample_rate / 50;
    const auto is_silent = [](const std::vector<double>& s) {
        return std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; });
    };
    if (is_silent(reference.samples()) || is_silent(degraded.samples()))
        throw DegenerateInputError("sync_offset: silent input");
    const auto a = log_energy_envelope(reference.samples(), frame);
    const auto b = log_energy_envelope(degraded.samples(), frame);
    const int max_lag = static_cast<int>(std::floor(max_lag_ms / 20.0 + 1e-9));

    double best = -std::numeric_limits<double>::infinity(), sum = 0.0;
    int best_lag = 0, lags = 0;
    for (int lag = -max_lag; lag <= max_lag; ++lag) {
        // degraded[t + lag] against reference[t]
        const long t0 = std::max(0, -lag);
        const long t1 = std::min(static_cast<long>(a.size()), static_cast<long>(b.size()) - lag);
        if (t1 - t0 < 2) continue;
        const double r = pearson(a.data() + t0, b.data() + t0 + lag, static_cast<std::size_t>(t1 - t0));
        sum += r;
        ++lags;
        if (r > best) { best = r; best_lag = lag; }
    }
    if (lags == 0) throw DegenerateInputError("sync_offset: signals too short for the lag window");
    return {best_lag * 20.0, std::max(0.0, best - sum / lags)};
}

EvalReport make_report(std::vector<UtteranceScores> rows) {
    EvalReport report;
    report.rows = std::move(rows);
    report.count = report.rows.size();
    auto& m = report.aggregate;
    m.id = "mean";
    m.split = "all";
    if (report.count == 0) return report;
    for (const auto& r : report.rows) {
        m.estoi += r.estoi;
        m.mcd_db += r.mcd_db;
        m.si_snr_db += r.si_snr_db;
        m.uer += r.uer;
        m.sync_offset_ms += r.sync_offset_ms;
        m.sync_confidence += r.sync_confidence;
    }
    const auto n = static_cast<double>(report.count);
    m.estoi /= n;
    m.mcd_db /= n;
    m.si_snr_db /= n;
    m.uer /= n;
    m.sync_offset_ms /= n;
    m.sync_confidence /= n;
    return report;
}

std::string to_csv(const EvalReport& report) {
    std::string out = "id,split,estoi,mcd_db,si_snr_db,uer,sync_offset_ms,sync_confidence\n";
    char buf[512];
    auto emit = [&](const UtteranceScores& r) {
        std::snprintf(buf, sizeof buf, "%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n", r.id.c_str(), r.split.c_str(),
                      r.estoi, r.mcd_db, r.si_snr_db, r.uer, r.sync_offset_ms, r.sync_confidence);
        out += buf;
    };
    for (const auto& r : report.rows) emit(r);
    emit(report.aggregate);
    return out;
}

nlohmann::json summary_json(const EvalReport& report) {
    const auto& m = report.aggregate;
    return {{"count", report.count},          {"estoi", m.estoi},
            {"mcd_db", m.mcd_db},              {"si_snr_db", m.si_snr_db},
            {"uer", m.uer},                    {"sync_offset_ms", m.sync_offset_ms},
            {"sync_confidence", m.sync_confidence}};
}

}  // namespace gse
