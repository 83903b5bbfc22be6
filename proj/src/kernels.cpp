#include "gse/kernels.hpp"

#include <limits>

#include "gse/error.hpp"
#include "gse/fft.hpp"

namespace gse::kernels {
namespace {

void spectrum_of_frame(const FrameSpectraArgs& args, std::size_t t, std::vector<double>& buffer,
                       std::span<cdouble> out) {
    const std::size_t win = args.window.size();
    const std::size_t start = t * static_cast<std::size_t>(args.hop);
    std::fill(buffer.begin(), buffer.end(), 0.0);
    for (std::size_t i = 0; i < win; ++i) buffer[i] = args.padded[start + i] * args.window[i];
    const std::size_t nb = static_cast<std::size_t>(args.fft_len) / 2 + 1;
    fft::rfft(buffer, out.subspan(t * nb, nb));
}

void check_frame_args(const FrameSpectraArgs& args, std::span<cdouble> out) {
    const std::size_t nb = static_cast<std::size_t>(args.fft_len) / 2 + 1;
    if (out.size() != args.frames * nb) throw ConfigError("frame_spectra: output size mismatch");
    if (args.frames > 0 &&
        (args.frames - 1) * static_cast<std::size_t>(args.hop) + args.window.size() > args.padded.size())
        throw ConfigError("frame_spectra: frames exceed padded signal");
}

int nearest_row(const RowMatrix& data, const RowMatrix& centroids, Eigen::Index r, double& best) {
    const Eigen::Index dim = data.cols();
    const double* x = data.data() + r * dim;
    int best_k = 0;
    best = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < centroids.rows(); ++k) {
        const double d = squared_distance(x, centroids.data() + k * dim, dim);
        if (d < best) {
            best = d;
            best_k = static_cast<int>(k);
        }
    }
    return best_k;
}

void check_assignment_args(const RowMatrix& data, const RowMatrix& centroids) {
    if (data.cols() != centroids.cols()) throw ConfigError("nearest_centroid: dimension mismatch");
    if (centroids.rows() == 0) throw ConfigError("nearest_centroid: empty codebook");
}

void check_filter_args(std::span<const ComplexSpectrogram> channels, const Eigen::MatrixXcd& weights) {
    if (channels.empty()) throw ConfigError("filter_and_sum: no channels");
    if (static_cast<std::size_t>(weights.cols()) != channels.size())
        throw ConfigError("filter_and_sum: weights have " + std::to_string(weights.cols()) +
                          " channels, capture has " + std::to_string(channels.size()));
    const auto& ref = channels.front();
    if (static_cast<std::size_t>(weights.rows()) != ref.num_bins())
        throw ConfigError("filter_and_sum: weight bin count does not match the spectrogram");
    for (const auto& ch : channels)
        if (ch.frames != ref.frames || ch.fft_len != ref.fft_len)
            throw ConfigError("filter_and_sum: channel spectrograms differ in shape");
}

void prepare_output(const ComplexSpectrogram& ref, ComplexSpectrogram& out) {
    out = ComplexSpectrogram{};
    out.frames = ref.frames;
    out.fft_len = ref.fft_len;
    out.win_len = ref.win_len;
    out.hop = ref.hop;
    out.sample_rate = ref.sample_rate;
    out.num_samples = ref.num_samples;
    out.bins.assign(ref.bins.size(), cdouble{});
}

void filter_frame(std::span<const ComplexSpectrogram> channels, const Eigen::MatrixXcd& weights,
                  std::size_t t, ComplexSpectrogram& out) {
    const std::size_t nb = out.num_bins();
    for (std::size_t k = 0; k < nb; ++k) {
        cdouble acc{};
        for (std::size_t m = 0; m < channels.size(); ++m)
            acc += std::conj(weights(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m))) *
                   channels[m].at(t, k);
        out.at(t, k) = acc;
    }
}

}  // namespace

namespace serial {

void frame_spectra(const FrameSpectraArgs& args, std::span<cdouble> out) {
    check_frame_args(args, out);
    std::vector<double> buffer(static_cast<std::size_t>(args.fft_len));
    for (std::size_t t = 0; t < args.frames; ++t) spectrum_of_frame(args, t, buffer, out);
}

Assignment nearest_centroid(const RowMatrix& data, const RowMatrix& centroids) {
    check_assignment_args(data, centroids);
    Assignment a;
    a.index.resize(static_cast<std::size_t>(data.rows()));
    a.distance.resize(a.index.size());
    for (Eigen::Index r = 0; r < data.rows(); ++r)
        a.index[r] = nearest_row(data, centroids, r, a.distance[r]);
    return a;
}

void filter_and_sum(std::span<const ComplexSpectrogram> channels, const Eigen::MatrixXcd& weights,
                    ComplexSpectrogram& out) {
    check_filter_args(channels, weights);
    prepare_output(channels.front(), out);
    for (std::size_t t = 0; t < out.frames; ++t) filter_frame(channels, weights, t, out);
}

}  // namespace serial

namespace omp {

void frame_spectra(const FrameSpectraArgs& args, std::span<cdouble> out) {
    check_frame_args(args, out);
    const auto frames = static_cast<std::ptrdiff_t>(args.frames);
#pragma omp parallel
    {
        std::vector<double> buffer(static_cast<std::size_t>(args.fft_len));
#pragma omp for schedule(static)
        for (std::ptrdiff_t t = 0; t < frames; ++t)
            spectrum_of_frame(args, static_cast<std::size_t>(t), buffer, out);
    }
}

Assignment nearest_centroid(const RowMatrix& data, const RowMatrix& centroids) {
    check_assignment_args(data, centroids);
    Assignment a;
    a.index.resize(static_cast<std::size_t>(data.rows()));
    a.distance.resize(a.index.size());
    const Eigen::Index rows = data.rows();
#pragma omp parallel for schedule(static)
    for (Eigen::Index r = 0; r < rows; ++r) a.index[r] = nearest_row(data, centroids, r, a.distance[r]);
    return a;
}

void filter_and_sum(std::span<const ComplexSpectrogram> channels, const Eigen::MatrixXcd& weights,
                    ComplexSpectrogram& out) {
    check_filter_args(channels, weights);
    prepare_output(channels.front(), out);
    const auto frames = static_cast<std::ptrdiff_t>(out.frames);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t t = 0; t < frames; ++t)
        filter_frame(channels, weights, static_cast<std::size_t>(t), out);
}

}  // namespace omp
}  // namespace gse::kernels
