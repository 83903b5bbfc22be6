#include <benchmark/benchmark.h>

#include "gse/kernels.hpp"
#include "gse/rng.hpp"
#include "gse/signal.hpp"

using namespace gse;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (double& v : x) v = rng.gaussian();
    return x;
}

template <void (*Kernel)(const kernels::FrameSpectraArgs&, std::span<cdouble>)>
void frame_spectra(benchmark::State& state) {
    const auto padded = noise(16000 * static_cast<std::size_t>(state.range(0)), 1);
    const auto window = hann_window(400);
    const std::size_t frames = (padded.size() - 400) / 160 + 1;
    std::vector<cdouble> out(frames * 257);
    const kernels::FrameSpectraArgs args{padded, window, 512, 160, frames};
    for (auto _ : state) {
        Kernel(args, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames));
}

template <kernels::Assignment (*Kernel)(const RowMatrix&, const RowMatrix&)>
void nearest_centroid(benchmark::State& state) {
    const RowMatrix data = RowMatrix::Random(state.range(0), 39);
    const RowMatrix centroids = RowMatrix::Random(100, 39);
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(data, centroids));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <void (*Kernel)(std::span<const ComplexSpectrogram>, const Eigen::MatrixXcd&, ComplexSpectrogram&)>
void filter_and_sum(benchmark::State& state) {
    std::vector<ComplexSpectrogram> channels;
    for (int m = 0; m < 4; ++m)
        channels.push_back(stft(Waveform::mono(noise(16000 * static_cast<std::size_t>(state.range(0)), m)), 1024, 512));
    const Eigen::MatrixXcd w = Eigen::MatrixXcd::Random(513, 4);
    ComplexSpectrogram out;
    for (auto _ : state) {
        Kernel(channels, w, out);
        benchmark::DoNotOptimize(out.bins.data());
    }
}

}  // namespace

BENCHMARK_TEMPLATE(frame_spectra, kernels::serial::frame_spectra)->Arg(4)->Arg(30);
BENCHMARK_TEMPLATE(frame_spectra, kernels::omp::frame_spectra)->Arg(4)->Arg(30);
BENCHMARK_TEMPLATE(nearest_centroid, kernels::serial::nearest_centroid)->Arg(1000)->Arg(20000);
BENCHMARK_TEMPLATE(nearest_centroid, kernels::omp::nearest_centroid)->Arg(1000)->Arg(20000);
BENCHMARK_TEMPLATE(filter_and_sum, kernels::serial::filter_and_sum)->Arg(4)->Arg(30);
BENCHMARK_TEMPLATE(filter_and_sum, kernels::omp::filter_and_sum)->Arg(4)->Arg(30);

BENCHMARK_MAIN();
