#pragma once

// Data-parallel inner loops. Each kernel has a straightforward serial
// reference and an OpenMP version; both produce bit-identical results because
// every output element is computed by the same sequence of operations, only
// distributed across threads. Reductions that cross output elements stay in
// the callers, in fixed order.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "gse/signal.hpp"

namespace gse::kernels {

/// Windowed frames of a padded signal transformed to half-spectra.
/// Frame t reads padded[t·hop, t·hop + window.size()); out is [frames × (fft_len/2+1)].
struct FrameSpectraArgs {
    std::span<const double> padded;
    std::span<const double> window;
    int fft_len = 0;
    int hop = 0;
    std::size_t frames = 0;
};

/// Output of nearest-centroid search: index (ties → lowest) and squared distance.
struct Assignment {
    std::vector<int> index;
    std::vector<double> distance;
};

namespace serial {

void frame_spectra(const FrameSpectraArgs& args, std::span<cdouble> out);

Assignment nearest_centroid(const RowMatrix& data, const RowMatrix& centroids);

/// out(t, k) = Σ_m conj(w(k, m)) · X_m(t, k)
void filter_and_sum(std::span<const ComplexSpectrogram> channels, const Eigen::MatrixXcd& weights,
                    ComplexSpectrogram& out);

}  // namespace serial

namespace omp {

void frame_spectra(const FrameSpectraArgs& args, std::span<cdouble> out);

Assignment nearest_centroid(const RowMatrix& data, const RowMatrix& centroids);

void filter_and_sum(std::span<const ComplexSpectrogram> channels, const Eigen::MatrixXcd& weights,
                    ComplexSpectrogram& out);

}  // namespace omp

/// Squared Euclidean distance summed in index order.
inline double squared_distance(const double* a, const double* b, Eigen::Index dim) {
    double acc = 0.0;
    for (Eigen::Index d = 0; d < dim; ++d) {
        const double diff = a[d] - b[d];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace gse::kernels
