#include "gse/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "gse/error.hpp"

namespace gse::fft {
namespace {

enum class PlanKind { R2C, C2R, C2C_Forward, C2C_Backward };

class PlanCache {
public:
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan get(PlanKind kind, int n) {
        std::lock_guard<std::mutex> lock(mutex_);
        const auto key = std::make_tuple(kind, n);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;

        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        std::vector<double> real(static_cast<std::size_t>(n));
        std::vector<std::complex<double>> cplx(static_cast<std::size_t>(n));
        std::vector<std::complex<double>> cplx_out(static_cast<std::size_t>(n));
        auto* c = reinterpret_cast<fftw_complex*>(cplx.data());
        auto* c_out = reinterpret_cast<fftw_complex*>(cplx_out.data());
        fftw_plan plan = nullptr;
        switch (kind) {
            case PlanKind::R2C: plan = fftw_plan_dft_r2c_1d(n, real.data(), c, flags); break;
            case PlanKind::C2R: plan = fftw_plan_dft_c2r_1d(n, c, real.data(), flags); break;
            case PlanKind::C2C_Forward:
                plan = fftw_plan_dft_1d(n, c, c_out, FFTW_FORWARD, flags);
                break;
            case PlanKind::C2C_Backward:
                plan = fftw_plan_dft_1d(n, c, c_out, FFTW_BACKWARD, flags);
                break;
        }
        if (plan == nullptr) throw NumericError("FFTW failed to create a plan of length " + std::to_string(n));
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<std::tuple<PlanKind, int>, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache instance;
    return instance;
}

}  // namespace

void rfft(std::span<const double> in, std::span<std::complex<double>> out) {
    const int n = static_cast<int>(in.size());
    if (n == 0) return;
    if (out.size() != in.size() / 2 + 1) throw ConfigError("rfft: output must hold n/2+1 bins");
    fftw_plan plan = cache().get(PlanKind::R2C, n);
    // r2c leaves its input untouched for out-of-place transforms.
    fftw_execute_dft_r2c(plan, const_cast<double*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()));
}

void irfft(std::span<const std::complex<double>> in, std::span<double> out) {
    const int n = static_cast<int>(out.size());
    if (n == 0) return;
    if (in.size() != out.size() / 2 + 1) throw ConfigError("irfft: input must hold n/2+1 bins");
    fftw_plan plan = cache().get(PlanKind::C2R, n);
    // c2r destroys its input.
    std::vector<std::complex<double>> scratch(in.begin(), in.end());
    fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
    const double scale = 1.0 / n;
    for (double& v : out) v *= scale;
}

void cfft(std::span<const std::complex<double>> in, std::span<std::complex<double>> out, int sign) {
    const int n = static_cast<int>(in.size());
    if (n == 0) return;
    if (out.size() != in.size()) throw ConfigError("cfft: input and output sizes differ");
    fftw_plan plan = cache().get(sign < 0 ? PlanKind::C2C_Forward : PlanKind::C2C_Backward, n);
    std::vector<std::complex<double>> scratch(in.begin(), in.end());
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(scratch.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
}

}  // namespace gse::fft
