#include "vsense/fft.hpp"

#include <fftw3.h>

#include <cassert>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace vsense::dsp {
namespace {

enum class Kind { forward, backward, real_forward };

class PlanCache {
public:
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan get(std::size_t n, Kind kind) {
        std::lock_guard lock(mutex_);
        auto key = std::make_pair(n, kind);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;

        // FFTW_ESTIMATE never touches the arrays, so scratch buffers are enough for planning.
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        const int size = static_cast<int>(n);
        fftw_plan plan = nullptr;
        if (kind == Kind::real_forward) {
            auto* in = fftw_alloc_real(n);
            auto* out = fftw_alloc_complex(n / 2 + 1);
            plan = fftw_plan_dft_r2c_1d(size, in, out, flags);
            fftw_free(in);
            fftw_free(out);
        } else {
            auto* in = fftw_alloc_complex(n);
            auto* out = fftw_alloc_complex(n);
            plan = fftw_plan_dft_1d(size, in, out, kind == Kind::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                    flags);
            fftw_free(in);
            fftw_free(out);
        }
        if (plan == nullptr) throw std::runtime_error("FFTW planning failed");
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<std::pair<std::size_t, Kind>, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache instance;
    return instance;
}

fftw_complex* as_fftw(const Complex* p) {
    // std::complex<double> is layout-compatible with fftw_complex; FFTW does not
    // write to the input of an out-of-place complex or r2c transform.
    return reinterpret_cast<fftw_complex*>(const_cast<Complex*>(p));
}

}  // namespace

void fft(std::span<const Complex> in, std::span<Complex> out) {
    assert(in.size() == out.size() && in.data() != out.data());
    if (in.empty()) return;
    fftw_execute_dft(cache().get(in.size(), Kind::forward), as_fftw(in.data()), as_fftw(out.data()));
}

void ifft(std::span<const Complex> in, std::span<Complex> out) {
    assert(in.size() == out.size() && in.data() != out.data());
    if (in.empty()) return;
    fftw_execute_dft(cache().get(in.size(), Kind::backward), as_fftw(in.data()), as_fftw(out.data()));
    const double scale = 1.0 / static_cast<double>(in.size());
    for (auto& v : out) v *= scale;
}

void rfft(std::span<const double> in, std::span<Complex> out) {
    assert(out.size() == in.size() / 2 + 1);
    if (in.empty()) return;
    fftw_execute_dft_r2c(cache().get(in.size(), Kind::real_forward), const_cast<double*>(in.data()),
                         as_fftw(out.data()));
}

}  // namespace vsense::dsp
