#pragma once

// Unitary 2D FFT on std::complex<double> buffers, backed by FFTW.
// Plans are created once per (nx, ny) and shared; FFTW planning is not
// thread-safe, so creation is serialized.  Plans use FFTW_ESTIMATE so the
// chosen algorithm, and therefore every output bit, is reproducible.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>

#include "nldholo/error.hpp"

namespace nldholo {

class Fft2d {
public:
    Fft2d(std::size_t nx, std::size_t ny) : nx_(nx), ny_(ny), plans_(plans_for(nx, ny)) {}

    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }

    /// In-place forward transform scaled by 1/sqrt(nx ny).
    void forward(std::span<std::complex<double>> a) const { run(plans_->forward, a); }
    /// In-place inverse transform scaled by 1/sqrt(nx ny).
    void inverse(std::span<std::complex<double>> a) const { run(plans_->inverse, a); }

    /// Raw FFTW transforms; a forward/inverse pair multiplies by nx ny.
    void forward_unscaled(std::span<std::complex<double>> a) const { run_raw(plans_->forward, a); }
    void inverse_unscaled(std::span<std::complex<double>> a) const { run_raw(plans_->inverse, a); }

private:
    struct Plans {
        fftw_plan forward = nullptr;
        fftw_plan inverse = nullptr;
        Plans(const Plans&) = delete;
        Plans& operator=(const Plans&) = delete;
        Plans(std::size_t nx, std::size_t ny)
        {
            auto* buf = fftw_alloc_complex(nx * ny);
            const int n0 = static_cast<int>(ny), n1 = static_cast<int>(nx);
            const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
            forward = fftw_plan_dft_2d(n0, n1, buf, buf, FFTW_FORWARD, flags);
            inverse = fftw_plan_dft_2d(n0, n1, buf, buf, FFTW_BACKWARD, flags);
            fftw_free(buf);
        }
        ~Plans()
        {
            std::lock_guard lock(planner_mutex());
            fftw_destroy_plan(forward);
            fftw_destroy_plan(inverse);
        }
    };

    static std::mutex& planner_mutex()
    {
        static std::mutex m;
        return m;
    }

    static std::shared_ptr<const Plans> plans_for(std::size_t nx, std::size_t ny)
    {
        // the mutex must outlive the cache, whose plans lock it on destruction
        auto& mutex = planner_mutex();
        static std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const Plans>> cache;
        std::lock_guard lock(mutex);
        auto& slot = cache[{nx, ny}];
        if (!slot)
            slot = std::make_shared<const Plans>(nx, ny);
        return slot;
    }

    void run_raw(fftw_plan plan, std::span<std::complex<double>> a) const
    {
        if (a.size() != nx_ * ny_)
            throw dimension_error("fft buffer size does not match plan");
        auto* p = reinterpret_cast<fftw_complex*>(a.data());
        fftw_execute_dft(plan, p, p);
    }

    void run(fftw_plan plan, std::span<std::complex<double>> a) const
    {
        run_raw(plan, a);
        const double s = 1.0 / std::sqrt(static_cast<double>(nx_ * ny_));
        for (auto& v : a)
            v *= s;
    }

    std::size_t nx_;
    std::size_t ny_;
    std::shared_ptr<const Plans> plans_;
};

} // namespace nldholo
