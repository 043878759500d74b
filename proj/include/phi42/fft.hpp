#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "phi42/core.hpp"

namespace phi42 {

namespace detail {
// FFTW planning is not reentrant.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwDeleter {
    void operator()(void* p) const { fftw_free(p); }
};
}  // namespace detail

/// Real-to-complex 2-D transform pair on an n_x by n_y periodic lattice.
///
/// Forward is unnormalized; inverse divides by n_x*n_y so that
/// inverse(forward(f)) == f. Spectral arrays have n_x * (n_y/2 + 1) entries.
class Fft2 {
public:
    Fft2(std::size_t n_x, std::size_t n_y) : n_x_(n_x), n_y_(n_y), n_half_(n_y / 2 + 1) {
        real_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * n_x * n_y)));
        spec_.reset(fftw_malloc(sizeof(fftw_complex) * n_x * n_half_));
        std::lock_guard lock(detail::fftw_planner_mutex());
        auto* c = static_cast<fftw_complex*>(spec_.get());
        forward_ = fftw_plan_dft_r2c_2d(static_cast<int>(n_x), static_cast<int>(n_y), real_.get(), c, FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_c2r_2d(static_cast<int>(n_x), static_cast<int>(n_y), c, real_.get(), FFTW_ESTIMATE);
    }
    Fft2(const Fft2&) = delete;
    Fft2& operator=(const Fft2&) = delete;
    ~Fft2() {
        std::lock_guard lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
    }

    std::size_t n_x() const { return n_x_; }
    std::size_t n_y() const { return n_y_; }
    std::size_t spectral_size() const { return n_x_ * n_half_; }
    std::size_t n_half() const { return n_half_; }

    void forward(std::span<const double> in, std::span<std::complex<double>> out) {
        std::copy(in.begin(), in.end(), real_.get());
        fftw_execute(forward_);
        const auto* c = reinterpret_cast<const std::complex<double>*>(spec_.get());
        std::copy(c, c + spectral_size(), out.begin());
    }

    void inverse(std::span<const std::complex<double>> in, std::span<double> out) {
        auto* c = reinterpret_cast<std::complex<double>*>(spec_.get());
        std::copy(in.begin(), in.end(), c);
        fftw_execute(inverse_);
        const double scale = 1.0 / static_cast<double>(n_x_ * n_y_);
        for (std::size_t i = 0; i < n_x_ * n_y_; ++i) out[i] = real_.get()[i] * scale;
    }

    /// Angular wavenumbers (k1, k2) of spectral entry (i, j).
    Vec2 wavenumber(std::size_t i, std::size_t j, double dx, double dy) const {
        const auto si = static_cast<long>(i) <= static_cast<long>(n_x_ / 2) ? static_cast<long>(i)
                                                                            : static_cast<long>(i) - static_cast<long>(n_x_);
        const double k1 = 2.0 * pi * static_cast<double>(si) / (static_cast<double>(n_x_) * dx);
        const double k2 = 2.0 * pi * static_cast<double>(j) / (static_cast<double>(n_y_) * dy);
        return {k1, k2};
    }

    /// Circular convolution of a lattice field with a kernel given by its
    /// continuous Fourier symbol (times the cell area, so sums approximate integrals).
    template <class Symbol>
    void apply_symbol(std::span<const double> in, std::span<double> out, double dx, double dy, Symbol&& symbol) {
        std::copy(in.begin(), in.end(), real_.get());
        fftw_execute(forward_);
        auto* c = reinterpret_cast<std::complex<double>*>(spec_.get());
        for (std::size_t i = 0; i < n_x_; ++i)
            for (std::size_t j = 0; j < n_half_; ++j) c[i * n_half_ + j] *= symbol(wavenumber(i, j, dx, dy));
        fftw_execute(inverse_);
        const double scale = 1.0 / static_cast<double>(n_x_ * n_y_);
        for (std::size_t i = 0; i < n_x_ * n_y_; ++i) out[i] = real_.get()[i] * scale;
    }

private:
    std::size_t n_x_, n_y_, n_half_;
    std::unique_ptr<double, detail::FftwDeleter> real_;
    std::unique_ptr<void, detail::FftwDeleter> spec_;
    fftw_plan forward_{};
    fftw_plan inverse_{};
};

}  // namespace phi42
