#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "phi42/core.hpp"
#include "phi42/grid.hpp"
#include "phi42/quadrature.hpp"
#include "phi42/rng.hpp"

namespace phi42 {

/// Even time bump psi(s) = c (1 - s^2)^4 on [-1, 1], normalized to unit mass.
inline double time_bump(double s) {
    constexpr double c = 315.0 / 256.0;
    if (std::abs(s) >= 1.0) return 0.0;
    const double q = 1.0 - s * s;
    const double q2 = q * q;
    return c * q2 * q2;
}

/// (psi * psi)(w), supported on [-2, 2]. The integrand is a polynomial of
/// degree 16 on the overlap, so a 10-point Gauss rule is exact.
inline double time_bump_autoconvolution(double w) {
    w = std::abs(w);
    if (w >= 2.0) return 0.0;
    return integrate_gauss<10>([w](double s) { return time_bump(s) * time_bump(w - s); }, w - 1.0, 1.0);
}

/// Scale of the space-time mollifier rho_delta(t, x) = psi_delta(t) delta^-2 exp(-|x|^2/delta^2),
/// psi_delta(t) = delta^-2 psi(t / delta^2).
///
/// rho_delta is kept exactly as written: its spatial factor carries mass pi,
/// so the total mass of rho_delta is pi, not 1.
struct MollifierSpec {
    double delta = 0.1;

    explicit MollifierSpec(double d = 0.1) : delta(d) {
        if (!(d > 0.0 && d < 1.0)) throw InvalidArgument("mollifier scale must lie in (0, 1)");
    }

    double time_support() const { return delta * delta; }

    double time_factor(double t) const {
        const double d2 = delta * delta;
        return time_bump(t / d2) / d2;
    }

    double spatial_factor(const Vec2& x) const {
        const double d2 = delta * delta;
        return std::exp(-norm2(x) / d2) / d2;
    }

    double operator()(const SpaceTimePoint& z) const { return time_factor(z.t) * spatial_factor(z.x); }

    /// Continuous Fourier transform of the spatial factor: pi exp(-delta^2 |k|^2 / 4).
    double spatial_symbol(const Vec2& k) const { return pi * std::exp(-0.25 * delta * delta * norm2(k)); }

    /// (psi_delta * psi_delta)(t).
    double time_autoconvolution(double t) const {
        const double d2 = delta * delta;
        return time_bump_autoconvolution(t / d2) / d2;
    }

    /// Spatial self-convolution: pi^2 times the N(0, delta^2 I) density.
    double spatial_autoconvolution(const Vec2& x) const {
        const double d2 = delta * delta;
        return 0.5 * pi / d2 * std::exp(-0.5 * norm2(x) / d2);
    }

    void require_resolvable(const SpaceTimeGrid& grid) const {
        if (delta < 2.0 * std::max(grid.dx(), grid.dy()) * (1.0 - 1e-12) ||
            delta * delta < 2.0 * grid.dt() * (1.0 - 1e-12))
            throw UnresolvableScale("delta=" + std::to_string(delta) + " below grid resolution");
    }
};

/// G_sigma(x) = exp(-|x|^2 / (2 sigma^2)) / (2 pi sigma^2).
inline double gaussian_density(double sigma, const Vec2& x) {
    if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
    const double s2 = sigma * sigma;
    return std::exp(-0.5 * norm2(x) / s2) / (2.0 * pi * s2);
}

/// rho_delta * rho_delta at z: exact product of the time autoconvolution and
/// the closed-form spatial Gaussian self-convolution.
inline double mollifier_autoconvolution(const MollifierSpec& spec, const SpaceTimePoint& z) {
    if (std::abs(z.t) >= 2.0 * spec.time_support()) return 0.0;
    return spec.time_autoconvolution(z.t) * spec.spatial_autoconvolution(z.x);
}

/// Lattice white noise: iid N(0, 1 / cell volume) per node.
inline ScalarField sample_white_noise(const SpaceTimeGrid& grid, std::uint64_t seed) {
    ScalarField xi(grid);
    RandomStream rng(seed);
    const double sd = 1.0 / std::sqrt(grid.cell_volume());
    for (double& v : xi.values()) v = sd * rng.normal();
    return xi;
}

/// L^2 pairing of two lattice fields (Riemann sum).
inline double lattice_inner(const ScalarField& f, const ScalarField& g) {
    require_same_grid(f, g);
    double s = 0.0;
    for (std::size_t i = 0; i < f.data().size(); ++i) s += f.data()[i] * g.data()[i];
    return s * f.grid().cell_volume();
}

/// xi_delta = rho_delta * xi by discrete convolution: the time bump first
/// (zero outside the grid), then the spatial Gaussian truncated at 6 delta,
/// circular in space.
inline ScalarField mollify(const ScalarField& xi, const MollifierSpec& spec) {
    const SpaceTimeGrid& grid = xi.grid();
    spec.require_resolvable(grid);
    const std::size_t nt = grid.n_t(), nx = grid.n_x(), ny = grid.n_y(), ns = grid.slice_size();

    const auto tr = static_cast<long>(std::ceil(spec.time_support() / grid.dt()));
    std::vector<double> tw(2 * tr + 1);
    for (long m = -tr; m <= tr; ++m) tw[m + tr] = spec.time_factor(static_cast<double>(m) * grid.dt()) * grid.dt();

    ScalarField tmp(grid);
    for (std::size_t it = 0; it < nt; ++it) {
        auto out = tmp.slice(it);
        for (long m = -tr; m <= tr; ++m) {
            const long src = static_cast<long>(it) - m;
            if (src < 0 || src >= static_cast<long>(nt) || tw[m + tr] == 0.0) continue;
            auto in = xi.slice(static_cast<std::size_t>(src));
            const double w = tw[m + tr];
            for (std::size_t k = 0; k < ns; ++k) out[k] += w * in[k];
        }
    }

    const double d2 = spec.delta * spec.delta;
    auto taps = [&](double h) {
        const auto r = static_cast<long>(std::floor(6.0 * spec.delta / h));
        std::vector<double> w(2 * r + 1);
        for (long j = -r; j <= r; ++j) {
            const double x = static_cast<double>(j) * h;
            w[j + r] = std::exp(-x * x / d2);
        }
        return w;
    };
    const std::vector<double> wx = taps(grid.dx()), wy = taps(grid.dy());
    const long rx = static_cast<long>(wx.size() / 2), ry = static_cast<long>(wy.size() / 2);
    const double norm = grid.cell_area() / d2;

    ScalarField out(grid);
    std::vector<double> row(ns);
    for (std::size_t it = 0; it < nt; ++it) {
        auto in = tmp.slice(it);
        // along y
        for (std::size_t ix = 0; ix < nx; ++ix)
            for (std::size_t iy = 0; iy < ny; ++iy) {
                double s = 0.0;
                for (long j = -ry; j <= ry; ++j) {
                    const long src = ((static_cast<long>(iy) - j) % static_cast<long>(ny) + static_cast<long>(ny)) %
                                     static_cast<long>(ny);
                    s += wy[j + ry] * in[ix * ny + static_cast<std::size_t>(src)];
                }
                row[ix * ny + iy] = s;
            }
        // along x
        auto dst = out.slice(it);
        for (std::size_t ix = 0; ix < nx; ++ix)
            for (std::size_t iy = 0; iy < ny; ++iy) {
                double s = 0.0;
                for (long j = -rx; j <= rx; ++j) {
                    const long src = ((static_cast<long>(ix) - j) % static_cast<long>(nx) + static_cast<long>(nx)) %
                                     static_cast<long>(nx);
                    s += wx[j + rx] * row[static_cast<std::size_t>(src) * ny + iy];
                }
                dst[ix * ny + iy] = norm * s;
            }
    }
    return out;
}

}  // namespace phi42
