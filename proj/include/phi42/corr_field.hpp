#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "phi42/core.hpp"
#include "phi42/fft.hpp"
#include "phi42/grid.hpp"
#include "phi42/lattice_noise.hpp"
#include "phi42/quadrature.hpp"
#include "phi42/rng.hpp"

namespace phi42 {

enum class KernelFamily { gaussian_bump, compact_bump, zero };

inline KernelFamily parse_kernel_family(const std::string& s) {
    if (s == "gaussian_bump") return KernelFamily::gaussian_bump;
    if (s == "compact_bump") return KernelFamily::compact_bump;
    if (s == "zero") return KernelFamily::zero;
    throw InvalidArgument("unknown correlation family '" + s + "'");
}

inline std::string to_string(KernelFamily f) {
    switch (f) {
        case KernelFamily::gaussian_bump: return "gaussian_bump";
        case KernelFamily::compact_bump: return "compact_bump";
        case KernelFamily::zero: return "zero";
    }
    return "zero";
}

/// Separable correlation kernel m(t, x) = amplitude * m_t(t) * m_x(x).
///
/// gaussian_bump: m_t = exp(-|t|/l^2), m_x = exp(-|x|^2/l^2), i.e. exp(-|z|^2/l^2)
///                in the parabolic norm.
/// compact_bump:  m_t = (1 - t^2/l^4)^3_+, m_x = (1 - |x|^2/l^2)^3_+.
struct CorrelationKernel {
    KernelFamily family = KernelFamily::zero;
    double scale = 0.3;
    double amplitude = 10.0;
    double holder_alpha = 0.9;
    double weight_sigma = 1.0;

    CorrelationKernel() = default;
    CorrelationKernel(KernelFamily f, double l, double amp, double alpha = 0.9)
        : family(f), scale(l), amplitude(amp), holder_alpha(alpha) {
        if (f != KernelFamily::zero && !(l > 0.0)) throw InvalidArgument("kernel scale must be positive");
        if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("Hoelder exponent must lie in (0, 1)");
    }

    static CorrelationKernel zero() { return {}; }

    double time_factor(double t) const {
        const double l2 = scale * scale;
        switch (family) {
            case KernelFamily::gaussian_bump: return std::exp(-std::abs(t) / l2);
            case KernelFamily::compact_bump: {
                const double q = 1.0 - t * t / (l2 * l2);
                return q > 0.0 ? q * q * q : 0.0;
            }
            case KernelFamily::zero: return 0.0;
        }
        return 0.0;
    }

    double spatial_factor(const Vec2& x) const {
        const double r2 = norm2(x) / (scale * scale);
        switch (family) {
            case KernelFamily::gaussian_bump: return std::exp(-r2);
            case KernelFamily::compact_bump: {
                const double q = 1.0 - r2;
                return q > 0.0 ? q * q * q : 0.0;
            }
            case KernelFamily::zero: return 0.0;
        }
        return 0.0;
    }

    double operator()(const SpaceTimePoint& z) const {
        if (family == KernelFamily::zero) return 0.0;
        return amplitude * time_factor(z.t) * spatial_factor(z.x);
    }

    /// Time autocorrelation int m_t(s) m_t(s + tau) ds.
    double time_autocorrelation(double tau) const {
        const double l2 = scale * scale;
        tau = std::abs(tau);
        switch (family) {
            case KernelFamily::gaussian_bump: return (l2 + tau) * std::exp(-tau / l2);
            case KernelFamily::compact_bump:
                if (tau >= 2.0 * l2) return 0.0;
                return integrate_gauss<16>([&](double s) { return time_factor(s) * time_factor(s + tau); }, -l2, l2 - tau);
            case KernelFamily::zero: return 0.0;
        }
        return 0.0;
    }

    /// Spatial autocorrelation int m_x(y) m_x(y + h) dy.
    double spatial_autocorrelation(const Vec2& h) const {
        const double l2 = scale * scale;
        switch (family) {
            case KernelFamily::gaussian_bump: return 0.5 * pi * l2 * std::exp(-0.5 * norm2(h) / l2);
            case KernelFamily::compact_bump: {
                // polar quadrature over the unit disk around the origin, the
                // product is a polynomial on the overlap lens
                const double hn = std::sqrt(norm2(h));
                if (hn >= 2.0 * scale) return 0.0;
                auto radial = [&](double r) {
                    return r * integrate_gauss<32>(
                                   [&](double th) {
                                       const Vec2 y{r * std::cos(th), r * std::sin(th)};
                                       return spatial_factor(y) * spatial_factor({y[0] + h[0], y[1] + h[1]});
                                   },
                                   0.0, 2.0 * pi);
                };
                return integrate_adaptive(radial, 0.0, scale, 1e-8, 1e-16);
            }
            case KernelFamily::zero: return 0.0;
        }
        return 0.0;
    }

    /// Cov(g(z), g(z + (tau, h))) for g = m * xi.
    double driver_covariance(double tau, const Vec2& h) const {
        if (family == KernelFamily::zero) return 0.0;
        return amplitude * amplitude * time_autocorrelation(tau) * spatial_autocorrelation(h);
    }

    /// ||m||_{L^2}^2 = Var g(z).
    double l2_norm_squared() const { return driver_covariance(0.0, {0.0, 0.0}); }

    /// E|g(z) - g(z')|^2 = ||m(z - .) - m(z' - .)||^2.
    double increment_variance(double tau, const Vec2& h) const {
        return 2.0 * (l2_norm_squared() - driver_covariance(tau, h));
    }

    /// sup over parabolic offsets of E|g(z) - g(z')|^2 / |z - z'|^{2 alpha},
    /// scanned on a log-spaced set of offsets in time and space.
    double increment_holder_constant(double alpha) const {
        if (family == KernelFamily::zero) return 0.0;
        double c = 0.0;
        for (int i = 0; i <= 60; ++i) {
            const double r = scale * std::pow(10.0, -3.0 + 5.0 * i / 60.0);
            for (int j = 0; j <= 8; ++j) {
                const double w = static_cast<double>(j) / 8.0;  // fraction of r^2 carried by time
                const double tau = w * r * r;
                const double h = std::sqrt((1.0 - w) * r * r);
                c = std::max(c, increment_variance(tau, {h, 0.0}) / std::pow(r, 2.0 * alpha));
            }
        }
        return c;
    }
};

/// Smooth map A from the driver g to 2x2 matrices with spectrum in (lambda, 1).
///
/// Both profiles factor through u = logistic(g) in (0, 1):
///   isotropic_logistic:   A = (lambda + (1 - lambda) u) Id
///   anisotropic_rotation: A = R(theta) diag(d1, d2) R(theta)^T with
///                         d1 = lambda + (1 - lambda) u, d2 = lambda + (1 - lambda)(1 - u),
///                         theta = theta_max (2u - 1)
/// so A(0) = ((1 + lambda)/2) Id for both.
enum class ProfileKind { isotropic_logistic, anisotropic_rotation };

inline ProfileKind parse_profile_kind(const std::string& s) {
    if (s == "isotropic_logistic") return ProfileKind::isotropic_logistic;
    if (s == "anisotropic_rotation") return ProfileKind::anisotropic_rotation;
    throw InvalidArgument("unknown matrix profile '" + s + "'");
}

inline std::string to_string(ProfileKind k) {
    return k == ProfileKind::isotropic_logistic ? "isotropic_logistic" : "anisotropic_rotation";
}

inline double logistic(double g) { return 1.0 / (1.0 + std::exp(-g)); }

struct MatrixProfile {
    ProfileKind kind = ProfileKind::isotropic_logistic;
    double lambda = 0.5;
    double theta_max = 0.25 * pi;

    MatrixProfile() = default;
    MatrixProfile(ProfileKind k, double l, double th = 0.25 * pi) : kind(k), lambda(l), theta_max(th) {
        if (!(l > 0.0 && l < 1.0)) throw InvalidArgument("ellipticity must lie in (0, 1)");
    }

    /// A as a function of the profile parameter u in [0, 1].
    SymMat2 at_parameter(double u) const {
        const double d1 = lambda + (1.0 - lambda) * u;
        if (kind == ProfileKind::isotropic_logistic) return SymMat2::scalar(d1);
        const double d2 = lambda + (1.0 - lambda) * (1.0 - u);
        const double th = theta_max * (2.0 * u - 1.0);
        const double c = std::cos(th), s = std::sin(th);
        return {c * c * d1 + s * s * d2, c * s * (d1 - d2), s * s * d1 + c * c * d2};
    }

    SymMat2 operator()(double g) const { return at_parameter(logistic(g)); }
};

struct CoeffField {
    ScalarField g;
    std::vector<SymMat2> a;
    MatrixProfile profile;

    const SpaceTimeGrid& grid() const { return g.grid(); }
    const SymMat2& operator()(std::size_t it, std::size_t ix, std::size_t iy) const {
        return a[grid().index(it, ix, iy)];
    }
    /// Profile parameter u = logistic(g) at a node.
    double parameter(std::size_t idx) const { return logistic(g.data()[idx]); }
    bool is_constant() const {
        return std::all_of(a.begin(), a.end(), [&](const SymMat2& m) { return m == a.front(); });
    }
};

namespace detail {
/// Circular spatial convolution of every time slice with a kernel sampled on
/// the lattice (minimal image, truncated at radius `cutoff`), times cell area.
template <class Kernel>
void convolve_slices_spatial(ScalarField& f, Kernel&& kernel, double cutoff) {
    const SpaceTimeGrid& grid = f.grid();
    const std::size_t nx = grid.n_x(), ny = grid.n_y();
    Fft2 fft(nx, ny);
    std::vector<double> k(grid.slice_size());
    for (std::size_t ix = 0; ix < nx; ++ix)
        for (std::size_t iy = 0; iy < ny; ++iy) {
            const Vec2 d{SpaceTimeGrid::wrap(static_cast<double>(ix) * grid.dx(), 2.0 * grid.half_width()),
                         SpaceTimeGrid::wrap(static_cast<double>(iy) * grid.dy(), 2.0 * grid.half_width_y())};
            k[ix * ny + iy] = norm2(d) <= cutoff * cutoff ? kernel(d) * grid.cell_area() : 0.0;
        }
    std::vector<std::complex<double>> kh(fft.spectral_size()), sh(fft.spectral_size());
    fft.forward(k, kh);
    for (std::size_t it = 0; it < grid.n_t(); ++it) {
        auto s = f.slice(it);
        fft.forward(s, sh);
        for (std::size_t i = 0; i < sh.size(); ++i) sh[i] *= kh[i];
        fft.inverse(sh, s);
    }
}
}  // namespace detail

/// g = m * xi.
///
/// Space: circular lattice convolution with the spatial factor truncated at 6l.
/// Time, gaussian_bump: the two-sided exponential is applied by an exact causal
/// plus anti-causal recursion; the noise before the first and after the last
/// slice is replaced by its exact stationary summary, drawn from the
/// driver_history stream of `history_seed`, so g is stationary on the whole grid.
/// Time, compact_bump: direct taps over |t| <= l^2, zero outside the grid (the
/// grid's leading pad must cover l^2 for stationarity on t >= 0).
inline ScalarField build_driver(const CorrelationKernel& m, const ScalarField& xi, std::uint64_t history_seed = 0) {
    const SpaceTimeGrid& grid = xi.grid();
    ScalarField g(grid);
    if (m.family == KernelFamily::zero) return g;
    if (m.scale < 2.0 * std::max(grid.dx(), grid.dy()) * (1.0 - 1e-12))
        throw UnresolvableScale("correlation scale below 2 dx");

    const std::size_t nt = grid.n_t(), ns = grid.slice_size();
    const double dt = grid.dt(), l2 = m.scale * m.scale;
    auto spatial = [&](const Vec2& d) { return m.spatial_factor(d); };
    const double cutoff = 6.0 * m.scale;

    if (m.family == KernelFamily::gaussian_bump) {
        ScalarField filtered = xi;
        detail::convolve_slices_spatial(filtered, spatial, cutoff);
        // stationary history summaries: H ~ dt * sum_{n>=0} r^n S xi_n
        const double r = std::exp(-dt / l2);
        const double hist_scale = dt / std::sqrt(1.0 - r * r);
        const SpaceTimeGrid two(2, grid.n_x(), grid.n_y(), grid.dt(), grid.dx(), grid.dy(), grid.t0());
        ScalarField eta = sample_white_noise(two, history_seed);
        detail::convolve_slices_spatial(eta, spatial, cutoff);

        std::vector<double> state(ns);
        auto past = eta.slice(0), future = eta.slice(1);
        for (std::size_t k = 0; k < ns; ++k) state[k] = hist_scale * past[k];
        for (std::size_t it = 0; it < nt; ++it) {
            auto src = filtered.slice(it);
            auto dst = g.slice(it);
            for (std::size_t k = 0; k < ns; ++k) {
                state[k] = r * state[k] + dt * src[k];
                dst[k] = state[k];
            }
        }
        for (std::size_t k = 0; k < ns; ++k) state[k] = hist_scale * future[k];
        for (std::size_t it = nt; it-- > 0;) {
            auto src = filtered.slice(it);
            auto dst = g.slice(it);
            for (std::size_t k = 0; k < ns; ++k) {
                state[k] *= r;  // anti-causal part excludes the current slice
                dst[k] += state[k];
                state[k] += dt * src[k];
            }
        }
    } else {
        const auto tr = static_cast<long>(std::floor(l2 / dt));
        for (std::size_t it = 0; it < nt; ++it) {
            auto dst = g.slice(it);
            for (long j = -tr; j <= tr; ++j) {
                const long src = static_cast<long>(it) - j;
                if (src < 0 || src >= static_cast<long>(nt)) continue;
                const double w = m.time_factor(static_cast<double>(j) * dt) * dt;
                auto in = xi.slice(static_cast<std::size_t>(src));
                for (std::size_t k = 0; k < ns; ++k) dst[k] += w * in[k];
            }
        }
        detail::convolve_slices_spatial(g, spatial, cutoff);
    }
    for (double& v : g.data()) v *= m.amplitude;
    return g;
}

inline CoeffField build_coefficients(const ScalarField& g, const MatrixProfile& profile) {
    CoeffField c{g, std::vector<SymMat2>(g.data().size()), profile};
    constexpr double tol = 1e-12;
    for (std::size_t i = 0; i < c.a.size(); ++i) {
        c.a[i] = profile(g.data()[i]);
        const auto ev = c.a[i].eigenvalues();
        if (ev[0] < profile.lambda - tol || ev[1] > 1.0 + tol)
            throw EllipticityViolation("eigenvalues (" + std::to_string(ev[0]) + ", " + std::to_string(ev[1]) +
                                       ") outside [lambda, 1]");
    }
    return c;
}

/// Constant coefficients a = A(0): the decoupled baseline.
inline CoeffField constant_coefficients(const SpaceTimeGrid& grid, const MatrixProfile& profile) {
    return build_coefficients(ScalarField(grid), profile);
}

/// Region {|t - t_c| <= r^2, |x - x_c| <= r}.
struct Cylinder {
    SpaceTimePoint center;
    double radius = 1.0;
};

/// Discrete Hoelder seminorm: max over node pairs in the cylinder of
/// |f(z) - f(z')| / |z - z'|^alpha in the parabolic distance. `stride`
/// subsamples the nodes along every axis.
inline double holder_seminorm_estimate(const ScalarField& f, double alpha, const Cylinder& cyl,
                                       std::size_t stride = 1) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0, 1]");
    if (stride == 0) throw InvalidArgument("stride must be positive");
    const SpaceTimeGrid& grid = f.grid();
    struct Node {
        SpaceTimePoint z;
        double v;
    };
    std::vector<Node> nodes;
    const double r2 = cyl.radius * cyl.radius;
    for (std::size_t it = 0; it < grid.n_t(); it += stride) {
        if (std::abs(grid.t(it) - cyl.center.t) > r2) continue;
        for (std::size_t ix = 0; ix < grid.n_x(); ix += stride)
            for (std::size_t iy = 0; iy < grid.n_y(); iy += stride) {
                const SpaceTimePoint z = grid.point(it, ix, iy);
                const Vec2 d{z.x[0] - cyl.center.x[0], z.x[1] - cyl.center.x[1]};
                if (norm2(d) <= r2) nodes.push_back({z, f(it, ix, iy)});
            }
    }
    if (nodes.size() < 16) throw EmptyRegion("cylinder holds " + std::to_string(nodes.size()) + " nodes");
    double best = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            const double diff = std::abs(nodes[i].v - nodes[j].v);
            if (diff == 0.0) continue;
            best = std::max(best, diff / std::pow(parabolic_distance(nodes[i].z, nodes[j].z), alpha));
        }
    return best;
}

}  // namespace phi42
