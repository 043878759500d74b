#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <boost/math/special_functions/expint.hpp>
#include <nlohmann/json.hpp>

#include "phi42/core.hpp"
#include "phi42/lattice_noise.hpp"
#include "phi42/quadrature.hpp"
#include "phi42/rng.hpp"

namespace phi42 {

struct FrozenKernelSpec {
    SymMat2 base_matrix = SymMat2::identity();
    SpaceTimePoint base_point{};

    FrozenKernelSpec() = default;
    FrozenKernelSpec(const SymMat2& a, const SpaceTimePoint& z = {}) : base_matrix(a), base_point(z) {
        if (!(a.eigenvalues()[0] > 0.0)) throw SingularMatrix("frozen matrix is not positive definite");
    }
};

/// K_a(s, y) = 1_{s > 0} exp(-y.a^{-1}y / (4s)) / (4 pi s sqrt(det a)).
inline double frozen_kernel(const SymMat2& a, double s, const Vec2& y) {
    if (s <= 0.0) return 0.0;
    const double d = a.det();
    if (!(d > 0.0)) throw SingularMatrix("determinant " + std::to_string(d));
    return std::exp(-a.inverse().quad(y) / (4.0 * s)) / (4.0 * pi * s * std::sqrt(d));
}

inline double frozen_kernel(const FrozenKernelSpec& spec, double s, const Vec2& y) {
    return frozen_kernel(spec.base_matrix, s, y);
}

struct HeatBoundCertificate {
    double constant = 0.0;
    double prefactor = 0.0;
    std::size_t probes_checked = 0;
    std::size_t violations = 0;

    nlohmann::json to_json() const {
        return {{"C", constant}, {"prefactor", prefactor}, {"probes_checked", probes_checked}, {"violations", violations}};
    }
};

using TwoPointKernel = std::function<double(double s, const Vec2& y)>;

/// Candidate constants C = 2^k, k = -2..8, tried in increasing order.
inline std::vector<double> heat_bound_candidates() {
    std::vector<double> c;
    for (int k = -2; k <= 8; ++k) c.push_back(std::ldexp(1.0, k));
    return c;
}

inline constexpr double heat_bound_prefactor_cap = 1e3;

/// Searches the smallest C for which K(s, y) <= P G_{sqrt s}(y / sqrt C) holds
/// at every probe with a finite prefactor P <= cap; P is the exact sup of the
/// ratio over the probes.
///
/// Probes: s log-spaced over [s_min, 1000 s_min], |y| / sqrt(s) up to
/// min(100, sqrt(1400 C)) (so that the Gaussian envelope stays above double
/// underflow), 8 directions.
inline HeatBoundCertificate certify_heat_bound(const TwoPointKernel& kernel, double lambda, double s_min = 1e-3) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw InvalidArgument("ellipticity must lie in (0, 1]");
    std::size_t probes = 0;
    for (double c : heat_bound_candidates()) {
        const double r_max = std::min(100.0, std::sqrt(1400.0 * c));
        double sup = 0.0;
        std::size_t count = 0;
        for (int i = 0; i <= 30; ++i) {
            const double s = s_min * std::pow(10.0, 3.0 * i / 30.0);
            for (int j = 0; j <= 80; ++j) {
                const double r = r_max * j / 80.0;
                for (int d = 0; d < 8; ++d) {
                    const double th = pi * d / 8.0;
                    const Vec2 y{r * std::sqrt(s) * std::cos(th), r * std::sqrt(s) * std::sin(th)};
                    const double k = kernel(s, y);
                    const double env = std::exp(-0.5 * r * r / c) / (2.0 * pi * s);
                    sup = std::max(sup, k / env);
                    ++count;
                }
            }
        }
        probes += count;
        if (std::isfinite(sup) && sup <= heat_bound_prefactor_cap) {
            const double p = sup > 0.0 ? sup : std::numeric_limits<double>::min();
            return {c, p, probes, 0};
        }
    }
    throw NoBoundFound("no candidate constant bounds the kernel within prefactor " +
                       std::to_string(heat_bound_prefactor_cap));
}

/// C_{z,delta}(K_1, K_2)(z~) for frozen kernels K_1 = K_{a1}, K_2 = K_{a2}
/// anchored at z and z~ with time integrals over [0, t] and [0, t~]:
///
///   pi^2 int_0^t ds1 int_0^t~ ds2 (psi_d * psi_d)(t - t~ - s1 + s2) N(x - x~; 2 s1 a1 + 2 s2 a2 + delta^2 Id).
///
/// All spatial integrals are Gaussian covariance additions; the time double
/// integral is nested adaptive Gauss-Kronrod at relative tolerance rel_tol.
inline double convolution_quantity(const SymMat2& a1, const SpaceTimePoint& z, const SymMat2& a2,
                                   const SpaceTimePoint& zt, const MollifierSpec& spec, double rel_tol = 1e-4) {
    if (z.t < 0.0 || zt.t < 0.0) throw InvalidArgument("base times must be nonnegative");
    const double d2 = spec.delta * spec.delta;
    const double tau = z.t - zt.t;
    const Vec2 h{z.x[0] - zt.x[0], z.x[1] - zt.x[1]};
    auto inner = [&](double s1) {
        // (psi*psi) argument tau - s1 + s2 in (-2 d2, 2 d2)
        const double lo = std::max(0.0, s1 - tau - 2.0 * d2);
        const double hi = std::min(zt.t, s1 - tau + 2.0 * d2);
        if (!(hi > lo)) return 0.0;
        auto f = [&](double s2) {
            const SymMat2 cov = (2.0 * s1) * a1 + (2.0 * s2) * a2 + SymMat2::scalar(d2);
            return spec.time_autoconvolution(tau - s1 + s2) * gaussian_density_cov(cov, h);
        };
        return integrate_adaptive(f, lo, hi, 0.1 * rel_tol, 1e-300);
    };
    const double lo = std::max(0.0, tau - 2.0 * d2);
    const double hi = std::min(z.t, zt.t + tau + 2.0 * d2);
    if (!(hi > lo)) return 0.0;
    return pi * pi * integrate_adaptive(inner, lo, hi, rel_tol, 1e-300);
}

namespace detail {
/// int_{v0}^{v1} dv / sqrt(det(2 v a + d2 Id)) for SPD a.
inline double inverse_sqrt_det_integral(const SymMat2& a, double d2, double v0, double v1) {
    const auto ev = a.eigenvalues();
    const double p = 2.0 * ev[0], q = 2.0 * ev[1];
    auto prim = [&](double v) { return 2.0 / std::sqrt(p * q) * std::log(std::sqrt(q * (p * v + d2)) + std::sqrt(p * (q * v + d2))); };
    return prim(v1) - prim(v0);
}
}  // namespace detail

/// c^cherry_delta at a node of time t with frozen matrix a: the diagonal case
/// of convolution_quantity, reduced to one dimension:
///
///   c = int_0^{min(2 d2, t)} (psi_d * psi_d)(u) int_u^{2t - u} (pi/2) det(2 v a + d2 Id)^{-1/2} dv du,
///
/// inner integral in closed form, outer by a 48-point Gauss rule per smooth piece.
inline double cherry_counterterm(const SymMat2& a, double t, const MollifierSpec& spec) {
    if (t <= 0.0) return 0.0;
    const double d2 = spec.delta * spec.delta;
    const double u_max = std::min(2.0 * d2, t);
    auto f = [&](double u) {
        return spec.time_autoconvolution(u) * 0.5 * pi * detail::inverse_sqrt_det_integral(a, d2, u, 2.0 * t - u);
    };
    // psi*psi is a piecewise polynomial with a knot at u = d2
    const double knot = std::min(d2, u_max);
    return integrate_gauss<48>(f, 0.0, knot) + integrate_gauss<48>(f, knot, u_max);
}

/// Same quantity by adaptive quadrature (throws QuadratureFailure).
inline double cherry_counterterm_adaptive(const SymMat2& a, double t, const MollifierSpec& spec, double rel_tol = 1e-8) {
    if (t <= 0.0) return 0.0;
    const double d2 = spec.delta * spec.delta;
    const double u_max = std::min(2.0 * d2, t);
    auto f = [&](double u) {
        return spec.time_autoconvolution(u) * 0.5 * pi * detail::inverse_sqrt_det_integral(a, d2, u, 2.0 * t - u);
    };
    return integrate_adaptive(f, 0.0, u_max, rel_tol, 1e-300);
}

inline double counterterm_chickenfoot(double c_cherry, double lollipop_hat_value) {
    return 3.0 * c_cherry * lollipop_hat_value;
}

/// Covariance E[L(z1) L(z2)] of the constant-coefficient lollipop with
/// isotropic matrix alpha Id; the same object as convolution_quantity with
/// a1 = a2 = alpha Id, reduced by u = s2 - s1, v = s1 + s2 and the
/// exponential integral:
///
///   int N(h; (2 alpha v + d2) Id) dv = (E1(r^2 / (2 w1)) - E1(r^2 / (2 w0))) / (4 pi alpha),  w = 2 alpha v + d2.
inline double isotropic_lollipop_covariance(double alpha, double t1, double t2, double r, const MollifierSpec& spec) {
    if (t1 <= 0.0 || t2 <= 0.0) return 0.0;
    const double d2 = spec.delta * spec.delta;
    const double tau = t1 - t2;
    const double c = 0.5 * r * r;
    auto v_integral = [&](double v0, double v1) {
        if (!(v1 > v0)) return 0.0;
        const double w0 = 2.0 * alpha * v0 + d2, w1 = 2.0 * alpha * v1 + d2;
        if (c == 0.0) return std::log(w1 / w0) / (4.0 * pi * alpha);
        return (boost::math::expint(1, c / w1) - boost::math::expint(1, c / w0)) / (4.0 * pi * alpha);
    };
    // (psi*psi)(t1 - s1 - t2 + s2) = (psi*psi)(tau + u), u in [-t1, t2]
    auto f = [&](double u) {
        const double v0 = std::abs(u);
        const double v1 = std::min(2.0 * t1 + u, 2.0 * t2 - u);
        return spec.time_autoconvolution(tau + u) * v_integral(v0, v1);
    };
    const double lo = std::max(-t1, -tau - 2.0 * d2);
    const double hi = std::min(t2, -tau + 2.0 * d2);
    if (!(hi > lo)) return 0.0;
    // knots of the integrand: u = 0 (|u|), u = -tau +- d2 (psi*psi), u = t2 - t1 (min)
    std::vector<double> cuts{lo, hi};
    for (double k : {0.0, -tau - d2, -tau, -tau + d2, t2 - t1})
        if (k > lo && k < hi) cuts.push_back(k);
    std::sort(cuts.begin(), cuts.end());
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) s += integrate_gauss<32>(f, cuts[i], cuts[i + 1]);
    return 0.5 * pi * pi * s;
}

struct LogConvolutionEstimate {
    double ell = 0.0;
    double se = 0.0;
    double mean_log_sq = 0.0;  // avg over B_lambda of |log|x - x~||^2
    int alpha_sum = 0;
    /// ell / (|log lambda|^{alpha_sum} (1 + mean_log_sq)^{n/2})
    double normalized = 0.0;
};

/// Monte Carlo average over B_lambda^n (uniform points in the disk of radius
/// lambda about the origin) of
///   prod_i (1 + |log|x_i - x~||) prod_{i != j} (1 + |log|x_i - x_j||)^{alpha_ij}.
inline LogConvolutionEstimate log_convolution_average(int n, const std::vector<std::vector<int>>& alpha, double lambda,
                                                      const Vec2& xt, std::size_t samples, std::uint64_t seed) {
    if (n < 1) throw InvalidArgument("n must be positive");
    if (static_cast<int>(alpha.size()) != n) throw DimensionMismatch("alpha must be n x n");
    if (!(lambda > 0.0 && lambda <= std::exp(-1.0) + 1e-15)) throw InvalidArgument("lambda must lie in (0, 1/e]");
    RandomStream rng(seed);
    auto draw = [&] {
        const double r = lambda * std::sqrt(rng.uniform()), th = 2.0 * pi * rng.uniform();
        return Vec2{r * std::cos(th), r * std::sin(th)};
    };
    auto lg = [](const Vec2& a, const Vec2& b) {
        return std::abs(std::log(std::sqrt(norm2({a[0] - b[0], a[1] - b[1]}))));
    };
    LogConvolutionEstimate est;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) est.alpha_sum += alpha[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    std::vector<Vec2> x(static_cast<std::size_t>(n));
    double sum = 0.0, sum2 = 0.0, lsq = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        for (auto& p : x) p = draw();
        double v = 1.0;
        for (int i = 0; i < n; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            v *= 1.0 + lg(x[ui], xt);
            for (int j = 0; j < n; ++j)
                if (i != j && alpha[ui][static_cast<std::size_t>(j)] != 0)
                    v *= std::pow(1.0 + lg(x[ui], x[static_cast<std::size_t>(j)]), alpha[ui][static_cast<std::size_t>(j)]);
        }
        sum += v;
        sum2 += v * v;
        const double l = lg(draw(), xt);
        lsq += l * l;
    }
    const auto ns = static_cast<double>(samples);
    est.ell = sum / ns;
    est.se = std::sqrt(std::max(0.0, sum2 / ns - est.ell * est.ell) / ns);
    est.mean_log_sq = lsq / ns;
    est.normalized = est.ell / (std::pow(std::abs(std::log(lambda)), est.alpha_sum) *
                                std::pow(1.0 + est.mean_log_sq, 0.5 * n));
    return est;
}

}  // namespace phi42
