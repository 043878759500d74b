#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "phi42/core.hpp"
#include "phi42/corr_field.hpp"
#include "phi42/fft.hpp"
#include "phi42/gauss_kernels.hpp"
#include "phi42/grid.hpp"
#include "phi42/lattice_noise.hpp"
#include "phi42/quadrature.hpp"

namespace phi42 {

/// Chebyshev points of the first kind on [0, 1] with barycentric weights.
class ChebyshevNodes {
public:
    explicit ChebyshevNodes(std::size_t n) : u_(n), w_(n) {
        if (n < 2) throw InvalidArgument("need at least two Chebyshev nodes");
        for (std::size_t j = 0; j < n; ++j) {
            const double th = pi * (static_cast<double>(j) + 0.5) / static_cast<double>(n);
            u_[j] = 0.5 * (1.0 - std::cos(th));
            w_[j] = (j % 2 == 0 ? 1.0 : -1.0) * std::sin(th);
        }
    }

    std::size_t size() const { return u_.size(); }
    double node(std::size_t j) const { return u_[j]; }

    /// Lagrange basis values l_j(u), written into `out`.
    void basis(double u, std::vector<double>& out) const {
        out.assign(u_.size(), 0.0);
        double den = 0.0;
        for (std::size_t j = 0; j < u_.size(); ++j) {
            const double d = u - u_[j];
            if (d == 0.0) {
                out.assign(u_.size(), 0.0);
                out[j] = 1.0;
                return;
            }
            out[j] = w_[j] / d;
            den += out[j];
        }
        for (double& v : out) v /= den;
    }

private:
    std::vector<double> u_, w_;
};

/// Solution of the frozen linear equation driven by mollified lattice noise,
///
///   L(z) = int_0^t ds int dy K_{a(z)}(t - s, x - y) xi_delta(s, y),
///
/// with xi_delta = rho_delta * xi where the lattice noise xi acts as point
/// masses dt dx dy xi_n(y') at the lattice times. The spatial part is spectral
/// (continuous Gaussian symbols, periodic box); the time integral against the
/// continuous bump psi_delta is exact through the one-step recursion
///
///   V_{i+1}(k) = exp(-mu dt) V_i(k) + sum_d w_d(mu, k) xi^_{i+d}(k),   mu = k.a k,
///   w_d = rho^(k) dt int_0^dt psi_delta(r - d dt) exp(-mu (dt - r)) dr,
///
/// starting from V = 0 at t = 0. Variable a(z) = A(u(z)) is handled by solving
/// at Chebyshev nodes u_j of the profile parameter and interpolating the
/// solutions (not the matrices) at each target node.
///
/// The grid must contain t = 0 as a node and start at or before -delta^2.
/// Values are exact only for t <= t_end - delta^2 (later slices miss noise
/// beyond the grid).
class LollipopEngine {
public:
    LollipopEngine(const SpaceTimeGrid& grid, const MollifierSpec& spec, const MatrixProfile& profile,
                   std::size_t n_cheb = 24)
        : grid_(grid), spec_(spec), profile_(profile), cheb_(n_cheb), fft_(grid.n_x(), grid.n_y()) {
        spec.require_resolvable(grid);
        origin_ = grid.origin_index();
        if (std::abs(grid.t(origin_)) > 1e-9 * grid.dt()) throw InvalidArgument("t = 0 must be a grid node");
        if (grid.t0() > -spec.time_support() + 1e-12) throw InvalidArgument("grid must start at or before -delta^2");
        reach_ = static_cast<long>(std::ceil(spec.time_support() / grid.dt() - 1e-9));
        const std::size_t nk = fft_.spectral_size();
        kk_.resize(nk);
        rho_hat_.resize(nk);
        for (std::size_t i = 0; i < grid.n_x(); ++i)
            for (std::size_t j = 0; j < fft_.n_half(); ++j) {
                const Vec2 k = fft_.wavenumber(i, j, grid.dx(), grid.dy());
                kk_[i * fft_.n_half() + j] = k;
                rho_hat_[i * fft_.n_half() + j] = spec.spatial_symbol(k);
            }
        for (std::size_t j = 0; j < n_cheb; ++j) tables_.push_back(make_table(profile.at_parameter(cheb_.node(j))));
    }

    const SpaceTimeGrid& grid() const { return grid_; }
    const MollifierSpec& spec() const { return spec_; }
    const ChebyshevNodes& chebyshev() const { return cheb_; }
    std::size_t origin_index() const { return origin_; }

    /// Last time index whose value sees all the noise it depends on.
    std::size_t valid_end() const {
        const long e = static_cast<long>(grid_.n_t()) - 1 - reach_;
        return static_cast<std::size_t>(std::max<long>(e, 0));
    }

    /// lollipop_hat for the coefficient field `coeff` (exact single solve when
    /// coeff is constant). With a mask, variable-coefficient values are only
    /// assembled where mask[idx] != 0 and are zero elsewhere.
    ScalarField solve(const CoeffField& coeff, const ScalarField& xi, const std::vector<std::uint8_t>* mask = nullptr) {
        if (!(coeff.grid() == grid_) || !(xi.grid() == grid_)) throw GridMismatch("engine grid differs from fields");
        transform_noise(xi);
        ScalarField out(grid_);
        if (coeff.is_constant()) {
            const Table t = make_table(coeff.a.front());
            run(t, [&](std::size_t it, std::span<const double> slice) {
                std::copy(slice.begin(), slice.end(), out.slice(it).begin());
            });
            return out;
        }
        // all Chebyshev solutions advance together; each slice is combined with
        // the interpolation weights of its own nodes
        const std::size_t n = cheb_.size(), ns = grid_.slice_size(), nk = fft_.spectral_size();
        std::vector<std::vector<std::complex<double>>> v(n, std::vector<std::complex<double>>(nk));
        std::vector<std::vector<double>> slices(n, std::vector<double>(ns));
        std::vector<double> basis;
        for (std::size_t i = origin_; i + 1 < grid_.n_t(); ++i) {
            const std::size_t base = (i + 1) * ns;
            const bool needed = !mask || std::any_of(mask->begin() + static_cast<std::ptrdiff_t>(base),
                                                     mask->begin() + static_cast<std::ptrdiff_t>(base + ns),
                                                     [](std::uint8_t m) { return m != 0; });
            for (std::size_t j = 0; j < n; ++j) {
                step(tables_[j], v[j], i);
                if (needed) to_slice(v[j], slices[j]);
            }
            if (!needed) continue;
            auto dst = out.slice(i + 1);
            for (std::size_t k = 0; k < ns; ++k) {
                if (mask && !(*mask)[base + k]) continue;
                cheb_.basis(coeff.parameter(base + k), basis);
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += basis[j] * slices[j][k];
                dst[k] = acc;
            }
        }
        return out;
    }

    /// Exact solve with one constant matrix.
    ScalarField solve_constant(const SymMat2& a, const ScalarField& xi) {
        if (!(xi.grid() == grid_)) throw GridMismatch("engine grid differs from noise");
        transform_noise(xi);
        ScalarField out(grid_);
        run(make_table(a), [&](std::size_t it, std::span<const double> slice) {
            std::copy(slice.begin(), slice.end(), out.slice(it).begin());
        });
        return out;
    }

    /// Exact lattice variance of the constant-coefficient solution at time index it:
    ///   sum_n (1 / (dt dx dy)) (1/N) sum_k |H_n(k)|^2,
    ///   H_n(k) = rho^(k) dt int_0^t psi_delta(s - t_n) exp(-mu (t - s)) ds.
    double lattice_variance(const SymMat2& a, std::size_t it) const {
        if (it <= origin_) return 0.0;
        const Table tab = make_table(a);
        const std::size_t nk = fft_.spectral_size();
        const std::size_t ny = grid_.n_y(), nh = fft_.n_half();
        // propagate unit impulses: H for every source n, stepping forward
        const long first = static_cast<long>(origin_) - reach_ - 1;
        double total = 0.0;
        for (long n = std::max<long>(first, 0); n <= static_cast<long>(it) + reach_; ++n) {
            if (n >= static_cast<long>(grid_.n_t())) break;
            std::vector<double> h(nk, 0.0);
            for (std::size_t i = origin_; i < it; ++i) {
                const long d = n - static_cast<long>(i);
                for (std::size_t k = 0; k < nk; ++k) {
                    h[k] *= tab.decay[k];
                    if (d >= -reach_ && d <= reach_ + 1) h[k] += tab.weight(d + reach_, k);
                }
            }
            double s = 0.0;
            for (std::size_t k = 0; k < nk; ++k) {
                // real-to-complex halves: interior columns appear twice
                const std::size_t col = k % nh;
                const double mult = (col == 0 || (ny % 2 == 0 && col == nh - 1)) ? 1.0 : 2.0;
                s += mult * h[k] * h[k];
            }
            total += s;
        }
        const double n_sites = static_cast<double>(grid_.slice_size());
        return total / (grid_.cell_volume() * n_sites);
    }

private:
    struct Table {
        std::vector<double> decay;    // exp(-mu dt)
        std::vector<double> weights;  // (2 reach + 2) x nk, includes rho^ and dt
        std::size_t nk = 0;
        double weight(long d, std::size_t k) const { return weights[static_cast<std::size_t>(d) * nk + k]; }
    };

    Table make_table(const SymMat2& a) const {
        const std::size_t nk = fft_.spectral_size();
        const long nd = 2 * reach_ + 2;
        Table t;
        t.nk = nk;
        t.decay.resize(nk);
        t.weights.assign(static_cast<std::size_t>(nd) * nk, 0.0);
        const double dt = grid_.dt(), d2 = spec_.time_support();
        for (std::size_t k = 0; k < nk; ++k) {
            const Vec2& kv = kk_[k];
            const double mu = a.quad(kv);
            t.decay[k] = std::exp(-mu * dt);
            for (long d = -reach_; d <= reach_ + 1; ++d) {
                const double c = static_cast<double>(d) * dt;
                const double lo = std::max(0.0, c - d2), hi = std::min(dt, c + d2);
                if (!(hi > lo)) continue;
                const double w = integrate_gauss<16>(
                    [&](double r) { return spec_.time_factor(r - c) * std::exp(-mu * (dt - r)); }, lo, hi);
                t.weights[static_cast<std::size_t>(d + reach_) * nk + k] = rho_hat_[k] * dt * w;
            }
        }
        return t;
    }

    void transform_noise(const ScalarField& xi) {
        const std::size_t nk = fft_.spectral_size();
        xi_hat_.assign(grid_.n_t() * nk, {});
        const double area = grid_.cell_area();
        for (std::size_t it = 0; it < grid_.n_t(); ++it) {
            std::span<std::complex<double>> dst(xi_hat_.data() + it * nk, nk);
            fft_.forward(xi.slice(it), dst);
            for (auto& c : dst) c *= area;
        }
    }

    void step(const Table& tab, std::vector<std::complex<double>>& v, std::size_t i) const {
        const std::size_t nk = fft_.spectral_size(), nt = grid_.n_t();
        for (std::size_t k = 0; k < nk; ++k) v[k] *= tab.decay[k];
        for (long d = -reach_; d <= reach_ + 1; ++d) {
            const long n = static_cast<long>(i) + d;
            if (n < 0 || n >= static_cast<long>(nt)) continue;
            const std::complex<double>* src = xi_hat_.data() + static_cast<std::size_t>(n) * nk;
            const double* w = tab.weights.data() + static_cast<std::size_t>(d + reach_) * nk;
            for (std::size_t k = 0; k < nk; ++k) v[k] += w[k] * src[k];
        }
    }

    void to_slice(const std::vector<std::complex<double>>& v, std::vector<double>& slice) {
        fft_.inverse(v, slice);
        const double inv_area = 1.0 / grid_.cell_area();
        for (double& x : slice) x *= inv_area;
    }

    template <class Sink>
    void run(const Table& tab, Sink&& sink) {
        std::vector<std::complex<double>> v(fft_.spectral_size(), {0.0, 0.0});
        std::vector<double> slice(grid_.slice_size());
        for (std::size_t i = origin_; i + 1 < grid_.n_t(); ++i) {
            step(tab, v, i);
            to_slice(v, slice);
            sink(i + 1, std::span<const double>(slice));
        }
    }

    SpaceTimeGrid grid_;
    MollifierSpec spec_;
    MatrixProfile profile_;
    ChebyshevNodes cheb_;
    Fft2 fft_;
    std::size_t origin_ = 0;
    long reach_ = 0;
    std::vector<Vec2> kk_;
    std::vector<double> rho_hat_;
    std::vector<Table> tables_;
    std::vector<std::complex<double>> xi_hat_;
};

/// Real-space evaluation of the same object at one node with matrix a frozen,
/// summing periodic images within one box:
///
///   L = sum_n sum_y' xi_n(y') dt dx dy pi int psi_delta(s - t_n) N(x - y'; 2 (t - s) a + (delta^2/2) Id) ds.
inline double lollipop_direct(const SymMat2& a, const ScalarField& xi, const MollifierSpec& spec, std::size_t it,
                              std::size_t ix, std::size_t iy) {
    const SpaceTimeGrid& g = xi.grid();
    const std::size_t origin = g.origin_index();
    if (it <= origin) return 0.0;
    const double t = g.t(it), d2 = spec.time_support();
    const double px = 2.0 * g.half_width(), py = 2.0 * g.half_width_y();
    double total = 0.0;
    for (std::size_t n = 0; n < g.n_t(); ++n) {
        const double tn = g.t(n);
        const double lo = std::max(0.0, tn - d2), hi = std::min(t, tn + d2);
        if (!(hi > lo)) continue;
        for (std::size_t jx = 0; jx < g.n_x(); ++jx)
            for (std::size_t jy = 0; jy < g.n_y(); ++jy) {
                const double v = xi(n, jx, jy);
                if (v == 0.0) continue;
                const double hx = g.x(ix) - g.x(jx), hy = g.y(iy) - g.y(jy);
                const double w = integrate_gauss<24>(
                    [&](double s) {
                        const SymMat2 cov = (2.0 * (t - s)) * a + SymMat2::scalar(0.5 * d2);
                        double acc = 0.0;
                        for (int mx = -1; mx <= 1; ++mx)
                            for (int my = -1; my <= 1; ++my)
                                acc += gaussian_density_cov(cov, {hx + mx * px, hy + my * py});
                        return spec.time_factor(s - tn) * acc;
                    },
                    lo, hi);
                total += v * g.cell_volume() * pi * w;
            }
    }
    return total;
}

/// c^cherry tabulated per time slice at the Chebyshev nodes of the profile
/// parameter, interpolated per node; exact when the coefficients are constant.
inline ScalarField cherry_counterterm_field(const CoeffField& coeff, const MollifierSpec& spec,
                                            std::size_t n_cheb = 24, const std::vector<std::uint8_t>* mask = nullptr) {
    const SpaceTimeGrid& g = coeff.grid();
    ScalarField c(g);
    const std::size_t ns = g.slice_size();
    if (coeff.is_constant()) {
        for (std::size_t it = 0; it < g.n_t(); ++it) {
            const double v = cherry_counterterm(coeff.a.front(), g.t(it), spec);
            auto s = c.slice(it);
            std::fill(s.begin(), s.end(), v);
        }
        return c;
    }
    const ChebyshevNodes cheb(n_cheb);
    std::vector<double> at_nodes(n_cheb), basis;
    for (std::size_t it = 0; it < g.n_t(); ++it) {
        if (g.t(it) <= 0.0) continue;
        for (std::size_t j = 0; j < n_cheb; ++j)
            at_nodes[j] = cherry_counterterm(coeff.profile.at_parameter(cheb.node(j)), g.t(it), spec);
        auto s = c.slice(it);
        for (std::size_t k = 0; k < ns; ++k) {
            if (mask && !(*mask)[it * ns + k]) continue;
            cheb.basis(coeff.parameter(it * ns + k), basis);
            double v = 0.0;
            for (std::size_t j = 0; j < n_cheb; ++j) v += basis[j] * at_nodes[j];
            s[k] = v;
        }
    }
    return c;
}

}  // namespace phi42
