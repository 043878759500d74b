#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <nlohmann/json.hpp>

#include "phi42/core.hpp"
#include "phi42/corr_field.hpp"
#include "phi42/fft.hpp"
#include "phi42/gauss_kernels.hpp"
#include "phi42/grid.hpp"
#include "phi42/lollipop_engine.hpp"

namespace phi42 {

struct ParabolicSolverConfig {
    double tolerance = 1e-10;
    int max_iterations = 500;
};

/// Symbol of -div(a grad) for constant a under the flux discretization below:
///   a11 4 sin^2(k1 dx/2)/dx^2 + a22 4 sin^2(k2 dy/2)/dy^2 + 2 a12 sin(k1 dx) sin(k2 dy)/(dx dy).
inline double discrete_symbol(const SymMat2& a, const Vec2& k, double dx, double dy) {
    const double sx = std::sin(0.5 * k[0] * dx), sy = std::sin(0.5 * k[1] * dy);
    return a.xx * 4.0 * sx * sx / (dx * dx) + a.yy * 4.0 * sy * sy / (dy * dy) +
           2.0 * a.xy * std::sin(k[0] * dx) * std::sin(k[1] * dy) / (dx * dy);
}

/// Implicit Euler for d_t u - div(a grad u) = f on the periodic lattice.
///
/// Flux form: a at a face is the average of its two cells (taken at the new
/// time); the normal flux uses a two-point difference, the tangential
/// derivative a four-point average. Spatial sums are conserved exactly.
class ImplicitParabolicSolver {
public:
    ImplicitParabolicSolver(const CoeffField& coeff, const ParabolicSolverConfig& config = {})
        : coeff_(coeff), config_(config) {
        symmetric_ = std::all_of(coeff.a.begin(), coeff.a.end(), [](const SymMat2& m) { return m.xy == 0.0; });
    }

    const SpaceTimeGrid& grid() const { return coeff_.grid(); }

    /// System matrix I - dt L with coefficients of time slice it.
    Eigen::SparseMatrix<double> system_matrix(std::size_t it) const {
        const SpaceTimeGrid& g = grid();
        const long nx = static_cast<long>(g.n_x()), ny = static_cast<long>(g.n_y());
        const double dx = g.dx(), dy = g.dy(), dt = g.dt();
        auto id = [&](long ix, long iy) {
            return static_cast<int>(((ix % nx + nx) % nx) * ny + ((iy % ny + ny) % ny));
        };
        auto a = [&](long ix, long iy) -> const SymMat2& {
            return coeff_(it, static_cast<std::size_t>((ix % nx + nx) % nx), static_cast<std::size_t>((iy % ny + ny) % ny));
        };
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(nx * ny * 13));
        for (long ix = 0; ix < nx; ++ix)
            for (long iy = 0; iy < ny; ++iy) {
                const int row = id(ix, iy);
                trip.emplace_back(row, row, 1.0);
                // x faces at ix + 1/2 (sign +1) and ix - 1/2 (sign -1)
                for (int side : {+1, -1}) {
                    const long jx = ix + side;
                    const SymMat2 f = 0.5 * (a(ix, iy) + a(jx, iy));
                    const double s = dt / dx * static_cast<double>(side);
                    // flux F = a11 (u_j - u_i)/dx * side + a12 * (avg y-derivative)
                    // contribution to L u: + side * F / dx  (div = (F+ - F-)/dx)
                    const double cn = f.xx / dx;
                    trip.emplace_back(row, id(jx, iy), -s * cn * static_cast<double>(side));
                    trip.emplace_back(row, row, s * cn * static_cast<double>(side));
                    const double ct = f.xy / (4.0 * dy);
                    for (long cx : {ix, jx}) {
                        trip.emplace_back(row, id(cx, iy + 1), -s * ct);
                        trip.emplace_back(row, id(cx, iy - 1), s * ct);
                    }
                }
                for (int side : {+1, -1}) {
                    const long jy = iy + side;
                    const SymMat2 f = 0.5 * (a(ix, iy) + a(ix, jy));
                    const double s = dt / dy * static_cast<double>(side);
                    const double cn = f.yy / dy;
                    trip.emplace_back(row, id(ix, jy), -s * cn * static_cast<double>(side));
                    trip.emplace_back(row, row, s * cn * static_cast<double>(side));
                    const double ct = f.xy / (4.0 * dx);
                    for (long cy : {iy, jy}) {
                        trip.emplace_back(row, id(ix + 1, cy), -s * ct);
                        trip.emplace_back(row, id(ix - 1, cy), s * ct);
                    }
                }
            }
        Eigen::SparseMatrix<double> m(nx * ny, nx * ny);
        m.setFromTriplets(trip.begin(), trip.end());
        return m;
    }

    /// u <- (I - dt L_{it})^{-1} (u + dt f), f optional.
    void step(std::vector<double>& u, std::size_t it, const double* f = nullptr) const {
        const std::size_t n = u.size();
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) rhs[static_cast<Eigen::Index>(i)] = u[i] + (f ? grid().dt() * f[i] : 0.0);
        const Eigen::SparseMatrix<double> m = system_matrix(it);
        Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(n));
        Eigen::VectorXd x;
        if (symmetric_) {
            Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
            cg.setTolerance(config_.tolerance);
            cg.setMaxIterations(config_.max_iterations);
            cg.compute(m);
            x = cg.solveWithGuess(rhs, x0);
            if (cg.info() != Eigen::Success) throw LinearSolveFailure("conjugate gradient did not converge");
        } else {
            Eigen::BiCGSTAB<Eigen::SparseMatrix<double>> bi;
            bi.setTolerance(config_.tolerance);
            bi.setMaxIterations(config_.max_iterations);
            bi.compute(m);
            x = bi.solveWithGuess(rhs, x0);
            if (bi.info() != Eigen::Success) throw LinearSolveFailure("BiCGSTAB did not converge");
        }
        for (std::size_t i = 0; i < n; ++i) u[i] = x[static_cast<Eigen::Index>(i)];
    }

private:
    const CoeffField& coeff_;
    ParabolicSolverConfig config_;
    bool symmetric_ = false;
};

/// Gamma(., z') on the grid for t >= t'.
struct GreenColumn {
    std::size_t source_t = 0, source_x = 0, source_y = 0;
    SpaceTimeGrid grid;
    std::vector<std::vector<double>> slices;  // slices[k] is time index source_t + k

    double operator()(std::size_t it, std::size_t ix, std::size_t iy) const {
        if (it < source_t) return 0.0;
        return slices[it - source_t][ix * grid.n_y() + iy];
    }

    double mass(std::size_t k) const {
        double s = 0.0;
        for (double v : slices[k]) s += v;
        return s * grid.cell_area();
    }
};

/// Evolves a discrete spatial delta (1 / cell area at x') from t' to time
/// index it_end.
inline GreenColumn solve_parabolic(const CoeffField& coeff, std::size_t it_src, std::size_t ix_src, std::size_t iy_src,
                                   std::size_t it_end, const ParabolicSolverConfig& config = {}) {
    const SpaceTimeGrid& g = coeff.grid();
    if (it_src >= g.n_t() - 1 || it_end >= g.n_t() || it_end < it_src || ix_src >= g.n_x() || iy_src >= g.n_y())
        throw InvalidArgument("source or end outside the grid");
    GreenColumn col{it_src, ix_src, iy_src, g, {}};
    std::vector<double> u(g.slice_size(), 0.0);
    u[ix_src * g.n_y() + iy_src] = 1.0 / g.cell_area();
    col.slices.push_back(u);
    const ImplicitParabolicSolver solver(coeff, config);
    for (std::size_t it = it_src + 1; it <= it_end; ++it) {
        solver.step(u, it);
        col.slices.push_back(u);
    }
    return col;
}

/// R(z, z') = Gamma(z, z') - K_{a(z)}(z - z') for z on the column's grid.
inline double regular_part(const CoeffField& coeff, const GreenColumn& col, std::size_t it, std::size_t ix,
                           std::size_t iy) {
    const SpaceTimeGrid& g = coeff.grid();
    if (it <= col.source_t) throw InvalidArgument("need t > t'");
    const double s = g.t(it) - g.t(col.source_t);
    const Vec2 y = g.spatial_offset({g.x(ix), g.y(iy)}, {g.x(col.source_x), g.y(col.source_y)});
    return col(it, ix, iy) - frozen_kernel(coeff(it, ix, iy), s, y);
}

/// Implicit Euler for one constant matrix, diagonal in Fourier space.
class FrozenImplicitSolver {
public:
    FrozenImplicitSolver(const SpaceTimeGrid& grid, const SymMat2& a) : grid_(grid), fft_(grid.n_x(), grid.n_y()) {
        factor_.resize(fft_.spectral_size());
        for (std::size_t i = 0; i < grid.n_x(); ++i)
            for (std::size_t j = 0; j < fft_.n_half(); ++j) {
                const Vec2 k = fft_.wavenumber(i, j, grid.dx(), grid.dy());
                factor_[i * fft_.n_half() + j] = 1.0 / (1.0 + grid.dt() * discrete_symbol(a, k, grid.dx(), grid.dy()));
            }
        spec_.resize(fft_.spectral_size());
        work_.resize(grid.slice_size());
    }

    void step(std::vector<double>& u, const double* f = nullptr) {
        for (std::size_t i = 0; i < u.size(); ++i) work_[i] = u[i] + (f ? grid_.dt() * f[i] : 0.0);
        fft_.forward(work_, spec_);
        for (std::size_t k = 0; k < spec_.size(); ++k) spec_[k] *= factor_[k];
        fft_.inverse(spec_, u);
    }

private:
    SpaceTimeGrid grid_;
    Fft2 fft_;
    std::vector<double> factor_;
    std::vector<std::complex<double>> spec_;
    std::vector<double> work_;
};

/// v solving d_t v - div(a grad v) = f with v = 0 at t = 0 (implicit Euler,
/// source taken at the new time).
inline ScalarField solve_driven(const CoeffField& coeff, const ScalarField& f, const ParabolicSolverConfig& config = {}) {
    const SpaceTimeGrid& g = coeff.grid();
    require_same_grid(coeff.g, f);
    ScalarField v(g);
    std::vector<double> u(g.slice_size(), 0.0);
    const ImplicitParabolicSolver solver(coeff, config);
    for (std::size_t it = g.origin_index() + 1; it < g.n_t(); ++it) {
        solver.step(u, it, f.slice(it).data());
        std::copy(u.begin(), u.end(), v.slice(it).begin());
    }
    return v;
}

/// int R_delta(z, z') f(z') dz' on the lattice: the variable-coefficient
/// solution minus the frozen-at-target solution, where the frozen solutions
/// use the same implicit scheme with constant matrices A(u_j) at Chebyshev
/// nodes of the profile parameter, interpolated per node. With constant
/// coefficients the result vanishes up to the linear-solver tolerance.
inline ScalarField regular_part_field(const CoeffField& coeff, const ScalarField& f, std::size_t n_cheb = 24,
                                      const ParabolicSolverConfig& config = {}) {
    const SpaceTimeGrid& g = coeff.grid();
    ScalarField r = solve_driven(coeff, f, config);
    const std::size_t ns = g.slice_size();
    auto subtract_frozen = [&](const SymMat2& a, auto&& weight) {
        FrozenImplicitSolver fr(g, a);
        std::vector<double> u(ns, 0.0);
        for (std::size_t it = g.origin_index() + 1; it < g.n_t(); ++it) {
            fr.step(u, f.slice(it).data());
            auto dst = r.slice(it);
            for (std::size_t k = 0; k < ns; ++k) dst[k] -= weight(it * ns + k) * u[k];
        }
    };
    if (coeff.is_constant()) {
        subtract_frozen(coeff.a.front(), [](std::size_t) { return 1.0; });
        return r;
    }
    const ChebyshevNodes cheb(n_cheb);
    std::vector<double> basis;
    for (std::size_t j = 0; j < n_cheb; ++j) {
        subtract_frozen(coeff.profile.at_parameter(cheb.node(j)), [&](std::size_t idx) {
            cheb.basis(coeff.parameter(idx), basis);
            return basis[j];
        });
    }
    return r;
}

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    double window_lo = 0.0, window_hi = 0.0;

    nlohmann::json to_json() const {
        return {{"slope", slope}, {"intercept", intercept}, {"r2", r2}, {"window", {window_lo, window_hi}}};
    }
};

/// Ordinary least squares of y on x.
inline SlopeFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InsufficientPoints("need at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw InsufficientPoints("abscissae coincide");
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
    f.window_lo = *std::min_element(x.begin(), x.end());
    f.window_hi = *std::max_element(x.begin(), x.end());
    return f;
}

}  // namespace phi42
