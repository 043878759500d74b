#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "phi42/core.hpp"
#include "phi42/corr_field.hpp"
#include "phi42/gauss_kernels.hpp"
#include "phi42/grid.hpp"
#include "phi42/lattice_noise.hpp"
#include "phi42/lollipop_engine.hpp"

namespace phi42 {

/// Unit test profile (4s(1-s))^4_+ (1-|y|^2)^4_+ on C_1 = [0,1) x B_1, sup 1 at (1/2, 0).
inline double test_profile(double s, const Vec2& y) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    const double r2 = norm2(y);
    if (r2 >= 1.0) return 0.0;
    const double a = 4.0 * s * (1.0 - s), b = 1.0 - r2;
    const double a2 = a * a, b2 = b * b;
    return a2 * a2 * b2 * b2;
}

/// int over C_1 of the profile: 256 B(5,5) * pi/5.
inline constexpr double test_profile_integral = 256.0 / 630.0 * pi / 5.0;

/// psi^lambda(z) = lambda^-4 profile((t - t*)/lambda^2, (x - x*)/lambda), supported in C_lambda(*).
struct TestFunction {
    double lambda = std::exp(-1.0);
    SpaceTimePoint base{};

    TestFunction() = default;
    TestFunction(double l, const SpaceTimePoint& b) : lambda(l), base(b) {
        if (!(l > 0.0 && l <= std::exp(-1.0) * (1.0 + 1e-12))) throw InvalidArgument("lambda must lie in (0, 1/e]");
    }

    double operator()(const SpaceTimePoint& z) const {
        const double l2 = lambda * lambda;
        return test_profile((z.t - base.t) / l2, {(z.x[0] - base.x[0]) / lambda, (z.x[1] - base.x[1]) / lambda}) /
               (l2 * l2);
    }
};

/// A test function sampled on a grid: node indices with weight psi^lambda(z) * cell volume.
struct SampledTest {
    std::vector<std::size_t> index;
    std::vector<double> weight;
};

inline SampledTest sample_test_function(const SpaceTimeGrid& grid, const TestFunction& test) {
    const double l = test.lambda, l2 = l * l;
    if (l2 < 2.0 * grid.dt() * (1.0 - 1e-12) || l < 2.0 * std::max(grid.dx(), grid.dy()) * (1.0 - 1e-12))
        throw UnresolvableScale("lambda below grid resolution");
    const auto& b = test.base;
    if (b.t < grid.t0() - 1e-12 || b.t + l2 > grid.t_end() + 1e-12 || std::abs(b.x[0]) + l > grid.half_width() ||
        std::abs(b.x[1]) + l > grid.half_width_y())
        throw SupportEscapesGrid("test function support leaves the grid box");
    SampledTest s;
    for (std::size_t it = 0; it < grid.n_t(); ++it) {
        const double t = grid.t(it);
        if (t <= b.t || t >= b.t + l2) continue;
        for (std::size_t ix = 0; ix < grid.n_x(); ++ix) {
            if (std::abs(grid.x(ix) - b.x[0]) >= l) continue;
            for (std::size_t iy = 0; iy < grid.n_y(); ++iy) {
                const double w = test(grid.point(it, ix, iy));
                if (w == 0.0) continue;
                s.index.push_back(grid.index(it, ix, iy));
                s.weight.push_back(w * grid.cell_volume());
            }
        }
    }
    return s;
}

inline double pair(const ScalarField& field, const SampledTest& test) {
    double acc = 0.0;
    for (std::size_t i = 0; i < test.index.size(); ++i) acc += field.data()[test.index[i]] * test.weight[i];
    return acc;
}

/// Riemann-sum pairing (field, psi^lambda).
inline double pair(const ScalarField& field, const TestFunction& test) {
    return pair(field, sample_test_function(field.grid(), test));
}

struct TreeRealization {
    CoeffField coeff;
    ScalarField xi;  // raw lattice noise; xi_delta = rho_delta * xi
    MollifierSpec spec;
    ScalarField lollipop_hat;
    ScalarField c_cherry;
    ScalarField cherry_bar;
    ScalarField chickenfoot_bar;
    std::uint64_t seed = 0;
    std::uint64_t realization = 0;

    ScalarField xi_delta() const { return mollify(xi, spec); }
};

/// cherry_bar = l^2 - c and chickenfoot_bar = l^3 - 3 c l, pointwise.
inline void renormalize(TreeRealization& r) {
    const auto& l = r.lollipop_hat.data();
    const auto& c = r.c_cherry.data();
    r.cherry_bar = ScalarField(r.lollipop_hat.grid());
    r.chickenfoot_bar = ScalarField(r.lollipop_hat.grid());
    auto& cb = r.cherry_bar.data();
    auto& fb = r.chickenfoot_bar.data();
    for (std::size_t i = 0; i < l.size(); ++i) {
        cb[i] = l[i] * l[i] - c[i];
        fb[i] = l[i] * l[i] * l[i] - counterterm_chickenfoot(c[i], l[i]);
    }
}

/// With a mask the fields are only assembled where mask[idx] != 0.
inline TreeRealization build_trees(const CoeffField& coeff, const ScalarField& xi, LollipopEngine& engine,
                                   std::uint64_t seed = 0, std::uint64_t realization = 0,
                                   const std::vector<std::uint8_t>* mask = nullptr) {
    TreeRealization r{coeff,
                      xi,
                      engine.spec(),
                      engine.solve(coeff, xi, mask),
                      cherry_counterterm_field(coeff, engine.spec(), engine.chebyshev().size(), mask),
                      {},
                      {},
                      seed,
                      realization};
    renormalize(r);
    return r;
}

/// Which frozen kernel a generic slot uses: frozen at the outer point (K_z)
/// or one fixed matrix for all points.
struct KernelChoice {
    bool at_target = true;
    SymMat2 matrix = SymMat2::identity();

    static KernelChoice target() { return {}; }
    static KernelChoice fixed(const SymMat2& a) { return {false, a}; }

    SymMat2 at(const CoeffField& coeff, std::size_t idx) const { return at_target ? coeff.a[idx] : matrix; }

    ScalarField lollipop(const CoeffField& coeff, const ScalarField& xi, LollipopEngine& engine) const {
        return at_target ? engine.solve(coeff, xi) : engine.solve_constant(matrix, xi);
    }
};

namespace detail {
/// E[L_1(z) L_2(z)] for frozen kernels a1, a2 at a node of time t.
inline double pairing_counterterm(const SymMat2& a1, const SymMat2& a2, double t, const MollifierSpec& spec) {
    if (t <= 0.0) return 0.0;
    if (a1 == a2) return cherry_counterterm(a1, t, spec);
    return convolution_quantity(a1, {t, {0.0, 0.0}}, a2, {t, {0.0, 0.0}}, spec);
}

/// pairing_counterterm memoized on (a1, a2, t); repeated matrices are common
/// (constant coefficients, fixed kernels).
class PairingCache {
public:
    explicit PairingCache(const MollifierSpec& spec) : spec_(spec) {}

    double operator()(const SymMat2& a1, const SymMat2& a2, double t) {
        const std::array<double, 7> key{a1.xx, a1.xy, a1.yy, a2.xx, a2.xy, a2.yy, t};
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        const double v = pairing_counterterm(a1, a2, t, spec_);
        memo_.emplace(key, v);
        return v;
    }

private:
    MollifierSpec spec_;
    std::map<std::array<double, 7>, double> memo_;
};
}  // namespace detail

/// X_1(chi, K) = int chi(z) int K(z, z') xi_delta(z') dz' dz.
inline double x1_quantity(const ScalarField& chi, const CoeffField& coeff, const ScalarField& xi,
                          LollipopEngine& engine, const KernelChoice& k = KernelChoice::target()) {
    require_same_grid(chi, xi);
    const SpaceTimeGrid& g = chi.grid();
    for (std::size_t it = 0; it < g.n_t(); ++it)
        if (g.t(it) < 0.0)
            for (double v : chi.slice(it))
                if (v != 0.0) throw InvalidArgument("chi must vanish for t < 0");
    return lattice_inner(chi, k.lollipop(coeff, xi, engine));
}

/// X_2(eta, K_1, K_2) = int eta(z) [L_1(z) L_2(z) - E(L_1 L_2)(z)].
inline double x2_quantity(const ScalarField& eta, const CoeffField& coeff, const ScalarField& xi,
                          LollipopEngine& engine, const KernelChoice& k1 = KernelChoice::target(),
                          const KernelChoice& k2 = KernelChoice::target()) {
    require_same_grid(eta, xi);
    const SpaceTimeGrid& g = eta.grid();
    const ScalarField l1 = k1.lollipop(coeff, xi, engine);
    const ScalarField l2 = (k1.at_target == k2.at_target && k1.matrix == k2.matrix) ? l1 : k2.lollipop(coeff, xi, engine);
    const std::size_t ns = g.slice_size();
    detail::PairingCache cache(engine.spec());
    double acc = 0.0;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        const double w = eta.data()[idx];
        if (w == 0.0) continue;
        const double t = g.t(idx / ns);
        const double c12 = cache(k1.at(coeff, idx), k2.at(coeff, idx), t);
        acc += w * (l1.data()[idx] * l2.data()[idx] - c12);
    }
    return acc * g.cell_volume();
}

/// X_3(psi^lambda, K_1, K_2, K_3): three-factor Wick product
///   L1 L2 L3 - C12 L3 - C13 L2 - C23 L1, paired with the test function.
inline double x3_quantity(const TestFunction& test, const CoeffField& coeff, const ScalarField& xi,
                          LollipopEngine& engine, const KernelChoice& k1 = KernelChoice::target(),
                          const KernelChoice& k2 = KernelChoice::target(),
                          const KernelChoice& k3 = KernelChoice::target()) {
    const SpaceTimeGrid& g = xi.grid();
    const SampledTest st = sample_test_function(g, test);
    const ScalarField l1 = k1.lollipop(coeff, xi, engine);
    auto same = [](const KernelChoice& a, const KernelChoice& b) { return a.at_target == b.at_target && a.matrix == b.matrix; };
    const ScalarField l2 = same(k1, k2) ? l1 : k2.lollipop(coeff, xi, engine);
    const ScalarField l3 = same(k1, k3) ? l1 : same(k2, k3) ? l2 : k3.lollipop(coeff, xi, engine);
    const std::size_t ns = g.slice_size();
    detail::PairingCache cache(engine.spec());
    double acc = 0.0;
    for (std::size_t i = 0; i < st.index.size(); ++i) {
        const std::size_t idx = st.index[i];
        const double t = g.t(idx / ns);
        const SymMat2 a1 = k1.at(coeff, idx), a2 = k2.at(coeff, idx), a3 = k3.at(coeff, idx);
        const double c12 = cache(a1, a2, t);
        const double c13 = cache(a1, a3, t);
        const double c23 = cache(a2, a3, t);
        const double v1 = l1.data()[idx], v2 = l2.data()[idx], v3 = l3.data()[idx];
        acc += st.weight[i] * (v1 * v2 * v3 - c12 * v3 - c13 * v2 - c23 * v1);
    }
    return acc;
}

}  // namespace phi42
