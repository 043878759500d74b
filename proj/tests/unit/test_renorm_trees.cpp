#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "phi42/corr_field.hpp"
#include "phi42/gauss_kernels.hpp"
#include "phi42/lollipop_engine.hpp"
#include "phi42/quadrature.hpp"
#include "phi42/renorm_trees.hpp"

using namespace phi42;

namespace {

// delta = 0.2 on a 25 x 32^2 grid with t in [-0.04, 0.2]; values are exact up to t = 0.16
constexpr double kDelta = 0.2, kDt = 0.01, kDx = 0.1;
constexpr std::size_t kPre = 4;

SpaceTimeGrid small_grid() { return {kPre + 21, 32, 32, kDt, kDx, kDx, -kDt * kPre}; }

struct Fixture {
    SpaceTimeGrid grid = small_grid();
    MollifierSpec spec{kDelta};
    MatrixProfile profile{ProfileKind::isotropic_logistic, 0.5};
    CorrelationKernel kernel = CorrelationKernel::zero();
    LollipopEngine engine{grid, spec, profile, 24};

    Fixture() = default;
    Fixture(ProfileKind kind, const CorrelationKernel& m)
        : profile(kind, 0.5), kernel(m), engine(grid, spec, profile, 24) {}

    std::pair<ScalarField, CoeffField> draw(std::uint64_t r) const {
        ScalarField xi = sample_white_noise(grid, stream_seed(41, r, StreamRole::noise));
        ScalarField g = build_driver(kernel, xi, stream_seed(41, r, StreamRole::driver_history));
        CoeffField c = build_coefficients(g, profile);
        return {std::move(xi), std::move(c)};
    }
};

struct Stats {
    double mean = 0.0, se = 0.0;
};

Stats stats(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double m = 0.0;
    for (double x : v) m += x;
    m /= n;
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    return {m, std::sqrt(s2 / (n - 1.0) / n)};
}

// excess kurtosis m4 - 3 m2^2 of centred data with its influence-function SE
Stats fourth_cumulant(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double m2 = 0.0, m4 = 0.0;
    for (double x : v) {
        m2 += x * x;
        m4 += x * x * x * x;
    }
    m2 /= n;
    m4 /= n;
    std::vector<double> inf;
    for (double x : v) inf.push_back((x * x * x * x - m4) - 6.0 * m2 * (x * x - m2));
    return {m4 - 3.0 * m2 * m2, stats(inf).se};
}

ScalarField test_as_field(const SpaceTimeGrid& grid, const TestFunction& test) {
    ScalarField f(grid);
    const SampledTest st = sample_test_function(grid, test);
    for (std::size_t i = 0; i < st.index.size(); ++i) f.data()[st.index[i]] = st.weight[i] / grid.cell_volume();
    return f;
}

// pi^2 int_0^t ds1 int dw (psi*psi)(w) / (2 pi (2 s1 a1 + 2 (s1 + w) a2 + delta^2)), s1 + w in [0, t]:
// E[L_1(z) L_2(z)] for the scalar frozen matrices a1 Id and a2 Id
double scalar_pairing_oracle(double a1, double a2, double t, const MollifierSpec& spec) {
    const double d2 = spec.time_support();
    auto inner = [&](double s1) {
        const double lo = std::max(-2.0 * d2, -s1), hi = std::min(2.0 * d2, t - s1);
        if (!(hi > lo)) return 0.0;
        return integrate_adaptive(
            [&](double w) {
                return spec.time_autoconvolution(w) / (2.0 * pi * (2.0 * s1 * a1 + 2.0 * (s1 + w) * a2 + d2));
            },
            lo, hi, 1e-10, 1e-300);
    };
    return pi * pi * integrate_adaptive(inner, 0.0, t, 1e-9, 1e-300);
}

}  // namespace

TEST(RenormTrees, TestFunctionScaling) {
    EXPECT_EQ(test_profile(0.5, {0.0, 0.0}), 1.0);
    EXPECT_EQ(test_profile(1.0, {0.0, 0.0}), 0.0);
    EXPECT_EQ(test_profile(0.5, {1.0, 0.0}), 0.0);
    const double q = integrate_gauss<32>(
        [](double s) {
            return 2.0 * pi * integrate_gauss<32>([&](double r) { return r * test_profile(s, {r, 0.0}); }, 0.0, 1.0);
        },
        0.0, 1.0);
    EXPECT_NEAR(q, test_profile_integral, 1e-12);
}

TEST(RenormTrees, PairConstantFields) {
    const SpaceTimeGrid grid(60, 64, 64, 0.0025, 0.025, 0.025, 0.0);
    const TestFunction psi(std::exp(-1.0), {0.0, {0.1, -0.1}});
    EXPECT_NEAR(pair(ScalarField(grid, 1.0), psi), test_profile_integral, 0.01 * test_profile_integral);
    EXPECT_EQ(pair(ScalarField(grid), psi), 0.0);
}

TEST(RenormTrees, PairTranslationEquivariant) {
    const SpaceTimeGrid grid(40, 32, 32, 0.01, 0.1, 0.1, 0.0);
    const ScalarField f = sample_white_noise(grid, 77);
    ScalarField shifted(grid);
    const std::size_t st = 3, sx = 2, sy = 5;
    for (std::size_t it = st; it < grid.n_t(); ++it)
        for (std::size_t ix = 0; ix < grid.n_x(); ++ix)
            for (std::size_t iy = 0; iy < grid.n_y(); ++iy)
                shifted(it, (ix + sx) % grid.n_x(), (iy + sy) % grid.n_y()) = f(it - st, ix, iy);
    const TestFunction a(std::exp(-1.5), {0.05, {-0.3, 0.2}});
    const TestFunction b(std::exp(-1.5), {0.05 + st * grid.dt(), {-0.3 + sx * grid.dx(), 0.2 + sy * grid.dy()}});
    const double pa = pair(f, a), pb = pair(shifted, b);
    EXPECT_NEAR(pa, pb, 1e-12 * std::max(1.0, std::abs(pa)));
}

TEST(RenormTrees, PairRejectsBadSupport) {
    const SpaceTimeGrid grid(40, 32, 32, 0.01, 0.1, 0.1, 0.0);
    const ScalarField f(grid);
    EXPECT_THROW(pair(f, TestFunction(std::exp(-1.0), {0.0, {1.5, 0.0}})), SupportEscapesGrid);
    EXPECT_THROW(pair(f, TestFunction(std::exp(-1.0), {0.3, {0.0, 0.0}})), SupportEscapesGrid);
    EXPECT_THROW(pair(f, TestFunction(0.1, {0.0, {0.0, 0.0}})), UnresolvableScale);
    EXPECT_THROW(TestFunction(0.5, {}), InvalidArgument);
}

TEST(RenormTrees, ZeroNoiseGivesZeroTrees) {
    Fixture fx;
    const CoeffField c = constant_coefficients(fx.grid, fx.profile);
    const TreeRealization t = build_trees(c, ScalarField(fx.grid), fx.engine);
    EXPECT_EQ(t.lollipop_hat.max_abs(), 0.0);
    EXPECT_EQ(t.chickenfoot_bar.max_abs(), 0.0);
}

TEST(RenormTrees, PointwiseRenormalizationIdentities) {
    Fixture fx(ProfileKind::anisotropic_rotation, CorrelationKernel(KernelFamily::gaussian_bump, 0.3, 10.0));
    for (std::uint64_t r = 0; r < 3; ++r) {
        auto [xi, c] = fx.draw(r);
        const TreeRealization t = build_trees(c, xi, fx.engine, 41, r);
        double worst2 = 0.0, worst3 = 0.0;
        for (std::size_t i = 0; i < fx.grid.size(); ++i) {
            const double l = t.lollipop_hat.data()[i], cc = t.c_cherry.data()[i];
            worst2 = std::max(worst2, std::abs(t.cherry_bar.data()[i] + cc - l * l));
            worst3 = std::max(worst3, std::abs(t.chickenfoot_bar.data()[i] - (l * l * l - 3.0 * cc * l)));
        }
        EXPECT_LE(worst2, 1e-12);
        EXPECT_LE(worst3, 1e-12);
        EXPECT_TRUE(t.lollipop_hat.all_finite());
    }
}

TEST(RenormTrees, LollipopVarianceEqualsCounterterm) {
    Fixture fx;
    const CoeffField c = constant_coefficients(fx.grid, fx.profile);
    const std::size_t it = fx.engine.valid_end();
    std::vector<double> sq, raw;
    for (std::uint64_t r = 0; r < 4000; ++r) {
        const ScalarField l = fx.engine.solve(c, fx.draw(r).first);
        raw.push_back(l(it, 16, 16));
        sq.push_back(raw.back() * raw.back());
    }
    const Stats s = stats(sq);
    const double oracle = cherry_counterterm_adaptive(c.a.front(), fx.grid.t(it), fx.spec);
    EXPECT_NEAR(s.mean, oracle, 3.0 * s.se) << "oracle " << oracle;
    const Stats k = fourth_cumulant(raw);
    EXPECT_NEAR(k.mean, 0.0, 3.0 * k.se);
}

TEST(RenormTrees, RenormalizedPairingsHaveMeanZero) {
    Fixture fx;
    const CoeffField c = constant_coefficients(fx.grid, fx.profile);
    const TestFunction psi(std::exp(-1.5), {0.1, {0.0, 0.0}});
    const SampledTest st = sample_test_function(fx.grid, psi);
    std::vector<double> lol, cb, fb;
    for (std::uint64_t r = 0; r < 2000; ++r) {
        const TreeRealization t = build_trees(c, fx.draw(r).first, fx.engine);
        lol.push_back(pair(t.lollipop_hat, st));
        cb.push_back(pair(t.cherry_bar, st));
        fb.push_back(pair(t.chickenfoot_bar, st));
    }
    for (const auto* v : {&lol, &cb, &fb}) {
        const Stats s = stats(*v);
        EXPECT_NEAR(s.mean, 0.0, 3.0 * s.se);
    }
    // the constant-coefficient pairing is Gaussian
    std::vector<double> centred = lol;
    const double m = stats(lol).mean;
    for (double& x : centred) x -= m;
    const Stats k = fourth_cumulant(centred);
    EXPECT_NEAR(k.mean, 0.0, 3.0 * k.se);
}

TEST(RenormTrees, X1AgainstDirectSummation) {
    Fixture fx;
    const CoeffField c = constant_coefficients(fx.grid, fx.profile);
    EXPECT_EQ(x1_quantity(ScalarField(fx.grid), c, sample_white_noise(fx.grid, 1), fx.engine), 0.0);
    ScalarField xi(fx.grid);
    xi(kPre + 3, 15, 17) = 1.0;
    ScalarField chi(fx.grid);
    for (std::size_t it = kPre + 6; it <= kPre + 9; ++it)
        for (std::size_t ix = 13; ix <= 17; ++ix)
            for (std::size_t iy = 14; iy <= 18; ++iy) chi(it, ix, iy) = 1.0 + 0.1 * static_cast<double>(ix + iy);
    double oracle = 0.0;
    for (std::size_t it = kPre + 6; it <= kPre + 9; ++it)
        for (std::size_t ix = 13; ix <= 17; ++ix)
            for (std::size_t iy = 14; iy <= 18; ++iy)
                oracle += chi(it, ix, iy) * lollipop_direct(c.a.front(), xi, fx.spec, it, ix, iy) * fx.grid.cell_volume();
    const double v = x1_quantity(chi, c, xi, fx.engine);
    EXPECT_NEAR(v, oracle, 1e-5 * std::abs(oracle));
    ScalarField early(fx.grid);
    early(0, 3, 3) = 1.0;
    EXPECT_THROW(x1_quantity(early, c, xi, fx.engine), InvalidArgument);
}

TEST(RenormTrees, X1VarianceMatchesCovarianceQuadrature) {
    Fixture fx;
    const CoeffField c = constant_coefficients(fx.grid, fx.profile);
    const double alpha = c.a.front().xx;
    ScalarField chi(fx.grid);
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> support;
    for (std::size_t it : {kPre + 8, kPre + 12})
        for (std::size_t ix = 14; ix <= 18; ix += 2)
            for (std::size_t iy = 15; iy <= 17; ++iy) {
                chi(it, ix, iy) = 1.0;
                support.emplace_back(it, ix, iy);
            }
    std::map<std::tuple<std::size_t, std::size_t, long>, double> cache;
    double oracle = 0.0;
    for (const auto& [i1, x1, y1] : support)
        for (const auto& [i2, x2, y2] : support) {
            const double hx = (static_cast<double>(x1) - static_cast<double>(x2)) * kDx;
            const double hy = (static_cast<double>(y1) - static_cast<double>(y2)) * kDx;
            const auto key = std::make_tuple(i1, i2, std::lround((hx * hx + hy * hy) / (kDx * kDx)));
            auto itc = cache.find(key);
            if (itc == cache.end())
                itc = cache.emplace(key, isotropic_lollipop_covariance(alpha, fx.grid.t(i1), fx.grid.t(i2),
                                                                        std::hypot(hx, hy), fx.spec))
                          .first;
            oracle += itc->second;
        }
    oracle *= std::pow(fx.grid.cell_volume(), 2);
    std::vector<double> sq;
    for (std::uint64_t r = 0; r < 3000; ++r) sq.push_back(std::pow(x1_quantity(chi, c, fx.draw(r).first, fx.engine), 2));
    const Stats s = stats(sq);
    EXPECT_NEAR(s.mean, oracle, 3.0 * s.se) << "oracle " << oracle;
}

TEST(RenormTrees, X2AndX3ReproduceTrees) {
    Fixture fx(ProfileKind::anisotropic_rotation, CorrelationKernel(KernelFamily::gaussian_bump, 0.3, 10.0));
    const TestFunction psi(std::exp(-1.5), {0.1, {0.2, -0.1}});
    const ScalarField eta = test_as_field(fx.grid, psi);
    for (std::uint64_t r = 0; r < 2; ++r) {
        auto [xi, c] = fx.draw(r);
        const TreeRealization t = build_trees(c, xi, fx.engine);
        const double p2 = pair(t.cherry_bar, psi), p3 = pair(t.chickenfoot_bar, psi);
        EXPECT_NEAR(x2_quantity(eta, c, xi, fx.engine), p2, 1e-10 * std::max(1.0, std::abs(p2)));
        EXPECT_NEAR(x3_quantity(psi, c, xi, fx.engine), p3, 1e-10 * std::max(1.0, std::abs(p3)));
    }
}

TEST(RenormTrees, X2WithoutNoiseIsMinusPairingIntegral) {
    Fixture fx;
    const CoeffField c = constant_coefficients(fx.grid, fx.profile);
    const TestFunction psi(std::exp(-1.5), {0.1, {0.0, 0.0}});
    const ScalarField eta = test_as_field(fx.grid, psi);
    const auto k1 = KernelChoice::fixed(SymMat2::scalar(0.6)), k2 = KernelChoice::fixed(SymMat2::scalar(0.9));
    const double v = x2_quantity(eta, c, ScalarField(fx.grid), fx.engine, k1, k2);
    double oracle = 0.0;
    std::map<std::size_t, double> per_slice;
    const SampledTest st = sample_test_function(fx.grid, psi);
    for (std::size_t i = 0; i < st.index.size(); ++i) {
        const std::size_t it = st.index[i] / fx.grid.slice_size();
        if (!per_slice.count(it)) per_slice[it] = scalar_pairing_oracle(0.6, 0.9, fx.grid.t(it), fx.spec);
        oracle -= st.weight[i] * per_slice[it];
    }
    EXPECT_NEAR(v, oracle, 0.01 * std::abs(oracle));
    EXPECT_EQ(x3_quantity(psi, c, ScalarField(fx.grid), fx.engine, k1, k2, k1), 0.0);
}

TEST(RenormTrees, GenericQuantitiesHaveMeanZero) {
    Fixture fx;
    const CoeffField c = constant_coefficients(fx.grid, fx.profile);
    const TestFunction psi(std::exp(-1.5), {0.1, {0.0, 0.0}});
    const ScalarField eta = test_as_field(fx.grid, psi);
    const auto k1 = KernelChoice::fixed(SymMat2::scalar(0.6)), k2 = KernelChoice::target();
    std::vector<double> v2, v3;
    for (std::uint64_t r = 0; r < 1500; ++r) {
        const ScalarField xi = fx.draw(r).first;
        v2.push_back(x2_quantity(eta, c, xi, fx.engine, k1, k2));
        v3.push_back(x3_quantity(psi, c, xi, fx.engine, k1, k2, k2));
    }
    const Stats s2 = stats(v2), s3 = stats(v3);
    EXPECT_NEAR(s2.mean, 0.0, 3.0 * s2.se);
    EXPECT_NEAR(s3.mean, 0.0, 3.0 * s3.se);
}

TEST(RenormTrees, StationaryAcrossBasePoints) {
    Fixture fx(ProfileKind::isotropic_logistic, CorrelationKernel(KernelFamily::gaussian_bump, 0.3, 10.0));
    const TestFunction a(std::exp(-1.5), {0.09, {-0.6, -0.6}}), b(std::exp(-1.5), {0.09, {0.6, 0.5}});
    const SampledTest sa = sample_test_function(fx.grid, a), sb = sample_test_function(fx.grid, b);
    std::vector<double> qa, qb;
    for (std::uint64_t r = 0; r < 800; ++r) {
        auto [xi, c] = fx.draw(r);
        const TreeRealization t = build_trees(c, xi, fx.engine);
        qa.push_back(std::pow(pair(t.cherry_bar, sa), 2));
        qb.push_back(std::pow(pair(t.cherry_bar, sb), 2));
    }
    const Stats s1 = stats(qa), s2 = stats(qb);
    EXPECT_NEAR(s1.mean, s2.mean, 3.0 * std::hypot(s1.se, s2.se));
}
