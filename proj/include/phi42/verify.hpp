#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "phi42/gauss_kernels.hpp"
#include "phi42/lattice_noise.hpp"
#include "phi42/quadrature.hpp"
#include "phi42/wick_calculus.hpp"

namespace phi42 {

struct VerifyResult {
    std::string name;
    bool passed = false;
    double worst = 0.0;
    double tolerance = 0.0;
};

/// Randomized exact Gaussian integration-by-parts instances.
inline VerifyResult verify_ibp_suite(std::size_t instances = 100, std::uint64_t seed = 1) {
    VerifyResult r{"gaussian_ibp", true, 0.0, 1e-10};
    for (std::size_t i = 0; i < instances; ++i) {
        const IbpInstance inst = random_ibp_instance(derive_seed(seed, {i}));
        const IbpReport rep = verify_gaussian_ibp(inst.f, inst.test_vectors, inst.cov, i);
        r.worst = std::max(r.worst, rep.abs_err);
    }
    r.passed = r.worst <= r.tolerance;
    return r;
}

/// Wick powers of one Gaussian of variance s against s^{n/2} He_n(x / sqrt(s)),
/// He from the three-term recursion, coefficient by coefficient, n <= 6.
inline VerifyResult verify_wick_hermite_suite() {
    VerifyResult r{"wick_hermite", true, 0.0, 1e-12};
    for (double s : {0.5, 1.0, 2.3}) {
        std::vector<std::vector<double>> he{{1.0}, {0.0, 1.0}};
        for (int n = 1; n < 6; ++n) {
            std::vector<double> next(n + 2, 0.0);
            for (int k = 0; k <= n; ++k) next[k + 1] += he[n][k];
            for (int k = 0; k < n; ++k) next[k] -= n * he[n - 1][k];
            he.push_back(next);
        }
        Eigen::MatrixXd cov(1, 1);
        cov(0, 0) = s;
        for (int n = 1; n <= 6; ++n) {
            const std::vector<Eigen::VectorXd> forms(n, Eigen::VectorXd::Ones(1));
            const Polynomial w = wick_polynomial(forms, cov);
            Polynomial expect(1);
            for (int k = 0; k <= n; ++k)
                if (he[n][k] != 0.0) expect.add_term({k}, he[n][k] * std::pow(s, 0.5 * (n - k)));
            for (int k = 0; k <= n; ++k) {
                const double err = std::abs(w.coefficient({k}) - expect.coefficient({k}));
                r.worst = std::max(r.worst, err / std::max(1.0, std::abs(expect.coefficient({k}))));
            }
        }
        for (int k = 1; k <= 3; ++k) {
            double dfact = 1.0;
            for (int j = 2 * k - 1; j > 0; j -= 2) dfact *= j;
            const double exact = dfact * std::pow(s, k);
            r.worst = std::max(r.worst, std::abs(isserlis_moment({2 * k}, cov) - exact) / exact);
        }
    }
    r.passed = r.worst <= r.tolerance;
    return r;
}

/// Frozen kernel mass on a fine periodic-free Riemann grid (spectrally exact
/// for Gaussians well inside the box).
inline VerifyResult verify_kernel_mass_suite() {
    VerifyResult r{"frozen_kernel_mass", true, 0.0, 1e-6};
    const SymMat2 mats[] = {SymMat2::identity(), {0.7, 0.2, 0.5}, {0.4, -0.1, 0.9}};
    for (const auto& a : mats)
        for (double s : {0.01, 0.1, 0.5}) {
            const double h = 0.02 * std::sqrt(s), L = 14.0 * std::sqrt(s);
            double m = 0.0;
            for (double x = -L; x <= L; x += h)
                for (double y = -L; y <= L; y += h) m += frozen_kernel(a, s, {x, y});
            r.worst = std::max(r.worst, std::abs(m * h * h - 1.0));
        }
    r.passed = r.worst <= r.tolerance;
    return r;
}

/// Mollifier normalizations: int psi = 1, int rho_delta = pi.
inline VerifyResult verify_mollifier_suite() {
    VerifyResult r{"mollifier_mass", true, 0.0, 1e-12};
    r.worst = std::abs(integrate_gauss<10>(time_bump, -1.0, 1.0) - 1.0);
    for (double d : {0.05, 0.1, 0.4}) {
        const MollifierSpec spec(d);
        const double t = integrate_gauss<16>([&](double u) { return spec.time_factor(u); }, -d * d, d * d);
        r.worst = std::max(r.worst, std::abs(t - 1.0));
        r.worst = std::max(r.worst, std::abs(spec.spatial_symbol({0.0, 0.0}) - pi) / pi);
    }
    r.passed = r.worst <= r.tolerance;
    return r;
}

inline std::vector<VerifyResult> run_verify_suites() {
    return {verify_ibp_suite(), verify_wick_hermite_suite(), verify_kernel_mass_suite(), verify_mollifier_suite()};
}

}  // namespace phi42
