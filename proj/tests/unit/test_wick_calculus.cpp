#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "phi42/rng.hpp"
#include "phi42/verify.hpp"
#include "phi42/wick_calculus.hpp"

using namespace phi42;

namespace {

Eigen::MatrixXd cov2(double c) {
    Eigen::MatrixXd m(2, 2);
    m << 1.0, c, c, 1.0;
    return m;
}

// E[prod X_i^{k_i}] by explicit enumeration of perfect matchings of the
// expanded factor list.
double matching_moment(const Exponents& k, const Eigen::MatrixXd& cov) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < k.size(); ++i)
        for (int j = 0; j < k[i]; ++j) idx.push_back(static_cast<int>(i));
    if (idx.size() % 2 == 1) return 0.0;
    std::vector<bool> used(idx.size(), false);
    std::function<double()> rec = [&]() -> double {
        std::size_t a = 0;
        while (a < idx.size() && used[a]) ++a;
        if (a == idx.size()) return 1.0;
        used[a] = true;
        double s = 0.0;
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
            if (used[b]) continue;
            used[b] = true;
            s += cov(idx[a], idx[b]) * rec();
            used[b] = false;
        }
        used[a] = false;
        return s;
    };
    return rec();
}

// Probabilists' Hermite polynomials in closed form.
double hermite(int n, double x) {
    switch (n) {
        case 0: return 1.0;
        case 1: return x;
        case 2: return x * x - 1.0;
        case 3: return x * x * x - 3.0 * x;
        case 4: return std::pow(x, 4) - 6.0 * x * x + 3.0;
        case 5: return std::pow(x, 5) - 10.0 * std::pow(x, 3) + 15.0 * x;
        case 6: return std::pow(x, 6) - 15.0 * std::pow(x, 4) + 45.0 * x * x - 15.0;
    }
    return std::nan("");
}

}  // namespace

TEST(WickCalculus, SingleFactorUnchanged) {
    Eigen::VectorXd x(1);
    x << 1.7;
    EXPECT_EQ(wick_product(x, Eigen::MatrixXd::Constant(1, 1, 2.0)), 1.7);
}

TEST(WickCalculus, TwoFactors) {
    Eigen::VectorXd x(2);
    x << 1.3, -0.4;
    EXPECT_NEAR(wick_product(x, cov2(0.3)), 1.3 * -0.4 - 0.3, 1e-15);
}

TEST(WickCalculus, ThirdWickPowerIsHermite) {
    Eigen::VectorXd x(3);
    x << 2.0, 2.0, 2.0;
    EXPECT_NEAR(wick_product(x, Eigen::MatrixXd::Ones(3, 3)), 2.0, 1e-14);
}

TEST(WickCalculus, WickPowersMatchHermiteForAllSamples) {
    for (double s2 : {0.5, 1.0, 3.0})
        for (int n = 1; n <= 6; ++n)
            for (double x : {-2.5, -0.3, 0.0, 0.7, 1.9}) {
                const Eigen::VectorXd v = Eigen::VectorXd::Constant(n, x);
                const double s = std::sqrt(s2);
                EXPECT_NEAR(wick_product(v, Eigen::MatrixXd::Constant(n, n, s2)), std::pow(s, n) * hermite(n, x / s),
                            1e-11 * std::max(1.0, std::pow(s2, 0.5 * n) * std::pow(std::abs(x) + 1.0, n)));
            }
}

TEST(WickCalculus, DimensionMismatch) {
    EXPECT_THROW(wick_product(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(2, 2)), DimensionMismatch);
}

TEST(WickCalculus, Multilinearity) {
    RandomStream rng(4);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) b(i, j) = rng.normal();
    const Eigen::MatrixXd cov = b * b.transpose();
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x[i] = rng.normal();
    const double alpha = -1.75;  // exactly representable scaling
    Eigen::VectorXd xs = x;
    xs[0] *= alpha;
    Eigen::MatrixXd cs = cov;
    cs.row(0) *= alpha;
    cs.col(0) *= alpha;
    EXPECT_NEAR(wick_product(xs, cs), alpha * wick_product(x, cov), 1e-12 * std::abs(wick_product(x, cov)));
}

TEST(WickCalculus, PermutationSymmetry) {
    RandomStream rng(5);
    Eigen::MatrixXd b(5, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) b(i, j) = rng.normal();
    const Eigen::MatrixXd cov = b * b.transpose();
    Eigen::VectorXd x(5);
    for (int i = 0; i < 5; ++i) x[i] = rng.normal();
    std::vector<int> perm{3, 0, 4, 1, 2};
    Eigen::VectorXd xp(5);
    Eigen::MatrixXd cp(5, 5);
    for (int i = 0; i < 5; ++i) {
        xp[i] = x[perm[i]];
        for (int j = 0; j < 5; ++j) cp(i, j) = cov(perm[i], perm[j]);
    }
    EXPECT_NEAR(wick_product(xp, cp), wick_product(x, cov), 1e-10 * std::max(1.0, std::abs(wick_product(x, cov))));
}

TEST(WickCalculus, IsserlisBasics) {
    EXPECT_DOUBLE_EQ(isserlis_moment({2}, Eigen::MatrixXd::Constant(1, 1, 0.7)), 0.7);
    EXPECT_DOUBLE_EQ(isserlis_moment({4}, Eigen::MatrixXd::Identity(1, 1)), 3.0);
    EXPECT_EQ(isserlis_moment({3}, Eigen::MatrixXd::Identity(1, 1)), 0.0);
    EXPECT_THROW(isserlis_moment({14}, Eigen::MatrixXd::Identity(1, 1)), DegreeTooLarge);
    EXPECT_THROW(isserlis_moment({2, 2}, Eigen::MatrixXd::Identity(1, 1)), DimensionMismatch);
}

TEST(WickCalculus, IsserlisMixedFourthMoment) {
    const double v = isserlis_moment({2, 2}, cov2(0.3));
    EXPECT_NEAR(v, 1.18, 1e-14);
    // Monte Carlo cross-check
    GaussianVector g(cov2(0.3));
    RandomStream rng(6);
    const std::size_t n = 1000000;
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd x = g.sample(rng);
        const double w = x[0] * x[0] * x[1] * x[1];
        s += w;
        s2 += w * w;
    }
    const double m = s / n, se = std::sqrt((s2 / n - m * m) / n);
    EXPECT_NEAR(m, 1.18, 3.0 * se);
}

TEST(WickCalculus, IsserlisMatchesMatchingEnumeration) {
    RandomStream rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd b(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) b(i, j) = rng.normal();
        const Eigen::MatrixXd cov = b * b.transpose();
        Exponents k{static_cast<int>(rng.bits() % 4), static_cast<int>(rng.bits() % 4), static_cast<int>(rng.bits() % 4)};
        const double e = matching_moment(k, cov);
        EXPECT_NEAR(isserlis_moment(k, cov), e, 1e-12 * std::max(1.0, std::abs(e)));
    }
}

TEST(WickCalculus, WickExpectationZero) {
    const auto r2 = wick_expectation_is_zero(2, cov2(0.8), 20000, 1);
    EXPECT_TRUE(r2.exact_ok);
    EXPECT_TRUE(r2.mc_ok);
    Eigen::MatrixXd c3 = Eigen::MatrixXd::Constant(3, 3, 0.5);
    c3.diagonal().setOnes();
    const auto r3 = wick_expectation_is_zero(3, c3, 20000, 2);
    EXPECT_LE(std::abs(r3.exact), 1e-10);
    EXPECT_TRUE(r3.mc_ok);
    const auto r4 = wick_expectation_is_zero(4, Eigen::MatrixXd::Identity(4, 4), 20000, 3);
    EXPECT_LE(std::abs(r4.exact), 1e-10);
    EXPECT_TRUE(r4.mc_ok);
    EXPECT_THROW(wick_expectation_is_zero(0, Eigen::MatrixXd(), 1, 1), InvalidArgument);
}

TEST(WickCalculus, WickPolynomialAgreesWithPointwiseRecursion) {
    Eigen::MatrixXd c3 = Eigen::MatrixXd::Constant(3, 3, 0.2);
    c3.diagonal() << 1.0, 0.5, 2.0;
    std::vector<Eigen::VectorXd> forms;
    for (int i = 0; i < 3; ++i) forms.push_back(Eigen::VectorXd::Unit(3, i));
    const Polynomial p = wick_polynomial(forms, c3);
    Eigen::VectorXd x(3);
    x << 0.3, -1.2, 0.8;
    EXPECT_NEAR(p(x), wick_product(x, c3), 1e-13);
}

TEST(WickCalculus, IbpConstantAndLinear) {
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
    const auto rc = verify_gaussian_ibp(Polynomial::constant(2, 3.0), {Eigen::VectorXd::Unit(2, 0)}, id);
    EXPECT_EQ(rc.lhs, 0.0);
    EXPECT_EQ(rc.rhs, 0.0);
    Polynomial g1(2);
    g1.add_term({1, 0}, 1.0);
    const auto rl = verify_gaussian_ibp(g1, {Eigen::VectorXd::Unit(2, 0)}, id);
    EXPECT_NEAR(rl.lhs, 1.0, 1e-12);
    EXPECT_NEAR(rl.rhs, 1.0, 1e-12);
    EXPECT_LE(rl.abs_err, 1e-12);
}

TEST(WickCalculus, IbpCubic) {
    Polynomial f(2);
    f.add_term({2, 1}, 1.0);
    const auto r = verify_gaussian_ibp(f, {Eigen::VectorXd::Unit(2, 0), Eigen::VectorXd::Unit(2, 1)}, cov2(0.3));
    EXPECT_LE(r.abs_err, 1e-10);
    // odd total degree, so both sides vanish
    EXPECT_NEAR(r.lhs, 0.0, 1e-14);
    Polynomial f2(2);
    f2.add_term({2, 2}, 1.0);
    const auto r2 = verify_gaussian_ibp(f2, {Eigen::VectorXd::Unit(2, 0), Eigen::VectorXd::Unit(2, 1)}, cov2(0.3));
    // E[G1^2 G2^2 (G1 G2 - c)] from the matching oracle
    const double lhs = matching_moment({3, 3}, cov2(0.3)) - 0.3 * matching_moment({2, 2}, cov2(0.3));
    EXPECT_NEAR(r2.lhs, lhs, 1e-12);
    EXPECT_LE(r2.abs_err, 1e-10);
}

TEST(WickCalculus, IbpBudgets) {
    Polynomial big(9);
    big.add_term(Exponents(9, 0), 1.0);
    EXPECT_THROW(verify_gaussian_ibp(big, {}, Eigen::MatrixXd::Identity(9, 9)), RankTooLarge);
    Polynomial deep(1);
    deep.add_term({9}, 1.0);
    EXPECT_THROW(verify_gaussian_ibp(deep, {}, Eigen::MatrixXd::Identity(1, 1)), DegreeTooLarge);
}

TEST(WickCalculus, IbpRandomizedSuite) {
    const auto r = verify_ibp_suite(100, 12345);
    EXPECT_TRUE(r.passed) << "worst " << r.worst;
}

TEST(WickCalculus, InvalidCovarianceRejected) {
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.2, 0.3, 1.0;
    EXPECT_THROW(GaussianVector{asym}, InvalidArgument);
    EXPECT_THROW(GaussianVector{cov2(2.0)}, InvalidArgument);
}
