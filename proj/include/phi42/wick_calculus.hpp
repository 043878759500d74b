#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "phi42/core.hpp"
#include "phi42/rng.hpp"

namespace phi42 {

inline constexpr int max_isserlis_degree = 12;

/// Centred Gaussian vector described by its covariance.
class GaussianVector {
public:
    explicit GaussianVector(Eigen::MatrixXd cov) : cov_(std::move(cov)) {
        if (cov_.rows() != cov_.cols()) throw DimensionMismatch("covariance must be square");
        if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw InvalidArgument("covariance not symmetric");
        if (cov_.rows() > 0) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov_);
            if (es.eigenvalues().minCoeff() < -1e-10) throw InvalidArgument("covariance not positive semidefinite");
            const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
            sqrt_ = es.eigenvectors() * root.asDiagonal();
        }
    }

    Eigen::Index dim() const { return cov_.rows(); }
    const Eigen::MatrixXd& covariance() const { return cov_; }

    Eigen::VectorXd sample(RandomStream& rng) const {
        Eigen::VectorXd w(dim());
        for (Eigen::Index i = 0; i < dim(); ++i) w[i] = rng.normal();
        return sqrt_ * w;
    }

private:
    Eigen::MatrixXd cov_;
    Eigen::MatrixXd sqrt_;
};

using Exponents = std::vector<int>;

inline int total_degree(const Exponents& e) { return std::accumulate(e.begin(), e.end(), 0); }

/// Sparse polynomial in n real variables.
class Polynomial {
public:
    explicit Polynomial(std::size_t n_vars = 0) : n_(n_vars) {}

    static Polynomial constant(std::size_t n_vars, double c) {
        Polynomial p(n_vars);
        p.add_term(Exponents(n_vars, 0), c);
        return p;
    }

    static Polynomial linear(const Eigen::VectorXd& coeffs) {
        Polynomial p(static_cast<std::size_t>(coeffs.size()));
        for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
            Exponents e(p.n_, 0);
            e[static_cast<std::size_t>(j)] = 1;
            p.add_term(e, coeffs[j]);
        }
        return p;
    }

    std::size_t n_vars() const { return n_; }
    const std::map<Exponents, double>& terms() const { return terms_; }

    double coefficient(const Exponents& e) const {
        const auto it = terms_.find(e);
        return it == terms_.end() ? 0.0 : it->second;
    }

    void add_term(const Exponents& e, double c) {
        if (e.size() != n_) throw DimensionMismatch("exponent length does not match variable count");
        if (c == 0.0) return;
        auto [it, inserted] = terms_.try_emplace(e, c);
        if (!inserted) {
            it->second += c;
            if (it->second == 0.0) terms_.erase(it);
        }
    }

    int degree() const {
        int d = 0;
        for (const auto& [e, c] : terms_) d = std::max(d, total_degree(e));
        return d;
    }

    double operator()(const Eigen::VectorXd& x) const {
        double s = 0.0;
        for (const auto& [e, c] : terms_) {
            double m = c;
            for (std::size_t j = 0; j < n_; ++j)
                for (int k = 0; k < e[j]; ++k) m *= x[static_cast<Eigen::Index>(j)];
            s += m;
        }
        return s;
    }

    Polynomial derivative(std::size_t j) const {
        Polynomial d(n_);
        for (const auto& [e, c] : terms_) {
            if (e[j] == 0) continue;
            Exponents f = e;
            f[j] -= 1;
            d.add_term(f, c * e[j]);
        }
        return d;
    }

    /// sum_j v_j d/dx_j
    Polynomial directional_derivative(const Eigen::VectorXd& v) const {
        Polynomial d(n_);
        for (std::size_t j = 0; j < n_; ++j) {
            const double w = v[static_cast<Eigen::Index>(j)];
            if (w == 0.0) continue;
            d += w * derivative(j);
        }
        return d;
    }

    Polynomial& operator+=(const Polynomial& o) {
        for (const auto& [e, c] : o.terms_) add_term(e, c);
        return *this;
    }
    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a += (-1.0) * b; }
    friend Polynomial operator*(double s, Polynomial a) {
        for (auto& [e, c] : a.terms_) c *= s;
        return a;
    }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        Polynomial p(a.n_);
        for (const auto& [ea, ca] : a.terms_)
            for (const auto& [eb, cb] : b.terms_) {
                Exponents e(a.n_);
                for (std::size_t j = 0; j < a.n_; ++j) e[j] = ea[j] + eb[j];
                p.add_term(e, ca * cb);
            }
        return p;
    }

private:
    std::size_t n_;
    std::map<Exponents, double> terms_;
};

/// Evaluates the Wick product of n jointly Gaussian variables at the given
/// sample values:
///   W(S) = x_m W(S \ m) - sum_{j in S \ m} E[X_m X_j] W(S \ {m, j}),  m = max S,
/// memoized over index subsets.
inline double wick_product(const Eigen::VectorXd& samples, const Eigen::MatrixXd& cov) {
    const auto n = static_cast<std::size_t>(samples.size());
    if (cov.rows() != samples.size() || cov.cols() != samples.size())
        throw DimensionMismatch("covariance must be n x n for n samples");
    if (n > 24) throw DimensionMismatch("too many factors");
    if (n == 0) return 1.0;
    const std::size_t full = (std::size_t{1} << n) - 1;
    std::vector<double> w(full + 1, 0.0);
    w[0] = 1.0;
    for (std::size_t s = 1; s <= full; ++s) {
        std::size_t m = 63 - static_cast<std::size_t>(__builtin_clzll(s));
        const std::size_t rest = s & ~(std::size_t{1} << m);
        double v = samples[static_cast<Eigen::Index>(m)] * w[rest];
        for (std::size_t j = 0; j < m; ++j)
            if (rest & (std::size_t{1} << j))
                v -= cov(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) * w[rest & ~(std::size_t{1} << j)];
        w[s] = v;
    }
    return w[full];
}

/// Symbolic Wick product of the linear forms X_i = <phi_i, G>, as a
/// polynomial in the coordinates of G ~ N(0, cov_g).
inline Polynomial wick_polynomial(const std::vector<Eigen::VectorXd>& forms, const Eigen::MatrixXd& cov_g) {
    const std::size_t n = forms.size();
    const auto dim = static_cast<std::size_t>(cov_g.rows());
    for (const auto& f : forms)
        if (static_cast<std::size_t>(f.size()) != dim) throw DimensionMismatch("linear form length mismatch");
    if (n > 12) throw DimensionMismatch("too many Wick factors");
    Eigen::MatrixXd c(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) c(i, j) = forms[i].dot(cov_g * forms[j]);
    const std::size_t full = (std::size_t{1} << n) - 1;
    std::vector<Polynomial> w(full + 1, Polynomial(dim));
    w[0] = Polynomial::constant(dim, 1.0);
    for (std::size_t s = 1; s <= full; ++s) {
        std::size_t m = 63 - static_cast<std::size_t>(__builtin_clzll(s));
        const std::size_t rest = s & ~(std::size_t{1} << m);
        Polynomial v = Polynomial::linear(forms[m]) * w[rest];
        for (std::size_t j = 0; j < m; ++j)
            if (rest & (std::size_t{1} << j))
                v += (-c(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j))) * w[rest & ~(std::size_t{1} << j)];
        w[s] = std::move(v);
    }
    return w[full];
}

/// Exact Gaussian moments E[prod_i X_i^{k_i}] by Isserlis' theorem.
///
/// The sum over perfect matchings is organised by pairing the first factor
/// with every remaining factor; identical copies of a variable are merged
/// into a multiplicity, and sub-moments are memoized on the remaining
/// exponent vector.
class GaussianMoments {
public:
    explicit GaussianMoments(Eigen::MatrixXd cov) : cov_(std::move(cov)) {}

    double operator()(const Exponents& k) {
        if (static_cast<Eigen::Index>(k.size()) != cov_.rows()) throw DimensionMismatch("exponent length mismatch");
        const int d = total_degree(k);
        if (d > max_isserlis_degree) throw DegreeTooLarge("total degree " + std::to_string(d));
        return moment(k);
    }

    double expectation(const Polynomial& p) {
        double s = 0.0;
        for (const auto& [e, c] : p.terms()) s += c * (*this)(e);
        return s;
    }

private:
    double moment(const Exponents& k) {
        const int d = total_degree(k);
        if (d == 0) return 1.0;
        if (d % 2 == 1) return 0.0;
        if (auto it = memo_.find(k); it != memo_.end()) return it->second;
        std::size_t a = 0;
        while (k[a] == 0) ++a;
        Exponents rest = k;
        rest[a] -= 1;
        double s = 0.0;
        for (std::size_t b = 0; b < k.size(); ++b) {
            if (rest[b] == 0) continue;
            const double cab = cov_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            if (cab == 0.0) continue;
            const int mult = rest[b];
            Exponents r2 = rest;
            r2[b] -= 1;
            s += mult * cab * moment(r2);
        }
        memo_.emplace(k, s);
        return s;
    }

    Eigen::MatrixXd cov_;
    std::map<Exponents, double> memo_;
};

inline double isserlis_moment(const Exponents& k, const Eigen::MatrixXd& cov) {
    GaussianMoments m(cov);
    return m(k);
}

struct WickZeroReport {
    int n = 0;
    double exact = 0.0;
    double mc_mean = 0.0;
    double mc_se = 0.0;
    std::size_t trials = 0;
    bool exact_ok = false;
    bool mc_ok = false;
};

/// Checks E[X_1 <> ... <> X_n] = 0 exactly (symbolic expansion + Isserlis)
/// and by Monte Carlo.
inline WickZeroReport wick_expectation_is_zero(int n, const Eigen::MatrixXd& cov, std::size_t trials,
                                               std::uint64_t seed) {
    if (n < 1) throw InvalidArgument("need at least one factor");
    if (cov.rows() != n) throw DimensionMismatch("covariance must be n x n");
    GaussianVector g(cov);
    std::vector<Eigen::VectorXd> forms;
    for (int i = 0; i < n; ++i) forms.push_back(Eigen::VectorXd::Unit(n, i));
    WickZeroReport r;
    r.n = n;
    GaussianMoments moments(cov);
    r.exact = moments.expectation(wick_polynomial(forms, cov));
    r.exact_ok = std::abs(r.exact) <= 1e-10;
    RandomStream rng(seed);
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < trials; ++i) {
        const double w = wick_product(g.sample(rng), cov);
        sum += w;
        sum2 += w * w;
    }
    r.trials = trials;
    if (trials > 0) {
        r.mc_mean = sum / static_cast<double>(trials);
        const double var = trials > 1 ? (sum2 - sum * r.mc_mean) / static_cast<double>(trials - 1) : 0.0;
        r.mc_se = std::sqrt(std::max(var, 0.0) / static_cast<double>(trials));
        r.mc_ok = std::abs(r.mc_mean) <= 3.0 * r.mc_se;
    }
    return r;
}

struct IbpReport {
    std::uint64_t instance_id = 0;
    int degree = 0;
    int n_factors = 0;
    int rank = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double abs_err = 0.0;

    nlohmann::json to_json() const {
        return {{"instance_id", instance_id}, {"degree", degree}, {"n_factors", n_factors}, {"rank", rank},
                {"lhs", lhs},                 {"rhs", rhs},       {"abs_err", abs_err}};
    }
};

/// Finite-rank Gaussian integration by parts:
///   E[F(G) <>_i <G, phi_i>] = E[d^n F(G) . (C phi_1, ..., C phi_n)],  G ~ N(0, C).
/// For C = Id the contraction vectors are the phi_i themselves. Both sides
/// are evaluated exactly by Isserlis moments of the expanded polynomials.
inline IbpReport verify_gaussian_ibp(const Polynomial& f, const std::vector<Eigen::VectorXd>& test_vectors,
                                     const Eigen::MatrixXd& cov, std::uint64_t instance_id = 0) {
    const auto rank = static_cast<std::size_t>(cov.rows());
    if (f.n_vars() != rank) throw DimensionMismatch("functional dimension does not match covariance");
    if (rank > 8) throw RankTooLarge("rank " + std::to_string(rank));
    if (f.degree() > 8) throw DegreeTooLarge("functional degree " + std::to_string(f.degree()));
    if (test_vectors.size() > 4) throw DegreeTooLarge("at most 4 Wick factors");
    [[maybe_unused]] const GaussianVector validated(cov);

    GaussianMoments moments(cov);
    IbpReport r;
    r.instance_id = instance_id;
    r.degree = f.degree();
    r.n_factors = static_cast<int>(test_vectors.size());
    r.rank = static_cast<int>(rank);
    r.lhs = moments.expectation(f * wick_polynomial(test_vectors, cov));
    Polynomial d = f;
    for (const auto& phi : test_vectors) d = d.directional_derivative(cov * phi);
    r.rhs = moments.expectation(d);
    r.abs_err = std::abs(r.lhs - r.rhs);
    return r;
}

struct IbpInstance {
    Polynomial f;
    std::vector<Eigen::VectorXd> test_vectors;
    Eigen::MatrixXd cov;
};

/// Random instance within the verifier budgets (rank <= 8, degree <= 8, <= 4 factors).
inline IbpInstance random_ibp_instance(std::uint64_t seed) {
    RandomStream rng(seed);
    auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng.bits() % static_cast<std::uint64_t>(hi - lo + 1)); };
    const int rank = pick(1, 8);
    const int n_factors = pick(1, 4);
    const int degree = pick(0, 8);
    Eigen::MatrixXd b(rank, rank);
    for (int i = 0; i < rank; ++i)
        for (int j = 0; j < rank; ++j) b(i, j) = rng.normal();
    Eigen::MatrixXd cov = b * b.transpose() / rank + 0.1 * Eigen::MatrixXd::Identity(rank, rank);
    cov = 0.5 * (cov + cov.transpose()).eval();

    IbpInstance inst{Polynomial(static_cast<std::size_t>(rank)), {}, cov};
    const int n_terms = pick(1, 5);
    for (int t = 0; t < n_terms; ++t) {
        Exponents e(static_cast<std::size_t>(rank), 0);
        const int d = t == 0 ? degree : pick(0, degree);
        for (int k = 0; k < d; ++k) e[static_cast<std::size_t>(pick(0, rank - 1))] += 1;
        inst.f.add_term(e, rng.normal());
    }
    for (int i = 0; i < n_factors; ++i) {
        Eigen::VectorXd phi(rank);
        for (int j = 0; j < rank; ++j) phi[j] = rng.normal();
        inst.test_vectors.push_back(phi);
    }
    return inst;
}

}  // namespace phi42
