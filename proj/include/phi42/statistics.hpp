#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phi42/core.hpp"
#include "phi42/regular_part.hpp"
#include "phi42/rng.hpp"

namespace phi42 {

/// Pairwise (cascade) summation; the result depends only on the sequence.
inline double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t h = v.size() / 2;
    return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

inline double mean_of(std::span<const double> v) {
    return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

/// Sample standard error of the mean (0 for fewer than two values).
inline double standard_error(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    std::vector<double> d(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) d[i] = (v[i] - m) * (v[i] - m);
    const double var = pairwise_sum(d) / static_cast<double>(v.size() - 1);
    return std::sqrt(var / static_cast<double>(v.size()));
}

struct MomentReport {
    std::string object;
    int p = 2;
    double lambda = 0.0;
    double delta = 0.0;
    int base = 0;
    double estimate = 0.0;  // E^{1/p} |X|^p
    double se = 0.0;        // delta-method standard error of the estimate
    double mean = 0.0;      // E X
    double mean_se = 0.0;
    std::size_t n = 0;
    std::uint64_t seed = 0;  // seed of the (delta) cell; realizations derive from it
    double wall_time = 0.0;
    std::vector<double> samples;  // per-realization pairings, kept in memory only

    /// p-th absolute moment E|X|^p = estimate^p.
    double moment() const { return std::pow(estimate, p); }

    bool same_values(const MomentReport& o) const {
        return object == o.object && p == o.p && lambda == o.lambda && delta == o.delta && base == o.base &&
               estimate == o.estimate && se == o.se && mean == o.mean && mean_se == o.mean_se && n == o.n &&
               seed == o.seed && wall_time == o.wall_time;
    }
};

/// Moment estimate from per-realization pairings X_i.
///   m = mean |X|^p, estimate = m^{1/p}, SE = (1/p) m^{1/p - 1} SE(m).
inline MomentReport moment_report(const std::string& object, int p, double lambda, double delta, int base,
                                  std::vector<double> samples, std::uint64_t seed = 0, double wall_time = 0.0) {
    MomentReport r;
    r.object = object;
    r.p = p;
    r.lambda = lambda;
    r.delta = delta;
    r.base = base;
    r.n = samples.size();
    r.seed = seed;
    r.wall_time = wall_time;
    if (!samples.empty()) {
        std::vector<double> powed(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) powed[i] = std::pow(std::abs(samples[i]), p);
        const double m = mean_of(powed);
        const double se_m = standard_error(powed);
        r.estimate = std::pow(m, 1.0 / p);
        r.se = m > 0.0 ? se_m * std::pow(m, 1.0 / p - 1.0) / p : 0.0;
        r.mean = mean_of(samples);
        r.mean_se = standard_error(samples);
    }
    r.samples = std::move(samples);
    return r;
}

struct ScalingFit {
    std::string object;
    int p = 2;
    double beta = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::vector<double> residuals;
    double target = std::nan("");
    double ci_low = 0.0, ci_high = 0.0;  // 95% bootstrap interval for beta
    std::size_t n_points = 0;

    nlohmann::json to_json() const {
        return {{"object", object}, {"p", p},           {"beta", beta},       {"intercept", intercept},
                {"r2", r2},         {"residuals", residuals}, {"target", std::isnan(target) ? nlohmann::json() : nlohmann::json(target)},
                {"ci", {ci_low, ci_high}}, {"n_points", n_points}};
    }
};

/// OLS of log estimate on log|log lambda| over the reports of (object, p) at
/// one delta and base. The bootstrap resamples realizations jointly across
/// lambda (the sweep shares realizations) when every report carries its
/// samples, and perturbs estimates by their SE otherwise.
inline ScalingFit fit_scaling(const std::vector<MomentReport>& reports, const std::string& object, int p,
                              double target = std::nan(""), std::size_t n_boot = 400, std::uint64_t seed = 7) {
    std::vector<const MomentReport*> sel;
    for (const auto& r : reports)
        if (r.object == object && r.p == p) sel.push_back(&r);
    std::sort(sel.begin(), sel.end(), [](auto* a, auto* b) { return a->lambda > b->lambda; });
    std::vector<double> lambdas;
    for (auto* r : sel) {
        if (!sel.empty() && (r->delta != sel.front()->delta || r->base != sel.front()->base))
            throw InvalidArgument("fit_scaling needs reports at one delta and base");
        if (std::find(lambdas.begin(), lambdas.end(), r->lambda) == lambdas.end()) lambdas.push_back(r->lambda);
    }
    if (lambdas.size() < 4 || lambdas.size() != sel.size()) throw InsufficientPoints("need >= 4 distinct lambda");

    auto fit = [&](const std::vector<double>& est) {
        std::vector<double> x, y;
        for (std::size_t i = 0; i < sel.size(); ++i) {
            if (!(est[i] > 0.0)) throw InsufficientPoints("non-positive estimate");
            x.push_back(std::log(std::abs(std::log(sel[i]->lambda))));
            y.push_back(std::log(est[i]));
        }
        return std::make_pair(least_squares(x, y), std::make_pair(x, y));
    };

    std::vector<double> est;
    for (auto* r : sel) est.push_back(r->estimate);
    const auto [ls, xy] = fit(est);
    ScalingFit f;
    f.object = object;
    f.p = p;
    f.beta = ls.slope;
    f.intercept = ls.intercept;
    f.r2 = ls.r2;
    f.target = target;
    f.n_points = sel.size();
    for (std::size_t i = 0; i < sel.size(); ++i)
        f.residuals.push_back(xy.second[i] - (ls.intercept + ls.slope * xy.first[i]));

    const bool joint = std::all_of(sel.begin(), sel.end(), [&](auto* r) {
        return r->samples.size() == sel.front()->samples.size() && r->samples.size() >= 2;
    });
    RandomStream rng(seed);
    std::vector<double> betas;
    for (std::size_t b = 0; b < n_boot; ++b) {
        std::vector<double> e(sel.size());
        if (joint) {
            const std::size_t n = sel.front()->samples.size();
            std::vector<std::size_t> pick(n);
            for (auto& k : pick) k = static_cast<std::size_t>(rng.bits() % n);
            for (std::size_t i = 0; i < sel.size(); ++i) {
                std::vector<double> v(n);
                for (std::size_t k = 0; k < n; ++k) v[k] = std::pow(std::abs(sel[i]->samples[pick[k]]), p);
                e[i] = std::pow(mean_of(v), 1.0 / p);
            }
        } else {
            for (std::size_t i = 0; i < sel.size(); ++i)
                e[i] = std::max(sel[i]->estimate + sel[i]->se * rng.normal(), 1e-300);
        }
        betas.push_back(fit(e).first.slope);
    }
    if (betas.empty()) {
        f.ci_low = f.ci_high = f.beta;
        return f;
    }
    std::sort(betas.begin(), betas.end());
    f.ci_low = betas[static_cast<std::size_t>(0.025 * (n_boot - 1))];
    f.ci_high = betas[static_cast<std::size_t>(0.975 * (n_boot - 1))];
    return f;
}

}  // namespace phi42
