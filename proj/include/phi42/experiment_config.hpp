#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "phi42/config.hpp"
#include "phi42/core.hpp"
#include "phi42/corr_field.hpp"
#include "phi42/grid.hpp"
#include "phi42/lattice_noise.hpp"
#include "phi42/regular_part.hpp"
#include "phi42/renorm_trees.hpp"

namespace phi42 {

enum class ObjectTag {
    lollipop_hat,
    cherry_hat,  // unrenormalized lollipop_hat^2
    cherry_bar,
    chickenfoot_bar,
    x1,
    x2,
    x3,
    regular_part_m1,
    regular_part_m2,
    regular_part_m3,
};

inline const std::vector<std::pair<ObjectTag, std::string>>& object_names() {
    static const std::vector<std::pair<ObjectTag, std::string>> names{
        {ObjectTag::lollipop_hat, "lollipop_hat"},       {ObjectTag::cherry_hat, "cherry_hat"},
        {ObjectTag::cherry_bar, "cherry_bar"},           {ObjectTag::chickenfoot_bar, "chickenfoot_bar"},
        {ObjectTag::x1, "x1"},                           {ObjectTag::x2, "x2"},
        {ObjectTag::x3, "x3"},                           {ObjectTag::regular_part_m1, "regular_part_m1"},
        {ObjectTag::regular_part_m2, "regular_part_m2"}, {ObjectTag::regular_part_m3, "regular_part_m3"},
    };
    return names;
}

inline std::string to_string(ObjectTag o) {
    for (const auto& [tag, name] : object_names())
        if (tag == o) return name;
    return "?";
}

inline ObjectTag parse_object(const std::string& s) {
    for (const auto& [tag, name] : object_names())
        if (name == s) return tag;
    throw ConfigError("unknown object tag: " + s);
}

inline bool is_regular_part(ObjectTag o) {
    return o == ObjectTag::regular_part_m1 || o == ObjectTag::regular_part_m2 || o == ObjectTag::regular_part_m3;
}

/// Exponent of |log lambda| in the moment bound for the three trees; NaN otherwise.
inline double target_exponent(ObjectTag o) {
    switch (o) {
        case ObjectTag::lollipop_hat: return 1.0;
        case ObjectTag::cherry_bar: return 1.5;
        case ObjectTag::chickenfoot_bar: return 2.5;
        default: return std::nan("");
    }
}

/// Physical extents of the lattice; the steps may scale with delta.
struct GridRecipe {
    double half_width = 2.56;
    double dx = 0.04;
    double dt = 0.0032;
    double t_max = 0.1888;        // last time that must be on the grid
    double dx_per_delta = 0.0;    // > 0: dx = min(dx, delta * dx_per_delta)
    double dt_per_delta2 = 0.0;   // > 0: dt = min(dt, delta^2 * dt_per_delta2)

    /// Grid with t = 0 a node, a leading pad of at least delta^2 and an even
    /// number of spatial nodes spanning [-L, L).
    SpaceTimeGrid build(double delta) const {
        const double step_x = dx_per_delta > 0.0 ? std::min(dx, delta * dx_per_delta) : dx;
        const double step_t = dt_per_delta2 > 0.0 ? std::min(dt, delta * delta * dt_per_delta2) : dt;
        if (!(half_width > 0.0 && step_x > 0.0 && step_t > 0.0 && t_max > 0.0))
            throw ConfigError("grid extents and steps must be positive");
        auto n_x = static_cast<std::size_t>(std::llround(2.0 * half_width / step_x));
        n_x += n_x % 2;
        const auto n_pre = static_cast<std::size_t>(std::ceil(delta * delta / step_t - 1e-9));
        const auto n_post = static_cast<std::size_t>(std::ceil(t_max / step_t - 1e-9));
        return SpaceTimeGrid::square(n_pre + n_post + 1, std::max<std::size_t>(n_x, 2), step_t, half_width,
                                     -static_cast<double>(n_pre) * step_t);
    }
};

struct ExperimentPlan {
    std::vector<ObjectTag> objects{ObjectTag::lollipop_hat, ObjectTag::cherry_bar, ObjectTag::chickenfoot_bar};
    std::vector<int> p_list{2};
    std::vector<double> lambdas{std::exp(-1.0), std::exp(-1.5), std::exp(-2.0), std::exp(-2.5)};
    std::vector<double> deltas{0.1};
    std::size_t realizations = 2000;
    std::uint64_t base_seed = 1;
    std::vector<SpaceTimePoint> bases{{0.04, {0.0, 0.0}}};
};

struct StudyConfig {
    GridRecipe grid;
    CorrelationKernel kernel;
    MatrixProfile profile;
    ExperimentPlan plan;
    std::size_t n_cheb = 24;
    ParabolicSolverConfig solver;

    static StudyConfig from_ini(const IniFile& ini) {
        StudyConfig c;
        try {
            c.grid.half_width = ini.get_double("grid", "half_width", c.grid.half_width);
            c.grid.dx = ini.get_double("grid", "dx", c.grid.dx);
            c.grid.dt = ini.get_double("grid", "dt", c.grid.dt);
            c.grid.t_max = ini.get_double("grid", "t_max", c.grid.t_max);
            c.grid.dx_per_delta = ini.get_double("grid", "dx_per_delta", 0.0);
            c.grid.dt_per_delta2 = ini.get_double("grid", "dt_per_delta2", 0.0);

            const auto family = parse_kernel_family(ini.get_string("correlation", "family", "zero"));
            c.kernel = CorrelationKernel(family, ini.get_double("correlation", "scale", 0.3),
                                         ini.get_double("correlation", "amplitude", 10.0),
                                         ini.get_double("correlation", "holder_alpha", 0.9));

            c.profile = MatrixProfile(parse_profile_kind(ini.get_string("profile", "kind", "isotropic_logistic")),
                                      ini.get_double("profile", "lambda", 0.5),
                                      ini.get_double("profile", "theta_max", 0.25 * pi));
            c.n_cheb = ini.get_u64("profile", "n_cheb", 24);

            c.solver.tolerance = ini.get_double("solver", "tolerance", c.solver.tolerance);
            c.solver.max_iterations = static_cast<int>(ini.get_u64("solver", "max_iterations", 500));

            auto& p = c.plan;
            if (ini.has("plan", "objects")) {
                p.objects.clear();
                for (const auto& s : ini.get_list("plan", "objects")) p.objects.push_back(parse_object(s));
            }
            if (ini.has("plan", "p")) {
                p.p_list.clear();
                for (double v : ini.get_double_list("plan", "p")) p.p_list.push_back(static_cast<int>(v));
            }
            if (ini.has("plan", "lambdas")) p.lambdas = ini.get_double_list("plan", "lambdas");
            if (ini.has("plan", "deltas")) p.deltas = ini.get_double_list("plan", "deltas");
            else if (ini.has("mollifier", "delta")) p.deltas = {ini.get_double("mollifier", "delta")};
            p.realizations = ini.get_u64("plan", "realizations", p.realizations);
            p.base_seed = ini.get_u64("plan", "seed", p.base_seed);
            if (ini.has("plan", "base_t")) {
                const double bt = ini.get_double("plan", "base_t");
                const auto bx = ini.has("plan", "base_x") ? ini.get_double_list("plan", "base_x") : std::vector<double>{0.0};
                const auto by = ini.has("plan", "base_y") ? ini.get_double_list("plan", "base_y") : std::vector<double>{0.0};
                if (bx.size() != by.size()) throw ConfigError("plan.base_x and plan.base_y differ in length");
                p.bases.clear();
                for (std::size_t i = 0; i < bx.size(); ++i) p.bases.push_back({bt, {bx[i], by[i]}});
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
        c.validate();
        return c;
    }

    /// Checks the plan invariants: lambda in (0, 1/e], p in {1, 2, 3},
    /// delta in (0, 1), every (lambda, delta, base) resolvable on its grid.
    void validate() const {
        const auto& p = plan;
        if (p.objects.empty()) throw ConfigError("plan lists no objects");
        if (p.bases.empty()) throw ConfigError("plan lists no base points");
        for (int q : p.p_list)
            if (q < 1 || q > 3) throw ConfigError("moment orders must lie in {1, 2, 3}");
        for (double d : p.deltas)
            if (!(d > 0.0 && d < 1.0)) throw ConfigError("delta must lie in (0, 1)");
        try {
            for (double d : p.deltas) {
                const SpaceTimeGrid g = grid.build(d);
                MollifierSpec(d).require_resolvable(g);
                for (double l : p.lambdas)
                    for (const auto& b : p.bases) {
                        const TestFunction psi(l, b);
                        if (b.t < 0.0) throw ConfigError("base time must be >= 0");
                        if (b.t + l * l > g.t_end() - d * d + 1e-12)
                            throw ConfigError("test support must end delta^2 before the last grid time");
                        sample_test_function(g, psi);
                    }
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
};

}  // namespace phi42
