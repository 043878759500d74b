#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "phi42/config.hpp"
#include "phi42/experiment_config.hpp"
#include "phi42/mc_experiments.hpp"
#include "phi42/regular_part.hpp"
#include "phi42/statistics.hpp"
#include "phi42/studies.hpp"
#include "report.hpp"

namespace phi42::acceptance {

namespace fs = std::filesystem;

struct Paths {
    fs::path configs;  // shipped INI files
    fs::path cache;    // ledgers shared between criteria; reruns resume from them
};

inline StudyConfig load_study(const Paths& p, const std::string& name) {
    return StudyConfig::from_ini(IniFile::load((p.configs / name).string()));
}

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// The scaling sweep; criteria 6 and 9 read the same ledger.
inline std::vector<MomentReport> scaling_reports(const Paths& p) {
    return run_plan(load_study(p, "scaling.ini"), {p.cache / "scaling", 1, 0.0});
}

inline Outcome criterion_6(const Paths& p) {
    Outcome o{6, {}, {}};
    const StudyConfig cfg = load_study(p, "scaling.ini");
    const auto reports = scaling_reports(p);
    for (ObjectTag obj : cfg.plan.objects) {
        const std::string name = to_string(obj);
        const double target = target_exponent(obj);
        std::vector<MomentReport> sel;
        std::vector<double> normalized;
        for (const auto& r : reports)
            if (r.object == name && r.p == 2 && r.base == 0) {
                sel.push_back(r);
                normalized.push_back(r.estimate / std::pow(std::abs(std::log(r.lambda)), target));
                o.note("%s lambda=e^%.2f estimate %.5e se %.2e normalized %.5e", name.c_str(), std::log(r.lambda),
                       r.estimate, r.se, normalized.back());
            }
        const double spread = max_over_min(normalized);
        o.check(name + ": normalized estimate max/min <= 4", spread <= 4.0);
        const ScalingFit fit = fit_scaling(sel, name, 2, target);
        o.check(name + ": fitted exponent <= target + 0.35", fit.beta <= target + 0.35);
        o.note("%s: spread %.3f, beta %.3f [%.3f, %.3f], target %.1f, r2 %.3f", name.c_str(), spread, fit.beta,
               fit.ci_low, fit.ci_high, target, fit.r2);
    }
    return o;
}

inline Outcome criterion_9(const Paths& p) {
    Outcome o{9, {}, {}};
    const auto reports = scaling_reports(p);
    for (const auto& a : reports) {
        if (a.base != 0 || a.p != 2) continue;
        for (const auto& b : reports) {
            if (b.base != 1 || b.p != 2 || b.object != a.object || b.lambda != a.lambda) continue;
            // second moments and their delta-method standard errors
            const double ma = a.estimate * a.estimate, mb = b.estimate * b.estimate;
            const double sa = 2.0 * a.estimate * a.se, sb = 2.0 * b.estimate * b.se;
            const double se = std::hypot(sa, sb);
            const double z = (ma - mb) / se;
            o.check(a.object + " lambda=e^" + label(std::round(100.0 * std::log(a.lambda)) / 100.0) +
                        ": base points agree within 3 SE",
                    std::abs(z) <= 3.0);
            o.note("%s lambda=e^%.2f: %.5e vs %.5e (%.2f SE)", a.object.c_str(), std::log(a.lambda), ma, mb, z);
        }
    }
    return o;
}

inline Outcome criterion_7(const Paths& p) {
    Outcome o{7, {}, {}};
    const RenormComparison c = renormalization_necessity_study(load_study(p, "renorm.ini"), {p.cache / "renorm", 1, 0.0});
    for (const auto& r : c.rows)
        o.note("delta=%.3f unrenormalized %.5e +- %.2e, renormalized %.5e +- %.2e, (c, psi) %.5e", r.delta,
               r.unrenormalized, r.unrenormalized_se, r.renormalized, r.renormalized_se, r.c_pairing);
    o.check("unrenormalized second moment grows >= 1.5x from delta 0.4 to 0.05", c.growth >= 1.5);
    o.check("renormalized second moment varies <= 2x across the sweep", c.spread <= 2.0);
    o.note("growth %.3f, renormalized spread %.3f", c.growth, c.spread);
    return o;
}

inline Outcome criterion_8(const Paths& p) {
    Outcome o{8, {}, {}};
    StudyConfig cfg = load_study(p, "regular.ini");
    const double delta = cfg.plan.deltas.front();
    {
        // constant coefficients: the discrete Green function equals the discrete frozen kernel
        const SpaceTimeGrid g = cfg.grid.build(delta);
        const CoeffField c = constant_coefficients(g, cfg.profile);
        const ScalarField f = mollify(sample_white_noise(g, 808), MollifierSpec(delta));
        const double r = regular_part_field(c, f, cfg.n_cheb, cfg.solver).max_abs();
        const double v = solve_driven(c, f, cfg.solver).max_abs();
        o.check("constant coefficients: integrated R within solver error of 0", r <= 1e-6 * v);
        o.note("constant coefficients: max|int R f| %.3e vs max|int Gamma f| %.3e", r, v);
        // against the continuum kernel the residual is the lattice discretization error, first order in dx
        const std::size_t it0 = g.origin_index(), lag = static_cast<std::size_t>(std::lround(0.25 / g.dt()));
        const GreenColumn col = solve_parabolic(c, it0, g.n_x() / 2, g.n_y() / 2, it0 + lag, cfg.solver);
        double l1 = 0.0;
        for (std::size_t ix = 0; ix < g.n_x(); ++ix)
            for (std::size_t iy = 0; iy < g.n_y(); ++iy)
                l1 += std::abs(regular_part(c, col, it0 + lag, ix, iy)) * g.cell_area();
        o.check("constant coefficients: L1 norm of Gamma - K at lag 0.25 <= dx", l1 <= g.dx());
        o.note("constant coefficients: L1(Gamma - K) = %.3e, dx = %.3f", l1, g.dx());
    }
    {
        const auto reports = run_plan(cfg, {p.cache / "regular_lambda", 1, 0.0});
        std::vector<double> est;
        for (const auto& r : reports)
            if (r.p == 2) {
                est.push_back(r.estimate);
                o.note("lambda=e^%.2f: E^(1/2)(psi, int R xi)^2 = %.5e +- %.2e", std::log(r.lambda), r.estimate, r.se);
            }
        o.check("lambda sweep varies by <= 3x", est.size() == cfg.plan.lambdas.size() && max_over_min(est) <= 3.0);
        o.note("lambda sweep spread %.3f", max_over_min(est));
    }
    {
        std::vector<double> est;
        for (double d : {0.1, 0.2, 0.4}) {
            const auto rs = regular_part_moment_experiment(cfg, 1, cfg.plan.lambdas.front(), d, cfg.plan.realizations,
                                                           {p.cache / ("regular_delta_" + label(d)), 1, 0.0});
            for (const auto& r : rs)
                if (r.p == 2) {
                    est.push_back(r.estimate);
                    o.note("delta=%.2f: E^(1/2)(psi, int R xi)^2 = %.5e +- %.2e", d, r.estimate, r.se);
                }
        }
        o.check("delta sweep varies by <= 3x", est.size() == 3 && max_over_min(est) <= 3.0);
        o.note("delta sweep spread %.3f", max_over_min(est));
    }
    {
        const double alpha_prime = 0.5 * cfg.kernel.holder_alpha;
        const DecayReport d = regular_part_decay_study(cfg, 200);
        const double need = 0.5 * alpha_prime - 0.15;
        o.check("decay slope above the constant-coefficient baseline by >= alpha'/2 - 0.15", d.slope_gap >= need);
        o.note("decay slope %.3f, baseline %.3f, gap %.3f, required %.3f", d.fit.slope, d.baseline_fit.slope,
               d.slope_gap, need);
    }
    return o;
}

/// Reruns of the same config and seed give byte-identical ledgers, for any thread count.
inline Outcome criterion_10(const Paths& p) {
    Outcome o{10, {}, {}};
    const fs::path root = p.cache / "reproducibility";
    fs::remove_all(root);
    auto rerun = [&](const std::string& name, StudyConfig cfg, std::size_t realizations) {
        cfg.plan.realizations = realizations;
        const fs::path a = root / (name + "_a"), b = root / (name + "_b");
        run_plan(cfg, {a, 1, 0.0});
        run_plan(cfg, {b, 2, 0.0});
        for (const char* file : {"observations.jsonl", "reports.jsonl"}) {
            const std::string x = slurp(a / file), y = slurp(b / file);
            o.check(name + ": " + file + " byte-identical across reruns", !x.empty() && x == y);
            o.note("%s/%s: %zu bytes", name.c_str(), file, x.size());
        }
        return slurp(a / "observations.jsonl");
    };
    const std::string scaling = rerun("scaling", load_study(p, "scaling.ini"), 8);
    rerun("renorm", load_study(p, "renorm.ini"), 4);
    rerun("regular", load_study(p, "regular.ini"), 4);
    // the full sweep ledger, when present, starts with the same rows
    const fs::path full = p.cache / "scaling" / "observations.jsonl";
    if (fs::exists(full)) {
        const std::string text = slurp(full);
        o.check("scaling: rerun is a prefix of the full sweep ledger", text.compare(0, scaling.size(), scaling) == 0);
    }
    return o;
}

}  // namespace phi42::acceptance
