#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phi42/io.hpp"
#include "phi42/mc_experiments.hpp"
#include "phi42/regular_part.hpp"
#include "phi42/statistics.hpp"

namespace phi42 {

// ---------------------------------------------------------------- renormalization

struct RenormRow {
    double delta = 0.0;
    double unrenormalized = 0.0, unrenormalized_se = 0.0;  // E (lollipop_hat^2, psi)^2
    double renormalized = 0.0, renormalized_se = 0.0;      // E (cherry_bar, psi)^2
    double mean_unrenormalized = 0.0, mean_unrenormalized_se = 0.0;
    double c_pairing = std::nan("");  // (c^cherry, psi) when the coefficients are constant
};

struct RenormComparison {
    double lambda = 0.0;
    std::vector<RenormRow> rows;  // ordered by decreasing delta
    double growth = 0.0;          // unrenormalized at smallest delta / at largest delta
    double spread = 0.0;          // max / min renormalized

    nlohmann::json to_json() const {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& x : rows)
            r.push_back({{"delta", x.delta},
                         {"unrenormalized", x.unrenormalized},
                         {"unrenormalized_se", x.unrenormalized_se},
                         {"renormalized", x.renormalized},
                         {"renormalized_se", x.renormalized_se},
                         {"mean_unrenormalized", x.mean_unrenormalized},
                         {"mean_unrenormalized_se", x.mean_unrenormalized_se},
                         {"c_pairing", std::isnan(x.c_pairing) ? nlohmann::json() : nlohmann::json(x.c_pairing)}});
        return {{"lambda", lambda}, {"rows", r}, {"growth", growth}, {"spread", spread}};
    }
};

/// Second moments of (lollipop_hat^2, psi^lambda) and (cherry_bar, psi^lambda)
/// across the delta list, at the first lambda and base point of the plan.
inline RenormComparison renormalization_necessity_study(StudyConfig config, const RunOptions& opt = {}) {
    auto& plan = config.plan;
    if (plan.deltas.size() < 3) throw InvalidArgument("need at least three delta values");
    std::sort(plan.deltas.begin(), plan.deltas.end(), std::greater<>());
    if (plan.deltas.front() < 4.0 * plan.deltas.back()) throw InvalidArgument("delta values must span a factor >= 4");
    plan.objects = {ObjectTag::cherry_hat, ObjectTag::cherry_bar};
    plan.p_list = {2};
    plan.lambdas = {plan.lambdas.front()};
    plan.bases = {plan.bases.front()};
    const auto reports = run_plan(config, opt);

    RenormComparison out;
    out.lambda = plan.lambdas.front();
    for (double d : plan.deltas) {
        RenormRow row;
        row.delta = d;
        for (const auto& r : reports) {
            if (r.delta != d) continue;
            const double m2 = r.estimate * r.estimate, se2 = 2.0 * r.estimate * r.se;
            if (r.object == "cherry_hat") {
                row.unrenormalized = m2;
                row.unrenormalized_se = se2;
                row.mean_unrenormalized = r.mean;
                row.mean_unrenormalized_se = r.mean_se;
            } else {
                row.renormalized = m2;
                row.renormalized_se = se2;
            }
        }
        if (config.kernel.family == KernelFamily::zero) {
            const SpaceTimeGrid g = config.grid.build(d);
            const ScalarField c = cherry_counterterm_field(constant_coefficients(g, config.profile), MollifierSpec(d));
            row.c_pairing = pair(c, TestFunction(out.lambda, plan.bases.front()));
        }
        out.rows.push_back(row);
    }
    out.growth = out.rows.back().unrenormalized / out.rows.front().unrenormalized;
    double lo = out.rows.front().renormalized, hi = lo;
    for (const auto& r : out.rows) {
        lo = std::min(lo, r.renormalized);
        hi = std::max(hi, r.renormalized);
    }
    out.spread = hi / lo;
    return out;
}

// ---------------------------------------------------------------- plot data

inline const std::vector<std::string>& report_csv_header() {
    static const std::vector<std::string> h{"object", "p",       "lambda", "delta", "base", "estimate",
                                            "se",     "mean",    "mean_se", "n",    "seed", "wall_time"};
    return h;
}

inline void write_reports_csv(const std::filesystem::path& path, const std::vector<MomentReport>& reports) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    const auto& h = report_csv_header();
    for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
    out << "\r\n";
    for (const auto& r : reports) {
        out << csv_quote(r.object) << ',' << r.p << ',' << format_double(r.lambda) << ',' << format_double(r.delta)
            << ',' << r.base << ',' << format_double(r.estimate) << ',' << format_double(r.se) << ','
            << format_double(r.mean) << ',' << format_double(r.mean_se) << ',' << r.n << ',' << r.seed << ','
            << format_double(r.wall_time) << "\r\n";
    }
}

inline std::vector<MomentReport> read_reports_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || csv_split(line) != report_csv_header()) throw LedgerCorrupt("unexpected CSV header");
    std::vector<MomentReport> out;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = csv_split(line);
        if (f.size() != report_csv_header().size()) throw LedgerCorrupt("wrong field count in " + path.string());
        MomentReport r;
        r.object = f[0];
        r.p = std::stoi(f[1]);
        r.lambda = std::stod(f[2]);
        r.delta = std::stod(f[3]);
        r.base = std::stoi(f[4]);
        r.estimate = std::stod(f[5]);
        r.se = std::stod(f[6]);
        r.mean = std::stod(f[7]);
        r.mean_se = std::stod(f[8]);
        r.n = std::stoull(f[9]);
        r.seed = std::stoull(f[10]);
        r.wall_time = std::stod(f[11]);
        out.push_back(std::move(r));
    }
    return out;
}

struct PlotQuery {
    std::vector<std::string> objects;  // empty: all
    std::vector<int> p_list{2};
};

/// Reads an observation ledger (checksums verified) and writes
/// `plot_data.csv` plus a gnuplot-ready `plot_data.dat` (one block per
/// object/p/delta/base series: lambda, |log lambda|, estimate, se).
inline std::vector<MomentReport> emit_plot_data(const std::filesystem::path& ledger_path, const PlotQuery& query,
                                                const std::filesystem::path& out_dir) {
    if (!std::filesystem::exists(ledger_path)) throw Error("ledger not found: " + ledger_path.string());
    auto rows = ChecksummedLedger(ledger_path).read();
    if (!query.objects.empty())
        std::erase_if(rows, [&](const nlohmann::json& r) {
            return std::find(query.objects.begin(), query.objects.end(), r.at("object").get<std::string>()) ==
                   query.objects.end();
        });
    const auto reports = reports_from_rows(rows, query.p_list);
    std::filesystem::create_directories(out_dir);
    write_reports_csv(out_dir / "plot_data.csv", reports);
    std::ofstream dat(out_dir / "plot_data.dat");
    std::string series;
    for (const auto& r : reports) {
        const std::string s = r.object + " p=" + std::to_string(r.p) + " delta=" + format_double(r.delta) +
                              " base=" + std::to_string(r.base);
        if (s != series) {
            if (!series.empty()) dat << "\n\n";
            dat << "# " << s << "\n# lambda abs_log_lambda estimate se\n";
            series = s;
        }
        dat << format_double(r.lambda) << ' ' << format_double(std::abs(std::log(r.lambda))) << ' '
            << format_double(r.estimate) << ' ' << format_double(r.se) << "\n";
    }
    return reports;
}

// ---------------------------------------------------------------- regular part

/// Moment reports (p = 1, 2) of (psi^lambda, (int R_delta xi_delta)^m).
inline std::vector<MomentReport> regular_part_moment_experiment(StudyConfig config, int m_power, double lambda,
                                                                double delta, std::size_t realizations,
                                                                const RunOptions& opt = {}) {
    if (m_power < 1 || m_power > 3) throw InvalidArgument("m_power must be 1, 2 or 3");
    config.plan.objects = {m_power == 1   ? ObjectTag::regular_part_m1
                           : m_power == 2 ? ObjectTag::regular_part_m2
                                          : ObjectTag::regular_part_m3};
    config.plan.p_list = {1, 2};
    config.plan.lambdas = {lambda};
    config.plan.deltas = {delta};
    config.plan.realizations = realizations;
    return run_plan(config, opt);
}

struct DecayReport {
    std::vector<double> lags;
    std::vector<double> mean_abs;  // E|R(z, z')| at x = x' for the configured coefficients
    std::vector<double> baseline;  // |R| for the constant coefficients A(0)
    SlopeFit fit, baseline_fit;    // log E|R| against log lag
    double slope_gap = 0.0;

    nlohmann::json to_json() const {
        return {{"lags", lags},         {"mean_abs", mean_abs},
                {"baseline", baseline}, {"fit", fit.to_json()},
                {"baseline_fit", baseline_fit.to_json()}, {"slope_gap", slope_gap}};
    }
};

/// Near-diagonal decay of the regular part: Green columns from z' = (0, 0),
/// R read at x = x' for lags t - t' log-spaced in [4 dt, lag_max].
inline DecayReport regular_part_decay_study(const StudyConfig& config, std::size_t realizations, double lag_max = 0.25,
                                            std::size_t n_lags = 12) {
    const double delta = config.plan.deltas.front();
    const SpaceTimeGrid g = config.grid.build(delta);
    const std::size_t it0 = g.origin_index(), ic = g.n_x() / 2, jc = g.n_y() / 2;
    const auto max_steps = static_cast<std::size_t>(std::floor(lag_max / g.dt() + 1e-9));
    if (it0 + max_steps >= g.n_t() || max_steps < 8) throw InvalidArgument("grid too short for the lag window");
    std::vector<std::size_t> steps;
    for (std::size_t i = 0; i < n_lags; ++i) {
        const double s = 4.0 * std::pow(static_cast<double>(max_steps) / 4.0, static_cast<double>(i) / (n_lags - 1));
        const auto k = static_cast<std::size_t>(std::llround(s));
        if (steps.empty() || k > steps.back()) steps.push_back(k);
    }
    DecayReport rep;
    for (auto k : steps) rep.lags.push_back(static_cast<double>(k) * g.dt());
    auto column_r = [&](const CoeffField& c) {
        const GreenColumn col = solve_parabolic(c, it0, ic, jc, it0 + steps.back(), config.solver);
        std::vector<double> v;
        for (auto k : steps) v.push_back(std::abs(regular_part(c, col, it0 + k, ic, jc)));
        return v;
    };
    rep.baseline = column_r(constant_coefficients(g, config.profile));
    rep.mean_abs.assign(steps.size(), 0.0);
    const std::uint64_t seed = cell_seed(config.plan.base_seed, delta);
    std::vector<std::vector<double>> per_lag(steps.size());
    for (std::size_t r = 0; r < realizations; ++r) {
        const ScalarField xi = sample_white_noise(g, stream_seed(seed, r, StreamRole::noise));
        const CoeffField c = build_coefficients(
            build_driver(config.kernel, xi, stream_seed(seed, r, StreamRole::driver_history)), config.profile);
        const auto v = column_r(c);
        for (std::size_t i = 0; i < v.size(); ++i) per_lag[i].push_back(v[i]);
    }
    std::vector<double> lx, ly, by;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        rep.mean_abs[i] = mean_of(per_lag[i]);
        lx.push_back(std::log(rep.lags[i]));
        ly.push_back(std::log(rep.mean_abs[i]));
        by.push_back(std::log(rep.baseline[i]));
    }
    rep.fit = least_squares(lx, ly);
    rep.baseline_fit = least_squares(lx, by);
    rep.slope_gap = rep.fit.slope - rep.baseline_fit.slope;
    return rep;
}

}  // namespace phi42
