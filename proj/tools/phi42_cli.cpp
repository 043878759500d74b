// phi42: command-line driver for the lattice experiments.
//
// Exit codes: 0 success, 1 other failure, 2 config error, 3 budget exceeded,
// 4 verification failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "phi42/phi42.hpp"
#include "phi42/verify.hpp"

namespace fs = std::filesystem;
using namespace phi42;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    std::size_t threads = 1;
    double budget_seconds = 0.0;
};

void add_common(CLI::App* app, CommonFlags& f, bool needs_config = true) {
    auto* c = app->add_option("--config", f.config, "INI config file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    app->add_option("--seed", f.seed, "base seed (overrides [plan] seed)");
    app->add_option("--out", f.out, "output directory");
    app->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
    app->add_option("--budget-seconds", f.budget_seconds, "wall-time cap (0 = none)");
}

StudyConfig load_config(const CommonFlags& f) {
    IniFile ini = IniFile::load(f.config);
    if (f.seed) ini.set("plan", "seed", std::to_string(*f.seed));
    return StudyConfig::from_ini(ini);
}

RunOptions run_options(const CommonFlags& f) { return {fs::path(f.out), f.threads, f.budget_seconds}; }

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

int cmd_sample(const CommonFlags& f) {
    const StudyConfig cfg = load_config(f);
    const double delta = cfg.plan.deltas.front();
    const SpaceTimeGrid grid = cfg.grid.build(delta);
    const std::uint64_t seed = cell_seed(cfg.plan.base_seed, delta);
    const ScalarField xi = sample_white_noise(grid, stream_seed(seed, 0, StreamRole::noise));
    const ScalarField g = build_driver(cfg.kernel, xi, stream_seed(seed, 0, StreamRole::driver_history));
    const CoeffField coeff = build_coefficients(g, cfg.profile);
    LollipopEngine engine(grid, MollifierSpec(delta), cfg.profile, cfg.n_cheb);
    const TreeRealization t = build_trees(coeff, xi, engine, seed, 0);
    fs::create_directories(f.out);
    const nlohmann::json meta = {{"delta", delta}, {"seed", seed}, {"realization", 0}};
    const fs::path out(f.out);
    write_field(out / "xi.bin", xi, "xi", meta);
    write_coefficients(out / "coefficients.bin", coeff, meta);
    write_field(out / "lollipop_hat.bin", t.lollipop_hat, "lollipop_hat", meta);
    write_field(out / "c_cherry.bin", t.c_cherry, "c_cherry", meta);
    write_field(out / "cherry_bar.bin", t.cherry_bar, "cherry_bar", meta);
    write_field(out / "chickenfoot_bar.bin", t.chickenfoot_bar, "chickenfoot_bar", meta);
    std::cout << "wrote 6 fields on a " << grid.n_t() << "x" << grid.n_x() << "x" << grid.n_y() << " grid to " << f.out
              << "\n";
    return 0;
}

int cmd_scaling(const CommonFlags& f) {
    const StudyConfig cfg = load_config(f);
    const auto reports = run_plan(cfg, run_options(f));
    const fs::path out(f.out);
    write_reports_csv(out / "reports.csv", reports);
    nlohmann::json fits = nlohmann::json::array();
    for (ObjectTag o : cfg.plan.objects)
        for (int p : cfg.plan.p_list) {
            std::vector<MomentReport> sel;
            for (const auto& r : reports)
                if (r.delta == cfg.plan.deltas.front() && r.base == 0) sel.push_back(r);
            try {
                fits.push_back(fit_scaling(sel, to_string(o), p, target_exponent(o)).to_json());
            } catch (const InsufficientPoints& e) {
                std::cerr << "no fit for " << to_string(o) << ": " << e.what() << "\n";
            }
        }
    write_json(out / "fits.json", fits);
    for (const auto& r : reports)
        std::cout << r.object << " p=" << r.p << " lambda=" << r.lambda << " delta=" << r.delta << " base=" << r.base
                  << " estimate=" << r.estimate << " se=" << r.se << "\n";
    return 0;
}

int cmd_renorm(const CommonFlags& f) {
    const StudyConfig cfg = load_config(f);
    const RenormComparison c = renormalization_necessity_study(cfg, run_options(f));
    write_json(fs::path(f.out) / "renorm.json", c.to_json());
    std::cout << c.to_json().dump(2) << "\n";
    return 0;
}

int cmd_regular(const CommonFlags& f, std::size_t decay_realizations) {
    const StudyConfig cfg = load_config(f);
    const auto reports = run_plan(cfg, run_options(f));
    const fs::path out(f.out);
    write_reports_csv(out / "reports.csv", reports);
    nlohmann::json j = {{"reports", nlohmann::json::array()}};
    for (const auto& r : reports)
        j["reports"].push_back({{"object", r.object}, {"p", r.p}, {"lambda", r.lambda}, {"delta", r.delta},
                                {"estimate", r.estimate}, {"se", r.se}});
    if (decay_realizations > 0) j["decay"] = regular_part_decay_study(cfg, decay_realizations).to_json();
    write_json(out / "regular_part.json", j);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_verify() {
    bool ok = true;
    for (const auto& r : run_verify_suites()) {
        std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " worst=" << r.worst << " tol=" << r.tolerance << "\n";
        ok = ok && r.passed;
    }
    return ok ? 0 : 4;
}

int cmd_emit(const std::string& ledger, const std::string& out, const std::vector<std::string>& objects,
             const std::vector<int>& p) {
    const auto reports = emit_plot_data(ledger, {objects, p}, out);
    std::cout << "wrote " << reports.size() << " rows to " << (fs::path(out) / "plot_data.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"phi42: lattice experiments for singular quasilinear stochastic heat equations"};
    app.require_subcommand(1);

    CommonFlags sample_f, scaling_f, renorm_f, regular_f;
    auto* sample = app.add_subcommand("sample", "draw one realization and export its fields");
    add_common(sample, sample_f);
    auto* scaling = app.add_subcommand("scaling-study", "moment sweep over lambda and delta");
    add_common(scaling, scaling_f);
    auto* renorm = app.add_subcommand("renorm-study", "renormalized vs unrenormalized cherry across delta");
    add_common(renorm, renorm_f);
    auto* regular = app.add_subcommand("regular-part-study", "regular-part moments and near-diagonal decay");
    add_common(regular, regular_f);
    std::size_t decay_realizations = 0;
    regular->add_option("--decay-realizations", decay_realizations, "realizations for the decay regression");
    auto* verify = app.add_subcommand("verify", "exact-oracle checks of the Wick, kernel and mollifier layers");
    auto* emit = app.add_subcommand("emit-plots", "tabulate a ledger as CSV and gnuplot data");
    std::string ledger, emit_out = "out";
    std::vector<std::string> emit_objects;
    std::vector<int> emit_p{2};
    emit->add_option("--ledger", ledger, "observation ledger (observations.jsonl)")->required();
    emit->add_option("--out", emit_out, "output directory");
    emit->add_option("--objects", emit_objects, "objects to include (default all)");
    emit->add_option("--p", emit_p, "moment orders");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*sample) return cmd_sample(sample_f);
        if (*scaling) return cmd_scaling(scaling_f);
        if (*renorm) return cmd_renorm(renorm_f);
        if (*regular) return cmd_regular(regular_f, decay_realizations);
        if (*verify) return cmd_verify();
        if (*emit) return cmd_emit(ledger, emit_out, emit_objects, emit_p);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const BudgetExceeded& e) {
        std::cerr << e.what() << " (partial results kept in the ledger; rerun to resume)\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 1;
    }
    return 0;
}
