#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "phi42/corr_field.hpp"
#include "phi42/experiment_config.hpp"
#include "phi42/gauss_kernels.hpp"
#include "phi42/io.hpp"
#include "phi42/lattice_noise.hpp"
#include "phi42/lollipop_engine.hpp"
#include "phi42/regular_part.hpp"
#include "phi42/renorm_trees.hpp"
#include "phi42/rng.hpp"
#include "phi42/statistics.hpp"

namespace phi42 {

struct RunOptions {
    std::filesystem::path out_dir;  // empty: keep everything in memory
    std::size_t threads = 1;
    double budget_seconds = 0.0;    // <= 0: unlimited
};

inline std::uint64_t cell_seed(std::uint64_t base_seed, double delta) {
    return derive_seed(base_seed, {std::bit_cast<std::uint64_t>(delta)});
}

/// The lattice objects of one realization, built on demand.
struct RealizationFields {
    ScalarField xi;
    CoeffField coeff;
    std::optional<TreeRealization> trees;
    std::optional<ScalarField> fixed_lollipop;  // K_{A(0)} * xi_delta
    std::optional<ScalarField> regular;         // int R_delta xi_delta
};

/// Per-thread evaluator for one delta cell.
class CellEvaluator {
public:
    CellEvaluator(const StudyConfig& config, double delta)
        : config_(config), delta_(delta), grid_(config.grid.build(delta)), spec_(delta),
          seed_(cell_seed(config.plan.base_seed, delta)) {
        for (ObjectTag o : config.plan.objects) {
            if (is_regular_part(o)) needs_regular_ = true;
            else needs_engine_ = true;
        }
        for (double l : config.plan.lambdas)
            for (const auto& b : config.plan.bases) tests_.push_back(sample_test_function(grid_, TestFunction(l, b)));
        mask_.assign(grid_.size(), 0);
        for (const auto& st : tests_)
            for (std::size_t i : st.index) mask_[i] = 1;
        if (needs_engine_) engine_ = std::make_unique<LollipopEngine>(grid_, spec_, config.profile, config.n_cheb);
        const SymMat2 a0 = config.profile(0.0);
        fixed_c_.resize(grid_.n_t());
        for (std::size_t it = 0; it < grid_.n_t(); ++it) fixed_c_[it] = cherry_counterterm(a0, grid_.t(it), spec_);
    }

    const SpaceTimeGrid& grid() const { return grid_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t noise_seed(std::uint64_t r) const { return stream_seed(seed_, r, StreamRole::noise); }

    RealizationFields fields(std::uint64_t r) {
        RealizationFields f{sample_white_noise(grid_, noise_seed(r)), {}, {}, {}, {}};
        const ScalarField g = build_driver(config_.kernel, f.xi, stream_seed(seed_, r, StreamRole::driver_history));
        f.coeff = build_coefficients(g, config_.profile);
        if (needs_engine_) {
            f.trees = build_trees(f.coeff, f.xi, *engine_, seed_, r, &mask_);
            if (needs_fixed()) f.fixed_lollipop = engine_->solve_constant(config_.profile(0.0), f.xi);
        }
        if (needs_regular_) f.regular = regular_part_field(f.coeff, mollify(f.xi, spec_), config_.n_cheb, config_.solver);
        return f;
    }

    /// Ledger rows of realization r, ordered by (object, lambda, base).
    std::vector<nlohmann::json> evaluate(std::uint64_t r) {
        const RealizationFields f = fields(r);
        std::vector<nlohmann::json> rows;
        const auto& plan = config_.plan;
        for (ObjectTag o : plan.objects)
            for (std::size_t il = 0; il < plan.lambdas.size(); ++il)
                for (std::size_t ib = 0; ib < plan.bases.size(); ++ib) {
                    const SampledTest& st = tests_[il * plan.bases.size() + ib];
                    rows.push_back({{"cell_seed", seed_},
                                    {"realization", r},
                                    {"seed", noise_seed(r)},
                                    {"delta", delta_},
                                    {"lambda", plan.lambdas[il]},
                                    {"object", to_string(o)},
                                    {"base", ib},
                                    {"value", value(o, f, st)}});
                }
        return rows;
    }

private:
    bool needs_fixed() const {
        for (ObjectTag o : config_.plan.objects)
            if (o == ObjectTag::x1 || o == ObjectTag::x2 || o == ObjectTag::x3) return true;
        return false;
    }

    double value(ObjectTag o, const RealizationFields& f, const SampledTest& st) const {
        const std::size_t ns = grid_.slice_size();
        auto pair_with = [&](auto&& fn) {
            double acc = 0.0;
            for (std::size_t i = 0; i < st.index.size(); ++i) acc += st.weight[i] * fn(st.index[i]);
            return acc;
        };
        switch (o) {
            case ObjectTag::lollipop_hat: return pair(f.trees->lollipop_hat, st);
            case ObjectTag::cherry_hat:
                return pair_with([&](std::size_t i) { return std::pow(f.trees->lollipop_hat.data()[i], 2); });
            case ObjectTag::cherry_bar: return pair(f.trees->cherry_bar, st);
            case ObjectTag::chickenfoot_bar: return pair(f.trees->chickenfoot_bar, st);
            case ObjectTag::x1: return pair(*f.fixed_lollipop, st);
            case ObjectTag::x2:
                return pair_with([&](std::size_t i) {
                    const double l = f.fixed_lollipop->data()[i];
                    return l * l - fixed_c_[i / ns];
                });
            case ObjectTag::x3:
                return pair_with([&](std::size_t i) {
                    const double l = f.fixed_lollipop->data()[i];
                    return l * l * l - 3.0 * fixed_c_[i / ns] * l;
                });
            case ObjectTag::regular_part_m1:
            case ObjectTag::regular_part_m2:
            case ObjectTag::regular_part_m3: {
                const int m = o == ObjectTag::regular_part_m1 ? 1 : o == ObjectTag::regular_part_m2 ? 2 : 3;
                return pair_with([&](std::size_t i) { return std::pow(f.regular->data()[i], m); });
            }
        }
        return 0.0;
    }

    const StudyConfig& config_;
    double delta_;
    SpaceTimeGrid grid_;
    MollifierSpec spec_;
    std::uint64_t seed_;
    bool needs_engine_ = false, needs_regular_ = false;
    std::vector<SampledTest> tests_;
    std::vector<std::uint8_t> mask_;  // union of the test supports
    std::unique_ptr<LollipopEngine> engine_;
    std::vector<double> fixed_c_;
};

/// Groups ledger rows into reports per (object, lambda, delta, base) and p,
/// samples ordered by realization.
inline std::vector<MomentReport> reports_from_rows(const std::vector<nlohmann::json>& rows, const std::vector<int>& p_list,
                                                   const std::map<double, double>& wall_times = {}) {
    using Key = std::tuple<std::string, double, double, int>;
    std::map<Key, std::map<std::uint64_t, double>> groups;
    std::map<Key, std::uint64_t> seeds;
    std::vector<Key> order;
    for (const auto& r : rows) {
        const Key k{r.at("object").get<std::string>(), r.at("lambda").get<double>(), r.at("delta").get<double>(),
                    r.at("base").get<int>()};
        if (!groups.count(k)) order.push_back(k);
        groups[k][r.at("realization").get<std::uint64_t>()] = r.at("value").get<double>();
        seeds[k] = r.at("cell_seed").get<std::uint64_t>();
    }
    std::vector<MomentReport> out;
    for (const auto& k : order) {
        std::vector<double> v;
        for (const auto& [real, val] : groups[k]) v.push_back(val);
        const auto& [obj, lam, del, base] = k;
        const auto wt = wall_times.find(del);
        for (int p : p_list)
            out.push_back(moment_report(obj, p, lam, del, base, v, seeds[k], wt == wall_times.end() ? 0.0 : wt->second));
    }
    return out;
}

/// Runs every (delta, realization) task of the plan. Each realization draws a
/// fresh xi; the coefficient field is built from the same xi; one realization
/// serves every lambda and base point. Ledger rows are appended in
/// (delta, realization) order whatever the thread count, so the ledger is a
/// pure function of the config and seed; a rerun skips realizations already
/// in the ledger.
inline std::vector<MomentReport> run_plan(const StudyConfig& config, const RunOptions& opt = {}) {
    config.validate();
    const auto& plan = config.plan;
    const auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    std::optional<ChecksummedLedger> ledger;
    std::vector<nlohmann::json> rows;
    if (!opt.out_dir.empty()) {
        std::filesystem::create_directories(opt.out_dir);
        ledger.emplace(opt.out_dir / "observations.jsonl");
        rows = ledger->read();
    }
    const std::size_t per_realization = plan.objects.size() * plan.lambdas.size() * plan.bases.size();
    std::map<double, double> wall_times;
    bool budget_hit = false;

    for (double delta : plan.deltas) {
        if (plan.realizations == 0) break;
        const auto cell_start = elapsed();
        std::map<std::uint64_t, std::size_t> have;
        for (const auto& r : rows)
            if (r.at("delta").get<double>() == delta) ++have[r.at("realization").get<std::uint64_t>()];
        std::vector<std::uint64_t> todo;
        for (std::uint64_t r = 0; r < plan.realizations; ++r)
            if (have[r] < per_realization) todo.push_back(r);
        if (todo.empty()) continue;

        std::vector<std::optional<std::vector<nlohmann::json>>> done(todo.size());
        std::size_t flushed = 0;
        std::mutex mu;
        std::atomic<std::size_t> next{0};
        std::atomic<bool> stop{false};
        std::exception_ptr failure;

        auto flush_locked = [&] {
            std::vector<nlohmann::json> batch;
            while (flushed < done.size() && done[flushed]) {
                for (auto& row : *done[flushed]) batch.push_back(std::move(row));
                done[flushed].reset();
                ++flushed;
            }
            if (ledger && !batch.empty()) ledger->append(batch);
            for (auto& row : batch) rows.push_back(std::move(row));
        };

        auto worker = [&] {
            try {
                CellEvaluator eval(config, delta);
                while (!stop) {
                    if (opt.budget_seconds > 0.0 && elapsed() > opt.budget_seconds) {
                        stop = true;
                        break;
                    }
                    const std::size_t i = next++;
                    if (i >= todo.size()) break;
                    auto out = eval.evaluate(todo[i]);
                    std::lock_guard lock(mu);
                    done[i] = std::move(out);
                    flush_locked();
                }
            } catch (...) {
                std::lock_guard lock(mu);
                if (!failure) failure = std::current_exception();
                stop = true;
            }
        };
        const std::size_t nthreads = std::max<std::size_t>(1, std::min(opt.threads, todo.size()));
        std::vector<std::thread> pool;
        for (std::size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
        wall_times[delta] = elapsed() - cell_start;
        if (flushed < todo.size()) {
            budget_hit = true;
            break;
        }
    }

    std::vector<nlohmann::json> mine;
    for (const auto& r : rows) {
        const double d = r.at("delta").get<double>(), l = r.at("lambda").get<double>();
        const auto b = r.at("base").get<std::size_t>();
        const auto obj = parse_object(r.at("object").get<std::string>());
        if (std::find(plan.deltas.begin(), plan.deltas.end(), d) == plan.deltas.end()) continue;
        if (std::find(plan.lambdas.begin(), plan.lambdas.end(), l) == plan.lambdas.end()) continue;
        if (std::find(plan.objects.begin(), plan.objects.end(), obj) == plan.objects.end()) continue;
        if (b >= plan.bases.size() || r.at("realization").get<std::uint64_t>() >= plan.realizations) continue;
        mine.push_back(r);
    }
    auto reports = reports_from_rows(mine, plan.p_list, wall_times);

    if (!opt.out_dir.empty()) {
        std::vector<nlohmann::json> rep_rows;
        for (const auto& r : reports)
            rep_rows.push_back({{"object", r.object}, {"p", r.p},     {"lambda", r.lambda}, {"delta", r.delta},
                                {"base", r.base},     {"estimate", r.estimate}, {"se", r.se}, {"mean", r.mean},
                                {"mean_se", r.mean_se}, {"n", r.n}, {"seed", r.seed}});
        const auto rep_path = opt.out_dir / "reports.jsonl";
        std::filesystem::remove(rep_path);
        ChecksummedLedger(rep_path).append(rep_rows);
        std::ofstream manifest(opt.out_dir / "run_manifest.json");
        manifest << nlohmann::json{{"elapsed_seconds", elapsed()},
                                   {"finished_unix", std::chrono::duration_cast<std::chrono::seconds>(
                                                         std::chrono::system_clock::now().time_since_epoch()).count()},
                                   {"threads", opt.threads},
                                   {"budget_exceeded", budget_hit}}
                        .dump(2)
                 << "\n";
    }
    if (budget_hit) throw BudgetExceeded("wall-time cap of " + std::to_string(opt.budget_seconds) + " s reached");
    return reports;
}

}  // namespace phi42
