// phi42_acceptance: runs the acceptance criteria and prints one PASS/FAIL line each.

#include <chrono>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "criteria_analytic.hpp"
#include "criteria_studies.hpp"
#include "criteria_trees.hpp"

using namespace phi42::acceptance;

int main(int argc, char** argv) {
    CLI::App app{"phi42 acceptance criteria"};
    std::vector<int> selected;
    Paths paths{PHI42_CONFIG_DIR, PHI42_ACCEPTANCE_CACHE};
    std::string configs = paths.configs.string(), cache = paths.cache.string();
    app.add_option("--criterion", selected, "criteria to run (default: all)")->check(CLI::Range(1, 10));
    app.add_option("--configs", configs, "directory holding the study INI files");
    app.add_option("--cache", cache, "directory for the study ledgers");
    CLI11_PARSE(app, argc, argv);
    paths = {configs, cache};
    if (selected.empty())
        for (int c = 1; c <= 10; ++c) selected.push_back(c);

    const std::vector<std::function<Outcome()>> criteria{
        [] { return criterion_1(); },        [] { return criterion_2(); },
        [] { return criterion_3(); },        [] { return criterion_4(); },
        [] { return criterion_5(); },        [&] { return criterion_6(paths); },
        [&] { return criterion_7(paths); },  [&] { return criterion_8(paths); },
        [&] { return criterion_9(paths); },  [&] { return criterion_10(paths); },
    };

    bool all = true;
    for (int c : selected) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o{c, {}, {}};
        try {
            o = criteria[static_cast<std::size_t>(c - 1)]();
        } catch (const std::exception& e) {
            o.check(std::string("ran without error: ") + e.what(), false);
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << o.summary();
        std::cout << "CRITERION " << c << ": " << (o.passed() ? "PASS" : "FAIL") << " (" << secs << " s)" << std::endl;
        all = all && o.passed();
    }
    return all ? 0 : 1;
}
