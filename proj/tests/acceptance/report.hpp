#pragma once

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace phi42::acceptance {

/// Outcome of one acceptance criterion: named sub-checks plus free-form detail lines.
struct Outcome {
    int criterion = 0;
    std::vector<std::pair<std::string, bool>> checks;
    std::vector<std::string> details;

    void check(const std::string& name, bool ok) { checks.emplace_back(name, ok); }
    template <typename... Args>
    void note(const char* fmt, Args... args) {
        char buf[512];
        std::snprintf(buf, sizeof buf, fmt, args...);
        details.emplace_back(buf);
    }
    bool passed() const {
        return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.second; });
    }
    std::string summary() const {
        std::ostringstream s;
        for (const auto& [name, ok] : checks) s << "  [" << (ok ? "ok" : "FAILED") << "] " << name << "\n";
        for (const auto& d : details) s << "  " << d << "\n";
        return s.str();
    }
};

inline double max_over_min(const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi / *lo;
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

// short label for a parameter value, e.g. 0.1 rather than 0.10000000000000001
inline std::string label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace phi42::acceptance
