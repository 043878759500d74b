#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "phi42/core.hpp"

namespace phi42 {

/// Plain-text `[section]` / `key = value` file. `#` and `;` start comments.
class IniFile {
public:
    IniFile() = default;

    static IniFile parse(const std::string& text, const std::string& origin = "<string>") {
        IniFile ini;
        std::istringstream in(text);
        std::string line, section;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            const auto hash = line.find_first_of("#;");
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(n) + ": malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(n) + ": expected key = value");
            if (section.empty()) throw ConfigError(origin + ":" + std::to_string(n) + ": key outside any section");
            const std::string key = trim(line.substr(0, eq));
            if (key.empty()) throw ConfigError(origin + ":" + std::to_string(n) + ": empty key");
            ini.values_[section + "." + key] = trim(line.substr(eq + 1));
        }
        return ini;
    }

    static IniFile load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config " + path);
        std::stringstream ss;
        ss << in.rdbuf();
        return parse(ss.str(), path);
    }

    bool has(const std::string& section, const std::string& key) const {
        return values_.count(section + "." + key) != 0;
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        values_[section + "." + key] = value;
    }

    std::string get_string(const std::string& section, const std::string& key) const {
        const auto it = values_.find(section + "." + key);
        if (it == values_.end()) throw ConfigError("missing key " + section + "." + key);
        return it->second;
    }
    std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
        return has(section, key) ? get_string(section, key) : fallback;
    }

    double get_double(const std::string& section, const std::string& key) const {
        return parse_number(get_string(section, key), section + "." + key);
    }
    double get_double(const std::string& section, const std::string& key, double fallback) const {
        return has(section, key) ? get_double(section, key) : fallback;
    }

    std::uint64_t get_u64(const std::string& section, const std::string& key) const {
        const std::string s = get_string(section, key);
        try {
            std::size_t pos = 0;
            if (!s.empty() && s.front() == '-') throw std::invalid_argument("negative");
            const auto v = std::stoull(s, &pos);
            if (pos != s.size()) throw std::invalid_argument("trailing characters");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(section + "." + key + ": not an unsigned integer: " + s);
        }
    }
    std::uint64_t get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const {
        return has(section, key) ? get_u64(section, key) : fallback;
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        if (!has(section, key)) return fallback;
        const std::string s = get_string(section, key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw ConfigError(section + "." + key + ": not a boolean: " + s);
    }

    std::vector<std::string> get_list(const std::string& section, const std::string& key) const {
        std::vector<std::string> out;
        std::stringstream ss(get_string(section, key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    std::vector<double> get_double_list(const std::string& section, const std::string& key) const {
        std::vector<double> out;
        for (const auto& s : get_list(section, key)) out.push_back(parse_number(s, section + "." + key));
        return out;
    }

    /// Accepts plain numbers and the shorthand `e^x` for exp(x), e.g. `e^-1.5`.
    static double parse_number(const std::string& s, const std::string& what) {
        try {
            std::size_t pos = 0;
            double v;
            if (s.rfind("e^", 0) == 0) {
                v = std::exp(std::stod(s.substr(2), &pos));
                pos += 2;
            } else {
                v = std::stod(s, &pos);
            }
            if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument("bad number");
            return v;
        } catch (const std::exception&) {
            throw ConfigError(what + ": not a number: " + s);
        }
    }

private:
    static std::string trim(const std::string& s) {
        const auto b = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
        const auto e = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
        return b < e ? std::string(b, e) : std::string();
    }

    std::map<std::string, std::string> values_;
};

}  // namespace phi42
