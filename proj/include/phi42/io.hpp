#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phi42/core.hpp"
#include "phi42/corr_field.hpp"
#include "phi42/grid.hpp"

namespace phi42 {

static_assert(std::endian::native == std::endian::little, "flat binary export assumes a little-endian host");

inline std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline nlohmann::json grid_to_json(const SpaceTimeGrid& g) {
    return {{"n_t", g.n_t()}, {"n_x", g.n_x()}, {"n_y", g.n_y()}, {"dt", g.dt()},
            {"dx", g.dx()},   {"dy", g.dy()},   {"t0", g.t0()},   {"L", g.half_width()}};
}

inline SpaceTimeGrid grid_from_json(const nlohmann::json& j) {
    return {j.at("n_t").get<std::size_t>(), j.at("n_x").get<std::size_t>(), j.at("n_y").get<std::size_t>(),
            j.at("dt").get<double>(),       j.at("dx").get<double>(),       j.at("dy").get<double>(),
            j.at("t0").get<double>()};
}

/// Flat binary: little-endian float64, row-major t -> x -> y, `components`
/// values per site interleaved; the JSON sidecar `<path>.json` describes the grid.
inline void write_flat_binary(const std::filesystem::path& path, const SpaceTimeGrid& grid,
                              const std::vector<double>& values, const std::vector<std::string>& components,
                              const nlohmann::json& extra = nlohmann::json::object()) {
    if (values.size() != grid.size() * components.size()) throw DimensionMismatch("value count does not match grid");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string());
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    nlohmann::json side = {{"grid", grid_to_json(grid)},  {"dtype", "float64"}, {"endianness", "little"},
                           {"order", {"t", "x", "y"}},    {"components", components}};
    side["meta"] = extra;
    std::ofstream js(path.string() + ".json");
    js << side.dump(2) << "\n";
}

inline void write_field(const std::filesystem::path& path, const ScalarField& f, const std::string& name,
                        const nlohmann::json& extra = nlohmann::json::object()) {
    write_flat_binary(path, f.grid(), f.data(), {name}, extra);
}

inline void write_coefficients(const std::filesystem::path& path, const CoeffField& c,
                               const nlohmann::json& extra = nlohmann::json::object()) {
    std::vector<double> v;
    v.reserve(c.a.size() * 4);
    for (std::size_t i = 0; i < c.a.size(); ++i) {
        v.push_back(c.g.data()[i]);
        v.push_back(c.a[i].xx);
        v.push_back(c.a[i].xy);
        v.push_back(c.a[i].yy);
    }
    write_flat_binary(path, c.grid(), v, {"g", "a_xx", "a_xy", "a_yy"}, extra);
}

inline ScalarField read_field(const std::filesystem::path& path) {
    std::ifstream js(path.string() + ".json");
    if (!js) throw Error("missing sidecar for " + path.string());
    const nlohmann::json side = nlohmann::json::parse(js);
    if (side.at("components").size() != 1) throw DimensionMismatch("not a scalar field");
    const SpaceTimeGrid g = grid_from_json(side.at("grid"));
    std::vector<double> v(g.size());
    std::ifstream in(path, std::ios::binary);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(v.size() * sizeof(double))) throw DimensionMismatch("short file");
    return {g, std::move(v)};
}

/// JSON-lines file whose rows carry an FNV-1a checksum of their own content
/// (the row serialized without the checksum key). Append-only.
class ChecksummedLedger {
public:
    explicit ChecksummedLedger(std::filesystem::path path) : path_(std::move(path)) {}

    const std::filesystem::path& path() const { return path_; }

    static std::string seal(nlohmann::json row) {
        row.erase("checksum");
        const std::string body = row.dump();
        row["checksum"] = fnv1a_hex(body);
        return row.dump();
    }

    void append(const std::vector<nlohmann::json>& rows) const {
        std::ofstream out(path_, std::ios::app);
        if (!out) throw Error("cannot open ledger " + path_.string());
        for (const auto& r : rows) out << seal(r) << "\n";
    }

    /// All rows, checksums verified; a missing file reads as empty.
    std::vector<nlohmann::json> read() const {
        std::vector<nlohmann::json> rows;
        std::ifstream in(path_);
        if (!in) return rows;
        std::string line;
        std::size_t n = 0;
        while (std::getline(in, line)) {
            ++n;
            if (line.empty()) continue;
            nlohmann::json row;
            try {
                row = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception&) {
                throw LedgerCorrupt(path_.string() + ":" + std::to_string(n) + " is not valid JSON");
            }
            if (!row.contains("checksum")) throw LedgerCorrupt(path_.string() + ":" + std::to_string(n) + " has no checksum");
            const std::string sum = row.at("checksum").get<std::string>();
            nlohmann::json body = row;
            body.erase("checksum");
            if (fnv1a_hex(body.dump()) != sum)
                throw LedgerCorrupt(path_.string() + ":" + std::to_string(n) + " checksum mismatch");
            row.erase("checksum");
            rows.push_back(std::move(row));
        }
        return rows;
    }

private:
    std::filesystem::path path_;
};

/// RFC 4180 field quoting.
inline std::string csv_quote(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Splits one CSV record (no embedded newlines).
inline std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace phi42
