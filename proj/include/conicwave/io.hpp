#pragma once

// Output plumbing: CSV tables with a fixed column order and 17-significant-
// digit floats, JSON manifests/sidecars, and binary little-endian complex64
// field dumps.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "conicwave/grid.hpp"

namespace cwave {

using json = nlohmann::json;

inline std::string fmt_g17(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << std::scientific << v;
    return os.str();
}

class CsvWriter {
  public:
    CsvWriter(const std::filesystem::path& path, std::vector<std::string> columns)
        : out_(path), cols_(std::move(columns)) {
        if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path.string());
        for (size_t c = 0; c < cols_.size(); ++c) out_ << (c ? "," : "") << cols_[c];
        out_ << "\n";
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != cols_.size())
            throw std::logic_error("CsvWriter: column count mismatch");
        for (size_t c = 0; c < cells.size(); ++c) out_ << (c ? "," : "") << cells[c];
        out_ << "\n";
    }

  private:
    std::ofstream out_;
    std::vector<std::string> cols_;
};

// FNV-1a of the canonical config text; recorded in run manifests.
inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline constexpr const char* kVersion = "0.1.0";

inline void write_manifest(const std::filesystem::path& path, const std::string& config_text,
                           const json& extra = {}) {
    json m;
    m["version"] = kVersion;
    m["config_hash"] = fnv1a(config_text);
    m["config"] = config_text;
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    std::ofstream out(path);
    out << m.dump(2) << "\n";
}

// Binary dump: little-endian complex64 (float32 pairs), row-major (i, j),
// with a JSON sidecar describing the grid.
inline void write_field(const std::filesystem::path& base, const GridField& f,
                        const std::string& spec_name, double time, uint64_t config_hash = 0) {
    const auto& g = *f.grid;
    {
        std::ofstream out(base.string() + ".c64", std::ios::binary);
        for (const complexd& z : f.v) {
            const float re = float(z.real()), im = float(z.imag());
            out.write(reinterpret_cast<const char*>(&re), 4);
            out.write(reinterpret_cast<const char*>(&im), 4);
        }
    }
    json side;
    side["format"] = "complex64-le";
    side["layout"] = "row-major (r index outer, theta index inner)";
    side["nr"] = g.nr;
    side["ntheta"] = g.ntheta;
    side["r_lo"] = g.r_lo;
    side["r_hi"] = g.r_hi;
    side["spec"] = spec_name;
    side["time"] = time;
    side["config_hash"] = config_hash;
    std::ofstream out(base.string() + ".json");
    out << side.dump(2) << "\n";
}

inline GridField read_field(const std::filesystem::path& base,
                            std::shared_ptr<const GridDiscretization> grid) {
    GridField f(grid);
    std::ifstream in(base.string() + ".c64", std::ios::binary);
    if (!in) throw std::runtime_error("read_field: cannot open " + base.string() + ".c64");
    for (complexd& z : f.v) {
        float re = 0, im = 0;
        in.read(reinterpret_cast<char*>(&re), 4);
        in.read(reinterpret_cast<char*>(&im), 4);
        z = complexd(re, im);
    }
    return f;
}

}  // namespace cwave
