#pragma once

// Key-value run configuration: `key = value` lines, '#' comments,
// schema-validated (unknown keys are rejected). Manifold coefficients may be
// given as expressions in the config grammar.

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "conicwave/manifold.hpp"

namespace cwave {

struct RunConfig {
    std::string scenario = "verify";
    std::string preset = "cone";
    // Inline manifold spec (preset == "custom").
    double rho = 0.8, delta = kInf, eps0 = 0.5;
    std::string e_expr;

    int grid_nr = 160, grid_ntheta = 128;
    double grid_rmax = 8.0, grid_rmin = 0.0;
    std::string boundary = "dirichlet";

    double time_t = 0.4;
    int time_steps = 0;  // 0: derived from the spectral step rule
    int snapshots = 9;

    double cutoff_eps = 0.1;
    double tolerance_scale = 1.0;
    uint64_t seed = 2026;
    int threads = 1;
    std::string out_dir = "out";

    std::string raw_text;  // canonical text (hash input)
};

inline const std::set<std::string>& config_schema() {
    static const std::set<std::string> keys = {
        "scenario",      "preset",        "manifold.rho",  "manifold.delta", "manifold.eps0",
        "manifold.e",    "grid.nr",       "grid.ntheta",   "grid.rmax",      "grid.rmin",
        "grid.boundary", "time.t",        "time.steps",    "time.snapshots", "cutoff.eps",
        "tol.scale",     "seed",          "threads",       "out.dir"};
    return keys;
}

inline RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (!config_schema().count(key)) {
            std::string allowed;
            for (const auto& k : config_schema()) allowed += (allowed.empty() ? "" : ", ") + k;
            throw std::invalid_argument("config: unknown key '" + key + "' (allowed: " + allowed +
                                        ")");
        }
        kv[key] = val;
    }
    auto get_d = [&](const char* k, double& dst) {
        if (kv.count(k)) dst = kv[k] == "inf" ? kInf : std::stod(kv[k]);
    };
    auto get_i = [&](const char* k, int& dst) {
        if (kv.count(k)) dst = std::stoi(kv[k]);
    };
    auto get_s = [&](const char* k, std::string& dst) {
        if (kv.count(k)) dst = kv[k];
    };
    get_s("scenario", cfg.scenario);
    get_s("preset", cfg.preset);
    get_d("manifold.rho", cfg.rho);
    get_d("manifold.delta", cfg.delta);
    get_d("manifold.eps0", cfg.eps0);
    get_s("manifold.e", cfg.e_expr);
    get_i("grid.nr", cfg.grid_nr);
    get_i("grid.ntheta", cfg.grid_ntheta);
    get_d("grid.rmax", cfg.grid_rmax);
    get_d("grid.rmin", cfg.grid_rmin);
    get_s("grid.boundary", cfg.boundary);
    get_d("time.t", cfg.time_t);
    get_i("time.steps", cfg.time_steps);
    get_i("time.snapshots", cfg.snapshots);
    get_d("cutoff.eps", cfg.cutoff_eps);
    get_d("tol.scale", cfg.tolerance_scale);
    if (kv.count("seed")) cfg.seed = std::stoull(kv["seed"]);
    get_i("threads", cfg.threads);
    get_s("out.dir", cfg.out_dir);
    if (cfg.boundary != "dirichlet" && cfg.boundary != "absorbing")
        throw std::invalid_argument("config: grid.boundary must be dirichlet or absorbing");
    // Canonical text for hashing: sorted key=value lines.
    std::string canon;
    for (const auto& [k, v] : kv) canon += k + "=" + v + "\n";
    cfg.raw_text = canon;
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

inline ManifoldSpec spec_from_config(const RunConfig& cfg) {
    if (cfg.preset == "custom") {
        if (!std::isfinite(cfg.delta) || cfg.e_expr.empty())
            return make_cone(cfg.rho);
        auto s = make_from_expression(cfg.rho, cfg.delta, cfg.e_expr, cfg.eps0);
        return s;
    }
    return make_preset(cfg.preset);
}

}  // namespace cwave
