#pragma once

// Flat key=value run configuration. Lines are `key = value`; blank lines and
// lines starting with # are skipped. Every key must be known to the
// subcommand reading the file and appear at most once, so typos fail loudly
// instead of silently running defaults.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "enpi/csv.hpp"
#include "enpi/datagen.hpp"
#include "enpi/ensemble.hpp"
#include "enpi/regressors.hpp"

namespace enpi {

using KvPairs = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string strip(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline long long parse_int(const std::string& s) {
    double v = parse_double(s);
    auto i = static_cast<long long>(v);
    if (static_cast<double>(i) != v) throw std::invalid_argument("invalid value");
    return i;
}

inline std::uint64_t parse_u64(const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw std::invalid_argument("invalid value");
    errno = 0;
    char* end = nullptr;
    std::uint64_t v = std::strtoull(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw std::invalid_argument("invalid value");
    return v;
}

}  // namespace detail

inline KvPairs parse_kv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    KvPairs out;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        std::string s = detail::strip(line);
        if (s.empty() || s[0] == '#') continue;
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("bad config line " + std::to_string(lineno) + " in " + path);
        std::string key = detail::strip(s.substr(0, eq));
        std::string val = detail::strip(s.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error("bad config line " + std::to_string(lineno) + " in " + path);
        if (!seen.insert(key).second) throw std::runtime_error("duplicate key '" + key + "'");
        out.emplace_back(std::move(key), std::move(val));
    }
    return out;
}

struct RunConfig {
    std::string method = "enpi";  // enpi | icp | wicp | all
    RegressorSpec regressor;
    double alpha = 0.1;
    int b_tilde = 100;
    Phi phi = Phi::mean;
    double trim_gamma = 0.1;
    CenterMode center = CenterMode::loo_quantile;
    double train_fraction = 0.3;
    int n_trials = 10;
    std::uint64_t seed = 1;
    std::string dataset_path;  // CSV mode when non-empty
    bool has_sim = false;
    SimConfig sim;
    std::string out;
    std::vector<double> alpha_grid;  // sweep only; empty = default grid
};

// Ten equally spaced coverage levels 1-alpha on [0.05, 0.95]; the induced
// alpha set is the same ten points, listed ascending.
inline std::vector<double> default_alpha_grid() {
    std::vector<double> g(10);
    for (int i = 0; i < 10; ++i) g[static_cast<std::size_t>(i)] = 0.05 + 0.1 * i;
    return g;
}

namespace detail {

struct SimKeys {
    bool kind_set = false, d_set = false;
};

// Applies one sim key; returns false if the key is not a sim key.
inline bool apply_sim_key(SimConfig& sim, SimKeys& ks, const std::string& key,
                          const std::string& val) {
    if (key == "kind") {
        if (val == "multi") sim.kind = SimKind::multi;
        else if (val == "rand") sim.kind = SimKind::rand_walk;
        else if (val == "network") sim.kind = SimKind::network;
        else throw std::runtime_error("bad value for key 'kind'");
        ks.kind_set = true;
        return true;
    }
    try {
        if (key == "T") sim.T = static_cast<Eigen::Index>(parse_int(val));
        else if (key == "T1") sim.T1 = static_cast<Eigen::Index>(parse_int(val));
        else if (key == "p") sim.p = static_cast<Eigen::Index>(parse_int(val));
        else if (key == "rho") sim.rho = parse_double(val);
        else if (key == "drift") sim.drift = parse_double(val);
        else if (key == "d") { sim.d = static_cast<Eigen::Index>(parse_int(val)); ks.d_set = true; }
        else if (key == "k") sim.k = static_cast<Eigen::Index>(parse_int(val));
        else if (key == "edge_weight") sim.edge_weight = parse_double(val);
        else if (key == "node") sim.node = static_cast<Eigen::Index>(parse_int(val));
        else return false;
    } catch (const std::invalid_argument&) {
        throw std::runtime_error("bad value for key '" + key + "'");
    }
    return true;
}

inline void finish_sim(SimConfig& sim, const SimKeys& ks) {
    if (!ks.d_set) sim.d = (sim.kind == SimKind::network) ? 10 : 5;
}

[[noreturn]] inline void bad_value(const std::string& key) {
    throw std::runtime_error("bad value for key '" + key + "'");
}

}  // namespace detail

// Shared by run and sweep; alpha_grid is accepted only for sweep.
inline RunConfig parse_run_config(const KvPairs& kv, bool allow_alpha_grid) {
    RunConfig cfg;
    detail::SimKeys ks;
    bool sim_param_seen = false;
    for (const auto& [key, val] : kv) {
        try {
            if (key == "method") {
                if (val != "enpi" && val != "icp" && val != "wicp" && val != "all")
                    detail::bad_value(key);
                cfg.method = val;
            } else if (key == "regressor") {
                if (val == "ridge") cfg.regressor.family = Family::ridge;
                else if (val == "lasso") cfg.regressor.family = Family::lasso;
                else if (val == "forest") cfg.regressor.family = Family::forest;
                else detail::bad_value(key);
            } else if (key == "grid_size") {
                cfg.regressor.grid_size = static_cast<int>(detail::parse_int(val));
            } else if (key == "grid_min") {
                cfg.regressor.grid_min = detail::parse_double(val);
            } else if (key == "grid_max") {
                cfg.regressor.grid_max = detail::parse_double(val);
            } else if (key == "n_trees") {
                cfg.regressor.n_trees = static_cast<int>(detail::parse_int(val));
            } else if (key == "max_depth") {
                cfg.regressor.max_depth = static_cast<int>(detail::parse_int(val));
            } else if (key == "alpha") {
                cfg.alpha = detail::parse_double(val);
            } else if (key == "b_tilde") {
                cfg.b_tilde = static_cast<int>(detail::parse_int(val));
            } else if (key == "phi") {
                if (val == "mean") cfg.phi = Phi::mean;
                else if (val == "median") cfg.phi = Phi::median;
                else if (val == "trimmed_mean") cfg.phi = Phi::trimmed_mean;
                else detail::bad_value(key);
            } else if (key == "trim_gamma") {
                cfg.trim_gamma = detail::parse_double(val);
            } else if (key == "center") {
                if (val == "loo_quantile") cfg.center = CenterMode::loo_quantile;
                else if (val == "loo_mean") cfg.center = CenterMode::loo_mean;
                else detail::bad_value(key);
            } else if (key == "train_fraction") {
                cfg.train_fraction = detail::parse_double(val);
            } else if (key == "n_trials") {
                cfg.n_trials = static_cast<int>(detail::parse_int(val));
            } else if (key == "seed") {
                cfg.seed = detail::parse_u64(val);
            } else if (key == "dataset") {
                cfg.dataset_path = val;
            } else if (key == "out") {
                cfg.out = val;
            } else if (key == "alpha_grid" && allow_alpha_grid) {
                std::string cur;
                std::vector<double> grid;
                for (char c : val + ",") {
                    if (c == ',') {
                        if (!detail::strip(cur).empty())
                            grid.push_back(detail::parse_double(detail::strip(cur)));
                        cur.clear();
                    } else {
                        cur += c;
                    }
                }
                if (grid.empty()) detail::bad_value(key);
                cfg.alpha_grid = grid;
            } else if (detail::apply_sim_key(cfg.sim, ks, key, val)) {
                sim_param_seen = true;
            } else {
                throw std::runtime_error("unknown key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            detail::bad_value(key);
        }
    }
    if (!cfg.dataset_path.empty() && sim_param_seen)
        throw std::runtime_error("dataset= and simulation keys are mutually exclusive");
    if (cfg.dataset_path.empty() && !ks.kind_set)
        throw std::runtime_error("config needs dataset= or kind=");
    cfg.has_sim = ks.kind_set;
    if (cfg.has_sim) detail::finish_sim(cfg.sim, ks);

    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::runtime_error("bad value for key 'alpha'");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw std::runtime_error("bad value for key 'train_fraction'");
    if (cfg.n_trials < 1) throw std::runtime_error("bad value for key 'n_trials'");
    if (cfg.b_tilde < 3) throw std::runtime_error("bad value for key 'b_tilde'");
    if (cfg.regressor.grid_size < 1) throw std::runtime_error("bad value for key 'grid_size'");
    if (cfg.regressor.n_trees < 1) throw std::runtime_error("bad value for key 'n_trees'");
    if (cfg.regressor.max_depth < 1) throw std::runtime_error("bad value for key 'max_depth'");
    if (!(cfg.trim_gamma >= 0.0 && cfg.trim_gamma < 0.5))
        throw std::runtime_error("bad value for key 'trim_gamma'");
    for (double a : cfg.alpha_grid)
        if (!(a > 0.0 && a < 1.0)) throw std::runtime_error("bad value for key 'alpha_grid'");
    return cfg;
}

struct GenerateConfig {
    SimConfig sim;
    std::string out;
};

inline GenerateConfig parse_generate_config(const KvPairs& kv) {
    GenerateConfig cfg;
    detail::SimKeys ks;
    for (const auto& [key, val] : kv) {
        if (key == "seed") {
            try {
                cfg.sim.seed = detail::parse_u64(val);
            } catch (const std::invalid_argument&) {
                detail::bad_value(key);
            }
        } else if (key == "out") {
            cfg.out = val;
        } else if (!detail::apply_sim_key(cfg.sim, ks, key, val)) {
            throw std::runtime_error("unknown key '" + key + "'");
        }
    }
    if (!ks.kind_set) throw std::runtime_error("config needs kind=");
    detail::finish_sim(cfg.sim, ks);
    return cfg;
}

}  // namespace enpi
