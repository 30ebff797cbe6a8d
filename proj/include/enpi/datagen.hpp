#pragma once

// Seeded generators for the three simulated processes used throughout the
// experiments. All randomness goes through Rng (fixed algorithms), so a
// SimConfig maps to one bit-exact Dataset on every platform.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "enpi/core.hpp"
#include "enpi/rng.hpp"

namespace enpi {

enum class SimKind { multi, rand_walk, network };

struct SimConfig {
    SimKind kind = SimKind::multi;
    Eigen::Index T = 200;   // training steps
    Eigen::Index T1 = 200;  // test steps

    // multi
    Eigen::Index p = 300;
    double rho = 0.75;

    // rand_walk
    double drift = 2.0;

    // rand_walk / network lag
    Eigen::Index d = 5;

    // network
    Eigen::Index k = 10;
    double edge_weight = 1.0;
    Eigen::Index node = 1;  // 1-based response node

    std::uint64_t seed = 1;

    // Test hook: scales the innovation noise in all three processes (0
    // gives the deterministic skeleton). The same RNG draws are consumed
    // either way, so only the noise amplitude changes.
    double noise_scale = 1.0;
};

// Y_t = x_t' beta + e_t with x_t, beta ~ N(0, I_p), ||beta||_2 rescaled to 1,
// and AR(1) errors: e_0 = 0, e_t = rho e_{t-1} + xi_t, xi_t ~ N(0, 1 - rho^2)
// (unit stationary variance). rho = 0 gives i.i.d. N(0,1) errors.
inline Dataset gen_multi(const SimConfig& cfg) {
    if (cfg.p < 1 || cfg.T < 1 || cfg.T1 < 0 || !(cfg.rho >= 0.0) || cfg.rho >= 1.0)
        throw std::invalid_argument("invalid value");
    Rng rng(cfg.seed);
    const Eigen::Index n = cfg.T + cfg.T1;

    Eigen::VectorXd beta(cfg.p);
    for (Eigen::Index j = 0; j < cfg.p; ++j) beta(j) = rng.normal();
    beta /= beta.norm();

    Dataset ds;
    ds.features.resize(n, cfg.p);
    for (Eigen::Index t = 0; t < n; ++t)
        for (Eigen::Index j = 0; j < cfg.p; ++j) ds.features(t, j) = rng.normal();

    const double xi_sd = std::sqrt(1.0 - cfg.rho * cfg.rho);
    ds.response.resize(n);
    double prev = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
        prev = cfg.rho * prev + cfg.noise_scale * xi_sd * rng.normal();
        ds.response(t) = ds.features.row(t).dot(beta) + prev;
    }
    ds.train_len = cfg.T;
    ds.test_len = cfg.T1;
    return ds;
}

// Y_t = drift + Y_{t-1} + e_t, e_t ~ N(0,1), Y_0 = 0. Row t has features
// x_j = Y_{t-j} for j = 1..d (lag order), so the first d response rows are
// dropped; the training segment keeps T - d rows.
inline Dataset gen_random_walk(const SimConfig& cfg) {
    if (cfg.d < 1 || cfg.T <= cfg.d || cfg.T1 < 0) throw std::invalid_argument("invalid value");
    Rng rng(cfg.seed);
    const Eigen::Index n = cfg.T + cfg.T1;
    std::vector<double> Y(static_cast<std::size_t>(n) + 1, 0.0);
    for (Eigen::Index t = 1; t <= n; ++t)
        Y[static_cast<std::size_t>(t)] =
            cfg.drift + Y[static_cast<std::size_t>(t - 1)] + cfg.noise_scale * rng.normal();

    Dataset ds;
    const Eigen::Index rows = n - cfg.d;
    ds.features.resize(rows, cfg.d);
    ds.response.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index t = cfg.d + 1 + r;
        for (Eigen::Index j = 1; j <= cfg.d; ++j)
            ds.features(r, j - 1) = Y[static_cast<std::size_t>(t - j)];
        ds.response(r) = Y[static_cast<std::size_t>(t)];
    }
    ds.train_len = cfg.T - cfg.d;
    ds.test_len = cfg.T1;
    return ds;
}

// k coupled nodes: Y_{0,i} ~ N(0,1); each node i draws a neighbor count N_i
// uniform on [ceil(0.2k), floor(0.4k)] and N_i distinct neighbors from all k
// nodes, then evolves as the neighbor mean
//     Y_{t,i} = (edge_weight / N_i) * sum_{j in S_i} Y_{t-1,j} + e_{t,i}
// with independent N(0,1) noise per node and step. (The unnormalized sum
// with edge_weight 1 has spectral radius >= 2 and overflows within a few
// hundred steps; dividing by N_i is the minimal stabilization and keeps the
// process on a unit-root scale.) Row t stacks the previous d values of all
// nodes, oldest step first: column (s-1)k + j holds Y_{t-d+s-1, j} for
// s = 1..d, j = 1..k. The response is node `node`'s series.
inline Dataset gen_network(const SimConfig& cfg) {
    if (cfg.k < 5) throw std::invalid_argument("invalid value");
    if (cfg.d < 1 || cfg.T < cfg.d || cfg.T1 < 0 || cfg.node < 1 || cfg.node > cfg.k)
        throw std::invalid_argument("invalid value");
    Rng rng(cfg.seed);
    const Eigen::Index n = cfg.T + cfg.T1;
    const auto lo = static_cast<std::uint64_t>(std::ceil(0.2 * static_cast<double>(cfg.k)));
    const auto hi = static_cast<std::uint64_t>(std::floor(0.4 * static_cast<double>(cfg.k)));

    std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(cfg.k));
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(cfg.k));
    for (auto& c : counts) c = lo + rng.uniform_int(hi - lo + 1);
    for (Eigen::Index i = 0; i < cfg.k; ++i)
        nbrs[static_cast<std::size_t>(i)] = rng.sample_without_replacement(
            static_cast<int>(cfg.k), static_cast<int>(counts[static_cast<std::size_t>(i)]));

    Eigen::MatrixXd Y(n + 1, cfg.k);
    for (Eigen::Index i = 0; i < cfg.k; ++i) Y(0, i) = cfg.noise_scale * rng.normal();
    for (Eigen::Index t = 1; t <= n; ++t) {
        for (Eigen::Index i = 0; i < cfg.k; ++i) {
            const auto& s = nbrs[static_cast<std::size_t>(i)];
            double acc = 0.0;
            for (int j : s) acc += Y(t - 1, j);
            Y(t, i) = cfg.edge_weight * acc / static_cast<double>(s.size()) +
                      cfg.noise_scale * rng.normal();
        }
    }

    Dataset ds;
    const Eigen::Index rows = n - cfg.d + 1;
    ds.features.resize(rows, cfg.d * cfg.k);
    ds.response.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index t = cfg.d + r;
        for (Eigen::Index s = 0; s < cfg.d; ++s)
            for (Eigen::Index j = 0; j < cfg.k; ++j)
                ds.features(r, s * cfg.k + j) = Y(t - cfg.d + s, j);
        ds.response(r) = Y(t, cfg.node - 1);
    }
    ds.train_len = cfg.T - cfg.d + 1;
    ds.test_len = cfg.T1;
    return ds;
}

inline Dataset generate(const SimConfig& cfg) {
    switch (cfg.kind) {
        case SimKind::multi: return gen_multi(cfg);
        case SimKind::rand_walk: return gen_random_walk(cfg);
        case SimKind::network: return gen_network(cfg);
    }
    throw std::invalid_argument("invalid value");
}

}  // namespace enpi
