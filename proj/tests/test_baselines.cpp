#include <catch2/catch_amalgamated.hpp>

#include <enpi/baselines.hpp>
#include <enpi/datagen.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

using enpi::Dataset;
using enpi::Family;
using enpi::RegressorSpec;
using enpi::WeightModel;

namespace {

Dataset noiseless_linear(Eigen::Index n_train, Eigen::Index n_test, std::uint64_t seed) {
    enpi::Rng rng(seed);
    Dataset ds;
    ds.features.resize(n_train + n_test, 3);
    for (Eigen::Index i = 0; i < ds.features.rows(); ++i)
        for (Eigen::Index j = 0; j < 3; ++j) ds.features(i, j) = rng.normal();
    Eigen::VectorXd w(3);
    w << 1.0, -2.0, 0.5;
    ds.response = ds.features * w;
    ds.train_len = n_train;
    ds.test_len = n_test;
    return ds;
}

RegressorSpec tiny_ridge() {
    RegressorSpec spec;
    spec.family = Family::ridge;
    spec.grid_size = 1;
    spec.grid_min = 1e-8;
    spec.grid_max = 1e-8;
    return spec;
}

// Penalized log-likelihood gradient, written independently of the fitting
// code: g_0 = sum(y - p), g_j = sum x_j (y - p) - penalty * b_j.
Eigen::VectorXd logistic_grad(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                              double penalty, const Eigen::VectorXd& b) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(X.cols() + 1);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double z = b(0) + X.row(i).dot(b.tail(X.cols()));
        double p = 1.0 / (1.0 + std::exp(-z));
        double r = static_cast<double>(labels[static_cast<std::size_t>(i)]) - p;
        g(0) += r;
        g.tail(X.cols()) += r * X.row(i).transpose();
    }
    g.tail(X.cols()) -= penalty * b.tail(X.cols());
    return g;
}

}  // namespace

TEST_CASE("logistic fit finds the penalized maximum likelihood", "[baselines]") {
    Eigen::MatrixXd X(4, 1);
    X << -1.5, -0.5, 0.5, 1.5;
    std::vector<int> labels{0, 0, 1, 1};
    WeightModel m = enpi::fit_logistic(X, labels, 1.0);
    REQUIRE(m.converged);

    // plain gradient ascent with a small step converges to the same optimum
    Eigen::VectorXd b = Eigen::VectorXd::Zero(2);
    for (int it = 0; it < 200000; ++it) b += 0.05 * logistic_grad(X, labels, 1.0, b);
    REQUIRE(std::abs(m.intercept - b(0)) < 1e-6);
    REQUIRE(std::abs(m.coef(0) - b(1)) < 1e-6);

    // symmetric design: the intercept vanishes and the slope is positive
    REQUIRE(std::abs(m.intercept) < 1e-6);
    REQUIRE(m.coef(0) > 0.0);
}

TEST_CASE("logistic coefficients shrink under a heavier penalty", "[baselines]") {
    enpi::Rng rng(14);
    Eigen::MatrixXd X(30, 3);
    std::vector<int> labels(30);
    for (Eigen::Index i = 0; i < 30; ++i) {
        for (Eigen::Index j = 0; j < 3; ++j) X(i, j) = rng.normal();
        labels[static_cast<std::size_t>(i)] = X(i, 0) + 0.3 * rng.normal() > 0.0 ? 1 : 0;
    }
    WeightModel light = enpi::fit_logistic(X, labels, 1.0);
    WeightModel heavy = enpi::fit_logistic(X, labels, 100.0);
    REQUIRE(heavy.coef.norm() < light.coef.norm());

    // warm starting from another solution reaches the same optimum
    WeightModel warm = enpi::fit_logistic(X, labels, 100.0, &light);
    REQUIRE(std::abs(warm.intercept - heavy.intercept) < 1e-6);
    REQUIRE((warm.coef - heavy.coef).norm() < 1e-6);
}

TEST_CASE("logistic fit input validation", "[baselines]") {
    Eigen::MatrixXd X(3, 1);
    X << 1.0, 2.0, 3.0;
    REQUIRE_THROWS_WITH(enpi::fit_logistic(X, {0, 0, 0}, 1.0), "degenerate labels");
    REQUIRE_THROWS_WITH(enpi::fit_logistic(X, {1, 1, 1}, 1.0), "degenerate labels");
    REQUIRE_THROWS_WITH(enpi::fit_logistic(X, {0, 1, 2}, 1.0), "invalid value");
    REQUIRE_THROWS_WITH(enpi::fit_logistic(X, {0, 1}, 1.0), "insufficient data");
    REQUIRE_THROWS_WITH(enpi::fit_logistic(X, {0, 1, 0}, -1.0), "invalid value");

    Eigen::MatrixXd X1(1, 1);
    X1 << 0.0;
    REQUIRE_THROWS_WITH(enpi::fit_logistic(X1, {0}, 1.0), "insufficient data");
}

TEST_CASE("split fit partitions time points and ignores calibration responses",
          "[baselines]") {
    Dataset ds = noiseless_linear(41, 10, 3);
    enpi::SplitState st = enpi::icp_split_fit(ds, tiny_ridge(), 17);

    REQUIRE(st.calibration_idx.size() == 20);  // floor(41/2)
    REQUIRE(st.proper_idx.size() == 21);
    REQUIRE(std::is_sorted(st.calibration_idx.begin(), st.calibration_idx.end()));
    REQUIRE(std::is_sorted(st.proper_idx.begin(), st.proper_idx.end()));
    std::vector<int> all(st.calibration_idx);
    all.insert(all.end(), st.proper_idx.begin(), st.proper_idx.end());
    std::sort(all.begin(), all.end());
    for (int i = 0; i < 41; ++i) REQUIRE(all[static_cast<std::size_t>(i)] == i);

    // the calibration window holds |y_i - f(x_i)| in time order
    REQUIRE(st.calibration_window.capacity() == 20);
    auto vals = st.calibration_window.values();
    for (std::size_t r = 0; r < st.calibration_idx.size(); ++r) {
        int i = st.calibration_idx[r];
        double expect = std::abs(ds.response(i) - st.proper_model.predict(ds.features.row(i)));
        REQUIRE(vals[r] == expect);
    }

    // perturbing calibration responses must not move the fitted model
    Dataset tampered = ds;
    for (int i : st.calibration_idx) tampered.response(i) += 100.0;
    enpi::SplitState st2 = enpi::icp_split_fit(tampered, tiny_ridge(), 17);
    REQUIRE(st2.calibration_idx == st.calibration_idx);
    for (Eigen::Index r = 0; r < ds.features.rows(); ++r)
        REQUIRE(st2.proper_model.predict(ds.features.row(r)) ==
                st.proper_model.predict(ds.features.row(r)));

    Dataset small = noiseless_linear(3, 2, 1);
    REQUIRE_THROWS_WITH(enpi::icp_split_fit(small, tiny_ridge(), 1), "insufficient data");
}

TEST_CASE("split-conformal stream tracks a noiseless process", "[baselines]") {
    Dataset ds = noiseless_linear(60, 15, 8);
    enpi::BaselineRun run = enpi::run_icp(ds, tiny_ridge(), 0.1, 5);
    REQUIRE(run.intervals.size() == 15);
    for (Eigen::Index t = 0; t < 15; ++t) {
        const auto& pi = run.intervals[static_cast<std::size_t>(t)];
        REQUIRE(pi.half_width >= 0.0);
        REQUIRE(pi.half_width <= 1e-4);
        REQUIRE(std::abs(ds.response(60 + t) - pi.center) <= 1e-4);
        REQUIRE(pi.alpha == 0.1);
    }
}

TEST_CASE("a uniformly weighted quantile reproduces the unweighted half-width",
          "[baselines]") {
    enpi::Rng rng(25);
    const std::size_t m = 100;
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> window(m);
        for (auto& v : window) v = std::abs(rng.normal());
        std::vector<double> aug = window;
        aug.push_back(std::numeric_limits<double>::infinity());
        std::vector<double> ones(m + 1, 1.0);
        for (double alpha : {0.1, 0.2, 0.3, 0.5}) {
            // ceil((1-alpha)(m+1)) <= m here, so the augmented +inf entry is
            // never reached and the two conventions agree exactly
            REQUIRE(enpi::weighted_quantile(aug, ones, 1.0 - alpha) ==
                    enpi::empirical_quantile(window, 1.0 - alpha));
        }
        // far enough into the tail the pseudo-residual takes over
        REQUIRE(std::isinf(enpi::weighted_quantile(aug, ones, 1.0 - 0.005)));
    }
}

TEST_CASE("weighting is a no-op in distribution when covariates are exchangeable",
          "[baselines]") {
    enpi::SimConfig cfg;
    cfg.kind = enpi::SimKind::multi;
    cfg.T = 200;
    cfg.T1 = 100;
    cfg.p = 5;
    cfg.rho = 0.0;
    cfg.seed = 12;
    Dataset ds = enpi::generate(cfg);

    RegressorSpec spec;
    spec.family = Family::ridge;
    enpi::BaselineRun icp = enpi::run_icp(ds, spec, 0.1, 99);
    enpi::BaselineRun wicp = enpi::run_weighted_icp(ds, spec, 0.1, 99);

    REQUIRE(wicp.n_weight_fallbacks == 0);
    REQUIRE(icp.intervals.size() == wicp.intervals.size());
    double icp_width = 0.0, wicp_width = 0.0;
    for (std::size_t t = 0; t < icp.intervals.size(); ++t) {
        // same seed, same split, same model: centers agree bit for bit
        REQUIRE(icp.intervals[t].center == wicp.intervals[t].center);
        icp_width += icp.intervals[t].half_width;
        wicp_width += wicp.intervals[t].half_width;
        REQUIRE(std::isfinite(wicp.intervals[t].half_width));
    }
    REQUIRE(std::abs(wicp_width / icp_width - 1.0) < 0.1);
}

TEST_CASE("baseline streams are causal and reproducible", "[baselines]") {
    enpi::SimConfig cfg;
    cfg.kind = enpi::SimKind::multi;
    cfg.T = 80;
    cfg.T1 = 30;
    cfg.p = 4;
    cfg.rho = 0.5;
    cfg.seed = 44;
    Dataset full = enpi::generate(cfg);

    Dataset cut = full;
    cut.test_len = 9;
    cut.features = full.features.topRows(full.train_len + 9);
    cut.response = full.response.head(full.train_len + 9);

    RegressorSpec spec;
    spec.family = Family::ridge;
    for (bool weighted : {false, true}) {
        auto runner = weighted ? enpi::run_weighted_icp : enpi::run_icp;
        enpi::BaselineRun a = runner(full, spec, 0.1, 7);
        enpi::BaselineRun b = runner(cut, spec, 0.1, 7);
        for (std::size_t t = 0; t < 9; ++t) {
            REQUIRE(a.intervals[t].center == b.intervals[t].center);
            REQUIRE(a.intervals[t].half_width == b.intervals[t].half_width);
        }
        enpi::BaselineRun c = runner(full, spec, 0.1, 7);
        for (std::size_t t = 0; t < a.intervals.size(); ++t) {
            REQUIRE(a.intervals[t].center == c.intervals[t].center);
            REQUIRE(a.intervals[t].half_width == c.intervals[t].half_width);
        }
    }

    REQUIRE_THROWS_WITH(enpi::run_icp(full, spec, 0.0, 7), "invalid value");
    REQUIRE_THROWS_WITH(enpi::run_icp(full, spec, 1.0, 7), "invalid value");
}
