#include <catch2/catch_amalgamated.hpp>

#include <enpi/datagen.hpp>
#include <enpi/ensemble.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

using enpi::aggregate;
using enpi::CenterMode;
using enpi::Dataset;
using enpi::EnpiParams;
using enpi::EnsembleState;
using enpi::Family;
using enpi::FittedModel;
using enpi::Phi;
using enpi::RegressorSpec;

namespace {

FittedModel constant_model(double c) {
    FittedModel m;
    m.family = Family::ridge;
    m.dim = 1;
    m.coef = Eigen::VectorXd::Zero(1);
    m.intercept = c;
    return m;
}

// Three constant models over three training points; index 0 is omitted only
// by model 1, index 1 only by model 2, index 2 by none (fallback case).
EnsembleState toy_ensemble(Phi phi) {
    EnsembleState ens;
    ens.B = 3;
    ens.phi = phi;
    ens.train_len = 3;
    ens.models = {constant_model(1.0), constant_model(3.0), constant_model(100.0)};
    ens.index_sets = {{0, 1, 2}, {1, 2, 2}, {0, 2, 2}};
    ens.excluding = {{1}, {2}, {}};
    return ens;
}

Dataset noiseless_linear(Eigen::Index n_train, Eigen::Index n_test, std::uint64_t seed) {
    enpi::Rng rng(seed);
    Dataset ds;
    ds.features.resize(n_train + n_test, 3);
    for (Eigen::Index i = 0; i < ds.features.rows(); ++i)
        for (Eigen::Index j = 0; j < 3; ++j) ds.features(i, j) = rng.normal();
    Eigen::VectorXd w(3);
    w << 2.0, -1.0, 0.5;
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

}  // namespace

TEST_CASE("aggregation rules", "[enpi]") {
    REQUIRE(aggregate(Phi::mean, {1.0, 3.0}) == 2.0);
    REQUIRE(aggregate(Phi::median, {100.0, 1.0, 2.0}) == 2.0);
    REQUIRE(aggregate(Phi::median, {100.0, 1.0, 2.0, 3.0}) == 2.5);

    // gamma = 0.1 on ten values drops exactly one from each end
    std::vector<double> ten{9, 0, 1, 2, 3, 4, 5, 6, 7, 8};
    REQUIRE(aggregate(Phi::trimmed_mean, ten, 0.1) == 4.5);
    // fewer than 1/gamma values: nothing dropped
    REQUIRE(aggregate(Phi::trimmed_mean, {1.0, 2.0, 6.0}, 0.1) == 3.0);

    REQUIRE_THROWS_WITH(aggregate(Phi::mean, {}), "empty sample");
    REQUIRE_THROWS_WITH(aggregate(Phi::trimmed_mean, {1.0}, 0.5), "invalid value");
    REQUIRE_THROWS_WITH(aggregate(Phi::trimmed_mean, {1.0}, -0.1), "invalid value");
}

TEST_CASE("ensemble size is a nonzero binomial with mean b_tilde/e", "[enpi]") {
    enpi::Rng rng(2);
    double sum = 0.0;
    for (int i = 0; i < 10000; ++i) {
        int B = enpi::draw_ensemble_size(100, rng);
        REQUIRE(B >= 1);
        REQUIRE(B <= 100);
        sum += B;
    }
    double mean = sum / 10000.0;  // 100/e = 36.79
    REQUIRE(mean > 36.0);
    REQUIRE(mean < 37.6);

    enpi::Rng r1(5), r2(5);
    REQUIRE(enpi::draw_ensemble_size(50, r1) == enpi::draw_ensemble_size(50, r2));
    REQUIRE_THROWS_WITH(enpi::draw_ensemble_size(2, rng), "invalid value");
}

TEST_CASE("bootstrap index sets have size T and leave about 1/e of indices out", "[enpi]") {
    enpi::Rng rng(3);
    const Eigen::Index T = 200;
    double excluded = 0.0;
    int n_sets = 0;
    for (int rep = 0; rep < 100; ++rep) {
        int B = enpi::draw_ensemble_size(30, rng);
        auto sets = enpi::sample_index_sets(T, B, rng);
        REQUIRE(sets.size() == static_cast<std::size_t>(B));
        for (const auto& s : sets) {
            REQUIRE(s.size() == static_cast<std::size_t>(T));
            std::vector<char> present(static_cast<std::size_t>(T), 0);
            for (int v : s) {
                REQUIRE(v >= 0);
                REQUIRE(v < T);
                present[static_cast<std::size_t>(v)] = 1;
            }
            int absent = 0;
            for (char p : present)
                if (!p) ++absent;
            excluded += static_cast<double>(absent) / static_cast<double>(T);
            ++n_sets;
        }
    }
    double frac = excluded / n_sets;  // (1 - 1/T)^T -> 1/e
    REQUIRE(std::abs(frac - std::exp(-1.0)) < 0.02);
}

TEST_CASE("leave-i-out aggregates only the models whose draw omitted i", "[enpi]") {
    Eigen::RowVectorXd x(1);
    x << 0.0;

    EnsembleState mean_ens = toy_ensemble(Phi::mean);
    REQUIRE(enpi::loo_predict(mean_ens, 0, x) == 3.0);
    REQUIRE(enpi::loo_predict(mean_ens, 1, x) == 100.0);
    // index 2 appears in every set: fall back to aggregating all models
    REQUIRE(enpi::loo_predict(mean_ens, 2, x) == Catch::Approx(104.0 / 3.0));

    EnsembleState med_ens = toy_ensemble(Phi::median);
    REQUIRE(enpi::loo_predict(med_ens, 2, x) == 3.0);

    REQUIRE_THROWS_WITH(enpi::loo_predict(mean_ens, 3, x), "invalid value");
    REQUIRE_THROWS_WITH(enpi::loo_predict(mean_ens, -1, x), "invalid value");
}

TEST_CASE("fitted ensemble is structurally consistent and deterministic", "[enpi]") {
    Dataset ds = noiseless_linear(30, 5, 21);
    EnsembleState ens = enpi::fit_ensemble(ds, tiny_ridge(), 25, Phi::mean, 0.1, 77);

    REQUIRE(ens.B >= 1);
    REQUIRE(ens.models.size() == static_cast<std::size_t>(ens.B));
    REQUIRE(ens.index_sets.size() == static_cast<std::size_t>(ens.B));
    for (const auto& s : ens.index_sets) REQUIRE(s.size() == 30);

    // excluding[i] lists exactly the models whose index set omits i
    for (Eigen::Index i = 0; i < 30; ++i) {
        std::vector<char> omitted(static_cast<std::size_t>(ens.B), 1);
        for (int b = 0; b < ens.B; ++b)
            for (int v : ens.index_sets[static_cast<std::size_t>(b)])
                if (v == i) {
                    omitted[static_cast<std::size_t>(b)] = 0;
                    break;
                }
        std::vector<int> expect;
        for (int b = 0; b < ens.B; ++b)
            if (omitted[static_cast<std::size_t>(b)]) expect.push_back(b);
        REQUIRE(ens.excluding[static_cast<std::size_t>(i)] == expect);
    }

    EnsembleState again = enpi::fit_ensemble(ds, tiny_ridge(), 25, Phi::mean, 0.1, 77);
    REQUIRE(again.B == ens.B);
    REQUIRE(again.index_sets == ens.index_sets);
    Eigen::RowVectorXd probe(3);
    probe << 0.3, -1.2, 0.7;
    for (int b = 0; b < ens.B; ++b)
        REQUIRE(ens.models[static_cast<std::size_t>(b)].predict(probe) ==
                again.models[static_cast<std::size_t>(b)].predict(probe));
}

TEST_CASE("initial residual window is full and near zero on noiseless data", "[enpi]") {
    Dataset ds = noiseless_linear(40, 10, 4);
    EnsembleState ens = enpi::fit_ensemble(ds, tiny_ridge(), 30, Phi::mean, 0.1, 9);
    enpi::ResidualWindow w = enpi::init_residuals(ens, ds);
    REQUIRE(w.size() == 40);
    for (double v : w.values()) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 1e-4);
    }
}

TEST_CASE("next-step interval takes quantiles of leave-one-out centers and residuals",
          "[enpi]") {
    EnsembleState ens = toy_ensemble(Phi::mean);
    enpi::ResidualWindow w(std::vector<double>{1.0, 2.0, 3.0});
    Eigen::RowVectorXd x(1);
    x << 0.0;

    enpi::PredictionInterval pi = enpi::predict_next_interval(ens, w, x, 0.2);
    // leave-i-out values are {3, 100, 104/3}; the 0.8 quantile is the max
    REQUIRE(pi.center == 100.0);
    REQUIRE(pi.half_width == 3.0);
    REQUIRE(pi.alpha == 0.2);

    enpi::PredictionInterval pm =
        enpi::predict_next_interval(ens, w, x, 0.2, CenterMode::loo_mean);
    REQUIRE(pm.center == Catch::Approx((3.0 + 100.0 + 104.0 / 3.0) / 3.0));

    enpi::ResidualWindow short_w(std::vector<double>{1.0, 2.0});
    REQUIRE_THROWS_WITH(enpi::predict_next_interval(ens, short_w, x, 0.2), "invalid value");
    REQUIRE_THROWS_WITH(enpi::predict_next_interval(ens, w, x, 0.0), "invalid value");
    REQUIRE_THROWS_WITH(enpi::predict_next_interval(ens, w, x, 1.0), "invalid value");
}

TEST_CASE("sequential run tracks a noiseless process almost exactly", "[enpi]") {
    Dataset ds = noiseless_linear(40, 12, 13);
    EnpiParams params;
    params.b_tilde = 30;
    params.alpha = 0.1;
    params.seed = 3;
    enpi::EnpiRun run = enpi::run_sequential(ds, tiny_ridge(), params);

    REQUIRE(run.seq.intervals.size() == 12);
    REQUIRE(run.seq.pvalues.size() == 12);
    for (Eigen::Index t = 0; t < 12; ++t) {
        const auto& pi = run.seq.intervals[static_cast<std::size_t>(t)];
        REQUIRE(pi.half_width >= 0.0);
        REQUIRE(pi.half_width <= 1e-4);
        REQUIRE(std::abs(ds.response(40 + t) - pi.center) <= 1e-4);
    }
    for (double p : run.seq.pvalues) {
        REQUIRE(p >= 0.0);
        REQUIRE(p <= 1.0);
        // p-values from a window of 40 residuals live on the grid j/40
        REQUIRE(std::abs(p * 40.0 - std::round(p * 40.0)) < 1e-9);
    }
}

TEST_CASE("window updates are first-in-first-out over the test stream", "[enpi]") {
    // feed a hand-built leave-i-out matrix through the replay engine and
    // recompute the expected final window contents
    const Eigen::Index T = 4, T1 = 6;
    Eigen::MatrixXd loo_test(T, T1);
    loo_test.setZero();  // all centers are the quantile of four zeros = 0
    Eigen::VectorXd y(T1);
    y << 1.0, -2.0, 0.5, 3.0, -0.25, 4.0;
    std::vector<double> init{0.1, 0.2, 0.3, 0.4};

    auto res = enpi::run_sequential_core(loo_test, y, enpi::ResidualWindow(init), 0.25,
                                         CenterMode::loo_quantile);
    // new residuals are |y_t|; the last T of {0.1,...,0.4, 1, 2, 0.5, 3, 0.25, 4}
    REQUIRE(res.window.values() == std::vector<double>{0.5, 3.0, 0.25, 4.0});
    REQUIRE(res.intervals.size() == 6);
    // every center is zero here, and each half-width is the 0.75-quantile of
    // the window as it stood before that step
    REQUIRE(res.intervals[0].center == 0.0);
    REQUIRE(res.intervals[0].half_width == 0.4);        // of {.1,.2,.3,.4}: k=ceil(.75*5)=4
    REQUIRE(res.intervals[1].half_width == 1.0);        // of {.2,.3,.4,1}
    REQUIRE(res.intervals[2].half_width == 2.0);        // of {.3,.4,1,2}
    // p-value of each residual is computed against the pre-update window
    REQUIRE(res.pvalues[0] == 0.0);                     // 1.0 exceeds all of {.1..4}... none above
    REQUIRE(res.pvalues[2] == Catch::Approx(0.5));      // 0.5 against {.3,.4,1,2}
}

TEST_CASE("interval width is nonincreasing in alpha", "[enpi]") {
    enpi::SimConfig cfg;
    cfg.kind = enpi::SimKind::multi;
    cfg.T = 60;
    cfg.T1 = 40;
    cfg.p = 5;
    cfg.rho = 0.5;
    cfg.seed = 19;
    Dataset ds = enpi::generate(cfg);

    RegressorSpec spec;
    spec.family = Family::ridge;

    // with the alpha-independent mean center, the residual stream is shared
    // and stepwise monotonicity is exact
    std::vector<std::vector<double>> widths;
    for (double alpha : {0.05, 0.1, 0.3}) {
        EnpiParams params;
        params.alpha = alpha;
        params.center = CenterMode::loo_mean;
        params.seed = 5;
        params.b_tilde = 25;
        auto run = enpi::run_sequential(ds, spec, params);
        std::vector<double> w;
        for (const auto& pi : run.seq.intervals) w.push_back(pi.half_width);
        widths.push_back(w);
    }
    for (std::size_t t = 0; t < widths[0].size(); ++t) {
        REQUIRE(widths[0][t] >= widths[1][t]);
        REQUIRE(widths[1][t] >= widths[2][t]);
    }

    // with quantile centers the streams differ, but the first step still
    // shares its window across alphas
    std::vector<double> first;
    for (double alpha : {0.05, 0.1, 0.3}) {
        EnpiParams params;
        params.alpha = alpha;
        params.seed = 5;
        params.b_tilde = 25;
        first.push_back(enpi::run_sequential(ds, spec, params)
                            .seq.intervals.front()
                            .half_width);
    }
    REQUIRE(first[0] >= first[1]);
    REQUIRE(first[1] >= first[2]);
}

TEST_CASE("truncating the test stream never changes earlier intervals", "[enpi]") {
    enpi::SimConfig cfg;
    cfg.kind = enpi::SimKind::multi;
    cfg.T = 50;
    cfg.T1 = 30;
    cfg.p = 4;
    cfg.seed = 23;
    Dataset full = enpi::generate(cfg);

    Dataset cut = full;
    cut.test_len = 11;
    cut.features = full.features.topRows(full.train_len + 11);
    cut.response = full.response.head(full.train_len + 11);

    EnpiParams params;
    params.seed = 31;
    params.b_tilde = 25;
    RegressorSpec spec;
    spec.family = Family::ridge;

    auto a = enpi::run_sequential(full, spec, params);
    auto b = enpi::run_sequential(cut, spec, params);
    for (std::size_t t = 0; t < 11; ++t) {
        REQUIRE(a.seq.intervals[t].center == b.seq.intervals[t].center);
        REQUIRE(a.seq.intervals[t].half_width == b.seq.intervals[t].half_width);
        REQUIRE(a.seq.pvalues[t] == b.seq.pvalues[t]);
    }
}

TEST_CASE("sequential runs are reproducible and leave the ensemble untouched", "[enpi]") {
    Dataset ds = noiseless_linear(25, 8, 2);
    EnpiParams params;
    params.b_tilde = 20;
    params.seed = 11;
    auto r1 = enpi::run_sequential(ds, tiny_ridge(), params);
    auto r2 = enpi::run_sequential(ds, tiny_ridge(), params);
    REQUIRE(r1.seq.intervals.size() == r2.seq.intervals.size());
    for (std::size_t t = 0; t < r1.seq.intervals.size(); ++t) {
        REQUIRE(r1.seq.intervals[t].center == r2.seq.intervals[t].center);
        REQUIRE(r1.seq.intervals[t].half_width == r2.seq.intervals[t].half_width);
    }

    // replaying the test phase must not mutate the fitted ensemble
    auto sets_before = r1.ensemble.index_sets;
    Eigen::RowVectorXd probe(3);
    probe << 1.0, 2.0, 3.0;
    std::vector<double> preds_before;
    for (const auto& m : r1.ensemble.models) preds_before.push_back(m.predict(probe));

    Eigen::MatrixXd loo_test =
        enpi::loo_prediction_matrix(r1.ensemble, ds.features.bottomRows(ds.test_len));
    auto replay = enpi::run_sequential_core(loo_test, ds.response.tail(ds.test_len),
                                            enpi::init_residuals(r1.ensemble, ds), 0.1,
                                            CenterMode::loo_quantile);
    REQUIRE(replay.intervals.size() == 8);
    REQUIRE(r1.ensemble.index_sets == sets_before);
    for (std::size_t b = 0; b < preds_before.size(); ++b)
        REQUIRE(r1.ensemble.models[b].predict(probe) == preds_before[b]);

    Dataset no_test = ds;
    no_test.test_len = 0;
    no_test.features = ds.features.topRows(ds.train_len);
    no_test.response = ds.response.head(ds.train_len);
    REQUIRE_THROWS_WITH(enpi::run_sequential(no_test, tiny_ridge(), params),
                        "insufficient data");
}

TEST_CASE("every-set membership fallback is vanishingly rare at scale", "[enpi]") {
    enpi::Rng rng(6);
    const Eigen::Index T = 200;
    long fallback = 0;
    for (int rep = 0; rep < 500; ++rep) {
        int B = enpi::draw_ensemble_size(100, rng);
        auto sets = enpi::sample_index_sets(T, B, rng);
        std::vector<int> seen(static_cast<std::size_t>(T), 0);
        for (const auto& s : sets) {
            std::vector<char> present(static_cast<std::size_t>(T), 0);
            for (int v : s) present[static_cast<std::size_t>(v)] = 1;
            for (Eigen::Index i = 0; i < T; ++i)
                seen[static_cast<std::size_t>(i)] += present[static_cast<std::size_t>(i)];
        }
        for (Eigen::Index i = 0; i < T; ++i)
            if (seen[static_cast<std::size_t>(i)] == B) ++fallback;
    }
    // probability ~ (1 - 1/e)^B per index; with B around 37 this is ~4e-8
    REQUIRE(fallback <= 2);
}
