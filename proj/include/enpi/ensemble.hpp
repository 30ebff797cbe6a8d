#pragma once

// Sequential ensemble prediction intervals (EnPI).
//
// Training phase: draw B ~ Binomial(b_tilde, 1/e), sample B bootstrap index
// sets of size T with replacement, fit one base model per set, and compute
// leave-i-out residuals: each training point is predicted by aggregating
// (under phi) only the models whose index set does not contain it.
//
// Test phase, one step at a time with no refitting: the interval center is
// the (1-alpha) quantile of the T leave-i-out predictions at x_t, the
// half-width is the (1-alpha) quantile of the sliding residual window; after
// the interval is emitted, y_t is revealed, |y_t - center| joins the window
// and the oldest residual leaves.
//
// RNG discipline: from one root seed the draw order is (1) B, (2) index
// sets S_1..S_B, (3) nothing - per-model seeds are derived by hashing
// (root, b), so fitting models in parallel cannot change results.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "enpi/core.hpp"
#include "enpi/regressors.hpp"
#include "enpi/rng.hpp"

namespace enpi {

enum class Phi { mean, median, trimmed_mean };
enum class CenterMode { loo_quantile, loo_mean };

// Aggregate a non-empty set of base-model predictions.
// trimmed_mean discards the floor(gamma*m) smallest and largest values.
inline double aggregate(Phi phi, std::vector<double> vals, double trim_gamma = 0.1) {
    if (vals.empty()) throw std::invalid_argument("empty sample");
    const std::size_t m = vals.size();
    switch (phi) {
        case Phi::mean: {
            double s = 0.0;
            for (double v : vals) s += v;
            return s / static_cast<double>(m);
        }
        case Phi::median: {
            std::sort(vals.begin(), vals.end());
            if (m % 2 == 1) return vals[m / 2];
            return 0.5 * (vals[m / 2 - 1] + vals[m / 2]);
        }
        case Phi::trimmed_mean: {
            if (!(trim_gamma >= 0.0) || trim_gamma >= 0.5)
                throw std::invalid_argument("invalid value");
            std::sort(vals.begin(), vals.end());
            auto drop = static_cast<std::size_t>(std::floor(trim_gamma * static_cast<double>(m)));
            if (2 * drop >= m) drop = (m - 1) / 2;
            double s = 0.0;
            for (std::size_t i = drop; i < m - drop; ++i) s += vals[i];
            return s / static_cast<double>(m - 2 * drop);
        }
    }
    throw std::invalid_argument("invalid value");
}

struct EnsembleState {
    std::vector<FittedModel> models;
    std::vector<std::vector<int>> index_sets;  // per model: T draws (with replacement), in draw order
    std::vector<std::vector<int>> excluding;   // per training index: models whose set omits it
    int B = 0;
    Phi phi = Phi::mean;
    double trim_gamma = 0.1;
    Eigen::Index train_len = 0;
};

// B ~ Binomial(b_tilde, 1/e), redrawn while zero. Requires b_tilde >= 3 so
// the mean ensemble size exceeds one.
inline int draw_ensemble_size(int b_tilde, Rng& rng) {
    if (b_tilde < 3) throw std::invalid_argument("invalid value");
    const double p = std::exp(-1.0);
    int B = 0;
    while (B == 0) B = rng.binomial(b_tilde, p);
    return B;
}

inline std::vector<std::vector<int>> sample_index_sets(Eigen::Index train_len, int B, Rng& rng) {
    std::vector<std::vector<int>> sets(static_cast<std::size_t>(B));
    for (auto& s : sets) {
        s.resize(static_cast<std::size_t>(train_len));
        for (auto& v : s)
            v = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(train_len)));
    }
    return sets;
}

inline EnsembleState fit_ensemble(const Dataset& data, const RegressorSpec& spec, int b_tilde,
                                  Phi phi, double trim_gamma, std::uint64_t seed) {
    data.validate();
    if (data.train_len < 2) throw std::invalid_argument("insufficient data");
    const Eigen::Index T = data.train_len;

    EnsembleState ens;
    ens.phi = phi;
    ens.trim_gamma = trim_gamma;
    ens.train_len = T;

    Rng rng(seed);
    ens.B = draw_ensemble_size(b_tilde, rng);
    ens.index_sets = sample_index_sets(T, ens.B, rng);

    const Eigen::MatrixXd Xtr = data.features.topRows(T);
    const Eigen::VectorXd ytr = data.response.head(T);

    ens.models.reserve(static_cast<std::size_t>(ens.B));
    ens.excluding.assign(static_cast<std::size_t>(T), {});
    std::vector<char> present(static_cast<std::size_t>(T));
    for (int b = 0; b < ens.B; ++b) {
        const auto& S = ens.index_sets[static_cast<std::size_t>(b)];
        Eigen::MatrixXd Xb(T, Xtr.cols());
        Eigen::VectorXd yb(T);
        for (Eigen::Index r = 0; r < T; ++r) {
            Xb.row(r) = Xtr.row(S[static_cast<std::size_t>(r)]);
            yb(r) = ytr(S[static_cast<std::size_t>(r)]);
        }
        RegressorSpec ms = spec;
        ms.seed = derive_seed(seed, static_cast<std::uint64_t>(b));
        ens.models.push_back(fit(ms, Xb, yb));

        std::fill(present.begin(), present.end(), 0);
        for (int idx : S) present[static_cast<std::size_t>(idx)] = 1;
        for (Eigen::Index i = 0; i < T; ++i)
            if (!present[static_cast<std::size_t>(i)])
                ens.excluding[static_cast<std::size_t>(i)].push_back(b);
    }
    return ens;
}

namespace detail {

// Leave-i-out aggregates for every training index, given the B base-model
// predictions at one point. Indices contained in every index set fall back
// to aggregating all B models (vanishingly rare; keeps the window full).
inline void loo_aggregate_all(const EnsembleState& ens, const Eigen::VectorXd& model_preds,
                              double* out) {
    const auto T = static_cast<std::size_t>(ens.train_len);
    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(ens.B));
    for (std::size_t i = 0; i < T; ++i) {
        const auto& ex = ens.excluding[i];
        vals.clear();
        if (ex.empty()) {
            for (int b = 0; b < ens.B; ++b) vals.push_back(model_preds(b));
        } else {
            for (int b : ex) vals.push_back(model_preds(b));
        }
        out[i] = aggregate(ens.phi, vals, ens.trim_gamma);
    }
}

inline Eigen::VectorXd model_predictions_at(const EnsembleState& ens,
                                            const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    Eigen::VectorXd preds(ens.B);
    for (int b = 0; b < ens.B; ++b)
        preds(b) = ens.models[static_cast<std::size_t>(b)].predict(x);
    return preds;
}

}  // namespace detail

inline double loo_predict(const EnsembleState& ens, Eigen::Index i,
                          const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    if (i < 0 || i >= ens.train_len) throw std::invalid_argument("invalid value");
    Eigen::VectorXd preds = detail::model_predictions_at(ens, x);
    const auto& ex = ens.excluding[static_cast<std::size_t>(i)];
    std::vector<double> vals;
    if (ex.empty())
        vals.assign(preds.data(), preds.data() + preds.size());
    else
        for (int b : ex) vals.push_back(preds(b));
    return aggregate(ens.phi, vals, ens.trim_gamma);
}

// Column t holds the T leave-i-out predictions at row t of X. Alpha never
// enters here, so one matrix serves a whole sweep.
inline Eigen::MatrixXd loo_prediction_matrix(const EnsembleState& ens, const Eigen::MatrixXd& X) {
    const Eigen::Index T = ens.train_len;
    Eigen::MatrixXd P(ens.B, X.rows());
    for (int b = 0; b < ens.B; ++b)
        P.row(b) = ens.models[static_cast<std::size_t>(b)].predict_many(X).transpose();
    Eigen::MatrixXd L(T, X.rows());
    for (Eigen::Index c = 0; c < X.rows(); ++c)
        detail::loo_aggregate_all(ens, P.col(c), L.col(c).data());
    return L;
}

inline ResidualWindow init_residuals(const EnsembleState& ens, const Dataset& data) {
    if (data.train_len != ens.train_len) throw std::invalid_argument("invalid value");
    const Eigen::Index T = ens.train_len;
    Eigen::MatrixXd L = loo_prediction_matrix(ens, data.features.topRows(T));
    std::vector<double> resid(static_cast<std::size_t>(T));
    for (Eigen::Index i = 0; i < T; ++i)
        resid[static_cast<std::size_t>(i)] = std::abs(data.response(i) - L(i, i));
    return ResidualWindow(std::move(resid));
}

inline PredictionInterval predict_next_interval(const EnsembleState& ens,
                                                const ResidualWindow& window,
                                                const Eigen::Ref<const Eigen::RowVectorXd>& x,
                                                double alpha,
                                                CenterMode mode = CenterMode::loo_quantile) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) throw std::invalid_argument("invalid value");
    if (window.size() != static_cast<std::size_t>(ens.train_len))
        throw std::invalid_argument("invalid value");
    Eigen::VectorXd preds = detail::model_predictions_at(ens, x);
    std::vector<double> loo(static_cast<std::size_t>(ens.train_len));
    detail::loo_aggregate_all(ens, preds, loo.data());
    PredictionInterval pi;
    pi.alpha = alpha;
    pi.center = (mode == CenterMode::loo_quantile)
                    ? empirical_quantile(loo, 1.0 - alpha)
                    : aggregate(Phi::mean, loo);
    pi.half_width = window.quantile(1.0 - alpha);
    return pi;
}

struct SequentialResult {
    std::vector<PredictionInterval> intervals;
    std::vector<double> pvalues;  // of each new residual against the pre-update window
    ResidualWindow window;        // final state
};

// Replay engine shared by run_sequential and sweeps: loo_test column t holds
// the T leave-i-out predictions at test step t (alpha-independent), so only
// the quantile levels change between alphas.
inline SequentialResult run_sequential_core(const Eigen::MatrixXd& loo_test,
                                            const Eigen::VectorXd& y_test,
                                            ResidualWindow window, double alpha,
                                            CenterMode mode) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) throw std::invalid_argument("invalid value");
    SequentialResult out;
    const Eigen::Index T1 = y_test.size();
    out.intervals.reserve(static_cast<std::size_t>(T1));
    out.pvalues.reserve(static_cast<std::size_t>(T1));
    std::vector<double> loo(static_cast<std::size_t>(loo_test.rows()));
    for (Eigen::Index t = 0; t < T1; ++t) {
        Eigen::Map<const Eigen::VectorXd> col(loo_test.col(t).data(), loo_test.rows());
        loo.assign(col.data(), col.data() + col.size());
        PredictionInterval pi;
        pi.alpha = alpha;
        if (mode == CenterMode::loo_quantile)
            pi.center = empirical_quantile(loo, 1.0 - alpha);
        else
            pi.center = aggregate(Phi::mean, loo);
        pi.half_width = window.quantile(1.0 - alpha);
        out.intervals.push_back(pi);
        // y_t becomes visible only now
        double eps = std::abs(y_test(t) - pi.center);
        out.pvalues.push_back(window.p_value(eps));
        window.push(eps);
    }
    out.window = std::move(window);
    return out;
}

struct EnpiParams {
    int b_tilde = 100;
    Phi phi = Phi::mean;
    double trim_gamma = 0.1;
    double alpha = 0.1;
    CenterMode center = CenterMode::loo_quantile;
    std::uint64_t seed = 1;
};

struct EnpiRun {
    EnsembleState ensemble;
    SequentialResult seq;
};

inline EnpiRun run_sequential(const Dataset& data, const RegressorSpec& spec,
                              const EnpiParams& params) {
    data.validate();
    if (data.test_len < 1) throw std::invalid_argument("insufficient data");
    EnpiRun run;
    run.ensemble =
        fit_ensemble(data, spec, params.b_tilde, params.phi, params.trim_gamma, params.seed);
    ResidualWindow window = init_residuals(run.ensemble, data);
    Eigen::MatrixXd loo_test =
        loo_prediction_matrix(run.ensemble, data.features.bottomRows(data.test_len));
    run.seq = run_sequential_core(loo_test, data.response.tail(data.test_len),
                                  std::move(window), params.alpha, params.center);
    return run;
}

}  // namespace enpi
