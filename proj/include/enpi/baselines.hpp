#pragma once

// Baseline conformal methods adapted to the same sequential sliding-window
// regime as the ensemble method.
//
// ICP: random 50:50 split of the training segment into a proper-training
// part (model fit) and a calibration part (residual window of capacity
// floor(T/2)); every test step emits f(x_t) +/- (1-alpha)-quantile of the
// window, then slides the window with |y_t - f(x_t)|.
//
// Weighted ICP: identical stream, but at each step a ridge-penalized
// logistic model is fit to discriminate the current calibration covariates
// (label 0) from the test covariate (label 1). Each calibration residual is
// weighted by the density-ratio estimate w(x) = p(x)/(1-p(x)), the test
// point contributes weight w(x_t) on a +infinity pseudo-residual, and the
// half-width is the weighted (1-alpha)-quantile of that augmented set.
// Steps whose weight fit does not converge fall back to uniform weights and
// are counted.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>
#include <vector>

#include "enpi/core.hpp"
#include "enpi/regressors.hpp"
#include "enpi/rng.hpp"

namespace enpi {

struct WeightModel {
    Eigen::VectorXd coef;
    double intercept = 0.0;
    bool converged = false;

    double logit(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
        return coef.dot(x) + intercept;
    }
};

namespace detail {

inline double softplus(double z) {
    return (z > 0.0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

// Maximizes  sum_i [ y_i z_i - log(1 + e^{z_i}) ] - (penalty/2) ||coef||^2
// with z_i = intercept + coef'x_i and the intercept unpenalized, by damped
// Newton steps (step halving) until the gradient norm is <= 1e-8 or 100
// iterations. `warm` seeds the iteration when provided.
inline WeightModel fit_logistic(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                                double ridge_penalty, const WeightModel* warm = nullptr) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (n != static_cast<Eigen::Index>(labels.size()) || n < 2)
        throw std::invalid_argument("insufficient data");
    if (!X.allFinite() || !(ridge_penalty >= 0.0)) throw std::invalid_argument("invalid value");
    bool has0 = false, has1 = false;
    for (int l : labels) {
        if (l == 0) has0 = true;
        else if (l == 1) has1 = true;
        else throw std::invalid_argument("invalid value");
    }
    if (!has0 || !has1) throw std::invalid_argument("degenerate labels");

    Eigen::MatrixXd Z(n, d + 1);
    Z.col(0).setOnes();
    Z.rightCols(d) = X;
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)];
    Eigen::VectorXd pen = Eigen::VectorXd::Constant(d + 1, ridge_penalty);
    pen(0) = 0.0;

    Eigen::VectorXd b = Eigen::VectorXd::Zero(d + 1);
    if (warm && warm->coef.size() == d) {
        b(0) = warm->intercept;
        b.tail(d) = warm->coef;
    }

    auto objective = [&](const Eigen::VectorXd& bb) {
        Eigen::VectorXd z = Z * bb;
        double v = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) v += y(i) * z(i) - detail::softplus(z(i));
        return v - 0.5 * pen.dot(bb.cwiseProduct(bb));
    };

    bool converged = false;
    Eigen::VectorXd g;
    for (int it = 0; it < 100; ++it) {
        Eigen::VectorXd z = Z * b;
        Eigen::VectorXd p(n);
        for (Eigen::Index i = 0; i < n; ++i) p(i) = detail::sigmoid(z(i));
        g = Z.transpose() * (y - p) - pen.cwiseProduct(b);
        if (g.norm() <= 1e-8) {
            converged = true;
            break;
        }
        Eigen::VectorXd w = p.array() * (1.0 - p.array());
        Eigen::MatrixXd H = Z.transpose() * w.asDiagonal() * Z;
        H.diagonal() += pen;
        Eigen::VectorXd step = H.ldlt().solve(g);
        if (!step.allFinite()) break;
        double f0 = objective(b);
        double t = 1.0;
        bool improved = false;
        for (int h = 0; h < 30; ++h) {
            Eigen::VectorXd bn = b + t * step;
            if (objective(bn) > f0) {
                b = bn;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if (!improved) {
            converged = true;  // stationary within line-search resolution
            break;
        }
    }
    if (!converged && g.size() > 0) converged = g.norm() <= 1e-6;

    WeightModel m;
    m.intercept = b(0);
    m.coef = b.tail(d);
    m.converged = converged;
    return m;
}

struct SplitState {
    FittedModel proper_model;
    ResidualWindow calibration_window;
    std::vector<int> calibration_idx;  // ascending (time order)
    std::vector<int> proper_idx;       // ascending
    double split_fraction = 0.5;
};

// Random split, then one model fit on the proper part only; calibration
// responses never reach the fit.
inline SplitState icp_split_fit(const Dataset& data, const RegressorSpec& spec,
                                std::uint64_t seed) {
    data.validate();
    const Eigen::Index T = data.train_len;
    if (T < 4) throw std::invalid_argument("insufficient data");
    const auto m = static_cast<int>(T / 2);

    Rng rng(seed);
    std::vector<int> perm = rng.sample_without_replacement(static_cast<int>(T), static_cast<int>(T));
    SplitState st;
    st.calibration_idx.assign(perm.begin(), perm.begin() + m);
    st.proper_idx.assign(perm.begin() + m, perm.end());
    std::sort(st.calibration_idx.begin(), st.calibration_idx.end());
    std::sort(st.proper_idx.begin(), st.proper_idx.end());

    Eigen::MatrixXd Xp(static_cast<Eigen::Index>(st.proper_idx.size()), data.features.cols());
    Eigen::VectorXd yp(static_cast<Eigen::Index>(st.proper_idx.size()));
    for (std::size_t r = 0; r < st.proper_idx.size(); ++r) {
        Xp.row(static_cast<Eigen::Index>(r)) = data.features.row(st.proper_idx[r]);
        yp(static_cast<Eigen::Index>(r)) = data.response(st.proper_idx[r]);
    }
    RegressorSpec ms = spec;
    ms.seed = derive_seed(seed, 1);
    st.proper_model = fit(ms, Xp, yp);

    std::vector<double> resid(st.calibration_idx.size());
    for (std::size_t r = 0; r < st.calibration_idx.size(); ++r) {
        int i = st.calibration_idx[r];
        resid[r] = std::abs(data.response(i) - st.proper_model.predict(data.features.row(i)));
    }
    st.calibration_window = ResidualWindow(std::move(resid));
    return st;
}

// Everything a baseline computes that does not depend on alpha: the fitted
// split, the test-time centers and residual stream, and (weighted variant)
// the per-step calibration weights. Replaying different alphas off one prep
// is what makes sweeps affordable.
struct BaselinePrep {
    SplitState split;
    Eigen::VectorXd centers;                        // f(x_t) for each test step
    std::vector<double> new_residuals;              // |y_t - f(x_t)|
    std::vector<std::vector<double>> step_weights;  // weighted only; per step, calibration + test
    int n_weight_fallbacks = 0;
    bool weighted = false;
};

namespace detail {

inline BaselinePrep baseline_prepare(const Dataset& data, const RegressorSpec& spec,
                                     std::uint64_t seed, bool weighted) {
    BaselinePrep prep;
    prep.weighted = weighted;
    prep.split = icp_split_fit(data, spec, seed);
    const Eigen::Index T1 = data.test_len;
    if (T1 < 1) throw std::invalid_argument("insufficient data");
    const Eigen::MatrixXd Xte = data.features.bottomRows(T1);
    const Eigen::VectorXd yte = data.response.tail(T1);
    prep.centers = prep.split.proper_model.predict_many(Xte);
    prep.new_residuals.resize(static_cast<std::size_t>(T1));
    for (Eigen::Index t = 0; t < T1; ++t)
        prep.new_residuals[static_cast<std::size_t>(t)] = std::abs(yte(t) - prep.centers(t));

    if (!weighted) return prep;

    // Sliding window of calibration covariates, in lockstep with the
    // residual window.
    std::deque<Eigen::Index> cal_rows(prep.split.calibration_idx.begin(),
                                      prep.split.calibration_idx.end());
    const Eigen::Index d = data.features.cols();
    prep.step_weights.resize(static_cast<std::size_t>(T1));
    WeightModel prev;
    bool have_prev = false;
    for (Eigen::Index t = 0; t < T1; ++t) {
        const Eigen::Index m = static_cast<Eigen::Index>(cal_rows.size());
        Eigen::MatrixXd P(m + 1, d);
        for (Eigen::Index r = 0; r < m; ++r)
            P.row(r) = data.features.row(cal_rows[static_cast<std::size_t>(r)]);
        P.row(m) = Xte.row(t);
        enpi::detail::Standardizer st;
        st.fit(P);
        Eigen::MatrixXd Ps = st.transform(P);
        std::vector<int> labels(static_cast<std::size_t>(m + 1), 0);
        labels.back() = 1;
        // Penalty grows with rows + dimension: strong enough that one point
        // cannot be declared arbitrarily separable from the cloud (which
        // would blow up the +inf pseudo-residual's weight), weak enough to
        // track genuine covariate shift.
        double penalty = 5.0 * static_cast<double>(m + 1 + d);
        WeightModel wm = fit_logistic(Ps, labels, penalty, have_prev ? &prev : nullptr);
        prev = wm;
        have_prev = true;

        auto& wts = prep.step_weights[static_cast<std::size_t>(t)];
        wts.assign(static_cast<std::size_t>(m + 1), 1.0);
        if (wm.converged) {
            for (Eigen::Index r = 0; r <= m; ++r) {
                double p = detail::sigmoid(wm.logit(Ps.row(r)));
                p = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
                wts[static_cast<std::size_t>(r)] = p / (1.0 - p);
            }
        } else {
            ++prep.n_weight_fallbacks;
        }

        cal_rows.pop_front();
        cal_rows.push_back(data.train_len + t);  // test covariate enters the window
    }
    return prep;
}

}  // namespace detail

// Replays the sliding-window loop of a prepared baseline at one alpha.
inline std::vector<PredictionInterval> baseline_replay(const BaselinePrep& prep, double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) throw std::invalid_argument("invalid value");
    std::vector<double> window = prep.split.calibration_window.values();
    const std::size_t T1 = prep.new_residuals.size();
    std::vector<PredictionInterval> out;
    out.reserve(T1);
    std::vector<double> aug;
    for (std::size_t t = 0; t < T1; ++t) {
        PredictionInterval pi;
        pi.alpha = alpha;
        pi.center = prep.centers(static_cast<Eigen::Index>(t));
        if (!prep.weighted) {
            pi.half_width = empirical_quantile(window, 1.0 - alpha);
        } else {
            aug = window;
            aug.push_back(std::numeric_limits<double>::infinity());
            pi.half_width = weighted_quantile(aug, prep.step_weights[t], 1.0 - alpha);
        }
        out.push_back(pi);
        window.erase(window.begin());
        window.push_back(prep.new_residuals[t]);
    }
    return out;
}

struct BaselineRun {
    std::vector<PredictionInterval> intervals;
    SplitState split;
    int n_weight_fallbacks = 0;
};

inline BaselineRun run_icp(const Dataset& data, const RegressorSpec& spec, double alpha,
                           std::uint64_t seed) {
    BaselinePrep prep = detail::baseline_prepare(data, spec, seed, false);
    BaselineRun run;
    run.intervals = baseline_replay(prep, alpha);
    run.split = std::move(prep.split);
    return run;
}

inline BaselineRun run_weighted_icp(const Dataset& data, const RegressorSpec& spec, double alpha,
                                    std::uint64_t seed) {
    BaselinePrep prep = detail::baseline_prepare(data, spec, seed, true);
    BaselineRun run;
    run.intervals = baseline_replay(prep, alpha);
    run.split = std::move(prep.split);
    run.n_weight_fallbacks = prep.n_weight_fallbacks;
    return run;
}

}  // namespace enpi
