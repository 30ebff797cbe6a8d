#pragma once

// Scoring and experiment aggregation: per-step records (coverage, width,
// Winkler), per-trial summaries, mean/SD across trials, the empirical
// p-value uniformity table, and the ensemble-versus-members error check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "enpi/core.hpp"
#include "enpi/datagen.hpp"
#include "enpi/ensemble.hpp"

namespace enpi {

// Interval width, plus an escape penalty of 2/alpha per unit of distance by
// which y lands outside.
inline double winkler_score(double lower, double upper, double y, double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) throw std::invalid_argument("invalid value");
    if (lower > upper) throw std::invalid_argument("invalid value");
    double w = upper - lower;
    if (y < lower) return w + 2.0 * (lower - y) / alpha;
    if (y > upper) return w + 2.0 * (y - upper) / alpha;
    return w;
}

struct EvalRecord {
    int t = 0;  // 1-based test step
    double y_true = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    bool covered = false;
    double width = 0.0;
    double winkler = 0.0;
};

inline EvalRecord make_record(int t, double y, double lower, double upper, double alpha) {
    EvalRecord r;
    r.t = t;
    r.y_true = y;
    r.lower = lower;
    r.upper = upper;
    r.covered = (lower <= y && y <= upper);
    r.width = upper - lower;
    r.winkler = winkler_score(lower, upper, y, alpha);
    return r;
}

inline std::vector<EvalRecord> make_records(const std::vector<PredictionInterval>& intervals,
                                            const Eigen::VectorXd& y_true, double alpha) {
    if (static_cast<Eigen::Index>(intervals.size()) != y_true.size())
        throw std::invalid_argument("invalid value");
    std::vector<EvalRecord> out;
    out.reserve(intervals.size());
    for (std::size_t i = 0; i < intervals.size(); ++i)
        out.push_back(make_record(static_cast<int>(i) + 1, y_true(static_cast<Eigen::Index>(i)),
                                  intervals[i].lower(), intervals[i].upper(), alpha));
    return out;
}

inline double coverage_rate(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw std::invalid_argument("empty sample");
    std::size_t c = 0;
    for (const auto& r : records)
        if (r.covered) ++c;
    return static_cast<double>(c) / static_cast<double>(records.size());
}

inline double mean_width(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw std::invalid_argument("empty sample");
    double s = 0.0;
    for (const auto& r : records) s += r.width;
    return s / static_cast<double>(records.size());
}

inline double mean_winkler(const std::vector<EvalRecord>& records) {
    if (records.empty()) throw std::invalid_argument("empty sample");
    double s = 0.0;
    for (const auto& r : records) s += r.winkler;
    return s / static_cast<double>(records.size());
}

struct TrialSummary {
    double coverage = 0.0;
    double width = 0.0;
    double winkler = 0.0;
};

inline TrialSummary summarize(const std::vector<EvalRecord>& records) {
    return {coverage_rate(records), mean_width(records), mean_winkler(records)};
}

// Mean and sample SD (n-1 denominator; 0 for a single trial) of the
// per-trial summaries.
struct ExperimentReport {
    std::string method;
    double alpha = 0.0;
    int n_trials = 0;
    double coverage_mean = 0.0, coverage_sd = 0.0;
    double width_mean = 0.0, width_sd = 0.0;
    double winkler_mean = 0.0, winkler_sd = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_sd(const std::vector<double>& xs) {
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    if (xs.size() < 2) return {m, 0.0};
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

}  // namespace detail

inline ExperimentReport aggregate_trials(const std::string& method, double alpha,
                                         const std::vector<TrialSummary>& trials) {
    if (trials.empty()) throw std::invalid_argument("empty sample");
    std::vector<double> cov, wid, win;
    for (const auto& t : trials) {
        cov.push_back(t.coverage);
        wid.push_back(t.width);
        win.push_back(t.winkler);
    }
    ExperimentReport r;
    r.method = method;
    r.alpha = alpha;
    r.n_trials = static_cast<int>(trials.size());
    std::tie(r.coverage_mean, r.coverage_sd) = detail::mean_sd(cov);
    std::tie(r.width_mean, r.width_sd) = detail::mean_sd(wid);
    std::tie(r.winkler_mean, r.winkler_sd) = detail::mean_sd(win);
    return r;
}

struct UniformityRow {
    double alpha = 0.0;
    double freq = 0.0;       // empirical P(p_value <= alpha)
    double deviation = 0.0;  // |freq - alpha|
};

// How far the stream of sequential p-values is from uniform, per level.
inline std::vector<UniformityRow> pvalue_uniformity_report(const std::vector<double>& pvalues,
                                                           const std::vector<double>& alphas) {
    if (pvalues.empty() || alphas.empty()) throw std::invalid_argument("empty sample");
    std::vector<UniformityRow> rows;
    rows.reserve(alphas.size());
    for (double a : alphas) {
        std::size_t c = 0;
        for (double p : pvalues)
            if (p <= a) ++c;
        UniformityRow r;
        r.alpha = a;
        r.freq = static_cast<double>(c) / static_cast<double>(pvalues.size());
        r.deviation = std::abs(r.freq - a);
        rows.push_back(r);
    }
    return rows;
}

struct MseCheckReport {
    int n_trials = 0;
    double ensemble_mse = 0.0;    // mean over trials of held-out MSE of the mean-ensemble
    double member_mse = 0.0;      // mean over trials of the average member MSE
    double ensemble_abs = 0.0;    // same pair for absolute prediction error
    double member_abs = 0.0;
    double frac_no_worse = 0.0;   // fraction of trials with ensemble MSE <= member MSE
    bool pointwise_ok = true;     // |y - mean_b f_b(x)| <= mean_b |y - f_b(x)| on every sample
};

// Fits a fresh ensemble per seeded trial and compares the mean-aggregated
// predictor against its own members on the held-out segment. The pointwise
// absolute-error inequality is convexity and must hold sample by sample;
// both error sums per sample are accumulated in the same model order so the
// comparison is exact even in floating point.
inline MseCheckReport ensemble_mse_check(const SimConfig& data_cfg, const RegressorSpec& spec,
                                         int b_tilde, int n_trials, std::uint64_t seed) {
    if (n_trials < 1) throw std::invalid_argument("invalid value");
    MseCheckReport rep;
    rep.n_trials = n_trials;
    int no_worse = 0;
    for (int trial = 0; trial < n_trials; ++trial) {
        SimConfig cfg = data_cfg;
        cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(2 * trial));
        Dataset data = generate(cfg);
        EnsembleState ens = fit_ensemble(data, spec, b_tilde, Phi::mean, 0.1,
                                         derive_seed(seed, static_cast<std::uint64_t>(2 * trial + 1)));
        const Eigen::MatrixXd Xte = data.features.bottomRows(data.test_len);
        const Eigen::VectorXd yte = data.response.tail(data.test_len);
        Eigen::MatrixXd P(ens.B, data.test_len);
        for (int b = 0; b < ens.B; ++b)
            P.row(b) = ens.models[static_cast<std::size_t>(b)].predict_many(Xte).transpose();

        double ens_mse = 0.0, mem_mse = 0.0, ens_abs = 0.0, mem_abs = 0.0;
        for (Eigen::Index t = 0; t < data.test_len; ++t) {
            double sum_r = 0.0, sum_abs = 0.0, sum_sq = 0.0;
            for (int b = 0; b < ens.B; ++b) {
                double r = yte(t) - P(b, t);
                sum_r += r;
                sum_abs += std::abs(r);
                sum_sq += r * r;
            }
            const double Bf = static_cast<double>(ens.B);
            double ens_err = std::abs(sum_r / Bf);
            double mem_err = sum_abs / Bf;
            if (ens_err > mem_err) rep.pointwise_ok = false;
            ens_abs += ens_err;
            mem_abs += mem_err;
            ens_mse += (sum_r / Bf) * (sum_r / Bf);
            mem_mse += sum_sq / Bf;
        }
        const double n = static_cast<double>(data.test_len);
        ens_mse /= n;
        mem_mse /= n;
        rep.ensemble_mse += ens_mse;
        rep.member_mse += mem_mse;
        rep.ensemble_abs += ens_abs / n;
        rep.member_abs += mem_abs / n;
        if (ens_mse <= mem_mse) ++no_worse;
    }
    rep.ensemble_mse /= n_trials;
    rep.member_mse /= n_trials;
    rep.ensemble_abs /= n_trials;
    rep.member_abs /= n_trials;
    rep.frac_no_worse = static_cast<double>(no_worse) / static_cast<double>(n_trials);
    return rep;
}

}  // namespace enpi
