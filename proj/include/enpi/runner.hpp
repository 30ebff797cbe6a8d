#pragma once

// Experiment orchestration: trials x methods x alphas off one RunConfig.
//
// Each trial derives its own seed chain, so trials are independent work
// items; with n_threads > 1 they run concurrently and results land in
// per-trial slots, making the output identical for any thread count.
// Within a trial the expensive, alpha-independent work (ensemble fit,
// leave-i-out predictions, baseline split/model/weights) happens once and
// every alpha is replayed off it.

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "enpi/baselines.hpp"
#include "enpi/config.hpp"
#include "enpi/core.hpp"
#include "enpi/csv.hpp"
#include "enpi/datagen.hpp"
#include "enpi/ensemble.hpp"
#include "enpi/eval.hpp"

namespace enpi {

struct ExperimentOutput {
    // One report per (method, alpha), methods in requested order, alphas in
    // given order.
    std::vector<ExperimentReport> reports;
    // Per-step rows for every (trial, method, alpha), in trial-major order;
    // filled only when keep_intervals is set.
    std::vector<IntervalRow> interval_rows;
    int weight_fallbacks = 0;
};

namespace detail {

struct TrialCell {
    TrialSummary summary;
    // kept only if intervals are requested
    std::vector<PredictionInterval> intervals;
    std::vector<EvalRecord> records;
};

struct TrialResult {
    // indexed [method][alpha]
    std::vector<std::vector<TrialCell>> cells;
    int weight_fallbacks = 0;
};

inline Dataset trial_dataset(const RunConfig& cfg, const Dataset* base, std::uint64_t trial_seed) {
    if (base) return *base;  // CSV data: fixed across trials
    SimConfig sim = cfg.sim;
    sim.seed = derive_seed(trial_seed, 0);
    return generate(sim);
}

inline TrialResult run_one_trial(const RunConfig& cfg, const Dataset* base,
                                 const std::vector<std::string>& methods,
                                 const std::vector<double>& alphas, int trial,
                                 bool keep_records) {
    const std::uint64_t trial_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial));
    Dataset data = trial_dataset(cfg, base, trial_seed);
    const Eigen::VectorXd y_test = data.response.tail(data.test_len);

    TrialResult res;
    res.cells.resize(methods.size());
    for (std::size_t m = 0; m < methods.size(); ++m) {
        auto& row = res.cells[m];
        row.resize(alphas.size());
        const std::string& method = methods[m];
        if (method == "enpi") {
            EnsembleState ens = fit_ensemble(data, cfg.regressor, cfg.b_tilde, cfg.phi,
                                             cfg.trim_gamma, derive_seed(trial_seed, 1));
            ResidualWindow window0 = init_residuals(ens, data);
            Eigen::MatrixXd loo_test =
                loo_prediction_matrix(ens, data.features.bottomRows(data.test_len));
            for (std::size_t a = 0; a < alphas.size(); ++a) {
                SequentialResult seq =
                    run_sequential_core(loo_test, y_test, window0, alphas[a], cfg.center);
                auto records = make_records(seq.intervals, y_test, alphas[a]);
                row[a].summary = summarize(records);
                if (keep_records) {
                    row[a].records = std::move(records);
                    row[a].intervals = std::move(seq.intervals);
                }
            }
        } else if (method == "icp" || method == "wicp") {
            const bool weighted = (method == "wicp");
            BaselinePrep prep = detail::baseline_prepare(
                data, cfg.regressor, derive_seed(trial_seed, weighted ? 3 : 2), weighted);
            res.weight_fallbacks += prep.n_weight_fallbacks;
            for (std::size_t a = 0; a < alphas.size(); ++a) {
                auto intervals = baseline_replay(prep, alphas[a]);
                auto records = make_records(intervals, y_test, alphas[a]);
                row[a].summary = summarize(records);
                if (keep_records) {
                    row[a].records = std::move(records);
                    row[a].intervals = std::move(intervals);
                }
            }
        } else {
            throw std::invalid_argument("unknown method '" + method + "'");
        }
    }
    return res;
}

}  // namespace detail

inline std::vector<std::string> methods_from(const std::string& method) {
    if (method == "all") return {"enpi", "icp", "wicp"};
    return {method};
}

inline ExperimentOutput run_experiment(const RunConfig& cfg,
                                       const std::vector<std::string>& methods,
                                       const std::vector<double>& alphas, int n_threads,
                                       bool keep_intervals) {
    if (methods.empty() || alphas.empty()) throw std::invalid_argument("empty sample");

    Dataset base;
    const Dataset* base_ptr = nullptr;
    if (!cfg.dataset_path.empty()) {
        read_dataset_csv(cfg.dataset_path, base.features, base.response);
        auto total = base.features.rows();
        auto train = static_cast<Eigen::Index>(
            std::ceil(cfg.train_fraction * static_cast<double>(total)));
        base.train_len = train;
        base.test_len = total - train;
        if (base.train_len < 2 || base.test_len < 1)
            throw std::runtime_error("insufficient data");
        base.validate();
        base_ptr = &base;
    }

    const int n_trials = cfg.n_trials;
    std::vector<detail::TrialResult> slots(static_cast<std::size_t>(n_trials));
    int threads = std::max(1, std::min(n_threads, n_trials));
    if (threads == 1) {
        for (int tr = 0; tr < n_trials; ++tr)
            slots[static_cast<std::size_t>(tr)] =
                detail::run_one_trial(cfg, base_ptr, methods, alphas, tr, keep_intervals);
    } else {
        std::atomic<int> next{0};
        std::atomic<bool> failed{false};
        std::string error_msg;
        std::mutex err_mu;
        auto worker = [&] {
            for (;;) {
                int tr = next.fetch_add(1);
                if (tr >= n_trials || failed.load()) return;
                try {
                    slots[static_cast<std::size_t>(tr)] =
                        detail::run_one_trial(cfg, base_ptr, methods, alphas, tr, keep_intervals);
                } catch (const std::exception& e) {
                    std::lock_guard<std::mutex> lk(err_mu);
                    error_msg = e.what();
                    failed.store(true);
                    return;
                }
            }
        };
        std::vector<std::thread> pool;
        for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
        worker();
        for (auto& th : pool) th.join();
        if (failed.load()) throw std::runtime_error(error_msg);
    }

    ExperimentOutput out;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        for (std::size_t a = 0; a < alphas.size(); ++a) {
            std::vector<TrialSummary> trials;
            trials.reserve(static_cast<std::size_t>(n_trials));
            for (int tr = 0; tr < n_trials; ++tr)
                trials.push_back(slots[static_cast<std::size_t>(tr)].cells[m][a].summary);
            out.reports.push_back(aggregate_trials(methods[m], alphas[a], trials));
        }
    }
    for (int tr = 0; tr < n_trials; ++tr)
        out.weight_fallbacks += slots[static_cast<std::size_t>(tr)].weight_fallbacks;
    if (keep_intervals) {
        for (int tr = 0; tr < n_trials; ++tr)
            for (std::size_t m = 0; m < methods.size(); ++m)
                for (std::size_t a = 0; a < alphas.size(); ++a) {
                    const auto& cell = slots[static_cast<std::size_t>(tr)].cells[m][a];
                    for (std::size_t i = 0; i < cell.records.size(); ++i) {
                        const EvalRecord& rec = cell.records[i];
                        IntervalRow row;
                        row.trial = tr + 1;
                        row.t = rec.t;
                        row.y_true = rec.y_true;
                        row.center = cell.intervals[i].center;
                        row.lower = rec.lower;
                        row.upper = rec.upper;
                        row.covered = rec.covered;
                        row.width = rec.width;
                        row.winkler = rec.winkler;
                        out.interval_rows.push_back(row);
                    }
                }
    }
    return out;
}

}  // namespace enpi
