// Command-line front end.
//
//   enpi generate --config gen.cfg [--out data.csv] [--seed N]
//   enpi run      --config run.cfg [--out intervals.csv] [--seed N] [--trials N]
//   enpi sweep    --config run.cfg [--out report.csv] [--seed N] [--trials N]
//   enpi eval     INPUT.csv [--alpha A] [--out report.csv]
//
// Configs are flat key=value files (see README). ENPI_THREADS bounds
// parallel trial execution. All outputs are deterministic functions of the
// config content; errors exit nonzero with a single-line reason on stderr.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "enpi/enpi.hpp"

namespace {

int env_threads() {
    const char* v = std::getenv("ENPI_THREADS");
    if (!v) return 1;
    char* end = nullptr;
    long n = std::strtol(v, &end, 10);
    if (end == v || *end != '\0' || n < 1) return 1;
    return static_cast<int>(n);
}

std::string require_out(const std::string& flag_out, const std::string& cfg_out) {
    if (!flag_out.empty()) return flag_out;
    if (!cfg_out.empty()) return cfg_out;
    throw std::runtime_error("no output path (set out= in the config or pass --out)");
}

void apply_overrides(enpi::RunConfig& cfg, bool seed_set, std::uint64_t seed, int trials) {
    if (seed_set) cfg.seed = seed;
    if (trials > 0) cfg.n_trials = trials;
}

std::string summary_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

int cmd_generate(const std::string& config_path, const std::string& out_flag, bool seed_set,
                 std::uint64_t seed) {
    enpi::GenerateConfig cfg = enpi::parse_generate_config(enpi::parse_kv_file(config_path));
    if (seed_set) cfg.sim.seed = seed;
    std::string out = require_out(out_flag, cfg.out);
    enpi::Dataset data = enpi::generate(cfg.sim);
    enpi::write_dataset_csv(out, data.features, data.response);
    std::printf("wrote %s rows=%lld cols=%lld\n", out.c_str(),
                static_cast<long long>(data.features.rows()),
                static_cast<long long>(data.features.cols() + 1));
    return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_flag, bool seed_set,
            std::uint64_t seed, int trials) {
    enpi::RunConfig cfg = enpi::parse_run_config(enpi::parse_kv_file(config_path), false);
    apply_overrides(cfg, seed_set, seed, trials);
    if (cfg.method == "all")
        throw std::runtime_error("run takes a single method; use sweep for comparisons");
    std::string out = require_out(out_flag, cfg.out);

    enpi::ExperimentOutput res = enpi::run_experiment(cfg, {cfg.method}, {cfg.alpha},
                                                      env_threads(), true);
    enpi::write_intervals_csv(out, res.interval_rows);
    const enpi::ExperimentReport& rep = res.reports.front();
    std::printf("method=%s alpha=%s trials=%d coverage=%s width=%s winkler=%s",
                rep.method.c_str(), summary_value(rep.alpha).c_str(), rep.n_trials,
                summary_value(rep.coverage_mean).c_str(), summary_value(rep.width_mean).c_str(),
                summary_value(rep.winkler_mean).c_str());
    if (res.weight_fallbacks > 0) std::printf(" weight_fallbacks=%d", res.weight_fallbacks);
    std::printf("\n");
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_flag, bool seed_set,
              std::uint64_t seed, int trials) {
    enpi::RunConfig cfg = enpi::parse_run_config(enpi::parse_kv_file(config_path), true);
    apply_overrides(cfg, seed_set, seed, trials);
    std::string out = require_out(out_flag, cfg.out);
    std::vector<double> alphas = cfg.alpha_grid.empty() ? enpi::default_alpha_grid()
                                                        : cfg.alpha_grid;

    enpi::ExperimentOutput res = enpi::run_experiment(cfg, enpi::methods_from(cfg.method),
                                                      alphas, env_threads(), false);
    enpi::write_report_csv(out, res.reports);
    std::printf("wrote %s rows=%zu", out.c_str(), res.reports.size());
    if (res.weight_fallbacks > 0) std::printf(" weight_fallbacks=%d", res.weight_fallbacks);
    std::printf("\n");
    return 0;
}

int cmd_eval(const std::string& input, double alpha, const std::string& out_flag) {
    auto rows = enpi::read_intervals_csv(input);
    std::map<int, std::vector<enpi::EvalRecord>> by_trial;
    for (const auto& r : rows) {
        if (r.lower > r.upper)
            throw std::runtime_error("row with lower > upper at t=" + std::to_string(r.t));
        by_trial[r.trial].push_back(enpi::make_record(r.t, r.y_true, r.lower, r.upper, alpha));
    }
    std::vector<enpi::TrialSummary> trials;
    for (const auto& [trial, records] : by_trial) trials.push_back(enpi::summarize(records));
    enpi::ExperimentReport rep = enpi::aggregate_trials("csv", alpha, trials);
    if (!out_flag.empty()) {
        enpi::write_report_csv(out_flag, {rep});
        std::printf("wrote %s rows=1\n", out_flag.c_str());
    } else {
        std::printf("method=%s alpha=%s trials=%d coverage=%s width=%s winkler=%s\n",
                    rep.method.c_str(), summary_value(rep.alpha).c_str(), rep.n_trials,
                    summary_value(rep.coverage_mean).c_str(),
                    summary_value(rep.width_mean).c_str(),
                    summary_value(rep.winkler_mean).c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential conformal prediction intervals for time series"};
    app.require_subcommand(1);

    std::string config_path, out_path, eval_input;
    std::uint64_t seed = 0;
    int trials = 0;
    double eval_alpha = 0.1;

    auto* gen = app.add_subcommand("generate", "Write a simulated dataset as CSV");
    gen->add_option("--config", config_path, "Config file")->required();
    auto* gen_out = gen->add_option("--out", out_path, "Output CSV path");
    auto* gen_seed = gen->add_option("--seed", seed, "Override config seed");

    auto* run = app.add_subcommand("run", "Run one method, write per-step intervals");
    run->add_option("--config", config_path, "Config file")->required();
    run->add_option("--out", out_path, "Output CSV path");
    auto* run_seed = run->add_option("--seed", seed, "Override config seed");
    run->add_option("--trials", trials, "Override config n_trials");

    auto* sweep = app.add_subcommand("sweep", "Run methods over an alpha grid, write a report");
    sweep->add_option("--config", config_path, "Config file")->required();
    sweep->add_option("--out", out_path, "Output CSV path");
    auto* sweep_seed = sweep->add_option("--seed", seed, "Override config seed");
    sweep->add_option("--trials", trials, "Override config n_trials");

    auto* ev = app.add_subcommand("eval", "Score an intervals CSV");
    ev->add_option("input", eval_input, "Intervals CSV (needs t,y_true,lower,upper)")->required();
    ev->add_option("--alpha", eval_alpha, "Miscoverage level for Winkler scores");
    ev->add_option("--out", out_path, "Report CSV path (default: print summary)");

    (void)gen_out;
    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_generate(config_path, out_path, gen_seed->count() > 0, seed);
        if (run->parsed())
            return cmd_run(config_path, out_path, run_seed->count() > 0, seed, trials);
        if (sweep->parsed())
            return cmd_sweep(config_path, out_path, sweep_seed->count() > 0, seed, trials);
        if (ev->parsed()) return cmd_eval(eval_input, eval_alpha, out_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
