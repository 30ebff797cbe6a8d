// Minimal library walkthrough: simulate an AR(1)-error linear series, run
// the ensemble method and both baselines at alpha = 0.1, print coverage and
// width for each.

#include <cstdio>

#include "enpi/enpi.hpp"

int main() {
    enpi::SimConfig sim;
    sim.kind = enpi::SimKind::multi;
    sim.T = 150;
    sim.T1 = 150;
    sim.p = 20;
    sim.rho = 0.6;
    sim.seed = 7;
    enpi::Dataset data = enpi::generate(sim);

    enpi::RegressorSpec reg;  // ridge, GCV over the default penalty grid
    const double alpha = 0.1;

    enpi::EnpiParams params;
    params.alpha = alpha;
    params.seed = 11;
    enpi::EnpiRun run = enpi::run_sequential(data, reg, params);
    const Eigen::VectorXd y_test = data.response.tail(data.test_len);
    auto enpi_records = enpi::make_records(run.seq.intervals, y_test, alpha);

    auto icp = enpi::run_icp(data, reg, alpha, 12);
    auto icp_records = enpi::make_records(icp.intervals, y_test, alpha);

    auto wicp = enpi::run_weighted_icp(data, reg, alpha, 13);
    auto wicp_records = enpi::make_records(wicp.intervals, y_test, alpha);

    std::printf("method  coverage  width\n");
    std::printf("enpi    %.3f     %.3f\n", enpi::coverage_rate(enpi_records),
                enpi::mean_width(enpi_records));
    std::printf("icp     %.3f     %.3f\n", enpi::coverage_rate(icp_records),
                enpi::mean_width(icp_records));
    std::printf("wicp    %.3f     %.3f\n", enpi::coverage_rate(wicp_records),
                enpi::mean_width(wicp_records));
    return 0;
}
