// Kernel density estimation on particle output: run a one-dimensional
// filter, smooth the final cloud with a Gaussian kernel at the scheduled
// bandwidth, and tabulate the estimate against the exact Kalman density.

#include "pfkde/pfkde.hpp"

#include <cstdio>

int main() {
    using namespace pfkde;

    LinearGaussianModel model;
    model.F = Matrix::Identity(1, 1);
    model.H = Matrix::Identity(1, 1);
    model.Q = Matrix::Identity(1, 1);
    model.R = Matrix::Identity(1, 1);
    model.mu0 = Vector::Zero(1);
    model.Sigma0 = Matrix::Identity(1, 1);
    model.validate();

    const int T = 20;
    const long long n = 5000;
    RngStream root(11);

    const auto ssm = to_state_space(model);
    const auto traj = simulate_trajectory(ssm, T, root.derive(1).seed());
    const auto run = run_filter(ssm, traj.observations, static_cast<int>(n),
                                root.derive(2).seed(), false);
    const auto beliefs = kalman_run(model, traj.observations, kalman_initial(model));
    const auto& kf = beliefs.back();

    BandwidthSchedule schedule;
    schedule.alpha = 1.0;
    schedule.beta = 1;
    schedule.dim = 1;
    const double h = bandwidth(schedule, n);
    const auto est = build_estimate(run.steps.back().resampled,
                                    make_kernel("gaussian", 1), h);
    const auto truth = kalman_density_fn(kf);

    std::printf("bandwidth h = n^{-1/4} = %.5f at n = %lld\n", h, n);
    std::printf("%10s %12s %12s %12s\n", "x", "p_hat", "kalman", "abs err");
    const double sd = std::sqrt(kf.sigma(0, 0));
    for (int k = -4; k <= 4; ++k) {
        Vector x(1);
        x(0) = kf.mu(0) + 0.75 * sd * k;
        const double p = eval_estimate_at(est, x);
        const double q = truth(x);
        std::printf("%10.4f %12.6f %12.6f %12.2e\n", x(0), p, q, std::abs(p - q));
    }
    return 0;
}
