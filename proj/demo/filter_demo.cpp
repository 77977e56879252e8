// Minimal tour of the filtering layer: simulate a bivariate linear-Gaussian
// process, run the bootstrap particle filter, and compare the final moments
// against the exact Kalman posterior.

#include "pfkde/pfkde.hpp"

#include <cstdio>

int main() {
    using namespace pfkde;

    LinearGaussianModel model;
    model.F = Matrix::Identity(2, 2);
    model.H = 2.0 * Matrix::Identity(2, 2);
    model.Q = 2.0 * Matrix::Identity(2, 2);
    model.R = Matrix::Identity(2, 2);
    model.mu0 = Vector::Zero(2);
    model.Sigma0 = Matrix::Identity(2, 2);
    model.validate();

    const int T = 50;
    const int n = 2000;
    RngStream root(7);

    const auto ssm = to_state_space(model);
    const auto traj = simulate_trajectory(ssm, T, root.derive(1).seed());
    const auto run = run_filter(ssm, traj.observations, n, root.derive(2).seed(), false);
    const auto beliefs = kalman_run(model, traj.observations, kalman_initial(model));

    const Vector mu_hat = cloud_mean(run.steps.back().resampled);
    const Matrix sig_hat = cloud_covariance(run.steps.back().resampled);
    const auto& kf = beliefs.back();

    std::printf("T = %d, n = %d particles\n", T, n);
    std::printf("particle mean   (%+9.4f, %+9.4f)\n", mu_hat(0), mu_hat(1));
    std::printf("Kalman mean     (%+9.4f, %+9.4f)\n", kf.mu(0), kf.mu(1));
    std::printf("particle cov    [%7.4f %7.4f; %7.4f %7.4f]\n", sig_hat(0, 0),
                sig_hat(0, 1), sig_hat(1, 0), sig_hat(1, 1));
    std::printf("Kalman cov      [%7.4f %7.4f; %7.4f %7.4f]\n", kf.sigma(0, 0),
                kf.sigma(0, 1), kf.sigma(1, 0), kf.sigma(1, 1));

    double mean_weight = 0.0;
    for (const auto& step : run.steps) mean_weight += step.mean_unnorm_weight;
    std::printf("average normalizer estimate over %zu steps: %.6f\n",
                run.steps.size(), mean_weight / static_cast<double>(run.steps.size()));
    return 0;
}
