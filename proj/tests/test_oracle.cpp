#include "pfkde/pfkde.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace pfkde;

namespace {

LinearGaussianModel bivariate_model() {
    LinearGaussianModel m;
    m.F = Matrix::Identity(2, 2);
    m.H = 2.0 * Matrix::Identity(2, 2);
    m.Q = 2.0 * Matrix::Identity(2, 2);
    m.R = Matrix::Identity(2, 2);
    m.mu0 = Vector::Zero(2);
    m.Sigma0 = Matrix::Identity(2, 2);
    return m;
}

LinearGaussianModel scalar_model(double f, double q, double h, double r) {
    LinearGaussianModel m;
    m.F = f * Matrix::Identity(1, 1);
    m.Q = q * Matrix::Identity(1, 1);
    m.H = h * Matrix::Identity(1, 1);
    m.R = r * Matrix::Identity(1, 1);
    m.mu0 = Vector::Zero(1);
    m.Sigma0 = Matrix::Identity(1, 1);
    return m;
}

} // namespace

TEST_CASE("Kalman covariance reaches the known fixed point", "[oracle]") {
    const auto m = bivariate_model();
    KalmanBelief b = kalman_initial(m);
    Vector y = Vector::Zero(2);
    for (int t = 1; t <= 60; ++t) {
        b = kalman_step(m, b, y).first;
    }
    const double fixed_point = 0.22474487139158905; // (-2 + sqrt(6)) / 2
    CHECK_THAT(b.sigma(0, 0), Catch::Matchers::WithinAbs(fixed_point, 5e-5));
    CHECK_THAT(b.sigma(1, 1), Catch::Matchers::WithinAbs(fixed_point, 5e-5));
    CHECK_THAT(b.sigma(0, 1), Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("Kalman covariance sequence ignores the observations", "[oracle]") {
    const auto m = bivariate_model();
    KalmanBelief a = kalman_initial(m);
    KalmanBelief b = kalman_initial(m);
    RngStream rng(31);
    for (int t = 1; t <= 10; ++t) {
        Vector y(2), z(2);
        y << rng.normal(), rng.normal();
        z << 10.0 * rng.normal(), -3.0;
        a = kalman_step(m, a, y).first;
        b = kalman_step(m, b, z).first;
        CHECK((a.sigma - b.sigma).cwiseAbs().maxCoeff() <= 1e-14);
    }
}

TEST_CASE("one Kalman step against hand-derived numbers", "[oracle]") {
    // F = H = Q = R = Sigma0 = 1, mu0 = 0, y = 2:
    // prediction N(0, 2), innovation variance 3, gain 2/3,
    // posterior N(4/3, 2/3), log-likelihood log N(2; 0, 3).
    const auto m = scalar_model(1.0, 1.0, 1.0, 1.0);
    Vector y(1);
    y(0) = 2.0;
    const auto [post, loglik] = kalman_step(m, kalman_initial(m), y);
    CHECK_THAT(post.mu(0), Catch::Matchers::WithinAbs(4.0 / 3.0, 1e-13));
    CHECK_THAT(post.sigma(0, 0), Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-13));
    const double expected =
        -0.5 * (std::log(2.0 * 3.14159265358979323846 * 3.0) + 4.0 / 3.0);
    CHECK_THAT(loglik, Catch::Matchers::WithinAbs(expected, 1e-13));
    CHECK(post.time == 1);
}

TEST_CASE("kalman_run returns the prior at index zero", "[oracle]") {
    const auto m = scalar_model(1.0, 1.0, 1.0, 1.0);
    const auto ssm = to_state_space(m);
    const auto traj = simulate_trajectory(ssm, 7, 2);
    const auto beliefs = kalman_run(m, traj.observations, kalman_initial(m));
    REQUIRE(beliefs.size() == 8);
    CHECK(beliefs[0].time == 0);
    CHECK(beliefs[0].mu(0) == 0.0);
    CHECK(beliefs[7].time == 7);
}

TEST_CASE("kalman_step rejects a singular innovation covariance", "[oracle]") {
    auto m = scalar_model(1.0, 1.0, 0.0, 0.0); // H = 0, R = 0 gives S = 0
    Vector y(1);
    y(0) = 0.0;
    CHECK_THROWS_AS(kalman_step(m, kalman_initial(m), y), numerical_error);
}

TEST_CASE("Kalman density integrates to one and matches the Gaussian formula",
          "[oracle]") {
    KalmanBelief b;
    b.time = 0;
    b.mu = Vector::Zero(1);
    b.mu(0) = 0.7;
    b.sigma = Matrix::Identity(1, 1);
    b.sigma(0, 0) = 2.25;
    const auto f = kalman_density_fn(b);

    Vector x(1);
    x(0) = 1.5;
    const double z = (1.5 - 0.7) / 1.5;
    const double direct =
        std::exp(-0.5 * z * z) / (1.5 * std::sqrt(2.0 * 3.14159265358979323846));
    CHECK_THAT(f(x), Catch::Matchers::WithinAbs(direct, 1e-14));

    double mass = 0.0;
    const int m = 6001;
    const double lo = 0.7 - 15.0, hi = 0.7 + 15.0, dx = (hi - lo) / (m - 1);
    for (int k = 0; k < m; ++k) {
        Vector pt(1);
        pt(0) = lo + k * dx;
        mass += ((k == 0 || k == m - 1) ? 0.5 : 1.0) * f(pt) * dx;
    }
    CHECK_THAT(mass, Catch::Matchers::WithinAbs(1.0, 1e-8));
}

TEST_CASE("Kalman density derivative agrees with finite differences", "[oracle]") {
    KalmanBelief b;
    b.time = 0;
    b.mu = Vector::Zero(1);
    b.sigma = Matrix::Identity(1, 1);
    b.sigma(0, 0) = 0.64;
    const auto f = kalman_density_fn(b);
    const auto df = kalman_density_deriv_fn(b, 0);
    const double eps = 1e-6;
    for (double x0 : {-1.1, 0.0, 0.4, 2.0}) {
        Vector xp(1), xm(1), x(1);
        x(0) = x0;
        xp(0) = x0 + eps;
        xm(0) = x0 - eps;
        CHECK_THAT(df(x),
                   Catch::Matchers::WithinAbs((f(xp) - f(xm)) / (2.0 * eps), 1e-6));
    }
}

TEST_CASE("kalman JSON carries time, mean, and covariance", "[oracle]") {
    KalmanBelief b;
    b.time = 3;
    b.mu = Vector::Zero(2);
    b.mu << 1.0, -2.0;
    b.sigma = Matrix::Identity(2, 2);
    const auto j = kalman_to_json(b);
    CHECK(j.at("t") == 3);
    CHECK(j.at("mu").size() == 2);
    CHECK(j.at("sigma").size() == 2);
    CHECK(j.at("mu")[1] == -2.0);
}

TEST_CASE("grid density helpers: nodes, mass, moments, charfn", "[oracle]") {
    const auto grid = make_grid_density(
        [](double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * 3.14159265358979323846); },
        -10.0, 10.0, 2048);
    CHECK_THAT(grid_mass(grid), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(grid_mean(grid), Catch::Matchers::WithinAbs(0.0, 1e-10));
    CHECK_THAT(grid_variance(grid), Catch::Matchers::WithinAbs(1.0, 1e-8));

    const auto at0 = grid_charfn(grid, 0.0);
    CHECK_THAT(at0.real(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    const auto at1 = grid_charfn(grid, 1.0);
    CHECK_THAT(at1.real(), Catch::Matchers::WithinAbs(std::exp(-0.5), 1e-6));
    CHECK_THAT(at1.imag(), Catch::Matchers::WithinAbs(0.0, 1e-10));

    CHECK_THAT(grid.spacing(), Catch::Matchers::WithinAbs(20.0 / 2047.0, 1e-15));
    CHECK(grid.node(0) == -10.0);
    CHECK(grid.node(2047) == 10.0);
}

TEST_CASE("grid filter matches the Kalman oracle step by step", "[oracle]") {
    const auto m = scalar_model(1.0, 2.0, 2.0, 1.0);
    const auto ssm = to_state_space(m);
    const auto traj = simulate_trajectory(ssm, 20, 19);
    const auto beliefs = kalman_run(m, traj.observations, kalman_initial(m));

    const auto [lo, hi] = kalman_envelope(beliefs);
    const auto initial = make_grid_density(
        [&](double x) {
            return -0.5 * x * x - 0.5 * std::log(2.0 * 3.14159265358979323846);
        },
        lo, hi, 2048);
    const auto steps = grid_filter_run(ssm, traj.observations, initial);
    REQUIRE(steps.size() == 20);

    double worst_ise = 0.0, worst_norm = 0.0;
    double loglik_acc = 0.0;
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const auto f = kalman_density_fn(beliefs[t + 1]);
        double ise_value = 0.0;
        const auto& g = steps[t].posterior;
        for (int k = 0; k < g.m; ++k) {
            Vector x(1);
            x(0) = g.node(k);
            const double diff = g.values[static_cast<std::size_t>(k)] - f(x);
            ise_value += g.trapezoid_weight(k) * diff * diff;
        }
        worst_ise = std::max(worst_ise, ise_value);

        const auto [b, loglik] = kalman_step(m, beliefs[t], traj.observations[t]);
        worst_norm = std::max(worst_norm,
                              std::abs(steps[t].normalizer - std::exp(loglik)));
        loglik_acc += loglik;
    }
    CHECK(worst_ise <= 1e-6);
    CHECK(worst_norm <= 1e-6);
    CHECK(std::isfinite(loglik_acc));
}

TEST_CASE("grid filter prediction has unit mass", "[oracle]") {
    const auto m = scalar_model(1.0, 1.0, 1.0, 1.0);
    const auto ssm = to_state_space(m);
    const auto traj = simulate_trajectory(ssm, 5, 8);
    const auto beliefs = kalman_run(m, traj.observations, kalman_initial(m));
    const auto [lo, hi] = kalman_envelope(beliefs);
    const auto initial = make_grid_density(
        [&](double x) {
            return -0.5 * x * x - 0.5 * std::log(2.0 * 3.14159265358979323846);
        },
        lo, hi, 1024);
    const auto steps = grid_filter_run(ssm, traj.observations, initial);
    for (const auto& s : steps) {
        CHECK_THAT(grid_mass(s.prediction), Catch::Matchers::WithinAbs(1.0, 1e-6));
        CHECK_THAT(grid_mass(s.posterior), Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("grid filter requires a transition logdensity and one dimension",
          "[oracle]") {
    const auto m = scalar_model(1.0, 1.0, 1.0, 1.0);
    auto ssm = to_state_space(m);
    ssm.transition_logdensity = nullptr;
    GridDensity g;
    g.lo = -1.0;
    g.hi = 1.0;
    g.m = 8;
    g.values.assign(8, 0.5);
    Vector y(1);
    y(0) = 0.0;
    CHECK_THROWS_AS(grid_filter_step(ssm, g, 1, y), std::invalid_argument);

    auto ssm2 = to_state_space(bivariate_model());
    Vector y2 = Vector::Zero(2);
    CHECK_THROWS_AS(grid_filter_step(ssm2, g, 1, y2), std::invalid_argument);
}

TEST_CASE("grid CSV prints node and value columns", "[oracle]") {
    GridDensity g;
    g.lo = 0.0;
    g.hi = 1.0;
    g.m = 2;
    g.values = {0.25, 0.75};
    std::ostringstream os;
    write_grid_csv(g, os);
    CHECK(os.str() == "x,p\n0,0.25\n1,0.75\n");
}

TEST_CASE("kalman_envelope covers every posterior", "[oracle]") {
    const auto m = scalar_model(1.0, 1.0, 1.0, 1.0);
    const auto ssm = to_state_space(m);
    const auto traj = simulate_trajectory(ssm, 15, 4);
    const auto beliefs = kalman_run(m, traj.observations, kalman_initial(m));
    const auto [lo, hi] = kalman_envelope(beliefs);
    for (const auto& b : beliefs) {
        const double sd = std::sqrt(b.sigma(0, 0));
        CHECK(b.mu(0) - 10.0 * sd >= lo - 1e-12);
        CHECK(b.mu(0) + 10.0 * sd <= hi + 1e-12);
    }
}
