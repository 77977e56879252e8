#include "pfkde/pfkde.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

using namespace pfkde;

namespace {

LinearGaussianModel unit_model_1d() {
    LinearGaussianModel m;
    m.F = Matrix::Identity(1, 1);
    m.H = Matrix::Identity(1, 1);
    m.Q = Matrix::Identity(1, 1);
    m.R = Matrix::Identity(1, 1);
    m.mu0 = Vector::Zero(1);
    m.Sigma0 = Matrix::Identity(1, 1);
    return m;
}

ParticleCloud weighted_cloud(std::initializer_list<double> xs,
                             std::initializer_list<double> ws) {
    ParticleCloud c;
    c.particles.resize(static_cast<int>(xs.size()), 1);
    int i = 0;
    for (double x : xs) c.particles(i++, 0) = x;
    c.uniform = false;
    c.weights.resize(static_cast<int>(ws.size()));
    i = 0;
    for (double w : ws) c.weights(i++) = w;
    c.time = 1;
    return c;
}

} // namespace

TEST_CASE("init_particles reproduces the prior", "[pf_core]") {
    auto m = unit_model_1d();
    m.mu0(0) = -1.0;
    m.Sigma0(0, 0) = 9.0;
    const auto ssm = to_state_space(m);
    RngStream rng(3);
    const auto cloud = init_particles(ssm, 50000, rng);
    REQUIRE(cloud.size() == 50000);
    CHECK(cloud.uniform);
    CHECK(cloud.time == 0);
    const Vector mean = cloud_mean(cloud);
    const Matrix cov = cloud_covariance(cloud);
    CHECK_THAT(mean(0), Catch::Matchers::WithinAbs(-1.0, 5.0 * 3.0 / std::sqrt(50000.0)));
    CHECK_THAT(cov(0, 0), Catch::Matchers::WithinAbs(9.0, 5.0 * 9.0 * std::sqrt(2.0 / 50000.0)));
}

TEST_CASE("predict_step applies the deterministic part of the transition", "[pf_core]") {
    auto m = unit_model_1d();
    m.F(0, 0) = 2.0;
    m.Q(0, 0) = 0.0; // noiseless transition, prediction is exactly x -> 2x
    const auto ssm = to_state_space(m);
    RngStream rng(4);
    auto cloud = init_particles(ssm, 64, rng);
    const auto pred = predict_step(ssm, cloud, 1, rng);
    CHECK(pred.time == 1);
    for (int i = 0; i < 64; ++i) {
        CHECK_THAT(pred.particles(i, 0),
                   Catch::Matchers::WithinAbs(2.0 * cloud.particles(i, 0), 1e-14));
    }
}

TEST_CASE("weight_step computes normalized likelihood weights", "[pf_core]") {
    const auto ssm = to_state_space(unit_model_1d());
    auto cloud = weighted_cloud({-1.0, 0.0, 0.5, 2.0}, {0.25, 0.25, 0.25, 0.25});
    cloud.uniform = true;
    cloud.weights.resize(0);
    Vector y(1);
    y(0) = 0.5;

    const auto [weighted, mean_unnorm] = weight_step(ssm, cloud, y);
    REQUIRE_FALSE(weighted.uniform);
    REQUIRE(weighted.weights.size() == 4);

    // Direct computation of g(y|x_i), normalized by hand.
    double g[4], total = 0.0;
    const double xs[4] = {-1.0, 0.0, 0.5, 2.0};
    for (int i = 0; i < 4; ++i) {
        const double z = y(0) - xs[i];
        g[i] = std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
        total += g[i];
    }
    for (int i = 0; i < 4; ++i) {
        CHECK_THAT(weighted.weight(i), Catch::Matchers::WithinAbs(g[i] / total, 1e-14));
    }
    CHECK_THAT(weighted.weights.sum(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(mean_unnorm, Catch::Matchers::WithinAbs(total / 4.0, 1e-14));
}

TEST_CASE("weight_step throws when every weight vanishes", "[pf_core]") {
    StateSpaceModel ssm;
    ssm.dim_x = 1;
    ssm.dim_y = 1;
    ssm.observation_logdensity = [](int, const Vector&, const Vector&) {
        return -std::numeric_limits<double>::infinity();
    };
    ParticleCloud cloud;
    cloud.particles.resize(2, 1);
    cloud.particles << 0.0, 1.0;
    cloud.uniform = true;
    Vector y(1);
    y(0) = 0.0;
    CHECK_THROWS_AS(weight_step(ssm, cloud, y), weight_degeneracy_error);
}

TEST_CASE("resample_multinomial copies a point mass exactly", "[pf_core]") {
    auto cloud = weighted_cloud({-3.0, 7.0, 1.0}, {0.0, 1.0, 0.0});
    RngStream rng(8);
    const auto out = resample_multinomial(cloud, rng);
    REQUIRE(out.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(out.particles(i, 0) == 7.0);
}

TEST_CASE("resample_multinomial draws categories with the right frequencies",
          "[pf_core]") {
    // Three category values spread over n particles so one resampling pass
    // yields n multinomial draws; occupancy counts should match n * w_k
    // within 5 standard deviations.
    const int n = 99999;
    const double probs[3] = {0.2, 0.3, 0.5};
    ParticleCloud cloud;
    cloud.particles.resize(n, 1);
    cloud.uniform = false;
    cloud.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        cloud.particles(i, 0) = static_cast<double>(i % 3);
        cloud.weights(i) = probs[i % 3] / (n / 3);
    }
    cloud.time = 0;

    RngStream rng(12);
    const auto out = resample_multinomial(cloud, rng);
    std::vector<int> counts(3, 0);
    for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(out.particles(i, 0))]++;
    for (int k = 0; k < 3; ++k) {
        const double expect = n * probs[k];
        const double sd = std::sqrt(n * probs[k] * (1.0 - probs[k]));
        CHECK(std::abs(counts[static_cast<std::size_t>(k)] - expect) <= 5.0 * sd);
    }
}

TEST_CASE("run_filter is deterministic in the seed", "[pf_core]") {
    const auto m = unit_model_1d();
    const auto ssm = to_state_space(m);
    const auto traj = simulate_trajectory(ssm, 10, 21);
    const auto a = run_filter(ssm, traj.observations, 200, 99, false);
    const auto b = run_filter(ssm, traj.observations, 200, 99, false);
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
        CHECK((a.steps[k].resampled.particles - b.steps[k].resampled.particles)
                  .cwiseAbs()
                  .maxCoeff() == 0.0);
        CHECK(a.steps[k].mean_unnorm_weight == b.steps[k].mean_unnorm_weight);
    }
    const auto c = run_filter(ssm, traj.observations, 200, 100, false);
    CHECK((a.steps.back().resampled.particles - c.steps.back().resampled.particles)
              .cwiseAbs()
              .maxCoeff() > 0.0);
}

TEST_CASE("mean unnormalized weight estimates the innovation likelihood", "[pf_core]") {
    // One assimilation step with a huge cloud: the mean unnormalized weight
    // is a plug-in estimator of the normalizer, which the Kalman filter gives
    // exactly as the innovation likelihood.
    const auto m = unit_model_1d();
    const auto ssm = to_state_space(m);
    const auto traj = simulate_trajectory(ssm, 1, 33);
    const auto run = run_filter(ssm, traj.observations, 200000, 77, false);

    const auto beliefs = kalman_run(m, traj.observations, kalman_initial(m));
    auto [b1, loglik] = kalman_step(m, kalman_initial(m), traj.observations[0]);
    const double exact = std::exp(loglik);
    CHECK_THAT(run.steps[0].mean_unnorm_weight,
               Catch::Matchers::WithinRel(exact, 0.02));
    CHECK(beliefs.size() == 2);
}

TEST_CASE("empirical_charfn is one at the origin and bounded by one", "[pf_core]") {
    const auto ssm = to_state_space(unit_model_1d());
    RngStream rng(5);
    const auto cloud = init_particles(ssm, 500, rng);
    Vector zero = Vector::Zero(1);
    const auto at0 = empirical_charfn(cloud, zero);
    CHECK_THAT(at0.real(), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK(at0.imag() == 0.0);
    for (int k = 1; k <= 30; ++k) {
        Vector omega(1);
        omega(0) = 0.4 * k;
        CHECK(std::abs(empirical_charfn(cloud, omega)) <= 1.0 + 1e-12);
    }
}

TEST_CASE("empirical_integral averages with the cloud weights", "[pf_core]") {
    auto cloud = weighted_cloud({1.0, 2.0, 4.0}, {0.5, 0.25, 0.25});
    const double mean = empirical_integral(cloud, [](const Vector& x) { return x(0); });
    CHECK_THAT(mean, Catch::Matchers::WithinAbs(2.0, 1e-15));
}

TEST_CASE("filter run CSV carries all three stages", "[pf_core]") {
    const auto ssm = to_state_space(unit_model_1d());
    const auto traj = simulate_trajectory(ssm, 3, 2);
    const auto run = run_filter(ssm, traj.observations, 10, 6, true);
    std::ostringstream os;
    write_filter_run_csv(run, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,i,x_1,w_i,stage");
    std::set<std::string> stages;
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        stages.insert(line.substr(line.rfind(',') + 1));
    }
    // 10 initial rows plus 3 stages x 3 steps x 10 particles.
    CHECK(rows == 10 + 3 * 3 * 10);
    CHECK(stages == std::set<std::string>{"pred", "weighted", "resampled"});
}

TEST_CASE("filter summary CSV has one row per time point", "[pf_core]") {
    const auto ssm = to_state_space(unit_model_1d());
    const auto traj = simulate_trajectory(ssm, 4, 2);
    const auto run = run_filter(ssm, traj.observations, 25, 6, false);
    std::ostringstream os;
    write_filter_summary_csv(run, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "t,mean_1,cov_1_1,mean_unnorm_weight");
    int rows = 0;
    bool first_blank = false;
    while (std::getline(is, line)) {
        if (rows == 0) first_blank = line.back() == ',';
        ++rows;
    }
    CHECK(rows == 5);
    CHECK(first_blank); // no normalizer at time zero
}
