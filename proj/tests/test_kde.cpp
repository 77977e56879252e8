#include "pfkde/pfkde.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

using namespace pfkde;

namespace {

ParticleCloud cloud_from(std::initializer_list<double> xs) {
    ParticleCloud c;
    c.particles.resize(static_cast<int>(xs.size()), 1);
    int i = 0;
    for (double x : xs) c.particles(i++, 0) = x;
    c.uniform = true;
    c.time = 0;
    return c;
}

ParticleCloud normal_cloud(int n, std::uint64_t seed) {
    ParticleCloud c;
    c.particles.resize(n, 1);
    RngStream rng(seed);
    for (int i = 0; i < n; ++i) c.particles(i, 0) = rng.normal();
    c.uniform = true;
    c.time = 0;
    return c;
}

double standard_normal(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

// Fourth-order-style signed kernel 0.5 (3 - u^2) phi(u): integrates to one,
// symmetric, negative beyond |u| = sqrt(3).
Kernel signed_kernel() {
    Kernel k = gaussian_kernel(1);
    k.name = "signed";
    k.evaluate = [](const Vector& u) {
        return 0.5 * (3.0 - u(0) * u(0)) * standard_normal(u(0));
    };
    k.fourier = [](const Vector& w) {
        const double s2 = w(0) * w(0);
        return (1.0 + 0.5 * s2) * std::exp(-0.5 * s2);
    };
    return k;
}

} // namespace

TEST_CASE("bandwidth schedule follows alpha n^{-1/(2 beta + d + 2m)}", "[kde]") {
    BandwidthSchedule s;
    s.alpha = 1.0;
    s.beta = 1;
    s.dim = 1;
    s.deriv_order = 0;
    CHECK_THAT(bandwidth(s, 1000), Catch::Matchers::WithinAbs(0.1, 1e-12));

    s.deriv_order = 1;
    CHECK_THAT(bandwidth(s, 100000), Catch::Matchers::WithinAbs(0.1, 1e-12));

    s.alpha = 2.0;
    s.deriv_order = 0;
    CHECK_THAT(bandwidth(s, 8), Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("build_estimate validates its inputs", "[kde]") {
    const auto cloud = cloud_from({0.0, 1.0});
    CHECK_THROWS_AS(build_estimate(cloud, gaussian_kernel(1), 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(build_estimate(cloud, gaussian_kernel(2), 0.5),
                    std::invalid_argument);
}

TEST_CASE("estimate at a point equals the hand-computed mixture", "[kde]") {
    const auto est = build_estimate(cloud_from({-1.0, 1.0}), gaussian_kernel(1), 1.0);
    Vector x = Vector::Zero(1);
    // (1/2)(phi(1) + phi(-1)) = phi(1)
    CHECK_THAT(eval_estimate_at(est, x),
               Catch::Matchers::WithinAbs(standard_normal(1.0), 1e-15));

    // Scaling: h = 2 halves the argument and the prefactor.
    const auto est2 = build_estimate(cloud_from({-1.0, 1.0}), gaussian_kernel(1), 2.0);
    CHECK_THAT(eval_estimate_at(est2, x),
               Catch::Matchers::WithinAbs(0.5 * standard_normal(0.5), 1e-15));
}

TEST_CASE("derivative estimate agrees with finite differences", "[kde]") {
    const auto cloud = normal_cloud(300, 44);
    for (const char* name : {"gaussian", "epanechnikov"}) {
        const auto est = build_estimate(cloud, make_kernel(name, 1), 0.4);
        const double eps = 1e-6;
        for (double x0 : {-0.73, 0.12, 0.9}) {
            Vector xp(1), xm(1), x(1);
            x(0) = x0;
            xp(0) = x0 + eps;
            xm(0) = x0 - eps;
            const double fd =
                (eval_estimate_at(est, xp) - eval_estimate_at(est, xm)) / (2.0 * eps);
            const double deriv = eval_derivative_estimate_at(est, {1}, x);
            CHECK_THAT(deriv, Catch::Matchers::WithinAbs(fd, 1e-5));
        }
    }
}

TEST_CASE("KDE of a large normal sample is close to the truth", "[kde]") {
    const auto cloud = normal_cloud(4000, 7);
    BandwidthSchedule s;
    s.dim = 1;
    const auto est = build_estimate(cloud, gaussian_kernel(1), bandwidth(s, 4000));
    double ise_value = 0.0;
    const int m = 400;
    const double lo = -6.0, hi = 6.0, dx = (hi - lo) / (m - 1);
    for (int k = 0; k < m; ++k) {
        Vector x(1);
        x(0) = lo + k * dx;
        const double diff = eval_estimate_at(est, x) - standard_normal(x(0));
        ise_value += (k == 0 || k == m - 1 ? 0.5 : 1.0) * diff * diff * dx;
    }
    CHECK(ise_value < 0.005);
}

TEST_CASE("positive part clips negative values and never renormalizes", "[kde]") {
    // Two far-apart points under the signed kernel: midway between them the
    // negative lobes overlap and the raw estimate dips below zero.
    const auto est = build_estimate(cloud_from({-2.2, 2.2}), signed_kernel(), 1.0);
    std::vector<Vector> grid;
    for (int k = -30; k <= 30; ++k) {
        Vector x(1);
        x(0) = 0.2 * k;
        grid.push_back(x);
    }
    const auto raw = eval_estimate(est, grid);
    const auto plus = eval_positive_part(est, grid);
    bool saw_negative = false;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (raw[k] < 0.0) saw_negative = true;
        CHECK(plus[k] == std::max(0.0, raw[k]));
    }
    CHECK(saw_negative);
}

TEST_CASE("positive part never increases the integrated squared error", "[kde]") {
    // Against a nonnegative truth, clipping at zero can only move the
    // estimate toward it; checked across independent replications.
    const double lo = -8.0, hi = 8.0;
    const int m = 600;
    const double dx = (hi - lo) / (m - 1);
    for (int rep = 0; rep < 20; ++rep) {
        const auto cloud = normal_cloud(80, 1000 + static_cast<std::uint64_t>(rep));
        const auto est = build_estimate(cloud, signed_kernel(), 0.35);
        double ise_raw = 0.0, ise_plus = 0.0;
        for (int k = 0; k < m; ++k) {
            Vector x(1);
            x(0) = lo + k * dx;
            const double p = eval_estimate_at(est, x);
            const double f = standard_normal(x(0));
            const double w = (k == 0 || k == m - 1) ? 0.5 : 1.0;
            ise_raw += w * (p - f) * (p - f) * dx;
            const double pp = std::max(0.0, p);
            ise_plus += w * (pp - f) * (pp - f) * dx;
        }
        CHECK(ise_plus <= ise_raw + 1e-15);
    }
}

TEST_CASE("estimate characteristic function factorizes", "[kde]") {
    const auto cloud = normal_cloud(200, 9);
    const auto est = build_estimate(cloud, gaussian_kernel(1), 0.5);
    Vector zero = Vector::Zero(1);
    CHECK_THAT(std::abs(estimate_charfn(est, zero)), Catch::Matchers::WithinAbs(1.0, 1e-14));

    Vector omega(1);
    omega(0) = 1.3;
    const auto lhs = estimate_charfn(est, omega);
    Vector hw(1);
    hw(0) = 0.5 * 1.3;
    const auto rhs = empirical_charfn(est.cloud, omega) * est.kernel.fourier(hw);
    CHECK_THAT(std::abs(lhs - rhs), Catch::Matchers::WithinAbs(0.0, 1e-14));
}

TEST_CASE("estimate charfn equals the Fourier integral of the estimate", "[kde]") {
    const auto cloud = normal_cloud(50, 13);
    const auto est = build_estimate(cloud, gaussian_kernel(1), 0.6);
    Vector omega(1);
    omega(0) = 0.8;
    // Wide trapezoid of p_hat(x) e^{i omega x}.
    const double lo = -12.0, hi = 12.0;
    const int m = 4000;
    const double dx = (hi - lo) / (m - 1);
    std::complex<double> integral{0.0, 0.0};
    for (int k = 0; k < m; ++k) {
        Vector x(1);
        x(0) = lo + k * dx;
        const double p = eval_estimate_at(est, x);
        const double w = (k == 0 || k == m - 1) ? 0.5 : 1.0;
        integral += w * p * std::complex<double>(std::cos(0.8 * x(0)), std::sin(0.8 * x(0))) * dx;
    }
    CHECK_THAT(std::abs(estimate_charfn(est, omega) - integral),
               Catch::Matchers::WithinAbs(0.0, 1e-7));
}

TEST_CASE("density CSV carries coordinates, estimate, and optional derivative",
          "[kde]") {
    std::vector<Vector> pts;
    Vector a(1);
    a(0) = 0.25;
    pts.push_back(a);
    std::ostringstream os;
    write_density_csv(pts, {1.5}, {-0.5}, os);
    CHECK(os.str() == "x_1,p_hat,deriv\n0.25,1.5,-0.5\n");

    std::ostringstream os2;
    write_density_csv(pts, {1.5}, {}, os2);
    CHECK(os2.str() == "x_1,p_hat\n0.25,1.5\n");
}
