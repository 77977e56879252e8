#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include "pfkde/common.hpp"

namespace pfkde {

// Deterministic trapezoid quadrature with refinement by interval doubling.
// Deliberately no adaptive subdivision and no external dependencies: every
// integral in the library must be auditable and bit-reproducible.

struct QuadratureSpec {
    double tol = 1e-9;          // stop when successive refinements differ less
    int initial_intervals = 64; // intervals (not nodes) of the coarsest pass
    int max_refinements = 16;   // doublings before giving up
    double max_halfwidth = 1e4; // cap for automatic domain expansion
};

inline double trapezoid_1d(const std::function<double(double)>& f,
                           double lo, double hi, int intervals) {
    const double h = (hi - lo) / intervals;
    double sum = 0.5 * (f(lo) + f(hi));
    for (int i = 1; i < intervals; ++i) sum += f(lo + i * h);
    return sum * h;
}

// Refines by doubling, reusing previous evaluations. Throws with the
// refinement trace when the sequence of estimates fails to settle.
inline double integrate_1d(const std::function<double(double)>& f,
                           double lo, double hi,
                           const QuadratureSpec& spec = {}) {
    int m = spec.initial_intervals;
    double h = (hi - lo) / m;
    double sum = 0.5 * (f(lo) + f(hi));
    for (int i = 1; i < m; ++i) sum += f(lo + i * h);
    double estimate = sum * h;
    std::vector<double> trace{estimate};
    for (int r = 0; r < spec.max_refinements; ++r) {
        double mid_sum = 0.0;
        for (int i = 0; i < m; ++i) mid_sum += f(lo + (i + 0.5) * h);
        m *= 2;
        h *= 0.5;
        sum += mid_sum;
        const double next = sum * h;
        trace.push_back(next);
        const double diff = std::abs(next - estimate);
        estimate = next;
        if (diff <= spec.tol * std::max(1.0, std::abs(estimate))) return estimate;
    }
    std::ostringstream os;
    os << "quadrature failed to converge on [" << lo << ", " << hi << "]; trace:";
    for (double v : trace) os << ' ' << v;
    throw numerical_error(os.str());
}

// Tensor-product trapezoid over the box [lo_i, hi_i]. Interval counts double
// in every dimension per refinement, so keep d <= 3 and budgets modest.
inline double integrate_nd(const std::function<double(const std::vector<double>&)>& f,
                           const std::vector<double>& lo, const std::vector<double>& hi,
                           const QuadratureSpec& spec = {}) {
    const int d = static_cast<int>(lo.size());
    if (d == 1) {
        return integrate_1d([&](double x) { return f({x}); }, lo[0], hi[0], spec);
    }
    auto tensor_pass = [&](int m) {
        std::vector<double> step(lo.size());
        for (int k = 0; k < d; ++k) step[k] = (hi[k] - lo[k]) / m;
        std::vector<int> idx(lo.size(), 0);
        std::vector<double> x(lo.size());
        double total = 0.0;
        long long cells = 1;
        for (int k = 0; k < d; ++k) cells *= (m + 1);
        for (long long flat = 0; flat < cells; ++flat) {
            long long rem = flat;
            double w = 1.0;
            for (int k = 0; k < d; ++k) {
                idx[k] = static_cast<int>(rem % (m + 1));
                rem /= (m + 1);
                x[k] = lo[k] + idx[k] * step[k];
                w *= (idx[k] == 0 || idx[k] == m) ? 0.5 * step[k] : step[k];
            }
            total += w * f(x);
        }
        return total;
    };
    int m = spec.initial_intervals;
    double estimate = tensor_pass(m);
    std::vector<double> trace{estimate};
    for (int r = 0; r < spec.max_refinements; ++r) {
        m *= 2;
        const double next = tensor_pass(m);
        trace.push_back(next);
        const double diff = std::abs(next - estimate);
        estimate = next;
        if (diff <= spec.tol * std::max(1.0, std::abs(estimate))) return estimate;
    }
    std::ostringstream os;
    os << "tensor quadrature failed to converge (d=" << d << "); trace:";
    for (double v : trace) os << ' ' << v;
    throw numerical_error(os.str());
}

// Surface measure of the unit sphere S^{d-1} in R^d.
inline double sphere_surface(int d) {
    return 2.0 * std::pow(3.14159265358979323846, 0.5 * d) / std::tgamma(0.5 * d);
}

// Integral over [0, W] of a decaying radial integrand, with W grown until
// the integrand is negligible at the boundary. Throws when no such W is
// found below the cap (the integral is treated as divergent).
inline double integrate_radial(const std::function<double(double)>& g,
                               double initial_halfwidth,
                               const QuadratureSpec& spec = {}) {
    double W = initial_halfwidth;
    double scale = std::abs(g(0.0));
    for (int i = 1; i <= 16; ++i) scale = std::max(scale, std::abs(g(W * i / 16.0)));
    while (std::abs(g(W)) > 1e-13 * std::max(scale, 1e-300)) {
        W *= 2.0;
        if (W > spec.max_halfwidth) {
            throw numerical_error("radial integrand does not decay; integral divergent");
        }
        for (int i = 9; i <= 16; ++i) scale = std::max(scale, std::abs(g(W * i / 16.0)));
    }
    return integrate_1d(g, 0.0, W, spec);
}

} // namespace pfkde
