#pragma once

#include <cmath>
#include <complex>
#include <ostream>
#include <string>
#include <vector>

#include "pfkde/common.hpp"
#include "pfkde/kernels.hpp"
#include "pfkde/pf.hpp"

namespace pfkde {

/// Bandwidth schedule h(n) = alpha * n^{-1/(2 beta + d + 2m)}; m = 0 is the
/// density schedule, m >= 1 the derivative-estimation schedule.
struct BandwidthSchedule {
    double alpha = 1.0;
    int beta = 1;
    int dim = 1;
    int deriv_order = 0;
};

inline double bandwidth(const BandwidthSchedule& s, long long n) {
    if (s.alpha <= 0.0) throw std::invalid_argument("bandwidth: alpha must be positive");
    if (s.beta < 1 || s.dim < 1 || s.deriv_order < 0 || n < 1) {
        throw std::invalid_argument("bandwidth: invalid schedule parameters");
    }
    const double expo = -1.0 / (2.0 * s.beta + s.dim + 2.0 * s.deriv_order);
    return s.alpha * std::pow(static_cast<double>(n), expo);
}

/// Kernel density estimate p_hat(x) = (n h^d)^{-1} sum_i K((x - x_i)/h) over a
/// uniformly weighted cloud. Evaluation is direct (no tree or FFT shortcut).
struct DensityEstimate {
    ParticleCloud cloud;
    Kernel kernel;
    double h = 1.0;
};

inline DensityEstimate build_estimate(const ParticleCloud& cloud, const Kernel& kernel,
                                      double h) {
    if (h <= 0.0) throw std::invalid_argument("build_estimate: bandwidth must be positive");
    if (!cloud.uniform) {
        throw std::invalid_argument("build_estimate: cloud must carry uniform weights");
    }
    if (kernel.dim != cloud.dim()) {
        throw std::invalid_argument("build_estimate: kernel dimension does not match cloud");
    }
    return DensityEstimate{cloud, kernel, h};
}

inline double eval_estimate_at(const DensityEstimate& est, const Vector& x) {
    const int n = est.cloud.size();
    const double inv_h = 1.0 / est.h;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += est.kernel.evaluate(
            Vector((x - est.cloud.particles.row(i).transpose()) * inv_h));
    }
    return acc / (n * std::pow(est.h, est.kernel.dim));
}

inline std::vector<double> eval_estimate(const DensityEstimate& est,
                                         const std::vector<Vector>& points) {
    std::vector<double> out(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) out[k] = eval_estimate_at(est, points[k]);
    return out;
}

/// Positive part max(0, p_hat) pointwise, deliberately NOT renormalized: the
/// pointwise MSE comparison against the raw estimate only holds without
/// renormalization.
inline std::vector<double> eval_positive_part(const DensityEstimate& est,
                                              const std::vector<Vector>& points) {
    std::vector<double> out = eval_estimate(est, points);
    for (double& v : out) v = std::max(0.0, v);
    return out;
}

inline double eval_derivative_estimate_at(const DensityEstimate& est,
                                          const std::vector<int>& multi_index,
                                          const Vector& x) {
    if (!est.kernel.derivative_evaluate) {
        throw std::invalid_argument("eval_derivative_estimate: kernel lacks derivatives");
    }
    int order = 0;
    for (int v : multi_index) order += v;
    const int n = est.cloud.size();
    const double inv_h = 1.0 / est.h;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += est.kernel.derivative_evaluate(
            multi_index, Vector((x - est.cloud.particles.row(i).transpose()) * inv_h));
    }
    // Chain rule: each differentiation of K(./h) contributes another 1/h.
    return acc / (n * std::pow(est.h, est.kernel.dim + order));
}

inline std::vector<double> eval_derivative_estimate(const DensityEstimate& est,
                                                    const std::vector<int>& multi_index,
                                                    const std::vector<Vector>& points) {
    std::vector<double> out(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) {
        out[k] = eval_derivative_estimate_at(est, multi_index, points[k]);
    }
    return out;
}

/// F[p_hat](omega) = phi_n(omega) * K_F(h omega), the smoothing identity in
/// the frequency domain.
inline std::complex<double> estimate_charfn(const DensityEstimate& est, const Vector& omega) {
    return empirical_charfn(est.cloud, omega) * est.kernel.fourier(Vector(est.h * omega));
}

/// CSV layout: x_1..x_d, p_hat (plus a deriv column when derivative values
/// are supplied).
inline void write_density_csv(const std::vector<Vector>& points,
                              const std::vector<double>& values,
                              const std::vector<double>& deriv_values, std::ostream& os) {
    if (points.size() != values.size()) {
        throw std::invalid_argument("write_density_csv: points/values size mismatch");
    }
    const bool with_deriv = !deriv_values.empty();
    if (with_deriv && deriv_values.size() != points.size()) {
        throw std::invalid_argument("write_density_csv: deriv column size mismatch");
    }
    const int d = points.empty() ? 1 : static_cast<int>(points.front().size());
    for (int k = 1; k <= d; ++k) os << (k > 1 ? "," : "") << "x_" << k;
    os << ",p_hat";
    if (with_deriv) os << ",deriv";
    os << "\n";
    for (std::size_t k = 0; k < points.size(); ++k) {
        for (int j = 0; j < d; ++j) os << (j > 0 ? "," : "") << num_str(points[k](j));
        os << "," << num_str(values[k]);
        if (with_deriv) os << "," << num_str(deriv_values[k]);
        os << "\n";
    }
}

} // namespace pfkde
