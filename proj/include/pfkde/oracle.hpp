#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pfkde/common.hpp"
#include "pfkde/linalg.hpp"
#include "pfkde/model.hpp"

namespace pfkde {

/// Exact Gaussian filtering state: the posterior N(mu_t, sigma_t).
struct KalmanBelief {
    Vector mu;
    Matrix sigma;
    int time = 0;
};

inline KalmanBelief kalman_initial(const LinearGaussianModel& model) {
    return KalmanBelief{model.mu0, model.Sigma0, 0};
}

/// One predict/update cycle. Returns the posterior and the innovation
/// log-likelihood log N(y_t; H mu_pred, H Sigma_pred H' + R).
inline std::pair<KalmanBelief, double> kalman_step(const LinearGaussianModel& model,
                                                   const KalmanBelief& belief,
                                                   const Vector& y_t) {
    const Vector mu_pred = model.F * belief.mu;
    const Matrix sigma_pred = symmetrize(model.F * belief.sigma * model.F.transpose() + model.Q);
    const Matrix innov_cov = symmetrize(model.H * sigma_pred * model.H.transpose() + model.R);
    Eigen::LLT<Matrix> llt(innov_cov);
    if (llt.info() != Eigen::Success) {
        throw numerical_error("kalman_step: innovation covariance not invertible at t=" +
                              std::to_string(belief.time + 1));
    }
    const Matrix gain = llt.solve(model.H * sigma_pred).transpose();
    const Vector innovation = y_t - model.H * mu_pred;
    KalmanBelief next;
    next.time = belief.time + 1;
    next.mu = mu_pred + gain * innovation;
    next.sigma = symmetrize((Matrix::Identity(model.dim(), model.dim()) - gain * model.H) *
                            sigma_pred);
    const double loglik = mvn_logpdf(y_t, Vector(model.H * mu_pred), Matrix(llt.matrixL()));
    return {std::move(next), loglik};
}

/// Beliefs after 0..T observations; element 0 is the prior belief.
inline std::vector<KalmanBelief> kalman_run(const LinearGaussianModel& model,
                                            const std::vector<Vector>& observations,
                                            const KalmanBelief& initial) {
    std::vector<KalmanBelief> out;
    out.reserve(observations.size() + 1);
    out.push_back(initial);
    for (const Vector& y : observations) {
        out.push_back(kalman_step(model, out.back(), y).first);
    }
    return out;
}

inline std::vector<double> kalman_density(const KalmanBelief& belief,
                                          const std::vector<Vector>& points) {
    const Matrix L = psd_cholesky(belief.sigma);
    if (!chol_is_positive_definite(L)) {
        throw numerical_error("kalman_density: singular posterior covariance");
    }
    std::vector<double> out(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) {
        out[k] = std::exp(mvn_logpdf(points[k], belief.mu, L));
    }
    return out;
}

inline std::function<double(const Vector&)> kalman_density_fn(const KalmanBelief& belief) {
    const Matrix L = psd_cholesky(belief.sigma);
    if (!chol_is_positive_definite(L)) {
        throw numerical_error("kalman_density_fn: singular posterior covariance");
    }
    const Vector mu = belief.mu;
    return [mu, L](const Vector& x) { return std::exp(mvn_logpdf(x, mu, L)); };
}

/// First-order partial d/dx_j of the Gaussian posterior density:
/// -[Sigma^{-1}(x - mu)]_j N(x; mu, Sigma).
inline std::function<double(const Vector&)> kalman_density_deriv_fn(const KalmanBelief& belief,
                                                                    int j) {
    const Matrix L = psd_cholesky(belief.sigma);
    if (!chol_is_positive_definite(L)) {
        throw numerical_error("kalman_density_deriv_fn: singular posterior covariance");
    }
    if (j < 0 || j >= belief.mu.size()) {
        throw std::invalid_argument("kalman_density_deriv_fn: coordinate out of range");
    }
    const Vector mu = belief.mu;
    const Matrix sigma = belief.sigma;
    return [mu, sigma, L, j](const Vector& x) {
        const Vector centered = x - mu;
        const Vector whitened = L.triangularView<Eigen::Lower>().solve(centered);
        const Vector back = L.transpose().triangularView<Eigen::Upper>().solve(whitened);
        return -back(j) * std::exp(mvn_logpdf(x, mu, L));
    };
}

inline nlohmann::json kalman_to_json(const KalmanBelief& belief) {
    nlohmann::json j;
    j["t"] = belief.time;
    j["mu"] = nlohmann::json::array();
    for (int i = 0; i < belief.mu.size(); ++i) j["mu"].push_back(belief.mu(i));
    j["sigma"] = matrix_to_json(belief.sigma);
    return j;
}

// ---- 1-D grid filter -------------------------------------------------------

/// Density values on a uniform 1-D grid of m nodes spanning [lo, hi]
/// (endpoints included); trapezoid mass is kept at 1 after each update.
struct GridDensity {
    double lo = 0.0;
    double hi = 1.0;
    int m = 2048;
    std::vector<double> values;

    double spacing() const { return (hi - lo) / (m - 1); }
    double node(int k) const { return lo + k * spacing(); }
    double trapezoid_weight(int k) const {
        return (k == 0 || k == m - 1) ? 0.5 * spacing() : spacing();
    }
};

inline double grid_mass(const GridDensity& g) {
    double mass = 0.0;
    for (int k = 0; k < g.m; ++k) mass += g.trapezoid_weight(k) * g.values[static_cast<std::size_t>(k)];
    return mass;
}

inline double grid_mean(const GridDensity& g) {
    double acc = 0.0;
    for (int k = 0; k < g.m; ++k) {
        acc += g.trapezoid_weight(k) * g.node(k) * g.values[static_cast<std::size_t>(k)];
    }
    return acc;
}

inline double grid_variance(const GridDensity& g) {
    const double mu = grid_mean(g);
    double acc = 0.0;
    for (int k = 0; k < g.m; ++k) {
        const double c = g.node(k) - mu;
        acc += g.trapezoid_weight(k) * c * c * g.values[static_cast<std::size_t>(k)];
    }
    return acc;
}

/// Characteristic function of the gridded density by trapezoid quadrature;
/// trustworthy only up to the Nyquist frequency pi/spacing.
inline std::complex<double> grid_charfn(const GridDensity& g, double omega) {
    double re = 0.0, im = 0.0;
    for (int k = 0; k < g.m; ++k) {
        const double w = g.trapezoid_weight(k) * g.values[static_cast<std::size_t>(k)];
        const double phase = omega * g.node(k);
        re += w * std::cos(phase);
        im += w * std::sin(phase);
    }
    return {re, im};
}

/// Discretize a (1-D) log-density onto [lo, hi] and normalize to mass 1.
inline GridDensity make_grid_density(const std::function<double(double)>& logdensity,
                                     double lo, double hi, int m) {
    if (!(hi > lo) || m < 2) throw std::invalid_argument("make_grid_density: malformed grid");
    GridDensity g;
    g.lo = lo;
    g.hi = hi;
    g.m = m;
    g.values.resize(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) g.values[static_cast<std::size_t>(k)] = std::exp(logdensity(g.node(k)));
    const double mass = grid_mass(g);
    if (!(mass > 0.0)) throw numerical_error("make_grid_density: zero mass on the grid");
    for (double& v : g.values) v /= mass;
    return g;
}

/// Fixed grid support for a whole run: the envelope of the Kalman posterior
/// means plus/minus n_sigmas standard deviations (d = 1).
inline std::pair<double, double> kalman_envelope(const std::vector<KalmanBelief>& beliefs,
                                                 double n_sigmas = 10.0) {
    if (beliefs.empty()) throw std::invalid_argument("kalman_envelope: no beliefs");
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const KalmanBelief& b : beliefs) {
        if (b.mu.size() != 1) {
            throw std::invalid_argument("kalman_envelope: grid oracle is one-dimensional");
        }
        const double sd = std::sqrt(std::max(0.0, b.sigma(0, 0)));
        const double l = b.mu(0) - n_sigmas * sd;
        const double h = b.mu(0) + n_sigmas * sd;
        if (first || l < lo) lo = l;
        if (first || h > hi) hi = h;
        first = false;
    }
    return {lo, hi};
}

struct GridStepResult {
    GridDensity prediction; // p_bar_t, mass as carried over (not renormalized)
    GridDensity posterior;  // p_t, renormalized to mass 1
    double normalizer = 0.0; // trapezoid of g_t * p_bar_t, the pi_bar_t g_t estimate
};

/// One prediction/update cycle of the filtering recursion on the grid:
/// p_bar_t(x) = int K_{t-1}(x | x') p_{t-1}(x') dx' by trapezoid convolution,
/// then p_t proportional to g_t(y_t | .) p_bar_t.
inline GridStepResult grid_filter_step(const StateSpaceModel& model, const GridDensity& grid,
                                       int t, const Vector& y_t, int threads = 0) {
    if (model.dim_x != 1) {
        throw std::invalid_argument("grid_filter_step: model must be one-dimensional");
    }
    if (!model.transition_logdensity) {
        throw std::invalid_argument("grid_filter_step: transition_logdensity is required");
    }
    GridStepResult out;
    out.prediction = grid;
    const int m = grid.m;
    parallel_for(static_cast<std::size_t>(m), threads, [&](std::size_t k) {
        const Vector xk = Vector::Constant(1, grid.node(static_cast<int>(k)));
        double acc = 0.0;
        for (int jj = 0; jj < m; ++jj) {
            const double pj = grid.values[static_cast<std::size_t>(jj)];
            if (pj == 0.0) continue;
            acc += grid.trapezoid_weight(jj) * pj *
                   std::exp(model.transition_logdensity(t, xk, Vector::Constant(1, grid.node(jj))));
        }
        out.prediction.values[k] = acc;
    });
    out.posterior = grid;
    double normalizer = 0.0;
    for (int k = 0; k < m; ++k) {
        const double g =
            std::exp(model.observation_logdensity(t, y_t, Vector::Constant(1, grid.node(k))));
        const double v = g * out.prediction.values[static_cast<std::size_t>(k)];
        out.posterior.values[static_cast<std::size_t>(k)] = v;
        normalizer += grid.trapezoid_weight(k) * v;
    }
    if (normalizer < 1e-300) {
        throw numerical_error("grid_filter_step: observation incompatible with grid support at t=" +
                              std::to_string(t));
    }
    for (double& v : out.posterior.values) v /= normalizer;
    out.normalizer = normalizer;
    return out;
}

inline std::vector<GridStepResult> grid_filter_run(const StateSpaceModel& model,
                                                   const std::vector<Vector>& observations,
                                                   const GridDensity& initial, int threads = 0) {
    std::vector<GridStepResult> out;
    out.reserve(observations.size());
    const GridDensity* current = &initial;
    for (std::size_t k = 0; k < observations.size(); ++k) {
        out.push_back(grid_filter_step(model, *current, static_cast<int>(k) + 1,
                                       observations[k], threads));
        current = &out.back().posterior;
    }
    return out;
}

inline void write_grid_csv(const GridDensity& g, std::ostream& os) {
    os << "x,p\n";
    for (int k = 0; k < g.m; ++k) {
        os << num_str(g.node(k)) << "," << num_str(g.values[static_cast<std::size_t>(k)]) << "\n";
    }
}

} // namespace pfkde
