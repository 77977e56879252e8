#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "pfkde/common.hpp"
#include "pfkde/linalg.hpp"
#include "pfkde/model.hpp"
#include "pfkde/rng.hpp"

namespace pfkde {

/// n particles in R^d at a fixed time index. Weights are either uniform
/// (post-resampling and post-prediction clouds) or an explicit normalized
/// vector (post-weighting clouds).
struct ParticleCloud {
    Matrix particles; // n x d
    int time = 0;
    bool uniform = true;
    Vector weights; // empty when uniform

    int size() const { return static_cast<int>(particles.rows()); }
    int dim() const { return static_cast<int>(particles.cols()); }
    double weight(int i) const { return uniform ? 1.0 / size() : weights(i); }
};

/// One filter step: the predicted cloud (uniform), the weighted cloud, the
/// resampled cloud (uniform), and the mean unnormalized weight, which is the
/// plug-in estimate of the normalizer integral g_t d(pred law).
struct FilterStep {
    std::optional<ParticleCloud> predicted;
    std::optional<ParticleCloud> weighted;
    ParticleCloud resampled;
    double mean_unnorm_weight = 0.0;
};

struct FilterRun {
    ParticleCloud initial;
    std::vector<FilterStep> steps; // steps[t-1] holds time t
    std::uint64_t seed = 0;
};

inline ParticleCloud init_particles(const StateSpaceModel& model, int n, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("init_particles: n must be >= 1");
    ParticleCloud cloud;
    cloud.particles.resize(n, model.dim_x);
    cloud.time = 0;
    for (int i = 0; i < n; ++i) {
        cloud.particles.row(i) = model.initial_sampler(rng).transpose();
    }
    if (!cloud.particles.allFinite()) {
        throw numerical_error("init_particles: non-finite draw from initial sampler");
    }
    return cloud;
}

inline ParticleCloud predict_step(const StateSpaceModel& model, const ParticleCloud& cloud,
                                  int t, RngStream& rng) {
    if (!cloud.uniform) {
        throw std::invalid_argument("predict_step: input cloud must carry uniform weights");
    }
    if (cloud.time != t - 1) {
        throw std::invalid_argument("predict_step: cloud time does not precede t");
    }
    ParticleCloud out;
    out.particles.resize(cloud.size(), cloud.dim());
    out.time = t;
    for (int i = 0; i < cloud.size(); ++i) {
        const Vector moved =
            model.transition_sampler(t, Vector(cloud.particles.row(i).transpose()), rng);
        if (!moved.allFinite()) {
            throw numerical_error("predict_step: non-finite particle " + std::to_string(i) +
                                  " at t=" + std::to_string(t));
        }
        out.particles.row(i) = moved.transpose();
    }
    return out;
}

/// Weight the predicted cloud against observation y_t. Weights are formed in
/// the log domain with max-subtraction; the all-underflow case raises
/// weight_degeneracy_error rather than silently resetting to uniform.
inline std::pair<ParticleCloud, double> weight_step(const StateSpaceModel& model,
                                                    const ParticleCloud& cloud,
                                                    const Vector& y_t) {
    if (!cloud.uniform) {
        throw std::invalid_argument("weight_step: input cloud must carry uniform weights");
    }
    const int n = cloud.size();
    Vector logw(n);
    double maxlw = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        logw(i) = model.observation_logdensity(cloud.time, y_t,
                                               Vector(cloud.particles.row(i).transpose()));
        if (std::isnan(logw(i))) {
            throw numerical_error("weight_step: NaN log-weight for particle " +
                                  std::to_string(i));
        }
        maxlw = std::max(maxlw, logw(i));
    }
    if (!std::isfinite(maxlw)) {
        throw weight_degeneracy_error(
            "weight_step: all unnormalized weights vanished at t=" +
            std::to_string(cloud.time));
    }
    Vector shifted(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        shifted(i) = std::exp(logw(i) - maxlw);
        total += shifted(i);
    }
    ParticleCloud out = cloud;
    out.uniform = false;
    out.weights = shifted / total;
    // mean unnormalized weight (1/n) sum_i g_t(y_t | x_i), restored from the
    // shifted sum; may round to zero only when every g is below DBL_MIN.
    const double mean_unnorm = std::exp(maxlw + std::log(total / n));
    return {std::move(out), mean_unnorm};
}

/// Multinomial resampling via inverse-CDF lookup against sorted uniforms.
/// Distributionally identical to n independent categorical draws, O(n log n),
/// and deterministic given the stream.
inline ParticleCloud resample_multinomial(const ParticleCloud& cloud, RngStream& rng) {
    if (cloud.uniform) {
        throw std::invalid_argument("resample_multinomial: input cloud must carry explicit weights");
    }
    const int n = cloud.size();
    std::vector<double> u(static_cast<std::size_t>(n));
    for (auto& v : u) v = rng.uniform01();
    std::sort(u.begin(), u.end());
    ParticleCloud out;
    out.particles.resize(n, cloud.dim());
    out.time = cloud.time;
    double cum = cloud.weights(0);
    int j = 0;
    for (int i = 0; i < n; ++i) {
        while (u[static_cast<std::size_t>(i)] > cum && j + 1 < n) {
            ++j;
            cum += cloud.weights(j);
        }
        out.particles.row(i) = cloud.particles.row(j);
    }
    return out;
}

inline FilterRun run_filter(const StateSpaceModel& model,
                            const std::vector<Vector>& observations, int n,
                            std::uint64_t seed, bool keep_intermediate = true) {
    if (observations.empty()) {
        throw std::invalid_argument("run_filter: observation sequence is empty");
    }
    RngStream rng(seed);
    FilterRun run;
    run.seed = seed;
    run.initial = init_particles(model, n, rng);
    ParticleCloud current = run.initial;
    for (std::size_t k = 0; k < observations.size(); ++k) {
        const int t = static_cast<int>(k) + 1;
        try {
            ParticleCloud pred = predict_step(model, current, t, rng);
            auto [weighted, mean_unnorm] = weight_step(model, pred, observations[k]);
            FilterStep step;
            step.resampled = resample_multinomial(weighted, rng);
            step.mean_unnorm_weight = mean_unnorm;
            if (keep_intermediate) {
                step.predicted = std::move(pred);
                step.weighted = std::move(weighted);
            }
            current = step.resampled;
            run.steps.push_back(std::move(step));
        } catch (const weight_degeneracy_error& e) {
            throw weight_degeneracy_error("run_filter: t=" + std::to_string(t) + ": " +
                                          e.what());
        } catch (const numerical_error& e) {
            throw numerical_error("run_filter: t=" + std::to_string(t) + ": " + e.what());
        }
    }
    return run;
}

/// Empirical-measure integral sum_i w_i f(x_i); f may return real or complex.
template <class F>
auto empirical_integral(const ParticleCloud& cloud, F&& f)
    -> std::invoke_result_t<F, const Vector&> {
    using R = std::invoke_result_t<F, const Vector&>;
    R acc{};
    for (int i = 0; i < cloud.size(); ++i) {
        acc += cloud.weight(i) * f(Vector(cloud.particles.row(i).transpose()));
    }
    return acc;
}

/// Empirical characteristic function sum_i w_i exp(i <omega, x_i>).
inline std::complex<double> empirical_charfn(const ParticleCloud& cloud, const Vector& omega) {
    double re = 0.0, im = 0.0;
    for (int i = 0; i < cloud.size(); ++i) {
        const double phase = cloud.particles.row(i).dot(omega);
        const double w = cloud.weight(i);
        re += w * std::cos(phase);
        im += w * std::sin(phase);
    }
    return {re, im};
}

inline Vector cloud_mean(const ParticleCloud& cloud) {
    Vector mu = Vector::Zero(cloud.dim());
    for (int i = 0; i < cloud.size(); ++i) {
        mu += cloud.weight(i) * cloud.particles.row(i).transpose();
    }
    return mu;
}

inline Matrix cloud_covariance(const ParticleCloud& cloud) {
    const Vector mu = cloud_mean(cloud);
    Matrix cov = Matrix::Zero(cloud.dim(), cloud.dim());
    for (int i = 0; i < cloud.size(); ++i) {
        const Vector c = cloud.particles.row(i).transpose() - mu;
        cov += cloud.weight(i) * (c * c.transpose());
    }
    return cov;
}

// ---- CSV output ------------------------------------------------------------

namespace detail {

inline void write_cloud_rows(const ParticleCloud& cloud, const char* stage, std::ostream& os) {
    for (int i = 0; i < cloud.size(); ++i) {
        os << cloud.time << "," << i;
        for (int k = 0; k < cloud.dim(); ++k) os << "," << num_str(cloud.particles(i, k));
        os << "," << num_str(cloud.weight(i)) << "," << stage << "\n";
    }
}

} // namespace detail

/// Per-particle CSV: t, i, x_1..x_d, w_i, stage in {pred, weighted, resampled}.
/// The time-0 cloud is recorded under stage "resampled" (it plays that role
/// for the first prediction).
inline void write_filter_run_csv(const FilterRun& run, std::ostream& os) {
    const int d = run.initial.dim();
    os << "t,i";
    for (int k = 1; k <= d; ++k) os << ",x_" << k;
    os << ",w_i,stage\n";
    detail::write_cloud_rows(run.initial, "resampled", os);
    for (const FilterStep& step : run.steps) {
        if (step.predicted) detail::write_cloud_rows(*step.predicted, "pred", os);
        if (step.weighted) detail::write_cloud_rows(*step.weighted, "weighted", os);
        detail::write_cloud_rows(step.resampled, "resampled", os);
    }
}

/// Per-step summary CSV: t, mean_1..mean_d, cov_i_j (row-major), plus the
/// mean unnormalized weight. Moments are those of the resampled cloud.
inline void write_filter_summary_csv(const FilterRun& run, std::ostream& os) {
    const int d = run.initial.dim();
    os << "t";
    for (int k = 1; k <= d; ++k) os << ",mean_" << k;
    for (int i = 1; i <= d; ++i) {
        for (int k = 1; k <= d; ++k) os << ",cov_" << i << "_" << k;
    }
    os << ",mean_unnorm_weight\n";
    auto emit = [&](const ParticleCloud& cloud, double mean_unnorm, bool has_weight) {
        const Vector mu = cloud_mean(cloud);
        const Matrix cov = cloud_covariance(cloud);
        os << cloud.time;
        for (int k = 0; k < d; ++k) os << "," << num_str(mu(k));
        for (int i = 0; i < d; ++i) {
            for (int k = 0; k < d; ++k) os << "," << num_str(cov(i, k));
        }
        if (has_weight) {
            os << "," << num_str(mean_unnorm) << "\n";
        } else {
            os << ",\n";
        }
    };
    emit(run.initial, 0.0, false);
    for (const FilterStep& step : run.steps) {
        emit(step.resampled, step.mean_unnorm_weight, true);
    }
}

} // namespace pfkde
