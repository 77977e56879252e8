#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pfkde/common.hpp"
#include "pfkde/linalg.hpp"
#include "pfkde/rng.hpp"

namespace pfkde {

/// General state-space process: initial law p0, Markov transition kernels
/// K_{t-1}(. | x) and observation densities g_t(y | x). All randomness flows
/// through explicit RNG streams so the struct itself is immutable and
/// shareable across threads.
struct StateSpaceModel {
    int dim_x = 0;
    int dim_y = 0;
    std::function<Vector(RngStream&)> initial_sampler;
    std::function<double(const Vector&)> initial_logdensity;
    // (t, x_{t-1}, rng) -> x_t
    std::function<Vector(int, const Vector&, RngStream&)> transition_sampler;
    // (t, x_t, x_{t-1}) -> log K_{t-1}(x_t | x_{t-1}); optional, needed by the
    // grid oracle only.
    std::function<double(int, const Vector&, const Vector&)> transition_logdensity;
    // (t, y_t, x_t) -> log g_t(y_t | x_t)
    std::function<double(int, const Vector&, const Vector&)> observation_logdensity;
    // (t, x_t, rng) -> y_t; used by trajectory simulation.
    std::function<Vector(int, const Vector&, RngStream&)> observation_sampler;
};

/// Linear-Gaussian instance: x_t = F x_{t-1} + u_t, y_t = H x_t + v_t with
/// u_t ~ N(0, Q), v_t ~ N(0, R), x_0 ~ N(mu0, Sigma0). Covariances may be
/// positive semi-definite; densities (as opposed to samples) additionally
/// require the relevant covariance to be invertible.
struct LinearGaussianModel {
    Matrix F, H, Q, R;
    Vector mu0;
    Matrix Sigma0;

    int dim() const { return static_cast<int>(F.rows()); }

    void validate() const {
        const int d = dim();
        if (F.cols() != d || H.rows() != d || H.cols() != d || Q.rows() != d ||
            Q.cols() != d || R.rows() != d || R.cols() != d || mu0.size() != d ||
            Sigma0.rows() != d || Sigma0.cols() != d) {
            throw std::invalid_argument("LinearGaussianModel: inconsistent dimensions");
        }
        // Throws if any covariance fails to be symmetric PSD.
        psd_cholesky(Q);
        psd_cholesky(R);
        psd_cholesky(Sigma0);
    }
};

namespace detail {

// Cached Cholesky factors shared by the closures of to_state_space.
struct LgmCache {
    LinearGaussianModel m;
    Matrix chol_Q, chol_R, chol_Sigma0;
};

} // namespace detail

inline StateSpaceModel to_state_space(const LinearGaussianModel& lgm) {
    lgm.validate();
    auto cache = std::make_shared<detail::LgmCache>();
    cache->m = lgm;
    cache->chol_Q = psd_cholesky(lgm.Q);
    cache->chol_R = psd_cholesky(lgm.R);
    cache->chol_Sigma0 = psd_cholesky(lgm.Sigma0);

    StateSpaceModel ssm;
    ssm.dim_x = lgm.dim();
    ssm.dim_y = static_cast<int>(lgm.H.rows());
    ssm.initial_sampler = [cache](RngStream& rng) {
        return sample_mvn(cache->m.mu0, cache->chol_Sigma0, rng);
    };
    ssm.initial_logdensity = [cache](const Vector& x) {
        return mvn_logpdf(x, cache->m.mu0, cache->chol_Sigma0);
    };
    ssm.transition_sampler = [cache](int, const Vector& x, RngStream& rng) {
        return sample_mvn(Vector(cache->m.F * x), cache->chol_Q, rng);
    };
    ssm.transition_logdensity = [cache](int, const Vector& xt, const Vector& xp) {
        return mvn_logpdf(xt, Vector(cache->m.F * xp), cache->chol_Q);
    };
    ssm.observation_logdensity = [cache](int, const Vector& y, const Vector& x) {
        return mvn_logpdf(y, Vector(cache->m.H * x), cache->chol_R);
    };
    ssm.observation_sampler = [cache](int, const Vector& x, RngStream& rng) {
        return sample_mvn(Vector(cache->m.H * x), cache->chol_R, rng);
    };
    return ssm;
}

/// Conditional characteristic function of the Gaussian transition kernel:
/// E[exp(i<omega, X_t>) | X_{t-1} = x_prev] = exp(i<omega, F x_prev>) * exp(-omega' Q omega / 2).
inline std::complex<double> gaussian_transition_charfn(const LinearGaussianModel& model,
                                                       const Vector& omega,
                                                       const Vector& x_prev) {
    const double phase = omega.dot(model.F * x_prev);
    const double decay = std::exp(-0.5 * omega.dot(model.Q * omega));
    return {decay * std::cos(phase), decay * std::sin(phase)};
}

struct Trajectory {
    std::vector<Vector> states;       // x_0 .. x_T
    std::vector<Vector> observations; // y_1 .. y_T
    std::uint64_t seed = 0;
};

inline Trajectory simulate_trajectory(const StateSpaceModel& model, int horizon,
                                      std::uint64_t seed) {
    if (horizon < 1) throw std::invalid_argument("simulate_trajectory: horizon must be >= 1");
    RngStream rng(seed);
    Trajectory traj;
    traj.seed = seed;
    traj.states.reserve(static_cast<std::size_t>(horizon) + 1);
    traj.observations.reserve(static_cast<std::size_t>(horizon));
    Vector x = model.initial_sampler(rng);
    if (!x.allFinite()) throw numerical_error("simulate_trajectory: non-finite initial state");
    traj.states.push_back(x);
    for (int t = 1; t <= horizon; ++t) {
        x = model.transition_sampler(t, x, rng);
        if (!x.allFinite()) {
            throw numerical_error("simulate_trajectory: non-finite state at t=" +
                                  std::to_string(t));
        }
        Vector y = model.observation_sampler(t, x, rng);
        if (!y.allFinite()) {
            throw numerical_error("simulate_trajectory: non-finite observation at t=" +
                                  std::to_string(t));
        }
        traj.states.push_back(x);
        traj.observations.push_back(std::move(y));
    }
    return traj;
}

// ---- JSON / CSV interchange ------------------------------------------------

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw std::invalid_argument("model JSON: missing key '" + key + "'");
    const auto& rows = j.at(key);
    if (!rows.is_array() || rows.empty()) {
        throw std::invalid_argument("model JSON: '" + key + "' must be a nested array");
    }
    const std::size_t nr = rows.size();
    const std::size_t nc = rows.at(0).size();
    Matrix m(static_cast<int>(nr), static_cast<int>(nc));
    for (std::size_t i = 0; i < nr; ++i) {
        if (!rows.at(i).is_array() || rows.at(i).size() != nc) {
            throw std::invalid_argument("model JSON: ragged rows in '" + key + "'");
        }
        for (std::size_t k = 0; k < nc; ++k) {
            m(static_cast<int>(i), static_cast<int>(k)) = rows.at(i).at(k).get<double>();
        }
    }
    return m;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline LinearGaussianModel model_from_json(const nlohmann::json& j) {
    if (!j.contains("dim")) throw std::invalid_argument("model JSON: missing key 'dim'");
    const int d = j.at("dim").get<int>();
    if (d < 1) throw std::invalid_argument("model JSON: 'dim' must be positive");
    LinearGaussianModel m;
    m.F = matrix_from_json(j, "F");
    m.H = matrix_from_json(j, "H");
    m.Q = matrix_from_json(j, "Q");
    m.R = matrix_from_json(j, "R");
    if (!j.contains("mu0")) throw std::invalid_argument("model JSON: missing key 'mu0'");
    const auto& mu = j.at("mu0");
    m.mu0 = Vector(static_cast<int>(mu.size()));
    for (std::size_t i = 0; i < mu.size(); ++i) {
        m.mu0(static_cast<int>(i)) = mu.at(i).get<double>();
    }
    m.Sigma0 = matrix_from_json(j, "Sigma0");
    if (m.F.rows() != d) throw std::invalid_argument("model JSON: 'F' does not match 'dim'");
    m.validate();
    return m;
}

inline nlohmann::json model_to_json(const LinearGaussianModel& m) {
    nlohmann::json j;
    j["dim"] = m.dim();
    j["F"] = matrix_to_json(m.F);
    j["H"] = matrix_to_json(m.H);
    j["Q"] = matrix_to_json(m.Q);
    j["R"] = matrix_to_json(m.R);
    j["mu0"] = nlohmann::json::array();
    for (int i = 0; i < m.mu0.size(); ++i) j["mu0"].push_back(m.mu0(i));
    j["Sigma0"] = matrix_to_json(m.Sigma0);
    return j;
}

/// CSV layout: t, x_1..x_d, y_1..y_d with the y fields left blank on the
/// t = 0 row (no observation exists there).
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& os) {
    if (traj.states.empty()) throw std::invalid_argument("write_trajectory_csv: empty trajectory");
    const int d = static_cast<int>(traj.states.front().size());
    const int dy = traj.observations.empty()
                       ? d
                       : static_cast<int>(traj.observations.front().size());
    os << "t";
    for (int k = 1; k <= d; ++k) os << ",x_" << k;
    for (int k = 1; k <= dy; ++k) os << ",y_" << k;
    os << "\n";
    for (std::size_t t = 0; t < traj.states.size(); ++t) {
        os << t;
        for (int k = 0; k < d; ++k) os << "," << num_str(traj.states[t](k));
        if (t == 0) {
            for (int k = 0; k < dy; ++k) os << ",";
        } else {
            const Vector& y = traj.observations[t - 1];
            for (int k = 0; k < dy; ++k) os << "," << num_str(y(k));
        }
        os << "\n";
    }
}

inline Trajectory read_trajectory_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("trajectory CSV: empty file");
    int d = 0;
    {
        std::stringstream header(line);
        std::string field;
        while (std::getline(header, field, ',')) {
            if (field.rfind("x_", 0) == 0) ++d;
        }
    }
    if (d == 0) throw std::invalid_argument("trajectory CSV: no x_ columns in header");
    Trajectory traj;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string field;
        std::getline(row, field, ','); // t index; rows are ordered
        Vector x(d), y(d);
        bool y_present = true;
        for (int k = 0; k < d; ++k) {
            std::getline(row, field, ',');
            x(k) = std::stod(field);
        }
        for (int k = 0; k < d; ++k) {
            if (!std::getline(row, field, ',') || field.empty()) {
                y_present = false;
                break;
            }
            y(k) = std::stod(field);
        }
        traj.states.push_back(x);
        if (y_present) traj.observations.push_back(y);
    }
    if (traj.observations.size() + 1 != traj.states.size()) {
        throw std::invalid_argument("trajectory CSV: observation count must be states - 1");
    }
    return traj;
}

} // namespace pfkde
