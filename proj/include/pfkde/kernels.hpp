#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pfkde/common.hpp"
#include "pfkde/linalg.hpp"
#include "pfkde/quadrature.hpp"

namespace pfkde {

/// Symmetric smoothing kernel on R^d together with its Fourier transform
/// K_F(omega) = int exp(i<omega,u>) K(u) du (real and even for symmetric K)
/// and, where they exist, partial derivatives indexed by a multi-index.
struct Kernel {
    int dim = 1;
    std::string name;
    std::function<double(const Vector&)> evaluate;
    std::function<double(const Vector&)> fourier;
    int claimed_order = 1;
    // (multi-index (i1..id), u) -> d^m K / du^{i}; throws when the kernel
    // lacks the requested derivative.
    std::function<double(const std::vector<int>&, const Vector&)> derivative_evaluate;
    // Half-width of the quadrature box used for moment/norm integrals:
    // the support radius for compactly supported kernels, ~10 standard
    // deviations otherwise.
    double quadrature_halfwidth = 10.0;
    // For radially symmetric kernels: k with K(u) = k(||u||), plus k'.
    // Enables exact angular reduction of moment integrals in d >= 2, where
    // tensor grids stall on the support boundary.
    std::function<double(double)> radial_profile;
    std::function<double(double)> radial_profile_deriv;
};

struct KernelConstants {
    double A = 0.0;
    double l2_norm = 0.0;
    std::map<std::vector<int>, double> deriv_l2_norm;
    double R_K = 0.0;
    double mu2_K = 0.0;
};

struct OrderReport {
    int ell = 0;
    double integral = 0.0; // int K, should be 1
    std::vector<std::pair<std::vector<int>, double>> moments;
    bool passed = false;
};

/// Grid on which the ratio |1 - K_F(omega)| / ||omega||^beta is scanned:
/// log-spaced radii, a deterministic set of directions (sign pair in d = 1).
struct AGridSpec {
    double r_min = 1e-4;
    double r_max = 10.0;
    int n_radii = 512;
    int n_directions = 64;
};

namespace detail {

inline int multi_index_order(const std::vector<int>& idx) {
    int total = 0;
    for (int v : idx) total += v;
    return total;
}

inline std::string multi_index_key(const std::vector<int>& idx) {
    std::ostringstream os;
    os << "(";
    for (std::size_t j = 0; j < idx.size(); ++j) {
        if (j) os << ",";
        os << idx[j];
    }
    os << ")";
    return os.str();
}

// Probabilists' Hermite polynomial He_n via the three-term recurrence.
inline double hermite_prob(int n, double x) {
    double h0 = 1.0, h1 = x;
    if (n == 0) return h0;
    for (int k = 1; k < n; ++k) {
        const double h2 = x * h1 - k * h0;
        h0 = h1;
        h1 = h2;
    }
    return h1;
}

// int_0^inf r^p k(r) dr over the kernel's radial support.
inline double radial_power_integral(const Kernel& kernel, int p,
                                    const std::function<double(double)>& kr,
                                    const QuadratureSpec& spec = {}) {
    const double W = kernel.quadrature_halfwidth;
    return integrate_1d([&](double r) { return std::pow(r, p) * kr(r); }, 0.0, W, spec);
}

// int prod_j u_j^{i_j} k(||u||) du for even multi-indices, reduced exactly
// over the angular variables: the integral equals
//   2 prod_j Gamma((i_j+1)/2) / Gamma((|i|+d)/2) * int_0^inf r^{|i|+d-1} k(r) dr.
// Odd multi-indices vanish identically by symmetry.
inline double radial_monomial_moment(const Kernel& kernel, const std::vector<int>& idx,
                                     const std::function<double(double)>& kr,
                                     const QuadratureSpec& spec = {}) {
    for (int v : idx) {
        if (v % 2 != 0) return 0.0;
    }
    const int d = kernel.dim;
    const int deg = multi_index_order(idx);
    double angular = 2.0;
    for (int v : idx) angular *= std::tgamma((v + 1) / 2.0);
    angular /= std::tgamma((deg + d) / 2.0);
    return angular * radial_power_integral(kernel, deg + d - 1, kr, spec);
}

// Tensor-grid moment int prod u^{i} K(u) du over [-W, W]^d.
inline double tensor_monomial_moment(const Kernel& kernel, const std::vector<int>& idx) {
    const double W = kernel.quadrature_halfwidth;
    const int d = kernel.dim;
    auto f = [&](const std::vector<double>& u) {
        Vector x(d);
        double mono = 1.0;
        for (int j = 0; j < d; ++j) {
            x(j) = u[static_cast<std::size_t>(j)];
            for (int p = 0; p < idx[static_cast<std::size_t>(j)]; ++p) {
                mono *= u[static_cast<std::size_t>(j)];
            }
        }
        return mono * kernel.evaluate(x);
    };
    if (d == 1) {
        return integrate_1d(
            [&](double u) {
                return f(std::vector<double>{u});
            },
            -W, W, QuadratureSpec{});
    }
    return integrate_nd(f, std::vector<double>(static_cast<std::size_t>(d), -W),
                        std::vector<double>(static_cast<std::size_t>(d), W),
                        QuadratureSpec{});
}

inline double monomial_moment(const Kernel& kernel, const std::vector<int>& idx) {
    if (kernel.radial_profile && kernel.dim >= 2) {
        return radial_monomial_moment(kernel, idx, kernel.radial_profile);
    }
    return tensor_monomial_moment(kernel, idx);
}

// int |K(u)| du; both built-ins are non-negative so this equals 1, but the
// tail bound of the A constant needs the general value for user kernels.
inline double abs_integral(const Kernel& kernel) {
    if (kernel.radial_profile && kernel.dim >= 2) {
        auto abs_kr = [&](double r) { return std::abs(kernel.radial_profile(r)); };
        return radial_monomial_moment(kernel, std::vector<int>(kernel.dim, 0), abs_kr);
    }
    const double W = kernel.quadrature_halfwidth;
    const int d = kernel.dim;
    if (d == 1) {
        return integrate_1d([&](double u) { return std::abs(kernel.evaluate(Vector::Constant(1, u))); },
                            -W, W, QuadratureSpec{});
    }
    return integrate_nd(
        [&](const std::vector<double>& u) {
            Vector x(d);
            for (int j = 0; j < d; ++j) x(j) = u[static_cast<std::size_t>(j)];
            return std::abs(kernel.evaluate(x));
        },
        std::vector<double>(static_cast<std::size_t>(d), -W),
        std::vector<double>(static_cast<std::size_t>(d), W), QuadratureSpec{});
}

// Deterministic direction set on the unit sphere: sign pair (d = 1), equal
// angles (d = 2), spherical Fibonacci lattice (d = 3).
inline std::vector<Vector> unit_directions(int d, int count) {
    std::vector<Vector> dirs;
    if (d == 1) {
        dirs.push_back(Vector::Constant(1, 1.0));
        dirs.push_back(Vector::Constant(1, -1.0));
        return dirs;
    }
    if (d == 2) {
        dirs.reserve(static_cast<std::size_t>(count));
        for (int k = 0; k < count; ++k) {
            const double th = 2.0 * 3.14159265358979323846 * k / count;
            Vector v(2);
            v << std::cos(th), std::sin(th);
            dirs.push_back(std::move(v));
        }
        return dirs;
    }
    if (d == 3) {
        dirs.reserve(static_cast<std::size_t>(count));
        const double golden_angle = 2.39996322972865332;
        for (int k = 0; k < count; ++k) {
            const double z = 1.0 - 2.0 * (k + 0.5) / count;
            const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = golden_angle * k;
            Vector v(3);
            v << rho * std::cos(phi), rho * std::sin(phi), z;
            dirs.push_back(std::move(v));
        }
        return dirs;
    }
    throw std::invalid_argument("unit_directions: only d <= 3 supported for grid scans");
}

} // namespace detail

inline Kernel gaussian_kernel(int d) {
    if (d < 1) throw std::invalid_argument("gaussian_kernel: d must be >= 1");
    Kernel k;
    k.dim = d;
    k.name = "gaussian";
    k.claimed_order = 1;
    k.quadrature_halfwidth = 10.0;
    const double norm = std::pow(2.0 * 3.14159265358979323846, -0.5 * d);
    k.evaluate = [norm](const Vector& u) { return norm * std::exp(-0.5 * u.squaredNorm()); };
    k.fourier = [](const Vector& w) { return std::exp(-0.5 * w.squaredNorm()); };
    k.radial_profile = [norm](double r) { return norm * std::exp(-0.5 * r * r); };
    k.radial_profile_deriv = [norm](double r) { return -r * norm * std::exp(-0.5 * r * r); };
    k.derivative_evaluate = [norm, d](const std::vector<int>& idx, const Vector& u) {
        if (static_cast<int>(idx.size()) != d) {
            throw std::invalid_argument("gaussian derivative: multi-index length mismatch");
        }
        // d^n/dx^n exp(-x^2/2) = (-1)^n He_n(x) exp(-x^2/2), coordinatewise.
        double factor = 1.0;
        for (int j = 0; j < d; ++j) {
            const int n = idx[static_cast<std::size_t>(j)];
            if (n < 0) throw std::invalid_argument("gaussian derivative: negative index");
            if (n > 0) {
                factor *= (n % 2 == 0 ? 1.0 : -1.0) * detail::hermite_prob(n, u(j));
            }
        }
        return factor * norm * std::exp(-0.5 * u.squaredNorm());
    };
    return k;
}

inline double unit_ball_volume(int d) {
    return std::pow(3.14159265358979323846, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

inline Kernel epanechnikov_kernel(int d) {
    if (d < 1) throw std::invalid_argument("epanechnikov_kernel: d must be >= 1");
    Kernel k;
    k.dim = d;
    k.name = "epanechnikov";
    k.claimed_order = 1;
    k.quadrature_halfwidth = 1.0;
    const double c = 0.5 * (d + 2) / unit_ball_volume(d);
    k.evaluate = [c](const Vector& u) {
        const double s = u.squaredNorm();
        return s < 1.0 ? c * (1.0 - s) : 0.0;
    };
    k.radial_profile = [c](double r) { return r < 1.0 ? c * (1.0 - r * r) : 0.0; };
    // Closed at r = 1 (the inside limit) so that quadrature endpoints see the
    // one-sided value of the jump rather than 0.
    k.radial_profile_deriv = [c](double r) { return r <= 1.0 ? -2.0 * c * r : 0.0; };
    // K_F is radial; computed by quadrature of the radial transform
    //   K_F(s) = (2 pi)^{d/2} s^{1-d/2} int_0^1 k(r) r^{d/2} J_{d/2-1}(sr) dr
    // (cosine transform in d = 1). Values are memoized per |omega| because
    // grid scans revisit the same radius from many directions.
    auto memo = std::make_shared<std::map<double, double>>();
    auto memo_mutex = std::make_shared<std::mutex>();
    const int dim = d;
    k.fourier = [c, dim, memo, memo_mutex](const Vector& w) {
        // Quantize the radius so that grid scans hitting the same radius from
        // different directions (norms differing in the last ulp) share one
        // quadrature; the induced error is ~|K_F'| * 1e-12.
        const double s = std::nearbyint(w.norm() * 1e12) / 1e12;
        if (s < 1e-6) {
            // Second-order Taylor expansion K_F(s) = 1 - mu2 s^2/2 + O(s^4)
            // with mu2 = 1/(d+4); avoids cancellation near the origin.
            const double mu2 = 1.0 / (dim + 4);
            return 1.0 - 0.5 * mu2 * s * s;
        }
        {
            std::lock_guard<std::mutex> lock(*memo_mutex);
            auto it = memo->find(s);
            if (it != memo->end()) return it->second;
        }
        QuadratureSpec spec;
        spec.tol = 1e-10;
        double value = 0.0;
        if (dim == 1) {
            value = 2.0 * integrate_1d(
                              [&](double r) { return c * (1.0 - r * r) * std::cos(s * r); },
                              0.0, 1.0, spec);
        } else {
            const double nu = 0.5 * dim - 1.0;
            const double pref =
                std::pow(2.0 * 3.14159265358979323846, 0.5 * dim) * std::pow(s, 1.0 - 0.5 * dim);
            value = pref * integrate_1d(
                               [&](double r) {
                                   if (r == 0.0) return 0.0;
                                   return c * (1.0 - r * r) * std::pow(r, 0.5 * dim) *
                                          std::cyl_bessel_j(nu, s * r);
                               },
                               0.0, 1.0, spec);
        }
        std::lock_guard<std::mutex> lock(*memo_mutex);
        (*memo)[s] = value;
        return value;
    };
    k.derivative_evaluate = [c, d](const std::vector<int>& idx, const Vector& u) {
        if (static_cast<int>(idx.size()) != d) {
            throw std::invalid_argument("epanechnikov derivative: multi-index length mismatch");
        }
        const int order = detail::multi_index_order(idx);
        if (order == 0) {
            const double s = u.squaredNorm();
            return s < 1.0 ? c * (1.0 - s) : 0.0;
        }
        if (order > 1) {
            throw std::invalid_argument(
                "epanechnikov kernel has no square-integrable derivatives beyond order 1");
        }
        if (u.squaredNorm() > 1.0) return 0.0;
        for (int j = 0; j < d; ++j) {
            if (idx[static_cast<std::size_t>(j)] == 1) return -2.0 * c * u(j);
        }
        return 0.0;
    };
    return k;
}

/// Moment check of kernel order: int K = 1 and all mixed moments of total
/// degree 1..ell vanish (within 1e-8). Radially symmetric kernels in d >= 2
/// use exact angular reduction; everything else is tensor-grid quadrature.
inline OrderReport verify_order(const Kernel& kernel, int ell) {
    if (ell < 1) throw std::invalid_argument("verify_order: ell must be >= 1");
    OrderReport report;
    report.ell = ell;
    report.integral = detail::monomial_moment(kernel, std::vector<int>(kernel.dim, 0));
    report.passed = std::abs(report.integral - 1.0) <= 1e-8;
    // Enumerate multi-indices of total degree 1..ell.
    std::vector<int> idx(static_cast<std::size_t>(kernel.dim), 0);
    std::function<void(int, int)> enumerate = [&](int pos, int remaining) {
        if (pos == kernel.dim) {
            if (detail::multi_index_order(idx) >= 1) {
                const double m = detail::monomial_moment(kernel, idx);
                report.moments.emplace_back(idx, m);
                if (std::abs(m) > 1e-8) report.passed = false;
            }
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            idx[static_cast<std::size_t>(pos)] = v;
            enumerate(pos + 1, remaining - v);
        }
        idx[static_cast<std::size_t>(pos)] = 0;
    };
    enumerate(0, ell);
    return report;
}

/// Grid estimate of the order-beta kernel constant: the supremum of
/// |1 - K_F(omega)| / ||omega||^beta over the scan grid, combined with the
/// analytic tail bound |1 - K_F| <= 1 + int|K| which caps the ratio by
/// (1 + int|K|) / r_max^beta outside the scanned ball.
inline double estimate_A_constant(const Kernel& kernel, int beta,
                                  const AGridSpec& grid = {}) {
    if (beta < 1) throw std::invalid_argument("estimate_A_constant: beta must be >= 1");
    if (grid.r_min > 1e-3) {
        throw std::invalid_argument(
            "estimate_A_constant: grid must reach into a neighborhood of 0; "
            "the supremum is attained near the origin for smooth kernels");
    }
    if (grid.r_max <= grid.r_min || grid.n_radii < 2) {
        throw std::invalid_argument("estimate_A_constant: malformed radial grid");
    }
    const auto dirs = detail::unit_directions(kernel.dim, grid.n_directions);
    const double log_lo = std::log(grid.r_min);
    const double log_hi = std::log(grid.r_max);
    double sup = 0.0;
    for (int k = 0; k < grid.n_radii; ++k) {
        const double r =
            std::exp(log_lo + (log_hi - log_lo) * k / (grid.n_radii - 1.0));
        for (const Vector& dir : dirs) {
            const double ratio =
                std::abs(1.0 - kernel.fourier(Vector(r * dir))) / std::pow(r, beta);
            sup = std::max(sup, ratio);
        }
    }
    const double tail = (1.0 + detail::abs_integral(kernel)) / std::pow(grid.r_max, beta);
    return std::max(sup, tail);
}

/// The constant delivered by the covering argument, max(M1, 1 + M2) with
/// M1 the ratio supremum over the unit ball and M2 = int|K|. Reported
/// separately from the grid estimate; it is far from tight for smooth kernels.
inline double a_constant_proof_bound(const Kernel& kernel, int beta,
                                     const AGridSpec& grid = {}) {
    AGridSpec unit = grid;
    unit.r_max = 1.0;
    const auto dirs = detail::unit_directions(kernel.dim, unit.n_directions);
    const double log_lo = std::log(unit.r_min);
    double m1 = 0.0;
    for (int k = 0; k < unit.n_radii; ++k) {
        const double r = std::exp(log_lo + (0.0 - log_lo) * k / (unit.n_radii - 1.0));
        for (const Vector& dir : dirs) {
            m1 = std::max(m1, std::abs(1.0 - kernel.fourier(Vector(r * dir))) /
                                  std::pow(r, beta));
        }
    }
    return std::max(m1, 1.0 + detail::abs_integral(kernel));
}

/// L2 norms ||K|| and ||K^(m)|| for the requested multi-indices, plus R(K),
/// mu2(K) and the grid A constant at the kernel's claimed order.
inline KernelConstants kernel_l2_norms(const Kernel& kernel,
                                       const std::vector<std::vector<int>>& multi_indices = {}) {
    KernelConstants out;
    const int d = kernel.dim;
    const double W = kernel.quadrature_halfwidth;
    const bool radial = static_cast<bool>(kernel.radial_profile) && d >= 2;
    // The 1-D reductions converge at h^2 when an odd derivative survives at
    // r = 0 or at the support edge; a tighter tolerance here keeps the norms
    // accurate to ~1e-11 after the sphere-surface factor.
    QuadratureSpec tight;
    tight.tol = 1e-11;

    if (radial) {
        auto k2 = [&](double r) {
            const double v = kernel.radial_profile(r);
            return v * v;
        };
        out.R_K = detail::radial_monomial_moment(kernel, std::vector<int>(d, 0), k2, tight);
        std::vector<int> e1(static_cast<std::size_t>(d), 0);
        e1[0] = 2;
        out.mu2_K = detail::radial_monomial_moment(kernel, e1, kernel.radial_profile, tight);
    } else if (d == 1) {
        out.R_K = integrate_1d(
            [&](double u) {
                const double v = kernel.evaluate(Vector::Constant(1, u));
                return v * v;
            },
            -W, W, tight);
        out.mu2_K = integrate_1d(
            [&](double u) { return u * u * kernel.evaluate(Vector::Constant(1, u)); }, -W, W,
            tight);
    } else {
        auto to_vec = [d](const std::vector<double>& u) {
            Vector x(d);
            for (int j = 0; j < d; ++j) x(j) = u[static_cast<std::size_t>(j)];
            return x;
        };
        const std::vector<double> lo(static_cast<std::size_t>(d), -W);
        const std::vector<double> hi(static_cast<std::size_t>(d), W);
        out.R_K = integrate_nd(
            [&](const std::vector<double>& u) {
                const double v = kernel.evaluate(to_vec(u));
                return v * v;
            },
            lo, hi, QuadratureSpec{});
        out.mu2_K = integrate_nd(
            [&](const std::vector<double>& u) {
                return u[0] * u[0] * kernel.evaluate(to_vec(u));
            },
            lo, hi, QuadratureSpec{});
    }
    out.l2_norm = std::sqrt(out.R_K);

    for (const auto& idx : multi_indices) {
        if (static_cast<int>(idx.size()) != d) {
            throw std::invalid_argument("kernel_l2_norms: multi-index length mismatch");
        }
        const int order = detail::multi_index_order(idx);
        if (order == 0) {
            out.deriv_l2_norm[idx] = out.l2_norm;
            continue;
        }
        if (radial) {
            if (order > 1 || !kernel.radial_profile_deriv) {
                throw std::invalid_argument(
                    "kernel_l2_norms: radial reduction covers first derivatives only");
            }
            // grad K = k'(r) u/r, so int (d_j K)^2 = (1/d) S_{d-1} int k'(r)^2 r^{d-1} dr,
            // folded through the same angular-reduction helper.
            auto kp2 = [&](double r) {
                const double v = kernel.radial_profile_deriv(r);
                return v * v;
            };
            std::vector<int> zero(static_cast<std::size_t>(d), 0);
            out.deriv_l2_norm[idx] =
                std::sqrt(detail::radial_monomial_moment(kernel, zero, kp2, tight) / d);
            continue;
        }
        if (!kernel.derivative_evaluate) {
            throw std::invalid_argument("kernel_l2_norms: kernel lacks derivative_evaluate");
        }
        double sq = 0.0;
        if (d == 1) {
            sq = integrate_1d(
                [&](double u) {
                    const double v = kernel.derivative_evaluate(idx, Vector::Constant(1, u));
                    return v * v;
                },
                -W, W, tight);
        } else {
            sq = integrate_nd(
                [&](const std::vector<double>& u) {
                    Vector x(d);
                    for (int j = 0; j < d; ++j) x(j) = u[static_cast<std::size_t>(j)];
                    const double v = kernel.derivative_evaluate(idx, x);
                    return v * v;
                },
                std::vector<double>(static_cast<std::size_t>(d), -W),
                std::vector<double>(static_cast<std::size_t>(d), W), QuadratureSpec{});
        }
        out.deriv_l2_norm[idx] = std::sqrt(sq);
    }

    out.A = estimate_A_constant(kernel, kernel.claimed_order);
    return out;
}

inline nlohmann::json kernel_constants_to_json(const KernelConstants& c) {
    nlohmann::json j;
    j["A"] = c.A;
    j["l2_norm"] = c.l2_norm;
    j["R_K"] = c.R_K;
    j["mu2_K"] = c.mu2_K;
    j["deriv_norms"] = nlohmann::json::object();
    for (const auto& [idx, value] : c.deriv_l2_norm) {
        j["deriv_norms"][detail::multi_index_key(idx)] = value;
    }
    return j;
}

inline Kernel make_kernel(const std::string& name, int d) {
    if (name == "gaussian") return gaussian_kernel(d);
    if (name == "epanechnikov") return epanechnikov_kernel(d);
    throw std::invalid_argument("unknown kernel '" + name + "'");
}

} // namespace pfkde
