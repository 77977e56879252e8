#pragma once

#include <cmath>
#include <Eigen/Dense>

#include "pfkde/common.hpp"
#include "pfkde/rng.hpp"

namespace pfkde {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Lower-triangular Cholesky factor of a symmetric positive SEMI-definite
// matrix. Zero pivots (within tolerance) are allowed so that degenerate
// covariances (Q = 0, Sigma0 = 0) remain usable for sampling; a pivot that
// is genuinely negative throws. For strictly PD input this is the ordinary
// Cholesky factor.
inline Matrix psd_cholesky(const Matrix& s, double rel_tol = 1e-12) {
    const int d = static_cast<int>(s.rows());
    if (s.cols() != d) throw std::invalid_argument("psd_cholesky: matrix not square");
    if (!s.isApprox(s.transpose(), 1e-9)) {
        throw std::invalid_argument("psd_cholesky: matrix not symmetric");
    }
    double scale = 1.0;
    for (int i = 0; i < d; ++i) scale = std::max(scale, std::abs(s(i, i)));
    const double tol = rel_tol * scale;
    Matrix L = Matrix::Zero(d, d);
    for (int j = 0; j < d; ++j) {
        double diag = s(j, j);
        for (int k = 0; k < j; ++k) diag -= L(j, k) * L(j, k);
        if (diag < -tol) {
            throw numerical_error("psd_cholesky: matrix not positive semi-definite");
        }
        if (diag <= tol) {
            // Rank-deficient direction: the whole column must vanish for a
            // valid PSD matrix, so record an exact zero.
            L(j, j) = 0.0;
            continue;
        }
        L(j, j) = std::sqrt(diag);
        for (int i = j + 1; i < d; ++i) {
            double off = s(i, j);
            for (int k = 0; k < j; ++k) off -= L(i, k) * L(j, k);
            L(i, j) = off / L(j, j);
        }
    }
    return L;
}

inline bool chol_is_positive_definite(const Matrix& L) {
    for (int i = 0; i < L.rows(); ++i) {
        if (L(i, i) <= 0.0) return false;
    }
    return true;
}

// log N(x; mu, L L^T); requires a strictly PD factor.
inline double mvn_logpdf(const Vector& x, const Vector& mu, const Matrix& chol_L) {
    const int d = static_cast<int>(x.size());
    if (!chol_is_positive_definite(chol_L)) {
        throw numerical_error("mvn_logpdf: singular covariance");
    }
    double logdet = 0.0;
    for (int i = 0; i < d; ++i) logdet += std::log(chol_L(i, i));
    const Vector z = chol_L.triangularView<Eigen::Lower>().solve(x - mu);
    return -0.5 * (d * 1.8378770664093454836 + z.squaredNorm()) - logdet;
}

// Draw from N(mu, L L^T) given the (possibly rank-deficient) factor L.
inline Vector sample_mvn(const Vector& mu, const Matrix& chol_L, RngStream& rng) {
    Vector z(mu.size());
    for (int i = 0; i < z.size(); ++i) z(i) = rng.normal();
    return mu + chol_L * z;
}

} // namespace pfkde
