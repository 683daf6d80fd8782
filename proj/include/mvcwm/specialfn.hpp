#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace mvcwm {

// ---- Modified Bessel function of the third kind, log scale ----

/// log K_order(arg). Any real order, arg > 0. Never forms K itself, so it
/// stays finite for arg up to 1e4 and |order| up to 1e3 and beyond.
/// Throws DomainError for arg <= 0.
[[nodiscard]] double log_bessel_k(double order, double arg);

/// log K at three consecutive orders, sharing one evaluation.
struct LogBesselKTriple {
    double minus;  ///< log K_{order-1}(arg)
    double center; ///< log K_{order}(arg)
    double plus;   ///< log K_{order+1}(arg)
};
[[nodiscard]] LogBesselKTriple log_bessel_k_triple(double order, double arg);

/// d/d(order) log K_order(arg) by central differences of log(e^arg K) with
/// two Richardson levels; step h = 0.01 max(1, |order| / 50). Odd in order,
/// zero at order 0.
[[nodiscard]] double dlog_bessel_k_dorder(double order, double arg);

/// psi(x) for x > 0. Throws DomainError otherwise.
[[nodiscard]] double digamma(double x);

/// log Gamma(x) for x > 0 (reentrant, unlike std::lgamma on glibc).
[[nodiscard]] double log_gamma(double x);

// ---- Symmetric positive-definite factorization ----

/// Cholesky factor of an SPD matrix, A = L L'.
///
/// Exposes the log-determinant and solves against A as well as one-sided
/// whitening with L, which is all the densities and CM-steps need.
class SpdFactor {
public:
    SpdFactor() = default;

    [[nodiscard]] Eigen::Index dim() const { return lower_.rows(); }
    [[nodiscard]] double logdet() const { return logdet_; }
    [[nodiscard]] const Eigen::MatrixXd& lower() const { return lower_; }

    /// A^{-1} B
    [[nodiscard]] Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
    /// L^{-1} B
    [[nodiscard]] Eigen::MatrixXd whiten_left(const Eigen::MatrixXd& rhs) const;
    /// B L^{-T}
    [[nodiscard]] Eigen::MatrixXd whiten_right(const Eigen::MatrixXd& rhs) const;
    /// Reconstructs A = L L'.
    [[nodiscard]] Eigen::MatrixXd matrix() const;

private:
    friend SpdFactor spd_factorize(const Eigen::MatrixXd& matrix);
    Eigen::MatrixXd lower_;
    double logdet_ = 0.0;
};

/// Factorizes a symmetric (within 1e-8, relative) positive-definite matrix.
/// Throws SingularMatrixError carrying the first non-positive pivot.
[[nodiscard]] SpdFactor spd_factorize(const Eigen::MatrixXd& matrix);

}  // namespace mvcwm
