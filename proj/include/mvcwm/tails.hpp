#pragma once

#include "mvcwm/densities.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mvcwm {

/// Root of a tail equation; `saturated` when the bracket held no sign change
/// and the nearer bound was returned. log x - psi(x) is strictly decreasing,
/// so the nu and gamma equations have at most one root.
struct RootResult {
    double value = 0.0;
    bool saturated = false;
};

inline constexpr double kTailLower = 0.01;
inline constexpr double kTailUpper = 400.0;

/// Solves log(nu/2) + 1 - psi(nu/2) - S = 0 on [0.01, 400], where
/// S = sum z (m + n) / sum z. Throws NumericalError on non-finite S.
[[nodiscard]] RootResult update_nu(double s_stat);
[[nodiscard]] RootResult update_nu(const Eigen::VectorXd& z, const Eigen::VectorXd& m,
                                   const Eigen::VectorXd& n);

/// Solves log(gamma) + 1 - psi(gamma) + n_bar - l_bar = 0 on [0.01, 400].
[[nodiscard]] RootResult update_gamma(double l_bar, double n_bar);

/// kappa = 1 / l_bar.
[[nodiscard]] double update_kappa(double l_bar);

/// Expected complete-data tail term of the GH mixing law per unit weight:
/// -log K_lambda(omega) + (lambda - 1) n_bar - omega (l_bar + m_bar) / 2.
[[nodiscard]] double gh_tail_objective(double lambda, double omega, double l_bar, double m_bar,
                                       double n_bar);

struct GhUpdate {
    double lambda = 0.0;
    double omega = 1.0;
    bool lambda_kept = false;  ///< order derivative vanished or no improving step
    bool omega_kept = false;   ///< Newton step rejected
};

/// Lambda by the fixed-point step lambda n_bar / (d/ds log K_s(omega)),
/// halved back toward the previous value while it does not improve the
/// objective; then one safeguarded Newton step in omega, clamped to
/// [1e-4, 1e4].
[[nodiscard]] GhUpdate update_gh(double lambda_prev, double omega_prev, double l_bar,
                                 double m_bar, double n_bar);

/// Applies the family-specific update for one side of one component.
/// `z`, `l`, `m`, `n` are the component's responsibility column and the
/// side's moment columns. Saturation and rejected steps are appended to `notes`.
[[nodiscard]] TailParams update_tail(const TailParams& prev, const Eigen::VectorXd& z,
                                     const Eigen::VectorXd& l, const Eigen::VectorXd& m,
                                     const Eigen::VectorXd& n, std::vector<std::string>* notes);

}  // namespace mvcwm
