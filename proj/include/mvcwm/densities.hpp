#pragma once

#include "mvcwm/gig.hpp"
#include "mvcwm/specialfn.hpp"

#include <Eigen/Dense>

#include <string_view>
#include <variant>

namespace mvcwm {

enum class Family { Normal, SkewT, GeneralizedHyperbolic, VarianceGamma, NormalInverseGaussian };

inline constexpr Family kAllFamilies[] = {Family::Normal, Family::SkewT,
                                          Family::GeneralizedHyperbolic, Family::VarianceGamma,
                                          Family::NormalInverseGaussian};

struct NormalTail {};
struct SkewTTail {
    double nu = 10.0;
};
struct GhTail {
    double lambda = -0.5;
    double omega = 1.0;
};
struct VgTail {
    double gamma = 5.0;
};
struct NigTail {
    double kappa = 1.0;
};

/// Tail parameters; the active alternative determines the family.
using TailParams = std::variant<NormalTail, SkewTTail, GhTail, VgTail, NigTail>;

[[nodiscard]] Family family_of(const TailParams& tail);
[[nodiscard]] TailParams default_tail(Family family);
[[nodiscard]] bool is_skewed(Family family);
/// Number of free tail parameters (0, 1 or 2).
[[nodiscard]] int tail_count(Family family);
/// Short code used in reports: MVN, MVST, MVGH, MVVG, MVNIG.
[[nodiscard]] std::string_view family_code(Family family);
/// Inverse of family_code; throws ValidationError on unknown names.
[[nodiscard]] Family parse_family(std::string_view code);
/// Throws DomainError if a positivity constraint is violated.
void validate_tail(const TailParams& tail);

/// Matrix-variate law V = M + W A + sqrt(W) U, U ~ N(0, Sigma, Psi).
struct MatrixLaw {
    Eigen::MatrixXd M;
    Eigen::MatrixXd A;
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd psi;
    TailParams tail;

    [[nodiscard]] Family family() const { return family_of(tail); }
};

/// tr(Sigma^{-1} (V - M) Psi^{-1} (V - M)')
[[nodiscard]] double delta_quad(const Eigen::MatrixXd& V, const Eigen::MatrixXd& M,
                                const SpdFactor& sigma, const SpdFactor& psi);
/// tr(Sigma^{-1} A Psi^{-1} A')
[[nodiscard]] double rho_quad(const Eigen::MatrixXd& A, const SpdFactor& sigma,
                              const SpdFactor& psi);

[[nodiscard]] double mvn_log_density(const Eigen::MatrixXd& V, const MatrixLaw& law);
[[nodiscard]] double skewed_log_density(const Eigen::MatrixXd& V, const MatrixLaw& law);
/// Dispatches on the family.
[[nodiscard]] double log_density(const Eigen::MatrixXd& V, const MatrixLaw& law);

// ---- Building blocks shared with the estimator ----

/// Quadratic forms of one observation: delta, rho and the cross term
/// tau = tr(Sigma^{-1} (V - M) Psi^{-1} A').
struct Quads {
    double delta = 0.0;
    double rho = 0.0;
    double tau = 0.0;
};

/// Log density given the quadratic forms. `base` is
/// -(dr/2) ln 2pi - (r/2) ln|Sigma| - (d/2) ln|Psi|; dr = d * r.
[[nodiscard]] double log_density_from_quads(const TailParams& tail, int dr, double base,
                                            const Quads& q);

/// Part of the log density that depends on the tail parameters only.
[[nodiscard]] double tail_log_constant(const TailParams& tail);

/// Log density plus, for skewed families, the moments of W given V. Both
/// share one Bessel evaluation. `tail_const` is tail_log_constant(tail).
/// E(log W) costs four extra evaluations and is skipped unless requested.
[[nodiscard]] double evaluate_observation(const TailParams& tail, double tail_const, int dr,
                                          double base, const Quads& q, GigMoments* moments,
                                          bool want_log_moment);

/// Parameters (a, b, lambda) of the GIG law of W given V.
struct GigConditional {
    double a;
    double b;
    double lambda;
};
/// Only meaningful for skewed families.
[[nodiscard]] GigConditional conditional_gig(const TailParams& tail, int dr, double delta,
                                             double rho);

/// Quadratic forms for N residual matrices R_i = V_i - M_i stored side by
/// side in a d x (rN) matrix. Uses the dispatched SIMD kernels.
struct QuadBatch {
    Eigen::VectorXd delta;
    Eigen::VectorXd tau;
    double rho = 0.0;
};
[[nodiscard]] QuadBatch batch_quads(const Eigen::MatrixXd& residuals, const Eigen::MatrixXd& A,
                                    const SpdFactor& sigma, const SpdFactor& psi);

}  // namespace mvcwm
