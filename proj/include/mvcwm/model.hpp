#pragma once

#include "mvcwm/densities.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace mvcwm {

/// N paired observations: responses Y_i (p x r) and covariates X_i (q x r).
///
/// Stored side by side (Y is p x rN, X is q x rN) so per-component work can
/// be batched; X* prepends a row of ones to every X_i. q = 0 is allowed.
class ThreeWayData {
public:
    ThreeWayData() = default;
    ThreeWayData(const std::vector<Eigen::MatrixXd>& y, const std::vector<Eigen::MatrixXd>& x);
    ThreeWayData(Eigen::MatrixXd y_stack, Eigen::MatrixXd x_stack, Eigen::Index r);

    [[nodiscard]] Eigen::Index n() const { return n_; }
    [[nodiscard]] Eigen::Index p() const { return y_.rows(); }
    [[nodiscard]] Eigen::Index q() const { return x_.rows(); }
    [[nodiscard]] Eigen::Index r() const { return r_; }

    [[nodiscard]] const Eigen::MatrixXd& y_stack() const { return y_; }
    [[nodiscard]] const Eigen::MatrixXd& x_stack() const { return x_; }
    [[nodiscard]] const Eigen::MatrixXd& x_star_stack() const { return x_star_; }

    [[nodiscard]] Eigen::MatrixXd y(Eigen::Index i) const { return y_.middleCols(i * r_, r_); }
    [[nodiscard]] Eigen::MatrixXd x(Eigen::Index i) const { return x_.middleCols(i * r_, r_); }
    [[nodiscard]] Eigen::MatrixXd x_star(Eigen::Index i) const {
        return x_star_.middleCols(i * r_, r_);
    }

private:
    void finish();

    Eigen::MatrixXd y_;
    Eigen::MatrixXd x_;
    Eigen::MatrixXd x_star_;
    Eigen::Index r_ = 0;
    Eigen::Index n_ = 0;
};

/// One cluster-weighted model, or a mixture of regressions when `fmr` is set
/// (the covariate family is then ignored).
struct ModelSpec {
    Family covariate_family = Family::Normal;
    Family response_family = Family::Normal;
    int G = 1;
    int p = 1;
    int q = 1;
    int r = 1;
    bool fmr = false;

    /// "MVST-MVGH" style name (covariate first); "FMR-<response>" for mixtures of regressions.
    [[nodiscard]] std::string pair_name() const;
    /// Whether the covariate density enters the model.
    [[nodiscard]] bool models_covariates() const { return !fmr && q > 0; }
};

struct ComponentParams {
    double pi = 1.0;
    Eigen::MatrixXd M_X;      ///< q x r
    Eigen::MatrixXd A_X;      ///< q x r
    Eigen::MatrixXd Sigma_X;  ///< q x q
    Eigen::MatrixXd Psi_X;    ///< r x r
    TailParams tail_X;
    Eigen::MatrixXd B;        ///< p x (1 + q)
    Eigen::MatrixXd A_Y;      ///< p x r
    Eigen::MatrixXd Sigma_Y;  ///< p x p
    Eigen::MatrixXd Psi_Y;    ///< r x r
    TailParams tail_Y;
};

struct ModelParams {
    ModelSpec spec;
    std::vector<ComponentParams> components;
};

/// Responsibilities and per-(observation, component) moments of W on each side.
struct LatentMoments {
    Eigen::MatrixXd z;
    Eigen::MatrixXd l_X, m_X, n_X;
    Eigen::MatrixXd l_Y, m_Y, n_Y;
};

struct FitControls {
    int max_iter = 500;
    double tol = 1e-6;
    std::uint64_t seed = 1;
    double ridge = 1e-8;
    /// Total initializations: up to two k-means starts (raw and rank
    /// features), the rest soft random starts.
    int starts = 10;
    /// Keeps A = 0 throughout (used to check the normal reduction).
    bool freeze_skewness = false;
};

struct FitResult {
    ModelParams params;
    std::vector<double> loglik_trace;
    Eigen::MatrixXd responsibilities;
    std::vector<int> hard_labels;
    int n_iterations = 0;
    bool converged = false;
    double loglik = 0.0;
    int n_params = 0;
    double bic = 0.0;
    /// Which initialization won ("soft-3", "kmeans", ...).
    std::string start_label;
    /// Non-fatal events such as a tail root saturating at its bracket.
    std::vector<std::string> notes;
};

/// Checks dimensions, SPD scales, tail constraints and sum(pi) = 1.
void validate_params(const ModelParams& params);

/// New parameter set with the documented defaults (A = 0, identity scales,
/// default tails, equal weights).
[[nodiscard]] ModelParams default_params(const ModelSpec& spec);

}  // namespace mvcwm
