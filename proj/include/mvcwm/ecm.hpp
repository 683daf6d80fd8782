#pragma once

#include "mvcwm/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mvcwm {

/// sum_i log sum_g pi_g f(Y_i | X_i; g) f(X_i; g), via log-sum-exp.
/// Throws NumericalError naming (i, g) if a component density is not finite.
[[nodiscard]] double observed_loglik(const ThreeWayData& data, const ModelParams& params);

/// Responsibilities and conditional moments of W for both sides. Normal
/// sides get the placeholders l = m = 1, n = 0.
[[nodiscard]] LatentMoments e_step(const ThreeWayData& data, const ModelParams& params);

struct CmOptions {
    double ridge = 1e-8;
    /// Keep A = 0 (M and B then come from the m-weighted normal equations).
    bool freeze_skewness = false;
};

/// pi, then (M_X, A_X, Sigma_X) and (B, A_Y, Sigma_Y) with Psi held fixed.
[[nodiscard]] ModelParams cm_step1(const ThreeWayData& data, const LatentMoments& moments,
                                   const ModelParams& params_prev, const CmOptions& options = {});
/// Psi_X and Psi_Y given the locations, skewness and Sigma from cm_step1.
[[nodiscard]] ModelParams cm_step2(const ThreeWayData& data, const LatentMoments& moments,
                                   const ModelParams& params_after_cm1,
                                   const CmOptions& options = {});
/// Tail parameters of every skewed side.
[[nodiscard]] ModelParams cm_step3(const LatentMoments& moments, const ModelParams& params,
                                   std::vector<std::string>* notes = nullptr);

/// Starting responsibilities, `count` in total: k-means on the raw entries,
/// k-means on per-entry ranks (when distinct from the first), then random
/// soft partitions. G = 1 yields a single z = 1.
struct StartPoint {
    std::string label;
    Eigen::MatrixXd z;
};
[[nodiscard]] std::vector<StartPoint> starting_partitions(const ThreeWayData& data,
                                                          const ModelSpec& spec,
                                                          std::uint64_t seed, int count);

/// Parameters implied by responsibilities alone: one normal-style CM sweep
/// with A = 0, Psi = I and default tails.
[[nodiscard]] ModelParams params_from_responsibilities(const ThreeWayData& data,
                                                       const ModelSpec& spec,
                                                       const Eigen::MatrixXd& z, double ridge);

/// Iterates E, CM1, CM2, CM3 from `start` until the log-likelihood change
/// drops below tol or max_iter sweeps. No relabeling or gauge fixing.
[[nodiscard]] FitResult run_ecm(const ThreeWayData& data, const ModelParams& start,
                                const FitControls& controls);

/// Runs every start to convergence and returns the responsibilities of the
/// best one (largest final log-likelihood).
[[nodiscard]] LatentMoments initialize(const ThreeWayData& data, const ModelSpec& spec,
                                       const FitControls& controls);

/// Full estimator: all starts, best by log-likelihood, then components
/// ordered by M_X(0,0) (B(0,0) without covariates), gauge tr(Psi) = r, BIC.
[[nodiscard]] FitResult fit(const ThreeWayData& data, const ModelSpec& spec,
                            const FitControls& controls = {});

/// Orders components, permutes responsibilities and fixes the scale gauge.
void finalize_fit(FitResult& result, Eigen::Index n_obs);

/// Mixes a master seed with a task index (splitmix64).
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace mvcwm
