#pragma once

#include "mvcwm/model.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mvcwm {

/// Free parameters of a CWM or FMR; each (Sigma, Psi) pair counts one less
/// than its entries because of the scale gauge.
[[nodiscard]] int count_free_params(const ModelSpec& spec);

/// 2 loglik - n_params ln N (larger is better).
[[nodiscard]] double bic(double loglik, int n_params, Eigen::Index n_obs);

/// Pair-counting adjusted Rand index. Throws DimensionError on length mismatch.
[[nodiscard]] double adjusted_rand_index(const std::vector<int>& labels_a,
                                         const std::vector<int>& labels_b);

/// Element-wise mean squared error of B across replicates.
struct CoefficientMse {
    std::vector<Eigen::MatrixXd> mse;  ///< one p x (1 + q) matrix per component
    int used = 0;
    int excluded = 0;  ///< replicates with collapsed or missing components
};
/// Components of each estimate are put in the M_X(0,0) order (B(0,0)
/// without covariates) before comparison with the equally ordered truth.
[[nodiscard]] CoefficientMse mse_coefficients(const std::vector<ModelParams>& estimates,
                                              const ModelParams& truth);

struct SelectionEntry {
    std::string pair;
    int G = 0;
    bool fmr = false;
    bool ok = false;          ///< fit finished without error
    bool converged = false;
    double loglik = 0.0;
    double bic = 0.0;
    int n_params = 0;
    std::string error;
};

/// Per-model summary of a grid fit; `best` indexes the converged entry with
/// the largest BIC, or -1 if none converged.
struct SelectionReport {
    std::vector<SelectionEntry> entries;
    int best = -1;
};

/// Fills `best` according to the rule above.
void pick_best(SelectionReport& report);

/// Component order used for labeling (by M_X(0,0), ties by M_X(0,1)).
[[nodiscard]] std::vector<std::size_t> labeling_order(const ModelParams& params);

}  // namespace mvcwm
