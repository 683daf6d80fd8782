#pragma once

#include "mvcwm/model.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace mvcwm {

/// One draw of the mixing variable W for a family (W = 1 for Normal):
/// SkewT inverse-gamma(nu/2, nu/2), GH GIG(omega, omega, lambda),
/// VG gamma(gamma, rate gamma), NIG GIG(kappa^2, 1, -1/2).
[[nodiscard]] double draw_mixing(const TailParams& tail, std::mt19937_64& rng);

/// Log density of the mixing law at w > 0 (Normal has none; throws DomainError).
[[nodiscard]] double mixing_log_pdf(double w, const TailParams& tail);

/// One draw V = M + W A + sqrt(W) U with U matrix-normal(0, Sigma, Psi).
[[nodiscard]] Eigen::MatrixXd draw_matrix(const MatrixLaw& law, std::mt19937_64& rng);

struct SimulatedData {
    ThreeWayData data;
    std::vector<int> labels;  ///< generating component of each observation
};

/// N observations from a CWM; bitwise reproducible for a fixed seed.
[[nodiscard]] SimulatedData sample_cwm(const ModelParams& truth, Eigen::Index N,
                                       std::uint64_t seed);

enum class Separation { Close, Far };

struct Scenario {
    std::string name;  ///< e.g. "MVVG-MVVG_N500_far"
    ModelSpec spec;
    ModelParams truth;
    int N = 0;
    Separation separation = Separation::Far;
    std::uint64_t seed = 0;
};

/// Three-component truth with p = q = 3, r = 4 shared by the recovery and
/// classification designs: M_X of components 2 and 3 are the base location
/// shifted by -c and +c. Equal mixing proportions.
[[nodiscard]] ModelParams reference_truth(Family covariate, Family response, double c);

/// MVVG-MVVG, MVGH-MVST, MVNIG-MVN, MVN-MVGH x N in {200, 500} x {close, far}.
[[nodiscard]] std::vector<Scenario> builtin_scenarios();
/// Looks a scenario up by name; throws ValidationError if unknown.
[[nodiscard]] Scenario find_scenario(const std::string& name);

/// Z -> Z + exp(eps Z) on every entry of Y and X. Throws NumericalError
/// naming the cell if eps Z > 700.
[[nodiscard]] ThreeWayData skew_transform(const ThreeWayData& data, double epsilon);

// ---- studies ----

struct RecoveryReport {
    std::string scenario;
    int replicates = 0;
    int failed = 0;  ///< replicates whose fit threw
    std::vector<Eigen::MatrixXd> mse;  ///< per component, p x (1 + q)
    int used = 0;
    int excluded = 0;
};

/// Simulates `replicates` datasets from the scenario, fits the generating
/// spec with its G and reports the MSE of B.
[[nodiscard]] RecoveryReport recovery_study(const Scenario& scenario, int replicates,
                                            std::uint64_t seed, const FitControls& controls,
                                            int jobs = 1);

struct ClassificationConfig {
    double epsilon = 0.6;
    int replicates = 10;
    std::vector<std::pair<Family, Family>> specs;
    std::uint64_t seed = 1;
    int N = 200;
    double separation = 30.0;
    int g_min = 1;
    int g_max = 4;
    FitControls controls;
    int jobs = 1;
};

struct ClassificationRow {
    std::string pair;
    std::vector<int> selected_g;     ///< per replicate, 0 if every fit failed
    std::vector<double> best_ari;    ///< per replicate
    std::vector<int> selection_counts;  ///< index k counts G = g_min + k
    double mean_ari = 0.0;
    int failed_fits = 0;
};

struct ClassificationReport {
    double epsilon = 0.0;
    int replicates = 0;
    int true_g = 3;
    int g_min = 1;
    int g_max = 4;
    std::vector<ClassificationRow> rows;
};

/// MVN-MVN data (c = -/+ separation, N observations), skewed by Z + exp(eps Z),
/// fitted for every spec and G, best G by BIC; reports selection counts and
/// mean ARI of the selected fits.
[[nodiscard]] ClassificationReport classification_study(const ClassificationConfig& config);

}  // namespace mvcwm
