#include "mvcwm/densities.hpp"
#include "mvcwm/ecm.hpp"
#include "mvcwm/evaluate.hpp"
#include "mvcwm/fmr.hpp"
#include "mvcwm/simulate.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace mvcwm;
using Eigen::MatrixXd;

namespace {

// Covariate groups apart, one regression shared by every group.
ModelParams covariate_only_truth(double shift, std::mt19937_64& rng) {
    ModelParams t = support::small_truth(Family::Normal, Family::Normal, 2, 2, 2, 2, shift, rng);
    for (auto& c : t.components) {
        c.B = t.components[0].B;
        c.Sigma_Y = t.components[0].Sigma_Y;
        c.Psi_Y = t.components[0].Psi_Y;
    }
    return t;
}

}  // namespace

TEST_CASE("spec conversion") {
    const ModelSpec s = to_model_spec(FmrSpec{Family::SkewT, 3, 2, 4, 5});
    CHECK(s.fmr);
    CHECK_FALSE(s.models_covariates());
    CHECK(s.pair_name() == "FMR-MVST");
    CHECK(s.G == 3);
    CHECK(s.q == 4);
}

TEST_CASE("single normal component is a GLS regression at its fixed point") {
    std::mt19937_64 rng(31);
    const ModelParams t = support::small_truth(Family::Normal, Family::Normal, 1, 2, 2, 3, 0, rng);
    const SimulatedData sim = sample_cwm(t, 120, 32);
    FitControls c;
    c.tol = 1e-10;
    const FitResult r = fit_fmr(sim.data, FmrSpec{Family::Normal, 1, 2, 2, 3}, c);
    CHECK(r.converged);
    const MatrixXd psi_inv = r.params.components[0].Psi_Y.inverse();
    MatrixXd num = MatrixXd::Zero(2, 3), den = MatrixXd::Zero(3, 3);
    for (Eigen::Index i = 0; i < 120; ++i) {
        num += sim.data.y(i) * psi_inv * sim.data.x_star(i).transpose();
        den += sim.data.x_star(i) * psi_inv * sim.data.x_star(i).transpose();
    }
    const MatrixXd gls = num * den.inverse();
    CHECK((r.params.components[0].B - gls).cwiseAbs().maxCoeff() < 1e-5);
    for (std::size_t k = 1; k < r.loglik_trace.size(); ++k) {
        CHECK(r.loglik_trace[k] >= r.loglik_trace[k - 1] - 1e-8);
    }
}

TEST_CASE("FMR likelihood drops the covariate marginal when it is shared") {
    std::mt19937_64 rng(33);
    for (Family resp : kAllFamilies) {
        ModelParams cwm = support::small_truth(Family::VarianceGamma, resp, 3, 2, 2, 2, 1.0, rng);
        for (auto& c : cwm.components) {
            c.M_X = cwm.components[0].M_X;
            c.A_X = cwm.components[0].A_X;
            c.Sigma_X = cwm.components[0].Sigma_X;
            c.Psi_X = cwm.components[0].Psi_X;
            c.tail_X = cwm.components[0].tail_X;
        }
        const SimulatedData sim = sample_cwm(cwm, 40, 34);
        ModelParams fmr = cwm;
        fmr.spec.fmr = true;
        const auto& c0 = cwm.components[0];
        double marginal = 0.0;
        for (Eigen::Index i = 0; i < 40; ++i) {
            marginal += log_density(sim.data.x(i), {c0.M_X, c0.A_X, c0.Sigma_X, c0.Psi_X, c0.tail_X});
        }
        CHECK(observed_loglik(sim.data, fmr) ==
              doctest::Approx(observed_loglik(sim.data, cwm) - marginal).epsilon(1e-12));
    }
}

TEST_CASE("covariate-only structure: FMR sees one group, CWM sees two") {
    std::mt19937_64 rng(35);
    const ModelParams t = covariate_only_truth(8.0, rng);
    const SimulatedData sim = sample_cwm(t, 200, 36);
    FitControls c;
    c.starts = 4;
    double best_fmr = -INFINITY, best_cwm = -INFINITY;
    int g_fmr = 0, g_cwm = 0;
    std::vector<int> cwm_labels;
    for (int G = 1; G <= 3; ++G) {
        const FitResult f = fit_fmr(sim.data, FmrSpec{Family::Normal, G, 2, 2, 2}, c);
        if (f.bic > best_fmr) {
            best_fmr = f.bic;
            g_fmr = G;
        }
        ModelSpec s = t.spec;
        s.G = G;
        const FitResult w = fit(sim.data, s, c);
        if (w.bic > best_cwm) {
            best_cwm = w.bic;
            g_cwm = G;
            cwm_labels = w.hard_labels;
        }
    }
    CHECK(g_fmr == 1);
    CHECK(g_cwm == 2);
    CHECK(adjusted_rand_index(cwm_labels, sim.labels) > 0.9);
}
