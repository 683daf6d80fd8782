#include "mvcwm/simulate.hpp"

#include "mvcwm/ecm.hpp"
#include "mvcwm/errors.hpp"
#include "mvcwm/evaluate.hpp"
#include "mvcwm/gig.hpp"
#include "mvcwm/parallel.hpp"
#include "mvcwm/specialfn.hpp"

#include <cmath>
#include <optional>
#include <string>

namespace mvcwm {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;

double uniform_open(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

MatrixXd base_location() {
    MatrixXd m(3, 4);
    m << 2.0, 0.0, 1.0, 2.0,  //
        4.0, 2.0, 2.0, 3.0,   //
        -1.0, -1.0, -2.0, -1.0;
    return m;
}

MatrixXd reference_b() {
    MatrixXd b(3, 4);
    b << 8.0, 0.5, 1.0, 1.5,  //
        1.0, 1.0, 0.5, 1.5,   //
        4.0, 1.0, 1.0, 1.5;
    return b;
}

MatrixXd reference_skewness() {
    MatrixXd a(3, 4);
    a << 1.5, 1.0, 1.0, 1.0,  //
        1.5, 1.0, -1.0, -1.0,  //
        -1.0, 1.0, 1.5, 1.5;
    return a;
}

MatrixXd reference_row_scale() {
    MatrixXd s(3, 3);
    s << 1.0, 0.8, 0.64,  //
        0.8, 1.0, 0.8,    //
        0.64, 0.8, 1.0;
    return s;
}

MatrixXd reference_col_scale() {
    MatrixXd s(4, 4);
    s << 1.5, 0.9, 0.54, 0.32,  //
        0.9, 1.5, 0.9, 0.54,    //
        0.54, 0.9, 1.5, 0.9,    //
        0.32, 0.54, 0.9, 1.5;
    return s;
}

// Truth values of the tail parameters in the recovery design.
TailParams reference_tail(Family f) {
    switch (f) {
        case Family::Normal:
            return NormalTail{};
        case Family::SkewT:
            return SkewTTail{10.0};
        case Family::GeneralizedHyperbolic:
            return GhTail{-0.5, 3.0};
        case Family::VarianceGamma:
            return VgTail{7.0};
        case Family::NormalInverseGaussian:
            return NigTail{1.2};
    }
    return NormalTail{};
}

}  // namespace

double draw_mixing(const TailParams& tail, std::mt19937_64& rng) {
    switch (family_of(tail)) {
        case Family::Normal:
            return 1.0;
        case Family::SkewT: {
            const double nu = std::get<SkewTTail>(tail).nu;
            return gig_draw(0.0, nu, -0.5 * nu, rng);
        }
        case Family::GeneralizedHyperbolic: {
            const auto& t = std::get<GhTail>(tail);
            return gig_draw(t.omega, t.omega, t.lambda, rng);
        }
        case Family::VarianceGamma: {
            const double g = std::get<VgTail>(tail).gamma;
            return gig_draw(2.0 * g, 0.0, g, rng);
        }
        case Family::NormalInverseGaussian: {
            const double k = std::get<NigTail>(tail).kappa;
            return gig_draw(k * k, 1.0, -0.5, rng);
        }
    }
    return 1.0;
}

double mixing_log_pdf(double w, const TailParams& tail) {
    if (!(w > 0.0)) {
        throw DomainError("mixing density evaluated at non-positive w");
    }
    switch (family_of(tail)) {
        case Family::Normal:
            break;
        case Family::SkewT: {
            const double a = 0.5 * std::get<SkewTTail>(tail).nu;
            return a * std::log(a) - log_gamma(a) - (a + 1.0) * std::log(w) - a / w;
        }
        case Family::GeneralizedHyperbolic: {
            const auto& t = std::get<GhTail>(tail);
            return gig_log_pdf(w, GigParams{t.omega, t.omega, t.lambda});
        }
        case Family::VarianceGamma: {
            const double g = std::get<VgTail>(tail).gamma;
            return g * std::log(g) - log_gamma(g) + (g - 1.0) * std::log(w) - g * w;
        }
        case Family::NormalInverseGaussian: {
            const double k = std::get<NigTail>(tail).kappa;
            return gig_log_pdf(w, GigParams{k * k, 1.0, -0.5});
        }
    }
    throw DomainError("the normal family has no mixing density");
}

MatrixXd draw_matrix(const MatrixLaw& law, std::mt19937_64& rng) {
    const SpdFactor sigma = spd_factorize(law.sigma);
    const SpdFactor psi = spd_factorize(law.psi);
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd z(law.M.rows(), law.M.cols());
    for (Index j = 0; j < z.cols(); ++j) {
        for (Index i = 0; i < z.rows(); ++i) {
            z(i, j) = normal(rng);
        }
    }
    const MatrixXd u = sigma.lower() * z * psi.lower().transpose();
    const double w = draw_mixing(law.tail, rng);
    MatrixXd v = law.M + std::sqrt(w) * u;
    if (law.family() != Family::Normal) {
        v += w * law.A;
    }
    return v;
}

SimulatedData sample_cwm(const ModelParams& truth, Index N, std::uint64_t seed) {
    validate_params(truth);
    const ModelSpec& spec = truth.spec;
    if (N < 1) {
        throw ValidationError("sample size must be positive");
    }
    std::mt19937_64 rng(seed);
    std::vector<MatrixLaw> x_laws;
    std::vector<MatrixLaw> y_laws;
    for (const auto& c : truth.components) {
        x_laws.push_back({c.M_X, c.A_X, c.Sigma_X, c.Psi_X, c.tail_X});
        y_laws.push_back({MatrixXd(), c.A_Y, c.Sigma_Y, c.Psi_Y, c.tail_Y});
    }
    MatrixXd y_stack(spec.p, spec.r * N);
    MatrixXd x_stack(spec.q, spec.r * N);
    SimulatedData out;
    out.labels.resize(static_cast<std::size_t>(N));
    for (Index i = 0; i < N; ++i) {
        double u = uniform_open(rng);
        std::size_t g = 0;
        while (g + 1 < truth.components.size() && u > truth.components[g].pi) {
            u -= truth.components[g].pi;
            ++g;
        }
        out.labels[static_cast<std::size_t>(i)] = static_cast<int>(g);
        const ComponentParams& c = truth.components[g];
        MatrixXd x_star = MatrixXd::Ones(1 + spec.q, spec.r);
        if (spec.q > 0) {
            const MatrixXd x = draw_matrix(x_laws[g], rng);
            x_stack.middleCols(i * spec.r, spec.r) = x;
            x_star.bottomRows(spec.q) = x;
        }
        MatrixLaw& yl = y_laws[g];
        yl.M = c.B * x_star;
        y_stack.middleCols(i * spec.r, spec.r) = draw_matrix(yl, rng);
    }
    out.data = ThreeWayData(std::move(y_stack), std::move(x_stack), spec.r);
    return out;
}

ModelParams reference_truth(Family covariate, Family response, double c) {
    ModelSpec spec;
    spec.covariate_family = covariate;
    spec.response_family = response;
    spec.G = 3;
    spec.p = 3;
    spec.q = 3;
    spec.r = 4;
    ModelParams truth;
    truth.spec = spec;
    const double shifts[3] = {0.0, -c, c};
    for (double shift : shifts) {
        ComponentParams comp;
        comp.pi = 1.0 / 3.0;
        comp.M_X = base_location().array() + shift;
        comp.A_X = covariate == Family::Normal ? MatrixXd::Zero(3, 4) : reference_skewness();
        comp.Sigma_X = reference_row_scale();
        comp.Psi_X = reference_col_scale();
        comp.tail_X = reference_tail(covariate);
        comp.B = reference_b();
        comp.A_Y = response == Family::Normal ? MatrixXd::Zero(3, 4) : reference_skewness();
        comp.Sigma_Y = reference_row_scale();
        comp.Psi_Y = reference_col_scale();
        comp.tail_Y = reference_tail(response);
        truth.components.push_back(std::move(comp));
    }
    return truth;
}

std::vector<Scenario> builtin_scenarios() {
    const std::pair<Family, Family> pairs[] = {
        {Family::VarianceGamma, Family::VarianceGamma},
        {Family::GeneralizedHyperbolic, Family::SkewT},
        {Family::NormalInverseGaussian, Family::Normal},
        {Family::Normal, Family::GeneralizedHyperbolic},
    };
    std::vector<Scenario> out;
    std::uint64_t index = 0;
    for (const auto& [cov, resp] : pairs) {
        for (int n : {200, 500}) {
            for (Separation sep : {Separation::Close, Separation::Far}) {
                Scenario s;
                s.truth = reference_truth(cov, resp, sep == Separation::Close ? 3.0 : 10.0);
                s.spec = s.truth.spec;
                s.N = n;
                s.separation = sep;
                s.seed = derive_seed(20240601, index++);
                s.name = s.spec.pair_name() + "_N" + std::to_string(n) +
                         (sep == Separation::Close ? "_close" : "_far");
                out.push_back(std::move(s));
            }
        }
    }
    return out;
}

Scenario find_scenario(const std::string& name) {
    for (auto& s : builtin_scenarios()) {
        if (s.name == name) {
            return s;
        }
    }
    throw ValidationError("unknown scenario '" + name + "'");
}

ThreeWayData skew_transform(const ThreeWayData& data, double epsilon) {
    if (!(epsilon > 0.0)) {
        throw ValidationError("skewing transform needs epsilon > 0");
    }
    auto apply = [&](const MatrixXd& s, const char* block) {
        MatrixXd out = s;
        for (Index j = 0; j < s.cols(); ++j) {
            for (Index i = 0; i < s.rows(); ++i) {
                const double e = epsilon * s(i, j);
                if (e > 700.0) {
                    throw NumericalError(std::string("skewing transform overflows at block ") +
                                             block + ", observation " +
                                             std::to_string(j / data.r()) + ", row " +
                                             std::to_string(i) + ", col " +
                                             std::to_string(j % data.r()),
                                         static_cast<std::size_t>(j / data.r()));
                }
                out(i, j) = s(i, j) + std::exp(e);
            }
        }
        return out;
    };
    return ThreeWayData(apply(data.y_stack(), "Y"), apply(data.x_stack(), "X"), data.r());
}

RecoveryReport recovery_study(const Scenario& scenario, int replicates, std::uint64_t seed,
                              const FitControls& controls, int jobs) {
    if (replicates < 1) {
        throw ValidationError("need at least one replicate");
    }
    std::vector<std::optional<ModelParams>> fits(static_cast<std::size_t>(replicates));
    parallel_for(fits.size(), jobs, [&](std::size_t k) {
        const std::uint64_t data_seed = derive_seed(seed, k);
        const SimulatedData sim = sample_cwm(scenario.truth, scenario.N, data_seed);
        FitControls c = controls;
        c.seed = derive_seed(data_seed, 1);
        try {
            fits[k] = fit(sim.data, scenario.spec, c).params;
        } catch (const Error&) {
        }
    });
    RecoveryReport rep;
    rep.scenario = scenario.name;
    rep.replicates = replicates;
    std::vector<ModelParams> ok;
    for (auto& f : fits) {
        if (f) {
            ok.push_back(std::move(*f));
        } else {
            ++rep.failed;
        }
    }
    const CoefficientMse mse = mse_coefficients(ok, scenario.truth);
    rep.mse = mse.mse;
    rep.used = mse.used;
    rep.excluded = mse.excluded + rep.failed;
    return rep;
}

ClassificationReport classification_study(const ClassificationConfig& config) {
    if (config.replicates < 1) {
        throw ValidationError("need at least one replicate");
    }
    if (config.specs.empty()) {
        throw ValidationError("classification study needs at least one model pair");
    }
    if (config.g_min < 1 || config.g_max < config.g_min) {
        throw ValidationError("invalid G range");
    }
    const ModelParams truth = reference_truth(Family::Normal, Family::Normal, config.separation);
    const auto n_rep = static_cast<std::size_t>(config.replicates);
    const std::size_t n_spec = config.specs.size();
    const auto n_g = static_cast<std::size_t>(config.g_max - config.g_min + 1);

    std::vector<SimulatedData> datasets(n_rep);
    for (std::size_t k = 0; k < n_rep; ++k) {
        SimulatedData sim = sample_cwm(truth, config.N, derive_seed(config.seed, k));
        sim.data = skew_transform(sim.data, config.epsilon);
        datasets[k] = std::move(sim);
    }

    struct Outcome {
        bool ok = false;
        bool converged = false;
        double bic = 0.0;
        std::vector<int> labels;
    };
    std::vector<Outcome> outcomes(n_rep * n_spec * n_g);
    parallel_for(outcomes.size(), config.jobs, [&](std::size_t t) {
        const std::size_t k = t / (n_spec * n_g);
        const std::size_t s = (t / n_g) % n_spec;
        const std::size_t gi = t % n_g;
        ModelSpec spec;
        spec.covariate_family = config.specs[s].first;
        spec.response_family = config.specs[s].second;
        spec.G = config.g_min + static_cast<int>(gi);
        spec.p = 3;
        spec.q = 3;
        spec.r = 4;
        FitControls c = config.controls;
        c.seed = derive_seed(derive_seed(config.seed, k), 1000 + s * 16 + gi);
        try {
            FitResult r = fit(datasets[k].data, spec, c);
            outcomes[t] = {true, r.converged, r.bic, std::move(r.hard_labels)};
        } catch (const Error&) {
        }
    });

    ClassificationReport rep;
    rep.epsilon = config.epsilon;
    rep.replicates = config.replicates;
    rep.g_min = config.g_min;
    rep.g_max = config.g_max;
    for (std::size_t s = 0; s < n_spec; ++s) {
        ClassificationRow row;
        row.pair = std::string(family_code(config.specs[s].first)) + "-" +
                   std::string(family_code(config.specs[s].second));
        row.selection_counts.assign(n_g, 0);
        double ari_sum = 0.0;
        for (std::size_t k = 0; k < n_rep; ++k) {
            int best = -1;
            bool best_converged = false;
            for (std::size_t gi = 0; gi < n_g; ++gi) {
                const Outcome& o = outcomes[(k * n_spec + s) * n_g + gi];
                if (!o.ok) {
                    ++row.failed_fits;
                    continue;
                }
                // Converged fits take precedence over ones that hit max_iter.
                const bool better =
                    best < 0 || (o.converged && !best_converged) ||
                    (o.converged == best_converged &&
                     o.bic > outcomes[(k * n_spec + s) * n_g + static_cast<std::size_t>(best)].bic);
                if (better) {
                    best = static_cast<int>(gi);
                    best_converged = o.converged;
                }
            }
            if (best < 0) {
                row.selected_g.push_back(0);
                row.best_ari.push_back(0.0);
                continue;
            }
            const Outcome& o = outcomes[(k * n_spec + s) * n_g + static_cast<std::size_t>(best)];
            row.selected_g.push_back(config.g_min + best);
            ++row.selection_counts[static_cast<std::size_t>(best)];
            const double ari = adjusted_rand_index(o.labels, datasets[k].labels);
            row.best_ari.push_back(ari);
            ari_sum += ari;
        }
        row.mean_ari = ari_sum / static_cast<double>(n_rep);
        rep.rows.push_back(std::move(row));
    }
    return rep;
}

}  // namespace mvcwm
