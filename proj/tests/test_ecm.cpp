#include "mvcwm/densities.hpp"
#include "mvcwm/ecm.hpp"
#include "mvcwm/errors.hpp"
#include "mvcwm/evaluate.hpp"
#include "mvcwm/simulate.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace mvcwm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

LatentMoments unit_moments(const MatrixXd& z) {
    LatentMoments m;
    m.z = z;
    m.l_X = m.m_X = m.l_Y = m.m_Y = MatrixXd::Ones(z.rows(), z.cols());
    m.n_X = m.n_Y = MatrixXd::Zero(z.rows(), z.cols());
    return m;
}

MatrixXd random_z(Eigen::Index n, int G, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    MatrixXd z(n, G);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int g = 0; g < G; ++g) z(i, g) = u(rng);
        z.row(i) /= z.row(i).sum();
    }
    return z;
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

double max_diff(const MatrixXd& a, const MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

// Expected complete-data terms of one side that depend on (Sigma, Psi).
double side_q(const MatrixXd& stack, const MatrixXd& loc_stack, const MatrixXd& A,
              const MatrixXd& sigma, const MatrixXd& psi, const VectorXd& z, const VectorXd& l,
              const VectorXd& m, Eigen::Index r) {
    const SpdFactor s = spd_factorize(sigma), p = spd_factorize(psi);
    const double d = static_cast<double>(sigma.rows());
    double q = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const MatrixXd R = stack.middleCols(i * r, r) - loc_stack.middleCols(i * r, r);
        const double delta = (s.solve(R) * p.solve(R.transpose())).trace();
        const double tau = (s.solve(R) * p.solve(A.transpose())).trace();
        const double rho = (s.solve(A) * p.solve(A.transpose())).trace();
        q += z(i) * (-0.5 * static_cast<double>(r) * s.logdet() - 0.5 * d * p.logdet() -
                     0.5 * (m(i) * delta - 2.0 * tau + l(i) * rho));
    }
    return q;
}

}  // namespace

TEST_CASE("observed log-likelihood reductions") {
    std::mt19937_64 rng(1);
    ModelParams t = support::small_truth(Family::Normal, Family::Normal, 1, 2, 2, 3, 0.0, rng);
    const auto& c = t.components[0];
    MatrixXd xs = MatrixXd::Ones(3, 3);
    xs.bottomRows(2) = c.M_X;
    const ThreeWayData one({c.B * xs}, {c.M_X});
    const double expected =
        mvn_log_density(c.B * xs, MatrixLaw{c.B * xs, c.A_Y, c.Sigma_Y, c.Psi_Y, NormalTail{}}) +
        mvn_log_density(c.M_X, MatrixLaw{c.M_X, c.A_X, c.Sigma_X, c.Psi_X, NormalTail{}});
    CHECK(observed_loglik(one, t) == doctest::Approx(expected).epsilon(1e-13));

    // two identical halves collapse to one component
    const SimulatedData sim = sample_cwm(t, 20, 3);
    ModelParams twice = t;
    twice.spec.G = 2;
    twice.components = {c, c};
    twice.components[0].pi = twice.components[1].pi = 0.5;
    CHECK(observed_loglik(sim.data, twice) ==
          doctest::Approx(observed_loglik(sim.data, t)).epsilon(1e-13));
}

TEST_CASE("observed log-likelihood against a naive sum") {
    std::mt19937_64 rng(2);
    for (Family cov : kAllFamilies) {
        for (Family resp : {Family::Normal, Family::VarianceGamma, Family::GeneralizedHyperbolic}) {
            const ModelParams t = support::small_truth(cov, resp, 3, 2, 2, 2, 2.0, rng);
            const SimulatedData sim = sample_cwm(t, 15, 4);
            double naive = 0.0;
            for (Eigen::Index i = 0; i < sim.data.n(); ++i) {
                double s = 0.0;
                for (const auto& c : t.components) {
                    const MatrixXd mu_y = c.B * sim.data.x_star(i);
                    s += c.pi *
                         std::exp(log_density(sim.data.y(i),
                                              {mu_y, c.A_Y, c.Sigma_Y, c.Psi_Y, c.tail_Y}) +
                                  log_density(sim.data.x(i),
                                              {c.M_X, c.A_X, c.Sigma_X, c.Psi_X, c.tail_X}));
                }
                naive += std::log(s);
            }
            CHECK(observed_loglik(sim.data, t) == doctest::Approx(naive).epsilon(1e-11));
        }
    }
}

TEST_CASE("E-step responsibilities") {
    std::mt19937_64 rng(5);
    const ModelParams one = support::small_truth(Family::SkewT, Family::Normal, 1, 2, 2, 2, 0, rng);
    const SimulatedData s1 = sample_cwm(one, 30, 6);
    const LatentMoments m1 = e_step(s1.data, one);
    CHECK((m1.z.array() == 1.0).all());

    // far-separated components: data from component 0 only
    ModelParams far = support::small_truth(Family::Normal, Family::Normal, 2, 2, 2, 2, 60.0, rng);
    ModelParams only0 = far;
    only0.spec.G = 1;
    only0.components = {far.components[0]};
    only0.components[0].pi = 1.0;
    const SimulatedData s2 = sample_cwm(only0, 50, 7);
    const LatentMoments m2 = e_step(s2.data, far);
    CHECK(m2.z.col(0).minCoeff() > 0.999);

    const ModelParams mixed = support::small_truth(Family::VarianceGamma, Family::SkewT, 3, 2, 2, 2,
                                                   1.0, rng);
    const SimulatedData s3 = sample_cwm(mixed, 40, 8);
    const LatentMoments m3 = e_step(s3.data, mixed);
    for (Eigen::Index i = 0; i < m3.z.rows(); ++i) {
        CHECK(std::abs(m3.z.row(i).sum() - 1.0) < 1e-12);
    }
    CHECK((m3.l_X.array() > 0).all());
    CHECK((m3.l_X.array() * m3.m_X.array() >= 1.0 - 1e-12).all());
}

TEST_CASE("CM-step 1: mixing proportions and regression") {
    std::mt19937_64 rng(9);
    const ModelParams t = support::small_truth(Family::Normal, Family::Normal, 2, 2, 2, 3, 3.0, rng);
    const SimulatedData sim = sample_cwm(t, 40, 10);
    MatrixXd z = MatrixXd::Zero(40, 2);
    for (int i = 0; i < 40; ++i) z(i, i % 2) = 1.0;
    const ModelParams up = cm_step1(sim.data, unit_moments(z), default_params(t.spec));
    CHECK(up.components[0].pi == 0.5);
    CHECK(up.components[1].pi == 0.5);

    // single-component FMR with normal response: B is the GLS estimator
    ModelSpec fmr{Family::Normal, Family::Normal, 1, 2, 2, 3, true};
    ModelParams start = default_params(fmr);
    start.components[0].Psi_Y = support::random_spd(3, rng);
    const ModelParams b1 = cm_step1(sim.data, unit_moments(MatrixXd::Ones(40, 1)), start);
    const MatrixXd psi_inv = start.components[0].Psi_Y.inverse();
    MatrixXd lhs = MatrixXd::Zero(3 * 2, 3 * 2);
    VectorXd rhs = VectorXd::Zero(3 * 2);
    for (Eigen::Index i = 0; i < 40; ++i) {
        // vec(Y) = (X*' kron I) vec(B) + e, cov(e) = Psi kron Sigma; Sigma cancels
        const MatrixXd xs = sim.data.x_star(i);
        MatrixXd Z = MatrixXd::Zero(2 * 3, 2 * 3);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                Z.block(a * 2, b * 2, 2, 2) = xs(b, a) * MatrixXd::Identity(2, 2);
        MatrixXd W = MatrixXd::Zero(6, 6);
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b)
                W.block(a * 2, b * 2, 2, 2) = psi_inv(a, b) * MatrixXd::Identity(2, 2);
        const MatrixXd y = sim.data.y(i);
        lhs += Z.transpose() * W * Z;
        rhs += Z.transpose() * W * Eigen::Map<const VectorXd>(y.data(), 6);
    }
    const VectorXd beta = lhs.ldlt().solve(rhs);
    const MatrixXd B = Eigen::Map<const MatrixXd>(beta.data(), 2, 3);
    CHECK(max_diff(b1.components[0].B, B) < 1e-10);
}

TEST_CASE("CM-step 2: scalar column scale") {
    std::mt19937_64 rng(11);
    const ModelParams t = support::small_truth(Family::Normal, Family::Normal, 1, 3, 2, 1, 0, rng);
    const SimulatedData sim = sample_cwm(t, 60, 12);
    ModelParams p = cm_step1(sim.data, unit_moments(MatrixXd::Ones(60, 1)), default_params(t.spec));
    p.components[0].Sigma_X = support::random_spd(2, rng);
    const ModelParams p2 = cm_step2(sim.data, unit_moments(MatrixXd::Ones(60, 1)), p);
    const SpdFactor s = spd_factorize(p.components[0].Sigma_X);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < 60; ++i) {
        const MatrixXd r = sim.data.x(i) - p.components[0].M_X;
        acc += (r.transpose() * s.solve(r))(0, 0);
    }
    CHECK(p2.components[0].Psi_X(0, 0) == doctest::Approx(acc / (2.0 * 60.0)).epsilon(1e-12));
}

TEST_CASE("CM-steps 1 and 2 raise the expected complete-data scale terms") {
    std::mt19937_64 rng(13);
    for (Family f : {Family::SkewT, Family::GeneralizedHyperbolic, Family::VarianceGamma,
                     Family::NormalInverseGaussian}) {
        const ModelParams t = support::small_truth(f, f, 2, 2, 3, 3, 2.0, rng);
        const SimulatedData sim = sample_cwm(t, 80, 14);
        ModelParams prev = t;
        prev.components[0].Sigma_X *= 1.7;
        prev.components[1].Psi_Y *= 0.6;
        const LatentMoments mom = e_step(sim.data, prev);
        const ModelParams a = cm_step1(sim.data, mom, prev);
        const ModelParams b = cm_step2(sim.data, mom, a);
        for (int g = 0; g < 2; ++g) {
            const auto& ca = a.components[g];
            const auto& cb = b.components[g];
            const auto& cp = prev.components[g];
            const MatrixXd loc = ca.M_X.replicate(1, 80);
            const VectorXd z = mom.z.col(g);
            const double before = side_q(sim.data.x_stack(), loc, ca.A_X, cp.Sigma_X, cp.Psi_X, z,
                                         mom.l_X.col(g), mom.m_X.col(g), 3);
            const double after = side_q(sim.data.x_stack(), loc, ca.A_X, cb.Sigma_X, cb.Psi_X, z,
                                        mom.l_X.col(g), mom.m_X.col(g), 3);
            CHECK(after >= before - 1e-9 * std::abs(before));
            const MatrixXd ly = ca.B * sim.data.x_star_stack();
            const double by = side_q(sim.data.y_stack(), ly, ca.A_Y, cp.Sigma_Y, cp.Psi_Y, z,
                                     mom.l_Y.col(g), mom.m_Y.col(g), 3);
            const double ay = side_q(sim.data.y_stack(), ly, ca.A_Y, cb.Sigma_Y, cb.Psi_Y, z,
                                     mom.l_Y.col(g), mom.m_Y.col(g), 3);
            CHECK(ay >= by - 1e-9 * std::abs(by));
        }
    }
}

TEST_CASE("degenerate mixing reduces every skewed family to the normal updates") {
    std::mt19937_64 rng(15);
    const ModelParams t = support::small_truth(Family::Normal, Family::Normal, 2, 2, 2, 3, 2.0, rng);
    const SimulatedData sim = sample_cwm(t, 50, 16);
    const LatentMoments mom = unit_moments(random_z(50, 2, rng));
    ModelParams normal = t;
    const ModelParams n1 = cm_step2(sim.data, mom, cm_step1(sim.data, mom, normal));
    for (Family f : {Family::SkewT, Family::GeneralizedHyperbolic, Family::VarianceGamma,
                     Family::NormalInverseGaussian}) {
        ModelParams skewed = t;
        skewed.spec.covariate_family = skewed.spec.response_family = f;
        for (auto& c : skewed.components) {
            c.tail_X = c.tail_Y = support::moderate_tail(f);
        }
        const ModelParams s1 = cm_step2(sim.data, mom, cm_step1(sim.data, mom, skewed));
        for (int g = 0; g < 2; ++g) {
            const auto& a = s1.components[g];
            const auto& b = n1.components[g];
            CHECK(std::abs(a.pi - b.pi) < 1e-10);
            CHECK(max_diff(a.M_X, b.M_X) < 1e-10);
            CHECK(max_diff(a.B, b.B) < 1e-10);
            CHECK(max_diff(a.Sigma_X, b.Sigma_X) < 1e-10);
            CHECK(max_diff(a.Sigma_Y, b.Sigma_Y) < 1e-10);
            CHECK(max_diff(a.Psi_X, b.Psi_X) < 1e-10);
            CHECK(max_diff(a.Psi_Y, b.Psi_Y) < 1e-10);
            CHECK(a.A_X.isZero(0.0));
            CHECK(a.A_Y.isZero(0.0));
        }
    }
}

TEST_CASE("scale gauge leaves the likelihood and responsibilities unchanged") {
    std::mt19937_64 rng(17);
    const ModelParams t =
        support::small_truth(Family::GeneralizedHyperbolic, Family::SkewT, 2, 2, 2, 3, 1.5, rng);
    const SimulatedData sim = sample_cwm(t, 40, 18);
    ModelParams s = t;
    s.components[1].Sigma_X *= 3.7;
    s.components[1].Psi_X /= 3.7;
    s.components[0].Sigma_Y /= 2.2;
    s.components[0].Psi_Y *= 2.2;
    CHECK(observed_loglik(sim.data, s) ==
          doctest::Approx(observed_loglik(sim.data, t)).epsilon(1e-12));
    CHECK(max_diff(e_step(sim.data, s).z, e_step(sim.data, t).z) < 1e-12);
}

TEST_CASE("initialization") {
    std::mt19937_64 rng(19);
    const ModelParams one = support::small_truth(Family::Normal, Family::Normal, 1, 2, 2, 2, 0, rng);
    const SimulatedData s1 = sample_cwm(one, 20, 20);
    const auto single = starting_partitions(s1.data, one.spec, 1, 10);
    REQUIRE(single.size() == 1);
    CHECK((single[0].z.array() == 1.0).all());

    const ModelParams two = support::small_truth(Family::Normal, Family::Normal, 2, 2, 2, 2, 25, rng);
    const SimulatedData s2 = sample_cwm(two, 60, 21);
    const auto starts = starting_partitions(s2.data, two.spec, 3, 5);
    REQUIRE(starts.size() == 5);
    CHECK(starts[0].label == "kmeans");
    std::vector<int> hard;
    for (Eigen::Index i = 0; i < 60; ++i) {
        Eigen::Index arg = 0;
        starts[0].z.row(i).maxCoeff(&arg);
        hard.push_back(static_cast<int>(arg));
    }
    CHECK(adjusted_rand_index(hard, s2.labels) == 1.0);
    for (std::size_t k = 1; k < starts.size(); ++k) {
        if (starts[k].label.rfind("soft", 0) != 0) continue;
        CHECK((starts[k].z.array() > 0.0).all());
        for (Eigen::Index i = 0; i < 60; ++i) {
            CHECK(std::abs(starts[k].z.row(i).sum() - 1.0) < 1e-12);
        }
    }
    const LatentMoments init = initialize(s2.data, two.spec, FitControls{});
    CHECK(init.z.rows() == 60);
}

TEST_CASE("rank k-means start survives extreme right skew") {
    const ModelParams truth = reference_truth(Family::Normal, Family::Normal, 30.0);
    SimulatedData sim = sample_cwm(truth, 200, 27);
    sim.data = skew_transform(sim.data, 0.6);
    const auto starts = starting_partitions(sim.data, truth.spec, 5, 4);
    REQUIRE(starts.size() == 4);
    bool found = false;
    for (const auto& s : starts) {
        if (s.label != "kmeans-rank") continue;
        found = true;
        std::vector<int> hard;
        for (Eigen::Index i = 0; i < s.z.rows(); ++i) {
            Eigen::Index arg = 0;
            s.z.row(i).maxCoeff(&arg);
            hard.push_back(static_cast<int>(arg));
        }
        CHECK(adjusted_rand_index(hard, sim.labels) > 0.95);
    }
    CHECK(found);
}

TEST_CASE("ECM traces are monotone across families") {
    std::mt19937_64 rng(23);
    for (Family cov : kAllFamilies) {
        for (Family resp : kAllFamilies) {
            const ModelParams t = support::small_truth(cov, resp, 2, 2, 2, 2, 3.0, rng);
            const SimulatedData sim = sample_cwm(t, 80, 24);
            FitControls c;
            c.starts = 2;
            c.max_iter = 60;
            try {
                const FitResult r = fit(sim.data, t.spec, c);
                for (std::size_t k = 1; k < r.loglik_trace.size(); ++k) {
                    CAPTURE(t.spec.pair_name());
                    CHECK(r.loglik_trace[k] >= r.loglik_trace[k - 1] - 1e-8);
                }
            } catch (const Error& e) {
                MESSAGE(t.spec.pair_name() << ": " << e.what());
            }
        }
    }
}

TEST_CASE("fit recovers a single matrix-normal component") {
    std::mt19937_64 rng(25);
    const ModelParams t = support::small_truth(Family::Normal, Family::Normal, 1, 2, 2, 3, 0.0, rng);
    const SimulatedData sim = sample_cwm(t, 1000, 26);
    const FitResult r = fit(sim.data, t.spec, FitControls{});
    CHECK(r.converged);
    const auto& e = r.params.components[0];
    const auto& c = t.components[0];
    // standard errors are O(1/sqrt(N)) with unit-order scales
    CHECK(max_diff(e.M_X, c.M_X) < 0.15);
    CHECK(max_diff(e.B, c.B) < 0.2);
    CHECK(e.Psi_X.trace() == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(max_diff(kron(e.Psi_X, e.Sigma_X), kron(c.Psi_X, c.Sigma_X)) < 0.2);
}

TEST_CASE("labels, gauge and determinism of the full estimator") {
    std::mt19937_64 rng(27);
    const ModelParams t = support::small_truth(Family::SkewT, Family::VarianceGamma, 3, 2, 2, 2, 8.0,
                                               rng);
    const SimulatedData sim = sample_cwm(t, 150, 28);
    FitControls c;
    c.starts = 3;
    const FitResult a = fit(sim.data, t.spec, c);
    const FitResult b = fit(sim.data, t.spec, c);
    CHECK(a.loglik_trace == b.loglik_trace);
    CHECK(a.hard_labels == b.hard_labels);
    for (std::size_t g = 1; g < a.params.components.size(); ++g) {
        CHECK(a.params.components[g - 1].M_X(0, 0) <= a.params.components[g].M_X(0, 0));
    }
    for (const auto& comp : a.params.components) {
        CHECK(comp.Psi_X.trace() == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(comp.Psi_Y.trace() == doctest::Approx(2.0).epsilon(1e-12));
    }
    for (Eigen::Index i = 0; i < a.responsibilities.rows(); ++i) {
        Eigen::Index arg = 0;
        a.responsibilities.row(i).maxCoeff(&arg);
        CHECK(a.hard_labels[static_cast<std::size_t>(i)] == arg);
    }
    // gauge fixing happens after convergence and does not move the likelihood
    CHECK(observed_loglik(sim.data, a.params) ==
          doctest::Approx(a.loglik).epsilon(1e-10));
    CHECK(a.bic == doctest::Approx(2 * a.loglik - a.n_params * std::log(150.0)).epsilon(1e-14));
    CHECK(adjusted_rand_index(a.hard_labels, sim.labels) > 0.9);
}

TEST_CASE("VG location sitting on an observation is treated as collapse") {
    std::mt19937_64 rng(31);
    ModelParams t = support::small_truth(Family::VarianceGamma, Family::Normal, 2, 2, 2, 2, 3.0, rng);
    const SimulatedData sim = sample_cwm(t, 60, 32);
    FitControls c;
    c.max_iter = 0;
    ModelParams spike = t;
    spike.components[0].M_X = sim.data.x(0).array() + 1e-10;
    spike.components[0].tail_X = VgTail{1.5};  // gamma <= q r / 2: unbounded density
    CHECK_THROWS_AS((void)run_ecm(sim.data, spike, c), CollapseError);
    // observed_loglik itself stays a plain evaluation
    CHECK(std::isfinite(observed_loglik(sim.data, spike)));
    spike.components[0].tail_X = VgTail{4.0};  // bounded density: no guard
    CHECK_NOTHROW((void)run_ecm(sim.data, spike, c));
}
