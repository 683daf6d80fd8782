#include "mvcwm/densities.hpp"
#include "mvcwm/ecm.hpp"
#include "mvcwm/errors.hpp"
#include "mvcwm/evaluate.hpp"
#include "mvcwm/simulate.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace mvcwm;
using Eigen::MatrixXd;

namespace {

double sample_skewness(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double m2 = 0, m3 = 0;
    for (double x : v) {
        m2 += (x - m) * (x - m);
        m3 += (x - m) * (x - m) * (x - m);
    }
    m2 /= static_cast<double>(v.size());
    m3 /= static_cast<double>(v.size());
    return m3 / std::pow(m2, 1.5);
}

}  // namespace

TEST_CASE("mixing laws have the documented means") {
    std::mt19937_64 rng(41);
    struct Case {
        TailParams tail;
        double mean;
    };
    const Case cases[] = {{SkewTTail{6.0}, 6.0 / 4.0},
                          {VgTail{3.0}, 1.0},
                          {NigTail{1.25}, 0.8},
                          {GhTail{-0.5, 2.0}, 1.0}};
    for (const auto& c : cases) {
        double s = 0, s2 = 0;
        const int n = 200000;
        for (int k = 0; k < n; ++k) {
            const double w = draw_mixing(c.tail, rng);
            s += w;
            s2 += w * w;
        }
        const double mean = s / n;
        const double se = std::sqrt((s2 / n - mean * mean) / n);
        CHECK(std::abs(mean - c.mean) < 4.0 * se);
        // mixing density integrates to one
        const double total =
            oracle::positive_integral([&](double w) { return mixing_log_pdf(w, c.tail); }, 1.0);
        CHECK(std::abs(total - 1.0) < 1e-9);
    }
    CHECK(draw_mixing(NormalTail{}, rng) == 1.0);
}

TEST_CASE("matrix-normal draws have Kronecker covariance") {
    std::mt19937_64 rng(42);
    MatrixLaw law{MatrixXd::Zero(2, 3), MatrixXd::Zero(2, 3), support::random_spd(2, rng),
                  support::random_spd(3, rng), NormalTail{}};
    const int n = 100000;
    MatrixXd acc = MatrixXd::Zero(6, 6);
    for (int k = 0; k < n; ++k) {
        const MatrixXd v = draw_matrix(law, rng);
        const Eigen::Map<const Eigen::VectorXd> x(v.data(), 6);
        acc += x * x.transpose();
    }
    acc /= n;
    MatrixXd kron(6, 6);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) kron.block(2 * i, 2 * j, 2, 2) = law.psi(i, j) * law.sigma;
    // entrywise standard error is about sqrt(2/n) times the scale
    CHECK((acc - kron).cwiseAbs().maxCoeff() < 6.0 * std::sqrt(2.0 / n) * kron.cwiseAbs().maxCoeff());
}

TEST_CASE("skewed draws match the closed-form density") {
    std::mt19937_64 rng(43);
    const MatrixLaw law{MatrixXd::Constant(1, 1, 0.5), MatrixXd::Constant(1, 1, 1.2),
                        MatrixXd::Constant(1, 1, 0.8), MatrixXd::Constant(1, 1, 1.1),
                        SkewTTail{6.0}};
    std::vector<double> v(20000);
    for (auto& x : v) x = draw_matrix(law, rng)(0, 0);
    std::sort(v.begin(), v.end());
    boost::math::quadrature::gauss_kronrod<double, 31> gk;
    auto dens = [&](double x) {
        return std::exp(skewed_log_density(MatrixXd::Constant(1, 1, x), law));
    };
    double cdf = gk.integrate(dens, -std::numeric_limits<double>::infinity(), v.front(), 15, 1e-12);
    double d = 0;
    const double n = static_cast<double>(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) cdf += gk.integrate(dens, v[i - 1], v[i], 3, 1e-12);
        d = std::max({d, std::abs(cdf - i / n), std::abs(cdf - (i + 1) / n)});
    }
    CHECK(d < 1.628 / std::sqrt(n));

    // E[X] = M + E[W] A, with E[W] = 1 for variance-gamma
    MatrixLaw vg{MatrixXd::Constant(2, 2, 1.0), support::random_matrix(2, 2, rng),
                 support::random_spd(2, rng), support::random_spd(2, rng), VgTail{3.0}};
    MatrixXd mean = MatrixXd::Zero(2, 2);
    const int m = 100000;
    for (int k = 0; k < m; ++k) mean += draw_matrix(vg, rng);
    mean /= m;
    CHECK((mean - vg.M - vg.A).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("simulation is reproducible") {
    const Scenario s = find_scenario("MVGH-MVST_N200_close");
    const SimulatedData a = sample_cwm(s.truth, 200, 7);
    const SimulatedData b = sample_cwm(s.truth, 200, 7);
    const SimulatedData c = sample_cwm(s.truth, 200, 8);
    CHECK(a.labels == b.labels);
    CHECK(a.data.y_stack() == b.data.y_stack());
    CHECK(a.data.x_stack() == b.data.x_stack());
    CHECK(a.data.y_stack() != c.data.y_stack());
}

TEST_CASE("builtin scenarios") {
    const auto all = builtin_scenarios();
    CHECK(all.size() == 16);
    const Scenario far = find_scenario("MVVG-MVVG_N500_far");
    const auto& comps = far.truth.components;
    REQUIRE(comps.size() == 3);
    CHECK((comps[1].M_X - (comps[0].M_X.array() - 10.0).matrix()).isZero(0.0));
    CHECK((comps[2].M_X - (comps[0].M_X.array() + 10.0).matrix()).isZero(0.0));
    CHECK(comps[0].B(0, 0) == 8.0);
    CHECK(comps[0].B(0, 1) == 0.5);
    CHECK(comps[0].B(0, 2) == 1.0);
    CHECK(comps[0].B(0, 3) == 1.5);
    CHECK(comps[0].Sigma_X(0, 0) == 1.0);
    CHECK(comps[0].Sigma_X(0, 1) == 0.8);
    CHECK(comps[0].Sigma_X(0, 2) == 0.64);
    CHECK(std::get<VgTail>(comps[0].tail_X).gamma == 7.0);
    CHECK(far.N == 500);
    CHECK_NOTHROW(validate_params(far.truth));
    for (const auto& s : all) CHECK_NOTHROW(validate_params(s.truth));
    CHECK_THROWS_AS((void)find_scenario("nope"), ValidationError);
}

TEST_CASE("skewing transform") {
    MatrixXd y(1, 5);
    y << -3.0, -1.0, 0.0, 0.5, 2.0;
    const ThreeWayData d(y, MatrixXd::Zero(0, 5), 1);
    const ThreeWayData t = skew_transform(d, 1e-9);
    for (int i = 0; i < 5; ++i) CHECK(t.y_stack()(0, i) == doctest::Approx(y(0, i) + 1.0));
    const ThreeWayData u = skew_transform(d, 1.0);
    for (int i = 1; i < 5; ++i) CHECK(u.y_stack()(0, i) > u.y_stack()(0, i - 1));

    std::mt19937_64 rng(44);
    std::normal_distribution<double> nd;
    MatrixXd z(1, 50000);
    for (int i = 0; i < z.cols(); ++i) z(0, i) = nd(rng);
    const ThreeWayData zd(z, MatrixXd::Zero(0, z.cols()), 1);
    auto skew_of = [&](double eps) {
        const ThreeWayData s = skew_transform(zd, eps);
        return sample_skewness(std::vector<double>(s.y_stack().data(),
                                                   s.y_stack().data() + s.y_stack().size()));
    };
    CHECK(skew_of(1.0) > skew_of(0.6));
    CHECK(skew_of(0.6) > 0.5);

    MatrixXd big(1, 2);
    big << 1.0, 800.0;
    CHECK_THROWS_AS((void)skew_transform(ThreeWayData(big, MatrixXd::Zero(0, 2), 1), 1.0),
                    NumericalError);
    CHECK_THROWS_AS((void)skew_transform(d, 0.0), ValidationError);
}

TEST_CASE("well-separated normal groups select three components") {
    const ModelParams truth = reference_truth(Family::Normal, Family::Normal, 30.0);
    const SimulatedData sim = sample_cwm(truth, 200, 45);
    double best = -INFINITY;
    int best_g = 0;
    FitControls c;
    c.starts = 3;
    for (int G = 1; G <= 4; ++G) {
        ModelSpec s = truth.spec;
        s.G = G;
        const FitResult r = fit(sim.data, s, c);
        if (r.bic > best) {
            best = r.bic;
            best_g = G;
        }
    }
    CHECK(best_g == 3);
}

TEST_CASE("study front ends validate their inputs") {
    CHECK_THROWS_AS((void)recovery_study(find_scenario("MVNIG-MVN_N200_far"), 0, 1, {}),
                    ValidationError);
    ClassificationConfig cc;
    cc.replicates = 0;
    cc.specs = {{Family::Normal, Family::Normal}};
    CHECK_THROWS_AS((void)classification_study(cc), ValidationError);
}

TEST_CASE("recovery study has the table shape") {
    FitControls c;
    c.starts = 2;
    const RecoveryReport r = recovery_study(find_scenario("MVNIG-MVN_N200_far"), 2, 5, c, 2);
    CHECK(r.replicates == 2);
    REQUIRE(r.mse.size() == 3);
    for (const auto& m : r.mse) {
        CHECK(m.rows() == 3);
        CHECK(m.cols() == 4);
    }
    const RecoveryReport again = recovery_study(find_scenario("MVNIG-MVN_N200_far"), 2, 5, c, 1);
    for (std::size_t g = 0; g < 3; ++g) CHECK(r.mse[g] == again.mse[g]);
}
