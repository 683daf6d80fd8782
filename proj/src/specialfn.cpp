#include "mvcwm/specialfn.hpp"

#include "mvcwm/errors.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace mvcwm {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEps = 1e-16;
constexpr int kMaxIter = 100000;

// Orders at or above this use the uniform asymptotic expansion.
constexpr double kDebyeOrder = 50.0;

// Taylor coefficients of 1/Gamma(1 + x) = sum c[k] x^k.
constexpr std::array<double, 26> kRecipGamma = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
};

struct TemmeGammas {
    double gam1;   // (1/G(1-mu) - 1/G(1+mu)) / (2 mu)
    double gam2;   // (1/G(1-mu) + 1/G(1+mu)) / 2
    double gampl;  // 1/G(1+mu)
    double gammi;  // 1/G(1-mu)
};

TemmeGammas temme_gammas(double mu) {
    const double mu2 = mu * mu;
    double even = 0.0;
    double odd = 0.0;
    for (int k = static_cast<int>(kRecipGamma.size()) - 1; k >= 0; --k) {
        if (k % 2 == 0) {
            even = even * mu2 + kRecipGamma[static_cast<std::size_t>(k)];
        } else {
            odd = odd * mu2 + kRecipGamma[static_cast<std::size_t>(k)];
        }
    }
    TemmeGammas g{};
    g.gam2 = even;
    g.gam1 = -odd;
    g.gampl = g.gam2 - mu * g.gam1;
    g.gammi = g.gam2 + mu * g.gam1;
    return g;
}

// log K_mu(x) and K_{mu+1}(x)/K_mu(x) for |mu| <= ~0.5 + small. log_k is
// log(e^x K), i.e. scaled, so that no -x term swamps it.
struct BaseEval {
    double log_k;
    double ratio;
};

BaseEval bessel_k_base(double mu, double x) {
    const double mu2 = mu * mu;
    if (x < 2.0) {
        // Temme's series
        const double x2 = 0.5 * x;
        const double pimu = kPi * mu;
        const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
        double d = -std::log(x2);
        double e = mu * d;
        const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
        const TemmeGammas g = temme_gammas(mu);
        double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
        double sum = ff;
        e = std::exp(e);
        double p = 0.5 * e / g.gampl;
        double q = 0.5 / (e * g.gammi);
        double c = 1.0;
        d = x2 * x2;
        double sum1 = p;
        for (int i = 1; i <= kMaxIter; ++i) {
            const double di = i;
            ff = (di * ff + p + q) / (di * di - mu2);
            c *= d / di;
            p /= di - mu;
            q /= di + mu;
            const double del = c * ff;
            sum += del;
            sum1 += c * (p - di * ff);
            if (std::abs(del) < std::abs(sum) * kEps) {
                break;
            }
        }
        return {std::log(sum) + x, sum1 * (2.0 / x) / sum};
    }

    // Steed's continued fraction
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 2; i <= kMaxIter; ++i) {
        a -= 2.0 * (i - 1);
        c = -a * c / i;
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::abs(dels / s) < kEps) {
            break;
        }
    }
    h = a1 * h;
    const double log_k = 0.5 * std::log(kPi / (2.0 * x)) - std::log(s);
    return {log_k, (mu + x + 0.5 - h) / x};
}

// log(e^x K_nu(x)) and neighbour ratios via forward recurrence from mu = nu - n.
struct SeriesEval {
    double log_k;
    double ratio_up;    // K_{nu+1}/K_nu
    double ratio_down;  // K_{nu-1}/K_nu, only valid when n >= 1
};

SeriesEval bessel_k_series(double nu, int n, double x) {
    const double mu = nu - n;
    const BaseEval base = bessel_k_base(mu, x);
    double log_acc = base.log_k;
    double prod = 1.0;
    double r = base.ratio;
    double r_prev = 0.0;
    for (int k = 1; k <= n; ++k) {
        prod *= r;
        if (prod > 1e280) {
            log_acc += std::log(prod);
            prod = 1.0;
        }
        r_prev = r;
        r = 2.0 * (mu + k) / x + 1.0 / r;
    }
    log_acc += std::log(prod);
    return {log_acc, r, n >= 1 ? 1.0 / r_prev : 0.0};
}

// Polynomials u_k(t) of the uniform asymptotic expansion, coefficients in
// ascending powers of t.
const std::vector<std::vector<double>>& debye_polynomials() {
    static const std::vector<std::vector<double>> polys = [] {
        constexpr int kTerms = 10;
        std::vector<std::vector<double>> u(kTerms);
        u[0] = {1.0};
        for (int k = 0; k + 1 < kTerms; ++k) {
            const auto& cur = u[static_cast<std::size_t>(k)];
            std::vector<double> next(cur.size() + 3, 0.0);
            // 0.5 t^2 (1 - t^2) u'(t)
            for (std::size_t j = 1; j < cur.size(); ++j) {
                const double dj = cur[j] * static_cast<double>(j);
                next[j + 1] += 0.5 * dj;
                next[j + 3] -= 0.5 * dj;
            }
            // 1/8 int_0^t (1 - 5 s^2) u(s) ds
            for (std::size_t j = 0; j < cur.size(); ++j) {
                next[j + 1] += 0.125 * cur[j] / static_cast<double>(j + 1);
                next[j + 3] -= 0.625 * cur[j] / static_cast<double>(j + 3);
            }
            u[static_cast<std::size_t>(k + 1)] = std::move(next);
        }
        return u;
    }();
    return polys;
}

double horner(const std::vector<double>& coef, double t) {
    double acc = 0.0;
    for (auto it = coef.rbegin(); it != coef.rend(); ++it) {
        acc = acc * t + *it;
    }
    return acc;
}

// log(e^x K_nu(x)), nu > 0 assumed.
double log_bessel_k_debye(double nu, double x) {
    const double z = x / nu;
    const double s = std::sqrt(1.0 + z * z);
    const double t = 1.0 / s;
    // nu * eta - x with nu s - x = nu^2 / (nu s + x)
    const double eta_shift = nu * nu / (nu * s + x) + nu * std::log(z / (1.0 + s));
    const auto& u = debye_polynomials();
    double series = 0.0;
    double scale = 1.0;
    double sign = 1.0;
    for (const auto& poly : u) {
        series += sign * horner(poly, t) * scale;
        scale /= nu;
        sign = -sign;
    }
    return 0.5 * std::log(kPi / (2.0 * nu)) - eta_shift - 0.5 * std::log(s) +
           std::log(series);
}

void check_arg(double arg) {
    if (!(arg > 0.0) || !std::isfinite(arg)) {
        throw DomainError("Bessel K argument must be positive and finite, got " +
                          std::to_string(arg));
    }
}

enum class Route { Series, Debye };

struct Plan {
    Route route;
    int n;
};

Plan plan_for(double abs_order) {
    if (abs_order >= kDebyeOrder) {
        return {Route::Debye, 0};
    }
    return {Route::Series, static_cast<int>(std::lround(abs_order))};
}

// log(e^x K), along a fixed route so nearby orders share one method.
double log_k_on(const Plan& plan, double abs_order, double x) {
    if (plan.route == Route::Debye) {
        return log_bessel_k_debye(abs_order, x);
    }
    return bessel_k_series(abs_order, plan.n, x).log_k;
}

}  // namespace

double log_bessel_k(double order, double arg) {
    check_arg(arg);
    if (!std::isfinite(order)) {
        throw DomainError("Bessel K order must be finite");
    }
    const double a = std::abs(order);
    return log_k_on(plan_for(a), a, arg) - arg;
}

LogBesselKTriple log_bessel_k_triple(double order, double arg) {
    check_arg(arg);
    if (!std::isfinite(order)) {
        throw DomainError("Bessel K order must be finite");
    }
    const double a = std::abs(order);
    const Plan plan = plan_for(a);
    LogBesselKTriple out{};
    if (plan.route == Route::Debye) {
        out.center = log_bessel_k_debye(a, arg);
        out.plus = log_bessel_k_debye(a + 1.0, arg);
        out.minus = log_bessel_k_debye(a - 1.0, arg);
    } else {
        const SeriesEval ev = bessel_k_series(a, plan.n, arg);
        out.center = ev.log_k;
        out.plus = ev.log_k + std::log(ev.ratio_up);
        if (plan.n >= 1) {
            out.minus = ev.log_k + std::log(ev.ratio_down);
        } else {
            // K_{a-1} = K_{1-a}; start from mu = -a to avoid backward recurrence.
            const BaseEval reflected = bessel_k_base(-a, arg);
            out.minus = reflected.log_k + std::log(reflected.ratio);
        }
    }
    out.center -= arg;
    out.plus -= arg;
    out.minus -= arg;
    if (order < 0.0) {
        // K_{-v} = K_v, so the neighbours swap.
        std::swap(out.plus, out.minus);
    }
    return out;
}

double dlog_bessel_k_dorder(double order, double arg) {
    check_arg(arg);
    if (order == 0.0) {
        return 0.0;
    }
    const double a = std::abs(order);
    const double sign = order < 0.0 ? -1.0 : 1.0;
    const double h = 0.01 * std::max(1.0, a / kDebyeOrder);
    const Plan plan = plan_for(a);
    // scaled log K: the -arg term would otherwise dominate the roundoff
    auto central = [&](double step) {
        return (log_k_on(plan, std::abs(a + step), arg) -
                log_k_on(plan, std::abs(a - step), arg)) /
               (2.0 * step);
    };
    const double d1 = central(h), d2 = central(0.5 * h), d4 = central(0.25 * h);
    const double r1 = (4.0 * d2 - d1) / 3.0;
    const double r2 = (4.0 * d4 - d2) / 3.0;
    return sign * (16.0 * r2 - r1) / 15.0;
}

double digamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("digamma requires a positive finite argument, got " +
                          std::to_string(x));
    }
    return boost::math::digamma(x);
}

double log_gamma(double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw DomainError("log_gamma requires a positive finite argument, got " +
                          std::to_string(x));
    }
    return boost::math::lgamma(x);
}

// ---- SpdFactor ----

Eigen::MatrixXd SpdFactor::solve(const Eigen::MatrixXd& rhs) const {
    Eigen::MatrixXd y = lower_.triangularView<Eigen::Lower>().solve(rhs);
    lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(y);
    return y;
}

Eigen::MatrixXd SpdFactor::whiten_left(const Eigen::MatrixXd& rhs) const {
    return lower_.triangularView<Eigen::Lower>().solve(rhs);
}

Eigen::MatrixXd SpdFactor::whiten_right(const Eigen::MatrixXd& rhs) const {
    // X L' = B
    Eigen::MatrixXd out = rhs;
    lower_.transpose().triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(out);
    return out;
}

Eigen::MatrixXd SpdFactor::matrix() const { return lower_ * lower_.transpose(); }

SpdFactor spd_factorize(const Eigen::MatrixXd& matrix) {
    const Eigen::Index n = matrix.rows();
    if (n == 0 || matrix.cols() != n) {
        throw DimensionError("spd_factorize needs a non-empty square matrix");
    }
    if (!matrix.allFinite()) {
        throw SingularMatrixError(0, "matrix has non-finite entries");
    }
    const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
    if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
        throw DomainError("spd_factorize: matrix is not symmetric");
    }
    SpdFactor out;
    out.lower_ = Eigen::MatrixXd::Zero(n, n);
    auto& L = out.lower_;
    double logdet = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        double diag = matrix(j, j);
        if (j > 0) {
            diag -= L.row(j).head(j).squaredNorm();
        }
        if (!(diag > 0.0) || !std::isfinite(diag)) {
            throw SingularMatrixError(static_cast<std::size_t>(j),
                                      "non-positive pivot at index " + std::to_string(j));
        }
        const double ljj = std::sqrt(diag);
        L(j, j) = ljj;
        logdet += 2.0 * std::log(ljj);
        for (Eigen::Index i = j + 1; i < n; ++i) {
            double v = matrix(i, j);
            if (j > 0) {
                v -= L.row(i).head(j).dot(L.row(j).head(j));
            }
            L(i, j) = v / ljj;
        }
    }
    out.logdet_ = logdet;
    return out;
}

}  // namespace mvcwm
