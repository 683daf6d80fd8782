#include "mvcwm/gig.hpp"

#include "mvcwm/errors.hpp"
#include "mvcwm/specialfn.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace mvcwm {

namespace {

void check_params(const GigParams& p) {
    if (!(p.a > 0.0) || !(p.b > 0.0) || !std::isfinite(p.a) || !std::isfinite(p.b) ||
        !std::isfinite(p.lambda)) {
        throw DomainError("GIG parameters need a > 0, b > 0 and finite lambda");
    }
}

// Uniform on the open interval (0, 1).
double uniform01(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double gamma_draw(double shape, double rate, std::mt19937_64& rng) {
    std::gamma_distribution<double> dist(shape, 1.0 / rate);
    return dist(rng);
}

double gig_mode(double lambda, double omega) {
    if (lambda >= 1.0) {
        return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) /
               omega;
    }
    return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// The three generators below draw from the standardized law
// x^(lambda-1) exp(-omega (x + 1/x) / 2) with lambda >= 0.

// Ratio-of-uniforms without mode shift.
double rou_noshift(double lambda, double omega, std::mt19937_64& rng) {
    const double t = 0.5 * (lambda - 1.0);
    const double s = 0.25 * omega;
    const double xm = gig_mode(lambda, omega);
    const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
    const double ym =
        ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
    const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
    for (;;) {
        const double u = um * uniform01(rng);
        const double v = uniform01(rng);
        const double x = u / v;
        if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) {
            return x;
        }
    }
}

// Ratio-of-uniforms shifted by the mode; rectangle from Cardano's formula.
double rou_shift(double lambda, double omega, std::mt19937_64& rng) {
    const double t = 0.5 * (lambda - 1.0);
    const double s = 0.25 * omega;
    const double xm = gig_mode(lambda, omega);
    const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

    const double a = -(2.0 * (lambda + 1.0) / omega + xm);
    const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    const double c = xm;
    const double p = b - a * a / 3.0;
    const double q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
    const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
    const double fak = 2.0 * std::sqrt(-p / 3.0);
    const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
    const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * std::numbers::pi) - a / 3.0;

    const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
    const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);
    for (;;) {
        const double u = uminus + uniform01(rng) * (uplus - uminus);
        const double v = uniform01(rng);
        const double x = u / v + xm;
        if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) {
            return x;
        }
    }
}

// Constant hat on the log-concave part; 0 <= lambda < 1, omega <= 1.
double hat_sampler(double lambda, double omega, std::mt19937_64& rng) {
    const double xm = gig_mode(lambda, omega);
    const double x0 = omega / (1.0 - lambda);
    const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
    double area[3];
    area[0] = k0 * x0;
    double k1 = 0.0;
    double k2 = 0.0;
    if (x0 >= 2.0 / omega) {
        area[1] = 0.0;
        k2 = std::pow(x0, lambda - 1.0);
        area[2] = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
    } else {
        k1 = std::exp(-omega);
        area[1] = lambda == 0.0
                      ? k1 * std::log(2.0 / (omega * omega))
                      : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
        k2 = std::pow(2.0 / omega, lambda - 1.0);
        area[2] = k2 * 2.0 * std::exp(-1.0) / omega;
    }
    const double total = area[0] + area[1] + area[2];

    for (;;) {
        double v = total * uniform01(rng);
        double x = 0.0;
        double hx = 0.0;
        if (v <= area[0]) {
            x = x0 * v / area[0];
            hx = k0;
        } else if ((v -= area[0]) <= area[1]) {
            if (lambda == 0.0) {
                x = omega * std::exp(std::exp(omega) * v);
                hx = k1 / x;
            } else {
                x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
                hx = k1 * std::pow(x, lambda - 1.0);
            }
        } else {
            v -= area[1];
            const double lo = std::max(x0, 2.0 / omega);
            x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * lo) - omega / (2.0 * k2) * v);
            hx = k2 * std::exp(-omega / 2.0 * x);
        }
        const double u = uniform01(rng) * hx;
        if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) {
            return x;
        }
    }
}

double standard_draw(double lambda, double omega, std::mt19937_64& rng) {
    if (lambda > 2.0 || omega > 3.0) {
        return rou_shift(lambda, omega, rng);
    }
    if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) {
        return rou_noshift(lambda, omega, rng);
    }
    return hat_sampler(lambda, omega, rng);
}

}  // namespace

GigParams convert(const GigAltParams& alt) {
    if (!(alt.omega > 0.0) || !(alt.eta > 0.0)) {
        throw DomainError("GIG alternative parameters need omega > 0 and eta > 0");
    }
    return {alt.omega / alt.eta, alt.omega * alt.eta, alt.lambda};
}

GigAltParams convert(const GigParams& p) {
    check_params(p);
    return {std::sqrt(p.a * p.b), std::sqrt(p.b / p.a), p.lambda};
}

double gig_log_pdf(double w, const GigParams& p) {
    check_params(p);
    if (!(w > 0.0)) {
        throw DomainError("GIG density evaluated at non-positive w");
    }
    const double omega = std::sqrt(p.a * p.b);
    return 0.5 * p.lambda * std::log(p.a / p.b) - std::numbers::ln2 -
           log_bessel_k(p.lambda, omega) + (p.lambda - 1.0) * std::log(w) -
           0.5 * (p.a * w + p.b / w);
}

GigMoments gig_moments(const GigParams& p) {
    check_params(p);
    const double omega = std::sqrt(p.a * p.b);
    const double log_eta = 0.5 * (std::log(p.b) - std::log(p.a));
    const LogBesselKTriple k = log_bessel_k_triple(p.lambda, omega);
    GigMoments m;
    m.e_w = std::exp(log_eta + k.plus - k.center);
    // sqrt(a/b) K_{lambda-1}/K_lambda, equal to sqrt(a/b) K_{lambda+1}/K_lambda - 2 lambda / b
    // by the three-term recurrence but free of cancellation.
    m.e_inv_w = std::exp(-log_eta + k.minus - k.center);
    m.e_log_w = log_eta + dlog_bessel_k_dorder(p.lambda, omega);
    return m;
}

GigMoments gig_moments(const GigAltParams& alt) { return gig_moments(convert(alt)); }

GigMoments conditional_moments(double a, double b, double lambda) {
    if (a > 0.0 && b > 0.0) {
        return gig_moments(GigParams{a, b, lambda});
    }
    GigMoments m;
    if (a == 0.0 && b > 0.0 && lambda < 0.0) {
        // inverse gamma, shape -lambda, scale b/2
        const double shape = -lambda;
        if (shape <= 1.0) {
            throw NumericalError("E(W) infinite for inverse-gamma shape <= 1");
        }
        m.e_w = 0.5 * b / (shape - 1.0);
        m.e_inv_w = shape / (0.5 * b);
        m.e_log_w = std::log(0.5 * b) - digamma(shape);
        return m;
    }
    if (b == 0.0 && a > 0.0 && lambda > 0.0) {
        // gamma, shape lambda, rate a/2
        if (lambda <= 1.0) {
            throw NumericalError("E(1/W) infinite for gamma shape <= 1");
        }
        m.e_w = lambda / (0.5 * a);
        m.e_inv_w = 0.5 * a / (lambda - 1.0);
        m.e_log_w = digamma(lambda) - std::log(0.5 * a);
        return m;
    }
    throw DomainError("improper GIG parameters (a=" + std::to_string(a) +
                      ", b=" + std::to_string(b) + ", lambda=" + std::to_string(lambda) + ")");
}

double gig_draw(double a, double b, double lambda, std::mt19937_64& rng) {
    if (a == 0.0 && b > 0.0 && lambda < 0.0) {
        return 1.0 / gamma_draw(-lambda, 0.5 * b, rng);
    }
    if (b == 0.0 && a > 0.0 && lambda > 0.0) {
        return gamma_draw(lambda, 0.5 * a, rng);
    }
    const GigAltParams alt = convert(GigParams{a, b, lambda});
    const double x = standard_draw(std::abs(lambda), alt.omega, rng);
    return lambda < 0.0 ? alt.eta / x : alt.eta * x;
}

std::vector<double> gig_sample(const GigParams& p, std::size_t count, std::uint64_t seed) {
    check_params(p);
    if (count == 0) {
        throw ValidationError("gig_sample needs count >= 1");
    }
    std::mt19937_64 rng(seed);
    std::vector<double> out(count);
    for (auto& v : out) {
        v = gig_draw(p.a, p.b, p.lambda, rng);
    }
    return out;
}

}  // namespace mvcwm
