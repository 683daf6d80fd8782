#include "mvcwm/tails.hpp"

#include "mvcwm/errors.hpp"
#include "mvcwm/specialfn.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace mvcwm {

namespace {

// Root of a decreasing function on [kTailLower, kTailUpper].
template <class F>
RootResult decreasing_root(F f) {
    const double f_lo = f(kTailLower);
    const double f_hi = f(kTailUpper);
    if (f_lo <= 0.0) {
        return {kTailLower, f_lo < 0.0};
    }
    if (f_hi >= 0.0) {
        return {kTailUpper, f_hi > 0.0};
    }
    std::uintmax_t max_iter = 200;
    const auto [lo, hi] = boost::math::tools::toms748_solve(
        f, kTailLower, kTailUpper, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(52),
        max_iter);
    return {0.5 * (lo + hi), false};
}

double weighted_mean(const Eigen::VectorXd& z, const Eigen::VectorXd& v) {
    const double t = z.sum();
    if (!(t > 0.0)) {
        throw NumericalError("tail update with zero total responsibility");
    }
    return z.dot(v) / t;
}

}  // namespace

RootResult update_nu(double s_stat) {
    if (!std::isfinite(s_stat)) {
        throw NumericalError("non-finite statistic in the nu update");
    }
    return decreasing_root([s_stat](double nu) {
        return std::log(0.5 * nu) + 1.0 - digamma(0.5 * nu) - s_stat;
    });
}

RootResult update_nu(const Eigen::VectorXd& z, const Eigen::VectorXd& m,
                     const Eigen::VectorXd& n) {
    return update_nu(weighted_mean(z, m + n));
}

RootResult update_gamma(double l_bar, double n_bar) {
    if (!(l_bar > 0.0) || !std::isfinite(n_bar)) {
        throw NumericalError("invalid moments in the gamma update");
    }
    const double shift = n_bar - l_bar;
    return decreasing_root(
        [shift](double g) { return std::log(g) + 1.0 - digamma(g) + shift; });
}

double update_kappa(double l_bar) {
    if (!(l_bar > 0.0) || !std::isfinite(l_bar)) {
        throw NumericalError("kappa update needs a positive finite l_bar");
    }
    return 1.0 / l_bar;
}

double gh_tail_objective(double lambda, double omega, double l_bar, double m_bar, double n_bar) {
    return -log_bessel_k(lambda, omega) + (lambda - 1.0) * n_bar - 0.5 * omega * (l_bar + m_bar);
}

GhUpdate update_gh(double lambda_prev, double omega_prev, double l_bar, double m_bar,
                   double n_bar) {
    if (!(omega_prev > 0.0)) {
        throw DomainError("GH update needs omega > 0");
    }
    auto q = [&](double lam, double om) { return gh_tail_objective(lam, om, l_bar, m_bar, n_bar); };

    GhUpdate out;
    out.lambda = lambda_prev;
    out.omega = omega_prev;

    // lambda
    const double deriv = dlog_bessel_k_dorder(lambda_prev, omega_prev);
    if (std::abs(deriv) < 1e-12 || !std::isfinite(deriv)) {
        out.lambda_kept = true;
    } else {
        const double q0 = q(lambda_prev, omega_prev);
        double candidate = n_bar * lambda_prev / deriv;
        bool accepted = false;
        for (int k = 0; k < 30 && std::isfinite(candidate); ++k) {
            if (q(candidate, omega_prev) >= q0) {
                accepted = true;
                break;
            }
            candidate = 0.5 * (candidate + lambda_prev);
        }
        if (accepted) {
            out.lambda = candidate;
        } else {
            out.lambda_kept = true;
        }
    }

    // omega: one Newton step on q(lambda_new, .)
    const double w = omega_prev;
    const double h = 1e-3 * w;
    const double q_mid = q(out.lambda, w);
    const double q_up = q(out.lambda, w + h);
    const double q_dn = q(out.lambda, w - h);
    const double d1 = (q_up - q_dn) / (2.0 * h);
    const double d2 = (q_up - 2.0 * q_mid + q_dn) / (h * h);
    if (!(d2 < 0.0) || !std::isfinite(d1)) {
        out.omega_kept = true;
        return out;
    }
    double step = -d1 / d2;
    for (int k = 0; k < 30; ++k) {
        const double cand = std::clamp(w + step, 1e-4, 1e4);
        if (q(out.lambda, cand) >= q_mid) {
            out.omega = cand;
            return out;
        }
        step *= 0.5;
    }
    out.omega_kept = true;
    return out;
}

TailParams update_tail(const TailParams& prev, const Eigen::VectorXd& z, const Eigen::VectorXd& l,
                       const Eigen::VectorXd& m, const Eigen::VectorXd& n,
                       std::vector<std::string>* notes) {
    auto note = [notes](const std::string& s) {
        if (notes != nullptr) {
            notes->push_back(s);
        }
    };
    switch (family_of(prev)) {
        case Family::Normal:
            return prev;
        case Family::SkewT: {
            const RootResult res = update_nu(z, m, n);
            if (res.saturated) {
                note("nu saturated at " + std::to_string(res.value));
            }
            return SkewTTail{res.value};
        }
        case Family::GeneralizedHyperbolic: {
            const auto& t = std::get<GhTail>(prev);
            const GhUpdate res = update_gh(t.lambda, t.omega, weighted_mean(z, l),
                                           weighted_mean(z, m), weighted_mean(z, n));
            if (res.lambda_kept) {
                note("GH lambda step rejected");
            }
            return GhTail{res.lambda, res.omega};
        }
        case Family::VarianceGamma: {
            const RootResult res = update_gamma(weighted_mean(z, l), weighted_mean(z, n));
            if (res.saturated) {
                note("gamma saturated at " + std::to_string(res.value));
            }
            return VgTail{res.value};
        }
        case Family::NormalInverseGaussian:
            return NigTail{update_kappa(weighted_mean(z, l))};
    }
    return prev;
}

}  // namespace mvcwm
