#include "mvcwm/densities.hpp"

#include "mvcwm/errors.hpp"
#include "mvcwm/gig.hpp"
#include "mvcwm/kernels.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace mvcwm {

namespace {

constexpr double kLn2 = std::numbers::ln2;
const double kLn2Pi = std::log(2.0 * std::numbers::pi);

// log of the integral int w^(lambda-1) exp(-(a w + b / w) / 2) dw, divided by 2:
// (lambda/2) ln(b/a) + log K_lambda(sqrt(ab)), with the gamma / inverse-gamma
// limits when a or b vanish.
double log_bessel_kernel(double lambda, double a, double b) {
    if (a > 0.0 && b > 0.0) {
        return 0.5 * lambda * (std::log(b) - std::log(a)) + log_bessel_k(lambda, std::sqrt(a * b));
    }
    if (a == 0.0 && b > 0.0 && lambda < 0.0) {
        return log_gamma(-lambda) + lambda * std::log(0.5 * b) - kLn2;
    }
    if (b == 0.0 && a > 0.0 && lambda > 0.0) {
        return log_gamma(lambda) + (lambda - 1.0) * kLn2 - lambda * std::log(a);
    }
    throw NumericalError("density is infinite at this point (a=" + std::to_string(a) +
                         ", b=" + std::to_string(b) + ", lambda=" + std::to_string(lambda) + ")");
}

void check_law(const Eigen::MatrixXd& V, const MatrixLaw& law) {
    const auto d = V.rows();
    const auto r = V.cols();
    if (law.M.rows() != d || law.M.cols() != r || law.sigma.rows() != d ||
        law.sigma.cols() != d || law.psi.rows() != r || law.psi.cols() != r) {
        throw DimensionError("matrix law dimensions do not match the observation");
    }
    if (law.family() != Family::Normal && (law.A.rows() != d || law.A.cols() != r)) {
        throw DimensionError("skewness matrix dimensions do not match the observation");
    }
}

double base_term(int d, int r, const SpdFactor& sigma, const SpdFactor& psi) {
    return -0.5 * d * r * kLn2Pi - 0.5 * r * sigma.logdet() - 0.5 * d * psi.logdet();
}

}  // namespace

Family family_of(const TailParams& tail) { return static_cast<Family>(tail.index()); }

TailParams default_tail(Family family) {
    switch (family) {
        case Family::Normal:
            return NormalTail{};
        case Family::SkewT:
            return SkewTTail{};
        case Family::GeneralizedHyperbolic:
            return GhTail{};
        case Family::VarianceGamma:
            return VgTail{};
        case Family::NormalInverseGaussian:
            return NigTail{};
    }
    return NormalTail{};
}

bool is_skewed(Family family) { return family != Family::Normal; }

int tail_count(Family family) {
    switch (family) {
        case Family::Normal:
            return 0;
        case Family::GeneralizedHyperbolic:
            return 2;
        default:
            return 1;
    }
}

std::string_view family_code(Family family) {
    switch (family) {
        case Family::Normal:
            return "MVN";
        case Family::SkewT:
            return "MVST";
        case Family::GeneralizedHyperbolic:
            return "MVGH";
        case Family::VarianceGamma:
            return "MVVG";
        case Family::NormalInverseGaussian:
            return "MVNIG";
    }
    return "?";
}

Family parse_family(std::string_view code) {
    for (Family f : kAllFamilies) {
        if (family_code(f) == code) {
            return f;
        }
    }
    throw ValidationError("unknown family '" + std::string(code) +
                          "' (expected MVN, MVST, MVGH, MVVG or MVNIG)");
}

void validate_tail(const TailParams& tail) {
    auto bad = [](const char* what) { throw DomainError(what); };
    if (const auto* t = std::get_if<SkewTTail>(&tail); t && !(t->nu > 0.0)) {
        bad("skew-t needs nu > 0");
    }
    if (const auto* t = std::get_if<GhTail>(&tail);
        t && (!(t->omega > 0.0) || !std::isfinite(t->lambda))) {
        bad("generalized hyperbolic needs omega > 0 and finite lambda");
    }
    if (const auto* t = std::get_if<VgTail>(&tail); t && !(t->gamma > 0.0)) {
        bad("variance-gamma needs gamma > 0");
    }
    if (const auto* t = std::get_if<NigTail>(&tail); t && !(t->kappa > 0.0)) {
        bad("normal inverse Gaussian needs kappa > 0");
    }
}

double delta_quad(const Eigen::MatrixXd& V, const Eigen::MatrixXd& M, const SpdFactor& sigma,
                  const SpdFactor& psi) {
    if (V.rows() != M.rows() || V.cols() != M.cols() || V.rows() != sigma.dim() ||
        V.cols() != psi.dim()) {
        throw DimensionError("delta_quad: dimension mismatch");
    }
    return psi.whiten_right(sigma.whiten_left(V - M)).squaredNorm();
}

double rho_quad(const Eigen::MatrixXd& A, const SpdFactor& sigma, const SpdFactor& psi) {
    if (A.rows() != sigma.dim() || A.cols() != psi.dim()) {
        throw DimensionError("rho_quad: dimension mismatch");
    }
    return psi.whiten_right(sigma.whiten_left(A)).squaredNorm();
}

double tail_log_constant(const TailParams& tail) {
    switch (family_of(tail)) {
        case Family::Normal:
            return 0.0;
        case Family::SkewT: {
            const double nu = std::get<SkewTTail>(tail).nu;
            return kLn2 + 0.5 * nu * std::log(0.5 * nu) - log_gamma(0.5 * nu);
        }
        case Family::GeneralizedHyperbolic: {
            const auto& t = std::get<GhTail>(tail);
            return -log_bessel_k(t.lambda, t.omega);
        }
        case Family::VarianceGamma: {
            const double g = std::get<VgTail>(tail).gamma;
            return kLn2 + g * std::log(g) - log_gamma(g);
        }
        case Family::NormalInverseGaussian: {
            const double k = std::get<NigTail>(tail).kappa;
            return kLn2 + k - 0.5 * kLn2Pi;
        }
    }
    return 0.0;
}

double evaluate_observation(const TailParams& tail, double tail_const, int dr, double base,
                            const Quads& q, GigMoments* moments, bool want_log_moment) {
    if (family_of(tail) == Family::Normal) {
        if (moments != nullptr) {
            *moments = GigMoments{};
        }
        return base - 0.5 * q.delta;
    }
    // The Bessel kernel of every skewed density is evaluated at the
    // parameters of the conditional law of W.
    const GigConditional c = conditional_gig(tail, dr, q.delta, q.rho);
    double kernel = 0.0;
    if (c.a > 0.0 && c.b > 0.0) {
        const double omega = std::sqrt(c.a * c.b);
        const double log_eta = 0.5 * (std::log(c.b) - std::log(c.a));
        if (moments != nullptr) {
            const LogBesselKTriple k = log_bessel_k_triple(c.lambda, omega);
            kernel = c.lambda * log_eta + k.center;
            moments->e_w = std::exp(log_eta + k.plus - k.center);
            moments->e_inv_w = std::exp(-log_eta + k.minus - k.center);
            moments->e_log_w =
                want_log_moment ? log_eta + dlog_bessel_k_dorder(c.lambda, omega) : 0.0;
        } else {
            kernel = c.lambda * log_eta + log_bessel_k(c.lambda, omega);
        }
    } else {
        kernel = log_bessel_kernel(c.lambda, c.a, c.b);
        if (moments != nullptr) {
            *moments = conditional_moments(c.a, c.b, c.lambda);
            if (!want_log_moment) {
                moments->e_log_w = 0.0;
            }
        }
    }
    return tail_const + base + q.tau + kernel;
}

double log_density_from_quads(const TailParams& tail, int dr, double base, const Quads& q) {
    return evaluate_observation(tail, tail_log_constant(tail), dr, base, q, nullptr, false);
}

GigConditional conditional_gig(const TailParams& tail, int dr, double delta, double rho) {
    const double hdr = 0.5 * dr;
    switch (family_of(tail)) {
        case Family::SkewT: {
            const double nu = std::get<SkewTTail>(tail).nu;
            return {rho, delta + nu, -(0.5 * nu + hdr)};
        }
        case Family::GeneralizedHyperbolic: {
            const auto& t = std::get<GhTail>(tail);
            return {rho + t.omega, delta + t.omega, t.lambda - hdr};
        }
        case Family::VarianceGamma: {
            const double g = std::get<VgTail>(tail).gamma;
            return {rho + 2.0 * g, delta, g - hdr};
        }
        case Family::NormalInverseGaussian: {
            const double k = std::get<NigTail>(tail).kappa;
            return {rho + k * k, delta + 1.0, -0.5 * (1.0 + dr)};
        }
        case Family::Normal:
            break;
    }
    throw DomainError("conditional_gig called for the normal family");
}

double mvn_log_density(const Eigen::MatrixXd& V, const MatrixLaw& law) {
    if (law.family() != Family::Normal) {
        throw DomainError("mvn_log_density needs a normal law");
    }
    check_law(V, law);
    const SpdFactor sigma = spd_factorize(law.sigma);
    const SpdFactor psi = spd_factorize(law.psi);
    const int d = static_cast<int>(V.rows());
    const int r = static_cast<int>(V.cols());
    Quads q;
    q.delta = delta_quad(V, law.M, sigma, psi);
    return log_density_from_quads(law.tail, d * r, base_term(d, r, sigma, psi), q);
}

double skewed_log_density(const Eigen::MatrixXd& V, const MatrixLaw& law) {
    if (law.family() == Family::Normal) {
        throw DomainError("skewed_log_density needs a skewed law");
    }
    check_law(V, law);
    validate_tail(law.tail);
    const SpdFactor sigma = spd_factorize(law.sigma);
    const SpdFactor psi = spd_factorize(law.psi);
    const int d = static_cast<int>(V.rows());
    const int r = static_cast<int>(V.cols());
    const Eigen::MatrixXd rw = psi.whiten_right(sigma.whiten_left(V - law.M));
    const Eigen::MatrixXd aw = psi.whiten_right(sigma.whiten_left(law.A));
    Quads q;
    q.delta = rw.squaredNorm();
    q.rho = aw.squaredNorm();
    q.tau = (rw.array() * aw.array()).sum();
    return log_density_from_quads(law.tail, d * r, base_term(d, r, sigma, psi), q);
}

double log_density(const Eigen::MatrixXd& V, const MatrixLaw& law) {
    return law.family() == Family::Normal ? mvn_log_density(V, law) : skewed_log_density(V, law);
}

QuadBatch batch_quads(const Eigen::MatrixXd& residuals, const Eigen::MatrixXd& A,
                      const SpdFactor& sigma, const SpdFactor& psi) {
    const Eigen::Index d = sigma.dim();
    const Eigen::Index r = psi.dim();
    if (residuals.rows() != d || residuals.cols() % r != 0) {
        throw DimensionError("batch_quads: residual stack has the wrong shape");
    }
    const Eigen::Index n = residuals.cols() / r;
    const auto len = static_cast<std::size_t>(d * r);

    // Left whitening for all observations at once, then right whitening per block.
    Eigen::MatrixXd w = sigma.whiten_left(residuals);
    const Eigen::MatrixXd psi_inv_t =
        psi.lower().triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(r, r)).transpose();
    Eigen::MatrixXd block(d, r);
    for (Eigen::Index i = 0; i < n; ++i) {
        block.noalias() = w.middleCols(i * r, r) * psi_inv_t.triangularView<Eigen::Upper>();
        w.middleCols(i * r, r) = block;
    }

    QuadBatch out;
    out.delta.resize(n);
    kernels::block_sqnorms(w.data(), len, static_cast<std::size_t>(n), out.delta.data());

    if (A.size() == 0 || A.isZero(0.0)) {
        out.tau = Eigen::VectorXd::Zero(n);
        out.rho = 0.0;
        return out;
    }
    if (A.rows() != d || A.cols() != r) {
        throw DimensionError("batch_quads: skewness matrix has the wrong shape");
    }
    const Eigen::MatrixXd aw = psi.whiten_right(sigma.whiten_left(A));
    out.rho = aw.squaredNorm();
    // tau_i = <w_i, aw>, one matrix-vector product over the contiguous blocks.
    const Eigen::Map<const Eigen::MatrixXd> blocks(w.data(), static_cast<Eigen::Index>(len), n);
    const Eigen::Map<const Eigen::VectorXd> avec(aw.data(), static_cast<Eigen::Index>(len));
    out.tau.noalias() = blocks.transpose() * avec;
    return out;
}

}  // namespace mvcwm
