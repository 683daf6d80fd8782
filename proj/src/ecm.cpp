#include "mvcwm/ecm.hpp"

#include "mvcwm/errors.hpp"
#include "mvcwm/evaluate.hpp"
#include "mvcwm/kernels.hpp"
#include "mvcwm/tails.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace mvcwm {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---- stacked-block helpers ----
// A "stack" holds N matrices of size d x r side by side (d x rN).

VectorXd repeat_each(const VectorXd& c, Index k) {
    VectorXd out(c.size() * k);
    for (Index i = 0; i < c.size(); ++i) {
        out.segment(i * k, k).setConstant(c(i));
    }
    return out;
}

// Every block multiplied on the right by L_psi^{-T}.
MatrixXd right_whiten_blocks(const MatrixXd& stack, const SpdFactor& psi) {
    const Index r = psi.dim();
    const Index n = stack.cols() / r;
    const MatrixXd kinv_t = psi.lower()
                                .triangularView<Eigen::Lower>()
                                .solve(MatrixXd::Identity(r, r))
                                .transpose();
    MatrixXd out(stack.rows(), stack.cols());
    for (Index i = 0; i < n; ++i) {
        out.middleCols(i * r, r).noalias() =
            stack.middleCols(i * r, r) * kinv_t.triangularView<Eigen::Upper>();
    }
    return out;
}

// d x rN -> r x dN, each block transposed in place.
MatrixXd transpose_blocks(const MatrixXd& stack, Index r) {
    const Index d = stack.rows();
    const Index n = stack.cols() / r;
    MatrixXd out(r, d * n);
    for (Index i = 0; i < n; ++i) {
        out.middleCols(i * d, d) = stack.middleCols(i * r, r).transpose();
    }
    return out;
}

// sum_i w_i block_i
MatrixXd block_sum(const MatrixXd& stack, const VectorXd& w, Index r) {
    MatrixXd out(stack.rows(), r);
    if (stack.rows() == 0) {
        return out;
    }
    kernels::weighted_block_sum(stack.data(), w.data(),
                                static_cast<std::size_t>(stack.rows() * r),
                                static_cast<std::size_t>(w.size()), out.data());
    return out;
}

// sum_i c_i block_i block_i' for a stack whose blocks have `width` columns.
MatrixXd weighted_gram(const MatrixXd& stack, const VectorXd& c, Index width) {
    const VectorXd rep = repeat_each(c, width);
    MatrixXd scaled = stack * rep.asDiagonal();
    return scaled * stack.transpose();
}

MatrixXd repair_spd(MatrixXd s, double ridge, std::size_t g) {
    s = 0.5 * (s + s.transpose()).eval();
    if (!s.allFinite()) {
        throw CollapseError(g, "scale matrix of component " + std::to_string(g) +
                                   " is not finite");
    }
    try {
        (void)spd_factorize(s);
        return s;
    } catch (const SingularMatrixError&) {
    }
    const double mean_diag = s.diagonal().cwiseAbs().mean();
    const double unit = mean_diag > 0.0 ? mean_diag : 1.0;
    double eps = ridge;
    for (int k = 0; k <= 10; ++k) {
        MatrixXd t = s;
        t.diagonal().array() += eps * unit;
        try {
            (void)spd_factorize(t);
            return t;
        } catch (const SingularMatrixError&) {
        }
        eps *= 2.0;
    }
    throw CollapseError(g, "scale matrix of component " + std::to_string(g) +
                               " could not be made positive definite");
}

// ---- per-side evaluation ----

struct SideView {
    const MatrixXd* A;
    const MatrixXd* sigma;
    const MatrixXd* psi;
    const TailParams* tail;
};

// A VG density with gamma <= d r / 2 is unbounded at its location. Flags the
// component once that location sits on an observation to machine precision.
void check_vg_spike(const VectorXd& delta, const TailParams& tail, int dim, std::size_t g) {
    const auto* vg = std::get_if<VgTail>(&tail);
    if (vg == nullptr || vg->gamma > 0.5 * dim || delta.size() < 2) {
        return;
    }
    std::vector<double> d(delta.data(), delta.data() + delta.size());
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    const double median = *mid;
    const double lowest = *std::min_element(d.begin(), d.end());
    if (lowest < std::numeric_limits<double>::epsilon() * median) {
        throw CollapseError(g, "component " + std::to_string(g) +
                                   " degenerated onto an observation (VG gamma = " +
                                   std::to_string(vg->gamma) + ")");
    }
}

// Adds the side's log density to logp and fills the moment columns.
void evaluate_side(const MatrixXd& residuals, const SideView& side, std::size_t g, double* logp,
                   double* l, double* m, double* n, bool want_log_moment, bool spike_guard) {
    const Family fam = family_of(*side.tail);
    const SpdFactor sigma = spd_factorize(*side.sigma);
    const SpdFactor psi = spd_factorize(*side.psi);
    const int d = static_cast<int>(sigma.dim());
    const int r = static_cast<int>(psi.dim());
    static const MatrixXd kNoSkew;
    const QuadBatch qb = batch_quads(residuals, is_skewed(fam) ? *side.A : kNoSkew, sigma, psi);
    const double base = -0.5 * d * r * std::log(2.0 * std::numbers::pi) -
                        0.5 * r * sigma.logdet() - 0.5 * d * psi.logdet();
    const double tail_const = tail_log_constant(*side.tail);
    if (spike_guard) {
        check_vg_spike(qb.delta, *side.tail, d * r, g);
    }
    const Index count = qb.delta.size();
    for (Index i = 0; i < count; ++i) {
        const Quads q{qb.delta(i), qb.rho, qb.tau(i)};
        GigMoments gm;
        double v = 0.0;
        try {
            v = evaluate_observation(*side.tail, tail_const, d * r, base, q,
                                     l != nullptr ? &gm : nullptr, want_log_moment);
        } catch (const Error& e) {
            throw NumericalError(std::string(e.what()) + " at observation " + std::to_string(i) +
                                     ", component " + std::to_string(g),
                                 static_cast<std::size_t>(i), g);
        }
        if (!std::isfinite(v)) {
            throw NumericalError("non-finite density at observation " + std::to_string(i) +
                                     ", component " + std::to_string(g),
                                 static_cast<std::size_t>(i), g);
        }
        logp[i] += v;
        if (l != nullptr) {
            l[i] = gm.e_w;
            m[i] = gm.e_inv_w;
            n[i] = gm.e_log_w;
        }
    }
}

MatrixXd covariate_residuals(const ThreeWayData& data, const ComponentParams& c) {
    return data.x_stack() - c.M_X.replicate(1, data.n());
}

MatrixXd response_residuals(const ThreeWayData& data, const ComponentParams& c) {
    MatrixXd r = data.y_stack();
    r.noalias() -= c.B * data.x_star_stack();
    return r;
}

bool needs_log_moment(Family f) {
    return f == Family::SkewT || f == Family::GeneralizedHyperbolic ||
           f == Family::VarianceGamma;
}

// Returns the observed log-likelihood; fills moments when requested.
double evaluate_model(const ThreeWayData& data, const ModelParams& params, LatentMoments* mom,
                      bool all_log_moments, bool spike_guard = false) {
    const ModelSpec& spec = params.spec;
    const Index n = data.n();
    const Index G = spec.G;
    if (static_cast<Index>(params.components.size()) != G) {
        throw DimensionError("number of components does not match G");
    }
    if (data.p() != spec.p || data.q() != spec.q || data.r() != spec.r) {
        throw DimensionError("data dimensions do not match the model");
    }
    MatrixXd logp(n, G);
    if (mom != nullptr) {
        mom->l_X = MatrixXd::Ones(n, G);
        mom->m_X = MatrixXd::Ones(n, G);
        mom->n_X = MatrixXd::Zero(n, G);
        mom->l_Y = MatrixXd::Ones(n, G);
        mom->m_Y = MatrixXd::Ones(n, G);
        mom->n_Y = MatrixXd::Zero(n, G);
    }
    for (Index g = 0; g < G; ++g) {
        const ComponentParams& c = params.components[static_cast<std::size_t>(g)];
        if (!(c.pi > 0.0)) {
            throw NumericalError("non-positive mixing proportion", NumericalError::npos,
                                 static_cast<std::size_t>(g));
        }
        logp.col(g).setConstant(std::log(c.pi));
        const auto gg = static_cast<std::size_t>(g);
        if (spec.models_covariates()) {
            const bool want_mom = mom != nullptr && is_skewed(spec.covariate_family);
            evaluate_side(covariate_residuals(data, c), {&c.A_X, &c.Sigma_X, &c.Psi_X, &c.tail_X},
                          gg, logp.col(g).data(), want_mom ? mom->l_X.col(g).data() : nullptr,
                          want_mom ? mom->m_X.col(g).data() : nullptr,
                          want_mom ? mom->n_X.col(g).data() : nullptr,
                          all_log_moments || needs_log_moment(spec.covariate_family), spike_guard);
        }
        const bool want_mom = mom != nullptr && is_skewed(spec.response_family);
        evaluate_side(response_residuals(data, c), {&c.A_Y, &c.Sigma_Y, &c.Psi_Y, &c.tail_Y}, gg,
                      logp.col(g).data(), want_mom ? mom->l_Y.col(g).data() : nullptr,
                      want_mom ? mom->m_Y.col(g).data() : nullptr,
                      want_mom ? mom->n_Y.col(g).data() : nullptr,
                      all_log_moments || needs_log_moment(spec.response_family), spike_guard);
    }
    VectorXd lognorm(n);
    kernels::softmax_rows(logp.data(), static_cast<std::size_t>(n), static_cast<std::size_t>(G),
                          lognorm.data());
    for (Index i = 0; i < n; ++i) {
        if (!std::isfinite(lognorm(i))) {
            throw NumericalError("responsibility row " + std::to_string(i) + " underflowed",
                                 static_cast<std::size_t>(i));
        }
    }
    if (mom != nullptr) {
        mom->z = std::move(logp);
    }
    return lognorm.sum();
}

void check_moments(const LatentMoments& mom, Index n, Index G) {
    auto ok = [&](const MatrixXd& m) { return m.rows() == n && m.cols() == G; };
    if (!ok(mom.z) || !ok(mom.l_X) || !ok(mom.m_X) || !ok(mom.n_X) || !ok(mom.l_Y) ||
        !ok(mom.m_Y) || !ok(mom.n_Y)) {
        throw DimensionError("latent moments have the wrong shape");
    }
}

// ---- CM building blocks shared by both sides ----

// Row scale given residuals R_i = V_i - loc_i, skewness A and Psi.
MatrixXd row_scale_update(const MatrixXd& residuals, const MatrixXd& A, const MatrixXd& psi_m,
                          const VectorXd& z, const VectorXd& l, const VectorXd& m, double ridge,
                          std::size_t g) {
    const SpdFactor psi = spd_factorize(psi_m);
    const Index r = psi.dim();
    const double T = z.sum();
    const VectorXd zm = z.cwiseProduct(m);
    MatrixXd s = weighted_gram(right_whiten_blocks(residuals, psi), zm, r);
    if (!A.isZero(0.0)) {
        const MatrixXd srk = psi.whiten_right(block_sum(residuals, z, r));
        const MatrixXd ak = psi.whiten_right(A);
        const MatrixXd cross = srk * ak.transpose();
        s -= cross + cross.transpose();
        s += z.dot(l) * (ak * ak.transpose());
    }
    s /= static_cast<double>(r) * T;
    return repair_spd(std::move(s), ridge, g);
}

// Column scale given residuals, skewness A and the (new) Sigma.
MatrixXd col_scale_update(const MatrixXd& residuals, const MatrixXd& A, const MatrixXd& sigma_m,
                          Index r, const VectorXd& z, const VectorXd& l, const VectorXd& m,
                          double ridge, std::size_t g) {
    const SpdFactor sigma = spd_factorize(sigma_m);
    const Index d = sigma.dim();
    const double T = z.sum();
    const VectorXd zm = z.cwiseProduct(m);
    MatrixXd s = weighted_gram(transpose_blocks(sigma.whiten_left(residuals), r), zm, d);
    if (!A.isZero(0.0)) {
        const MatrixXd sl = sigma.whiten_left(block_sum(residuals, z, r));
        const MatrixXd al = sigma.whiten_left(A);
        const MatrixXd cross = sl.transpose() * al;
        s -= cross + cross.transpose();
        s += z.dot(l) * (al.transpose() * al);
    }
    s /= static_cast<double>(d) * T;
    return repair_spd(std::move(s), ridge, g);
}

// Below this l_bar m_bar - 1 the mixing variable is numerically constant and
// A is confounded with the location.
constexpr double kSkewConfounded = 1e-10;

// B = rhs P^{-1} after symmetric diagonal equilibration of P.
MatrixXd solve_design(const MatrixXd& P, const MatrixXd& rhs, std::size_t g) {
    const VectorXd diag = P.diagonal();
    if ((diag.array() <= 0.0).any() || !P.allFinite() || !rhs.allFinite()) {
        throw SingularDesignError(g, "regression design of component " + std::to_string(g) +
                                         " is singular");
    }
    const VectorXd dscale = diag.cwiseSqrt().cwiseInverse();
    const MatrixXd pt = dscale.asDiagonal() * P * dscale.asDiagonal();
    const Eigen::LLT<MatrixXd> llt(0.5 * (pt + pt.transpose()));
    if (llt.info() != Eigen::Success || llt.rcond() < 1e-14) {
        throw SingularDesignError(g, "regression design of component " + std::to_string(g) +
                                         " is singular");
    }
    const MatrixXd scaled_rhs_t = dscale.asDiagonal() * rhs.transpose();
    return llt.solve(scaled_rhs_t).transpose() * dscale.asDiagonal();
}

void covariate_cm1(const ThreeWayData& data, const VectorXd& z, const VectorXd& l,
                   const VectorXd& m, bool skew, double ridge, std::size_t g, ComponentParams& c) {
    const Index r = data.r();
    const double T = z.sum();
    const VectorXd zm = z.cwiseProduct(m);
    const MatrixXd s_vm = block_sum(data.x_stack(), zm, r);
    const double l_bar = z.dot(l) / T;
    const double m_bar = zm.sum() / T;
    const double den = l_bar * m_bar - 1.0;
    if (skew && den > kSkewConfounded) {
        const MatrixXd s_v = block_sum(data.x_stack(), z, r);
        c.M_X = (l_bar * s_vm - s_v) / (T * den);
        c.A_X = (m_bar * s_v - s_vm) / (T * den);
    } else {
        c.M_X = s_vm / zm.sum();
        c.A_X = MatrixXd::Zero(data.q(), r);
    }
    c.Sigma_X = row_scale_update(covariate_residuals(data, c), c.A_X, c.Psi_X, z, l, m, ridge, g);
}

void response_cm1(const ThreeWayData& data, const VectorXd& z, const VectorXd& l,
                  const VectorXd& m, bool skew, double ridge, std::size_t g, ComponentParams& c) {
    const Index r = data.r();
    const double T = z.sum();
    const VectorXd zm = z.cwiseProduct(m);
    const double den = (z.dot(l) / T) * (zm.sum() / T) - 1.0;
    skew = skew && den > kSkewConfounded;

    const SpdFactor psi = spd_factorize(c.Psi_Y);
    const MatrixXd yk = right_whiten_blocks(data.y_stack(), psi);
    const MatrixXd xk = right_whiten_blocks(data.x_star_stack(), psi);
    const VectorXd rep = repeat_each(zm, r);
    const MatrixXd xk_w = xk * rep.asDiagonal();
    MatrixXd rhs = yk * xk_w.transpose();
    MatrixXd P = xk * xk_w.transpose();
    MatrixXd s_y;
    MatrixXd s_x;
    const double l_sum = z.dot(l);
    if (skew) {
        s_y = block_sum(data.y_stack(), z, r);
        s_x = block_sum(data.x_star_stack(), z, r);
        const MatrixXd syk = psi.whiten_right(s_y);
        const MatrixXd sxk = psi.whiten_right(s_x);
        rhs -= syk * sxk.transpose() / l_sum;
        P -= sxk * sxk.transpose() / l_sum;
    }
    c.B = solve_design(P, rhs, g);
    if (skew) {
        c.A_Y = (s_y - c.B * s_x) / l_sum;
    } else {
        c.A_Y = MatrixXd::Zero(data.p(), r);
    }
    c.Sigma_Y = row_scale_update(response_residuals(data, c), c.A_Y, c.Psi_Y, z, l, m, ridge, g);
}

// ---- initialization ----

double uniform_open(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Lloyd's algorithm with k-means++ seeding; returns nullopt on an empty cluster.
std::optional<std::vector<int>> kmeans(const MatrixXd& features, int k, std::mt19937_64& rng) {
    const Index n = features.rows();
    MatrixXd centers(k, features.cols());
    // k-means++ seeding
    std::uniform_int_distribution<Index> pick(0, n - 1);
    centers.row(0) = features.row(pick(rng));
    VectorXd dist2(n);
    for (int c = 1; c < k; ++c) {
        for (Index i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (int j = 0; j < c; ++j) {
                best = std::min(best, (features.row(i) - centers.row(j)).squaredNorm());
            }
            dist2(i) = best;
        }
        const double total = dist2.sum();
        Index chosen = n - 1;
        if (total > 0.0) {
            double u = uniform_open(rng) * total;
            for (Index i = 0; i < n; ++i) {
                u -= dist2(i);
                if (u <= 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        centers.row(c) = features.row(chosen);
    }

    std::vector<int> labels(static_cast<std::size_t>(n), -1);
    for (int iter = 0; iter < 200; ++iter) {
        bool changed = false;
        for (Index i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int j = 0; j < k; ++j) {
                const double dd = (features.row(i) - centers.row(j)).squaredNorm();
                if (dd < best_d) {
                    best_d = dd;
                    best = j;
                }
            }
            if (labels[static_cast<std::size_t>(i)] != best) {
                labels[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        std::vector<Index> counts(static_cast<std::size_t>(k), 0);
        centers.setZero();
        for (Index i = 0; i < n; ++i) {
            const int lab = labels[static_cast<std::size_t>(i)];
            centers.row(lab) += features.row(i);
            ++counts[static_cast<std::size_t>(lab)];
        }
        for (int j = 0; j < k; ++j) {
            if (counts[static_cast<std::size_t>(j)] == 0) {
                return std::nullopt;
            }
            centers.row(j) /= static_cast<double>(counts[static_cast<std::size_t>(j)]);
        }
        if (!changed) {
            break;
        }
    }
    return labels;
}

MatrixXd kmeans_features(const ThreeWayData& data) {
    const Index n = data.n();
    const Index py = data.p() * data.r();
    const Index qx = data.q() * data.r();
    MatrixXd f(n, py + qx);
    for (Index i = 0; i < n; ++i) {
        f.row(i).head(py) = data.y_stack().middleCols(i * data.r(), data.r()).reshaped().transpose();
        if (qx > 0) {
            f.row(i).tail(qx) =
                data.x_stack().middleCols(i * data.r(), data.r()).reshaped().transpose();
        }
    }
    return f;
}

// Per-column ranks scaled to [0, 1], ties averaged. Invariant to monotone
// distortions of each entry, so a few huge values cannot dominate k-means.
MatrixXd rank_features(const MatrixXd& f) {
    const Index n = f.rows();
    MatrixXd out(n, f.cols());
    std::vector<Index> idx(static_cast<std::size_t>(n));
    for (Index j = 0; j < f.cols(); ++j) {
        std::iota(idx.begin(), idx.end(), Index{0});
        std::sort(idx.begin(), idx.end(), [&](Index a, Index b) { return f(a, j) < f(b, j); });
        for (Index lo = 0; lo < n;) {
            Index hi = lo + 1;
            while (hi < n && f(idx[static_cast<std::size_t>(hi)], j) ==
                                 f(idx[static_cast<std::size_t>(lo)], j)) {
                ++hi;
            }
            const double rank = 0.5 * static_cast<double>(lo + hi - 1);
            for (Index k = lo; k < hi; ++k) {
                out(idx[static_cast<std::size_t>(k)], j) =
                    n > 1 ? rank / static_cast<double>(n - 1) : 0.0;
            }
            lo = hi;
        }
    }
    return out;
}

// Same partition up to relabeling.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
    std::map<int, int> ab, ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto [it1, new1] = ab.emplace(a[i], b[i]);
        const auto [it2, new2] = ba.emplace(b[i], a[i]);
        if (it1->second != b[i] || it2->second != a[i]) {
            return false;
        }
    }
    return true;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t x = master + 0x9E3779B97F4A7C15ULL * (index + 1);
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double observed_loglik(const ThreeWayData& data, const ModelParams& params) {
    return evaluate_model(data, params, nullptr, false);
}

LatentMoments e_step(const ThreeWayData& data, const ModelParams& params) {
    LatentMoments mom;
    (void)evaluate_model(data, params, &mom, true);
    return mom;
}

ModelParams cm_step1(const ThreeWayData& data, const LatentMoments& moments,
                     const ModelParams& params_prev, const CmOptions& options) {
    const ModelSpec& spec = params_prev.spec;
    const Index n = data.n();
    const Index G = spec.G;
    check_moments(moments, n, G);
    ModelParams out = params_prev;
    for (Index g = 0; g < G; ++g) {
        const auto gg = static_cast<std::size_t>(g);
        const VectorXd z = moments.z.col(g);
        const double pi = z.sum() / static_cast<double>(n);
        if (!(pi >= 1.0 / (10.0 * static_cast<double>(n)))) {
            throw CollapseError(gg, "component " + std::to_string(g) + " collapsed (pi = " +
                                        std::to_string(pi) + ")");
        }
        ComponentParams& c = out.components[gg];
        c.pi = pi;
        if (spec.models_covariates()) {
            covariate_cm1(data, z, moments.l_X.col(g), moments.m_X.col(g),
                          is_skewed(spec.covariate_family) && !options.freeze_skewness,
                          options.ridge, gg, c);
        }
        response_cm1(data, z, moments.l_Y.col(g), moments.m_Y.col(g),
                     is_skewed(spec.response_family) && !options.freeze_skewness, options.ridge, gg,
                     c);
    }
    return out;
}

ModelParams cm_step2(const ThreeWayData& data, const LatentMoments& moments,
                     const ModelParams& params_after_cm1, const CmOptions& options) {
    const ModelSpec& spec = params_after_cm1.spec;
    const Index G = spec.G;
    check_moments(moments, data.n(), G);
    ModelParams out = params_after_cm1;
    for (Index g = 0; g < G; ++g) {
        const auto gg = static_cast<std::size_t>(g);
        const VectorXd z = moments.z.col(g);
        ComponentParams& c = out.components[gg];
        if (spec.models_covariates()) {
            c.Psi_X = col_scale_update(covariate_residuals(data, c), c.A_X, c.Sigma_X, data.r(), z,
                                       moments.l_X.col(g), moments.m_X.col(g), options.ridge, gg);
        }
        c.Psi_Y = col_scale_update(response_residuals(data, c), c.A_Y, c.Sigma_Y, data.r(), z,
                                   moments.l_Y.col(g), moments.m_Y.col(g), options.ridge, gg);
    }
    return out;
}

ModelParams cm_step3(const LatentMoments& moments, const ModelParams& params,
                     std::vector<std::string>* notes) {
    const ModelSpec& spec = params.spec;
    ModelParams out = params;
    for (Index g = 0; g < spec.G; ++g) {
        ComponentParams& c = out.components[static_cast<std::size_t>(g)];
        const VectorXd z = moments.z.col(g);
        if (spec.models_covariates() && is_skewed(spec.covariate_family)) {
            c.tail_X = update_tail(c.tail_X, z, moments.l_X.col(g), moments.m_X.col(g),
                                   moments.n_X.col(g), notes);
        }
        if (is_skewed(spec.response_family)) {
            c.tail_Y = update_tail(c.tail_Y, z, moments.l_Y.col(g), moments.m_Y.col(g),
                                   moments.n_Y.col(g), notes);
        }
    }
    return out;
}

std::vector<StartPoint> starting_partitions(const ThreeWayData& data, const ModelSpec& spec,
                                            std::uint64_t seed, int count) {
    const Index n = data.n();
    const int G = spec.G;
    std::vector<StartPoint> out;
    if (G == 1) {
        out.push_back({"single", MatrixXd::Ones(n, 1)});
        return out;
    }
    if (count < 1) {
        throw ValidationError("need at least one start");
    }
    // Hard starts on raw and rank features; one re-seed each on an empty
    // cluster. A rank partition equal to the raw one is dropped.
    const MatrixXd raw = kmeans_features(data);
    std::vector<std::vector<int>> hard;
    auto add_hard = [&](const MatrixXd& features, std::uint64_t salt, const char* label) {
        if (static_cast<int>(out.size()) >= count) {
            return;
        }
        for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
            std::mt19937_64 rng(derive_seed(seed, salt + attempt));
            if (auto labels = kmeans(features, G, rng)) {
                for (const auto& h : hard) {
                    if (same_partition(h, *labels)) {
                        return;
                    }
                }
                MatrixXd z = MatrixXd::Zero(n, G);
                for (Index i = 0; i < n; ++i) {
                    z(i, (*labels)[static_cast<std::size_t>(i)]) = 1.0;
                }
                out.push_back({label, std::move(z)});
                hard.push_back(std::move(*labels));
                return;
            }
        }
    };
    add_hard(raw, 1000, "kmeans");
    add_hard(rank_features(raw), 2000, "kmeans-rank");
    const int n_soft = count - static_cast<int>(out.size());
    for (int k = 0; k < n_soft; ++k) {
        std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(k)));
        MatrixXd z(n, G);
        for (Index i = 0; i < n; ++i) {
            for (int g = 0; g < G; ++g) {
                z(i, g) = uniform_open(rng);
            }
            z.row(i) /= z.row(i).sum();
        }
        out.push_back({"soft-" + std::to_string(k + 1), std::move(z)});
    }
    return out;
}

ModelParams params_from_responsibilities(const ThreeWayData& data, const ModelSpec& spec,
                                         const MatrixXd& z, double ridge) {
    const Index n = data.n();
    LatentMoments mom;
    mom.z = z;
    mom.l_X = mom.m_X = mom.l_Y = mom.m_Y = MatrixXd::Ones(n, spec.G);
    mom.n_X = mom.n_Y = MatrixXd::Zero(n, spec.G);
    ModelParams params = default_params(spec);
    const CmOptions opts{ridge, true};
    params = cm_step1(data, mom, params, opts);
    params = cm_step2(data, mom, params, opts);
    return params;
}

FitResult run_ecm(const ThreeWayData& data, const ModelParams& start, const FitControls& controls) {
    if (controls.max_iter < 0 || !(controls.tol > 0.0)) {
        throw ValidationError("max_iter must be >= 0 and tol > 0");
    }
    const CmOptions opts{controls.ridge, controls.freeze_skewness};
    FitResult res;
    ModelParams params = start;
    LatentMoments mom;
    std::vector<std::string> notes;
    for (int it = 0;; ++it) {
        const double ll = evaluate_model(data, params, &mom, false, true);
        res.loglik_trace.push_back(ll);
        if (it > 0 && std::abs(ll - res.loglik_trace[res.loglik_trace.size() - 2]) < controls.tol) {
            res.converged = true;
            break;
        }
        if (it >= controls.max_iter) {
            break;
        }
        notes.clear();
        params = cm_step1(data, mom, params, opts);
        params = cm_step2(data, mom, params, opts);
        params = cm_step3(mom, params, &notes);
        res.n_iterations = it + 1;
    }
    res.params = std::move(params);
    res.responsibilities = std::move(mom.z);
    res.loglik = res.loglik_trace.back();
    res.notes = std::move(notes);
    return res;
}

namespace {

FitResult best_of_starts(const ThreeWayData& data, const ModelSpec& spec,
                         const FitControls& controls) {
    if (spec.G < 1) {
        throw ValidationError("G must be at least 1");
    }
    if (data.n() <= spec.G) {
        throw ValidationError("need more observations than components");
    }
    if (data.p() != spec.p || data.q() != spec.q || data.r() != spec.r) {
        throw DimensionError("data dimensions do not match the model");
    }
    const auto starts = starting_partitions(data, spec, controls.seed, controls.starts);
    std::optional<FitResult> best;
    std::exception_ptr last_error;
    for (const auto& s : starts) {
        try {
            const ModelParams init = params_from_responsibilities(data, spec, s.z, controls.ridge);
            FitResult r = run_ecm(data, init, controls);
            r.start_label = s.label;
            if (!best || r.loglik > best->loglik) {
                best = std::move(r);
            }
        } catch (const Error&) {
            last_error = std::current_exception();
        }
    }
    if (!best) {
        std::rethrow_exception(last_error);
    }
    return std::move(*best);
}

}  // namespace

LatentMoments initialize(const ThreeWayData& data, const ModelSpec& spec,
                         const FitControls& controls) {
    const FitResult best = best_of_starts(data, spec, controls);
    LatentMoments mom;
    mom.z = best.responsibilities;
    return mom;
}

void finalize_fit(FitResult& result, Index n_obs) {
    ModelParams& params = result.params;
    const auto order = labeling_order(params);
    std::vector<ComponentParams> comps;
    MatrixXd z(result.responsibilities.rows(), result.responsibilities.cols());
    for (std::size_t k = 0; k < order.size(); ++k) {
        comps.push_back(params.components[order[k]]);
        z.col(static_cast<Index>(k)) = result.responsibilities.col(static_cast<Index>(order[k]));
    }
    params.components = std::move(comps);
    result.responsibilities = std::move(z);

    const double r = params.spec.r;
    for (auto& c : params.components) {
        if (params.spec.models_covariates()) {
            const double cx = c.Psi_X.trace() / r;
            c.Sigma_X *= cx;
            c.Psi_X /= cx;
        }
        const double cy = c.Psi_Y.trace() / r;
        c.Sigma_Y *= cy;
        c.Psi_Y /= cy;
    }

    result.hard_labels.assign(static_cast<std::size_t>(result.responsibilities.rows()), 0);
    for (Index i = 0; i < result.responsibilities.rows(); ++i) {
        Index arg = 0;
        result.responsibilities.row(i).maxCoeff(&arg);
        result.hard_labels[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    result.n_params = count_free_params(params.spec);
    result.bic = bic(result.loglik, result.n_params, n_obs);
}

FitResult fit(const ThreeWayData& data, const ModelSpec& spec, const FitControls& controls) {
    FitResult best = best_of_starts(data, spec, controls);
    finalize_fit(best, data.n());
    return best;
}

}  // namespace mvcwm
