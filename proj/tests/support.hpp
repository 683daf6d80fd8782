#pragma once

#include "mvcwm/model.hpp"

#include <Eigen/Dense>

#include <random>

/// Small synthetic truths shared by the unit tests and the acceptance binary.
namespace support {

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng,
                                     double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
    return m;
}

inline Eigen::MatrixXd random_spd(Eigen::Index d, std::mt19937_64& rng) {
    const Eigen::MatrixXd g = random_matrix(d, d, rng, 0.5);
    return g * g.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
}

/// Tail values in the interior of every family's parameter space.
inline mvcwm::TailParams moderate_tail(mvcwm::Family f) {
    using namespace mvcwm;
    switch (f) {
        case Family::SkewT:
            return SkewTTail{8.0};
        case Family::GeneralizedHyperbolic:
            return GhTail{-0.5, 2.0};
        case Family::VarianceGamma:
            return VgTail{4.0};
        case Family::NormalInverseGaussian:
            return NigTail{1.0};
        case Family::Normal:
            break;
    }
    return NormalTail{};
}

/// G components whose covariate locations sit `shift` apart along the diagonal.
inline mvcwm::ModelParams small_truth(mvcwm::Family cov, mvcwm::Family resp, int G, int p, int q,
                                      int r, double shift, std::mt19937_64& rng) {
    using namespace mvcwm;
    ModelParams t;
    t.spec = ModelSpec{cov, resp, G, p, q, r, false};
    for (int g = 0; g < G; ++g) {
        ComponentParams c;
        c.pi = 1.0 / G;
        c.M_X = random_matrix(q, r, rng, 0.3).array() + shift * g;
        c.A_X = is_skewed(cov) ? random_matrix(q, r, rng, 0.5) : Eigen::MatrixXd::Zero(q, r);
        c.Sigma_X = random_spd(q, rng);
        c.Psi_X = random_spd(r, rng);
        c.tail_X = moderate_tail(cov);
        c.B = random_matrix(p, 1 + q, rng);
        c.A_Y = is_skewed(resp) ? random_matrix(p, r, rng, 0.5) : Eigen::MatrixXd::Zero(p, r);
        c.Sigma_Y = random_spd(p, rng);
        c.Psi_Y = random_spd(r, rng);
        c.tail_Y = moderate_tail(resp);
        t.components.push_back(c);
    }
    return t;
}

}  // namespace support
