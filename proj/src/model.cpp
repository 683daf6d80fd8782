#include "mvcwm/model.hpp"

#include "mvcwm/errors.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace mvcwm {

ThreeWayData::ThreeWayData(const std::vector<Eigen::MatrixXd>& y,
                           const std::vector<Eigen::MatrixXd>& x) {
    if (y.empty() || y.size() != x.size()) {
        throw DimensionError("need the same positive number of responses and covariates");
    }
    const Eigen::Index p = y.front().rows();
    const Eigen::Index q = x.front().rows();
    r_ = y.front().cols();
    n_ = static_cast<Eigen::Index>(y.size());
    y_.resize(p, r_ * n_);
    x_.resize(q, r_ * n_);
    for (Eigen::Index i = 0; i < n_; ++i) {
        const auto& yi = y[static_cast<std::size_t>(i)];
        const auto& xi = x[static_cast<std::size_t>(i)];
        if (yi.rows() != p || yi.cols() != r_ || xi.rows() != q || (q > 0 && xi.cols() != r_)) {
            throw DimensionError("observation " + std::to_string(i) +
                                 " has inconsistent dimensions");
        }
        y_.middleCols(i * r_, r_) = yi;
        if (q > 0) {
            x_.middleCols(i * r_, r_) = xi;
        }
    }
    finish();
}

ThreeWayData::ThreeWayData(Eigen::MatrixXd y_stack, Eigen::MatrixXd x_stack, Eigen::Index r)
    : y_(std::move(y_stack)), x_(std::move(x_stack)), r_(r) {
    if (r_ <= 0 || y_.cols() % r_ != 0 || x_.cols() != y_.cols()) {
        throw DimensionError("stacked data have inconsistent widths");
    }
    n_ = y_.cols() / r_;
    finish();
}

void ThreeWayData::finish() {
    if (y_.rows() == 0 || r_ == 0 || n_ == 0) {
        throw DimensionError("data need p >= 1, r >= 1 and at least one observation");
    }
    if (!y_.allFinite() || !x_.allFinite()) {
        throw ValidationError("data contain non-finite values");
    }
    x_star_.resize(x_.rows() + 1, x_.cols());
    x_star_.row(0).setOnes();
    x_star_.bottomRows(x_.rows()) = x_;
}

std::string ModelSpec::pair_name() const {
    if (fmr) {
        return "FMR-" + std::string(family_code(response_family));
    }
    return std::string(family_code(covariate_family)) + "-" +
           std::string(family_code(response_family));
}

namespace {

void check_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols,
                 const char* what, std::size_t g) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(std::string(what) + " of component " + std::to_string(g) +
                             " has the wrong shape");
    }
}

}  // namespace

void validate_params(const ModelParams& params) {
    const ModelSpec& s = params.spec;
    if (s.G < 1 || s.p < 1 || s.q < 0 || s.r < 1) {
        throw ValidationError("model dimensions must be positive");
    }
    if (static_cast<int>(params.components.size()) != s.G) {
        throw DimensionError("number of components does not match G");
    }
    double total = 0.0;
    for (std::size_t g = 0; g < params.components.size(); ++g) {
        const ComponentParams& c = params.components[g];
        if (!(c.pi > 0.0) || c.pi > 1.0) {
            throw ValidationError("mixing proportion outside (0, 1]");
        }
        total += c.pi;
        if (s.models_covariates()) {
            check_shape(c.M_X, s.q, s.r, "M_X", g);
            check_shape(c.Sigma_X, s.q, s.q, "Sigma_X", g);
            check_shape(c.Psi_X, s.r, s.r, "Psi_X", g);
            if (family_of(c.tail_X) != s.covariate_family) {
                throw ValidationError("covariate tail does not match the covariate family");
            }
            if (s.covariate_family != Family::Normal) {
                check_shape(c.A_X, s.q, s.r, "A_X", g);
            }
            validate_tail(c.tail_X);
            (void)spd_factorize(c.Sigma_X);
            (void)spd_factorize(c.Psi_X);
        }
        check_shape(c.B, s.p, 1 + s.q, "B", g);
        check_shape(c.Sigma_Y, s.p, s.p, "Sigma_Y", g);
        check_shape(c.Psi_Y, s.r, s.r, "Psi_Y", g);
        if (family_of(c.tail_Y) != s.response_family) {
            throw ValidationError("response tail does not match the response family");
        }
        if (s.response_family != Family::Normal) {
            check_shape(c.A_Y, s.p, s.r, "A_Y", g);
        }
        validate_tail(c.tail_Y);
        (void)spd_factorize(c.Sigma_Y);
        (void)spd_factorize(c.Psi_Y);
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw ValidationError("mixing proportions do not sum to one");
    }
}

ModelParams default_params(const ModelSpec& spec) {
    ModelParams out;
    out.spec = spec;
    out.components.resize(static_cast<std::size_t>(spec.G));
    for (auto& c : out.components) {
        c.pi = 1.0 / spec.G;
        c.M_X = Eigen::MatrixXd::Zero(spec.q, spec.r);
        c.A_X = Eigen::MatrixXd::Zero(spec.q, spec.r);
        c.Sigma_X = Eigen::MatrixXd::Identity(spec.q, spec.q);
        c.Psi_X = Eigen::MatrixXd::Identity(spec.r, spec.r);
        c.tail_X = default_tail(spec.fmr ? Family::Normal : spec.covariate_family);
        c.B = Eigen::MatrixXd::Zero(spec.p, 1 + spec.q);
        c.A_Y = Eigen::MatrixXd::Zero(spec.p, spec.r);
        c.Sigma_Y = Eigen::MatrixXd::Identity(spec.p, spec.p);
        c.Psi_Y = Eigen::MatrixXd::Identity(spec.r, spec.r);
        c.tail_Y = default_tail(spec.response_family);
    }
    return out;
}

}  // namespace mvcwm
