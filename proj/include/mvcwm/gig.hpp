#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace mvcwm {

/// GIG law with density proportional to w^(lambda-1) exp(-(a w + b / w) / 2).
struct GigParams {
    double a = 1.0;
    double b = 1.0;
    double lambda = 0.0;
};

/// Concentration / scale / index form: omega = sqrt(ab), eta = sqrt(b/a).
struct GigAltParams {
    double omega = 1.0;
    double eta = 1.0;
    double lambda = 0.0;
};

/// E(W), E(1/W), E(log W).
struct GigMoments {
    double e_w = 1.0;
    double e_inv_w = 1.0;
    double e_log_w = 0.0;
};

[[nodiscard]] GigParams convert(const GigAltParams& alt);
[[nodiscard]] GigAltParams convert(const GigParams& p);

[[nodiscard]] double gig_log_pdf(double w, const GigParams& p);

/// Moments through log-Bessel ratios. a, b > 0.
[[nodiscard]] GigMoments gig_moments(const GigParams& p);
[[nodiscard]] GigMoments gig_moments(const GigAltParams& alt);

/// Like gig_moments but also accepts the gamma (b = 0, lambda > 0) and
/// inverse-gamma (a = 0, lambda < 0) limits. Moments that are infinite
/// there raise NumericalError.
[[nodiscard]] GigMoments conditional_moments(double a, double b, double lambda);

/// One draw. Accepts the same boundary cases as conditional_moments.
[[nodiscard]] double gig_draw(double a, double b, double lambda, std::mt19937_64& rng);

/// count i.i.d. draws; a fixed seed reproduces the sequence exactly.
[[nodiscard]] std::vector<double> gig_sample(const GigParams& p, std::size_t count,
                                             std::uint64_t seed);

}  // namespace mvcwm
