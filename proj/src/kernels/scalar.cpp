#include "mvcwm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mvcwm::kernels::scalar {

void block_sqnorms(const double* a, std::size_t len, std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = a + i * len;
        double s = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
            s += p[j] * p[j];
        }
        out[i] = s;
    }
}

void block_dots(const double* a, const double* b, std::size_t len, std::size_t n,
                double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = a + i * len;
        const double* q = b + i * len;
        double s = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
            s += p[j] * q[j];
        }
        out[i] = s;
    }
}

void weighted_block_sum(const double* a, const double* w, std::size_t len, std::size_t n,
                        double* out) {
    std::fill(out, out + len, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = a + i * len;
        const double wi = w[i];
        for (std::size_t j = 0; j < len; ++j) {
            out[j] += wi * p[j];
        }
    }
}

void vexp(const double* x, std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = x[i] < -708.0 ? 0.0 : std::exp(x[i]);
    }
}

void softmax_rows(double* logp, std::size_t n, std::size_t g, double* lognorm) {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        double mx = kNegInf;
        for (std::size_t k = 0; k < g; ++k) {
            mx = std::max(mx, logp[k * n + i]);
        }
        double s = 0.0;
        for (std::size_t k = 0; k < g; ++k) {
            const double d = logp[k * n + i] - mx;
            const double e = d < -708.0 ? 0.0 : std::exp(d);
            logp[k * n + i] = e;
            s += e;
        }
        for (std::size_t k = 0; k < g; ++k) {
            logp[k * n + i] /= s;
        }
        lognorm[i] = mx + std::log(s);
    }
}

}  // namespace mvcwm::kernels::scalar
