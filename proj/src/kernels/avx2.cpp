#include "mvcwm/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace mvcwm::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp via x = n ln2 + r, |r| <= ln2/2, Taylor to degree 13 and 2^n built
// from exponent bits. Inputs below -708 give 0.
inline __m256d exp4(__m256d x) {
    const __m256d lo_cut = _mm256_set1_pd(-708.0);
    const __m256d underflow = _mm256_cmp_pd(x, lo_cut, _CMP_LT_OQ);
    x = _mm256_min_pd(_mm256_max_pd(x, lo_cut), _mm256_set1_pd(709.0));

    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(0.6931471803691238), x);
    r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.9082149292705877e-10), r);

    static constexpr double kInvFact[14] = {
        1.0,
        1.0,
        1.0 / 2.0,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5040.0,
        1.0 / 40320.0,
        1.0 / 362880.0,
        1.0 / 3628800.0,
        1.0 / 39916800.0,
        1.0 / 479001600.0,
        1.0 / 6227020800.0,
    };
    __m256d p = _mm256_set1_pd(kInvFact[13]);
    for (int k = 12; k >= 0; --k) {
        p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[k]));
    }

    const __m128i n32 = _mm256_cvtpd_epi32(n);
    __m256i bits = _mm256_cvtepi32_epi64(n32);
    bits = _mm256_add_epi64(bits, _mm256_set1_epi64x(1023));
    bits = _mm256_slli_epi64(bits, 52);
    const __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
    return _mm256_andnot_pd(underflow, result);
}

}  // namespace

void block_sqnorms(const double* a, std::size_t len, std::size_t n, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = a + i * len;
        __m256d acc = _mm256_setzero_pd();
        std::size_t j = 0;
        for (; j + 4 <= len; j += 4) {
            const __m256d v = _mm256_loadu_pd(p + j);
            acc = _mm256_fmadd_pd(v, v, acc);
        }
        double s = hsum(acc);
        for (; j < len; ++j) {
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
        __m256d acc = _mm256_setzero_pd();
        std::size_t j = 0;
        for (; j + 4 <= len; j += 4) {
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(p + j), _mm256_loadu_pd(q + j), acc);
        }
        double s = hsum(acc);
        for (; j < len; ++j) {
            s += p[j] * q[j];
        }
        out[i] = s;
    }
}

void weighted_block_sum(const double* a, const double* w, std::size_t len, std::size_t n,
                        double* out) {
    std::fill(out, out + len, 0.0);
    const std::size_t vec_end = len - len % 4;
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = a + i * len;
        const __m256d wi = _mm256_set1_pd(w[i]);
        for (std::size_t j = 0; j < vec_end; j += 4) {
            const __m256d o = _mm256_loadu_pd(out + j);
            _mm256_storeu_pd(out + j, _mm256_fmadd_pd(wi, _mm256_loadu_pd(p + j), o));
        }
        for (std::size_t j = vec_end; j < len; ++j) {
            out[j] += w[i] * p[j];
        }
    }
}

void vexp(const double* x, std::size_t n, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) {
        out[i] = x[i] < -708.0 ? 0.0 : std::exp(x[i]);
    }
}

void softmax_rows(double* logp, std::size_t n, std::size_t g, double* lognorm) {
    constexpr double kNegInf = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mx = _mm256_set1_pd(kNegInf);
        for (std::size_t k = 0; k < g; ++k) {
            mx = _mm256_max_pd(mx, _mm256_loadu_pd(logp + k * n + i));
        }
        __m256d s = _mm256_setzero_pd();
        for (std::size_t k = 0; k < g; ++k) {
            double* col = logp + k * n + i;
            const __m256d e = exp4(_mm256_sub_pd(_mm256_loadu_pd(col), mx));
            _mm256_storeu_pd(col, e);
            s = _mm256_add_pd(s, e);
        }
        for (std::size_t k = 0; k < g; ++k) {
            double* col = logp + k * n + i;
            _mm256_storeu_pd(col, _mm256_div_pd(_mm256_loadu_pd(col), s));
        }
        alignas(32) double mxs[4];
        alignas(32) double ss[4];
        _mm256_store_pd(mxs, mx);
        _mm256_store_pd(ss, s);
        for (int l = 0; l < 4; ++l) {
            lognorm[i + static_cast<std::size_t>(l)] = mxs[l] + std::log(ss[l]);
        }
    }
    if (i < n) {
        // Remaining rows go through the reference path on a compacted copy.
        const std::size_t rest = n - i;
        std::vector<double> tmp(rest * g);
        for (std::size_t k = 0; k < g; ++k) {
            for (std::size_t l = 0; l < rest; ++l) {
                tmp[k * rest + l] = logp[k * n + i + l];
            }
        }
        scalar::softmax_rows(tmp.data(), rest, g, lognorm + i);
        for (std::size_t k = 0; k < g; ++k) {
            for (std::size_t l = 0; l < rest; ++l) {
                logp[k * n + i + l] = tmp[k * rest + l];
            }
        }
    }
}

}  // namespace mvcwm::kernels::avx2
