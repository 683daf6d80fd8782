#pragma once

#include <cstddef>
#include <string_view>

/// Hot inner loops of the E-step and CM-step, with a portable scalar
/// reference and an AVX2/FMA variant picked at runtime.
///
/// Blocked layout: n blocks of `len` contiguous doubles, block i starting at
/// a + i*len. Per-observation residual matrices are stored this way.
namespace mvcwm::kernels {

enum class Isa { Scalar, Avx2 };

[[nodiscard]] bool avx2_available();
/// Variant currently used by the dispatching entry points.
[[nodiscard]] Isa active_isa();
/// Pins the variant; requesting Avx2 on a machine without it throws DomainError.
void set_isa(Isa isa);
[[nodiscard]] std::string_view isa_name(Isa isa);

/// out[i] = ||block_i(a)||^2
void block_sqnorms(const double* a, std::size_t len, std::size_t n, double* out);
/// out[i] = <block_i(a), block_i(b)>
void block_dots(const double* a, const double* b, std::size_t len, std::size_t n,
                double* out);
/// out[j] = sum_i w[i] * block_i(a)[j], j < len
void weighted_block_sum(const double* a, const double* w, std::size_t len, std::size_t n,
                        double* out);
/// out[i] = exp(x[i]); results below the normal range flush to zero.
void vexp(const double* x, std::size_t n, double* out);
/// Column-major n x g log-weights turned into row-normalized probabilities
/// in place; lognorm[i] receives log sum_g exp(logp(i, g)).
void softmax_rows(double* logp, std::size_t n, std::size_t g, double* lognorm);

namespace scalar {
void block_sqnorms(const double* a, std::size_t len, std::size_t n, double* out);
void block_dots(const double* a, const double* b, std::size_t len, std::size_t n,
                double* out);
void weighted_block_sum(const double* a, const double* w, std::size_t len, std::size_t n,
                        double* out);
void vexp(const double* x, std::size_t n, double* out);
void softmax_rows(double* logp, std::size_t n, std::size_t g, double* lognorm);
}  // namespace scalar

namespace avx2 {
void block_sqnorms(const double* a, std::size_t len, std::size_t n, double* out);
void block_dots(const double* a, const double* b, std::size_t len, std::size_t n,
                double* out);
void weighted_block_sum(const double* a, const double* w, std::size_t len, std::size_t n,
                        double* out);
void vexp(const double* x, std::size_t n, double* out);
void softmax_rows(double* logp, std::size_t n, std::size_t g, double* lognorm);
}  // namespace avx2

}  // namespace mvcwm::kernels
