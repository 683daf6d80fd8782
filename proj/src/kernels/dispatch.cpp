#include "mvcwm/errors.hpp"
#include "mvcwm/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace mvcwm::kernels {

namespace {

bool detect_avx2() {
#if defined(MVCWM_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa initial_isa() {
    const char* env = std::getenv("MVCWM_ISA");
    if (env != nullptr && std::string(env) == "scalar") {
        return Isa::Scalar;
    }
    return detect_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

}  // namespace

bool avx2_available() {
    static const bool available = detect_avx2();
    return available;
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
    if (isa == Isa::Avx2 && !avx2_available()) {
        throw DomainError("AVX2 kernels requested but not supported on this machine");
    }
    current().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

#if defined(MVCWM_HAVE_AVX2_TU)
#define MVCWM_DISPATCH(fn, ...)                \
    if (active_isa() == Isa::Avx2) {           \
        avx2::fn(__VA_ARGS__);                 \
    } else {                                   \
        scalar::fn(__VA_ARGS__);               \
    }
#else
#define MVCWM_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__);
#endif

void block_sqnorms(const double* a, std::size_t len, std::size_t n, double* out) {
    MVCWM_DISPATCH(block_sqnorms, a, len, n, out)
}

void block_dots(const double* a, const double* b, std::size_t len, std::size_t n,
                double* out) {
    MVCWM_DISPATCH(block_dots, a, b, len, n, out)
}

void weighted_block_sum(const double* a, const double* w, std::size_t len, std::size_t n,
                        double* out) {
    MVCWM_DISPATCH(weighted_block_sum, a, w, len, n, out)
}

void vexp(const double* x, std::size_t n, double* out) { MVCWM_DISPATCH(vexp, x, n, out) }

void softmax_rows(double* logp, std::size_t n, std::size_t g, double* lognorm) {
    MVCWM_DISPATCH(softmax_rows, logp, n, g, lognorm)
}

#undef MVCWM_DISPATCH

}  // namespace mvcwm::kernels
