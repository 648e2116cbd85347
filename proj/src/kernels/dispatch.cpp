#include <cstdlib>
#include <string>

#include "epinet/kernels.hpp"

namespace epinet::kernels {

namespace {

const Table kScalar{Backend::Scalar, scalar::dot, scalar::dot3, scalar::ratio_sums, scalar::scaled_exp};

#if defined(__x86_64__) || defined(_M_X64)
const Table kAvx2{Backend::Avx2, avx2::dot, avx2::dot3, avx2::ratio_sums, avx2::scaled_exp};
#endif

const Table& pick() {
    if (const char* env = std::getenv("EPINET_KERNELS")) {
        if (std::string(env) == "scalar") return kScalar;
    }
    if (available(Backend::Avx2)) return table(Backend::Avx2);
    return kScalar;
}

}  // namespace

bool available(Backend b) {
    if (b == Backend::Scalar) return true;
#if defined(__x86_64__) || defined(_M_X64)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Table& table(Backend b) {
#if defined(__x86_64__) || defined(_M_X64)
    if (b == Backend::Avx2 && available(b)) return kAvx2;
#endif
    (void)b;
    return kScalar;
}

const Table& active() {
    static const Table& chosen = pick();
    return chosen;
}

std::string_view name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

}  // namespace epinet::kernels
