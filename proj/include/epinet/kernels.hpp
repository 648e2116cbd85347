#pragma once

// Reductions used by the likelihood and the estimators. Each kernel has a
// scalar reference implementation and, on x86-64, an AVX2 variant chosen at
// run time. Set EPINET_KERNELS=scalar to force the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace epinet::kernels {

enum class Backend { Scalar, Avx2 };

/// Sums used by the exp(eta) score equation:
/// value = sum s_i / (a_i + s_i e), slope = sum s_i^2 / (a_i + s_i e)^2.
struct RatioSums {
    double value = 0.0;
    double slope = 0.0;
};

struct Table {
    Backend backend;
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*dot3)(const double* a, const double* b, const double* c, std::size_t n);
    RatioSums (*ratio_sums)(const double* a, const double* s, double e, std::size_t n);
    /// out_i = exp(lp_i) * scale_i; scale may be null (treated as ones).
    void (*scaled_exp)(const double* lp, const double* scale, double* out, std::size_t n);
};

bool available(Backend b);
const Table& table(Backend b);
/// Backend picked at first use (CPU support and EPINET_KERNELS override).
const Table& active();
std::string_view name(Backend b);

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

inline double dot3(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
    return active().dot3(a.data(), b.data(), c.data(), a.size());
}

inline RatioSums ratio_sums(std::span<const double> a, std::span<const double> s, double e) {
    return active().ratio_sums(a.data(), s.data(), e, a.size());
}

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double dot3(const double* a, const double* b, const double* c, std::size_t n);
RatioSums ratio_sums(const double* a, const double* s, double e, std::size_t n);
void scaled_exp(const double* lp, const double* scale, double* out, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double dot3(const double* a, const double* b, const double* c, std::size_t n);
RatioSums ratio_sums(const double* a, const double* s, double e, std::size_t n);
void scaled_exp(const double* lp, const double* scale, double* out, std::size_t n);
}  // namespace avx2
#endif

}  // namespace epinet::kernels
