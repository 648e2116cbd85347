#include <cmath>

#include <immintrin.h>

#include "epinet/kernels.hpp"

namespace epinet::kernels::avx2 {

namespace {

double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double sum = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

double dot3(const double* a, const double* b, const double* c, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d ab = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(ab, _mm256_loadu_pd(c + i), acc);
    }
    double sum = hsum(acc);
    for (; i < n; ++i) sum += a[i] * b[i] * c[i];
    return sum;
}

RatioSums ratio_sums(const double* a, const double* s, double e, std::size_t n) {
    const __m256d ev = _mm256_set1_pd(e);
    const __m256d zero = _mm256_setzero_pd();
    __m256d value = zero;
    __m256d slope = zero;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d sv = _mm256_loadu_pd(s + i);
        const __m256d den = _mm256_fmadd_pd(sv, ev, _mm256_loadu_pd(a + i));
        const __m256d keep = _mm256_cmp_pd(sv, zero, _CMP_NEQ_OQ);
        const __m256d q = _mm256_and_pd(_mm256_div_pd(sv, den), keep);
        value = _mm256_add_pd(value, q);
        slope = _mm256_fmadd_pd(q, q, slope);
    }
    RatioSums r{hsum(value), hsum(slope)};
    for (; i < n; ++i) {
        if (s[i] == 0.0) continue;
        const double q = s[i] / (a[i] + s[i] * e);
        r.value += q;
        r.slope += q * q;
    }
    return r;
}

void scaled_exp(const double* lp, const double* scale, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(lp[i]);
    if (!scale) return;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(out + i), _mm256_loadu_pd(scale + i)));
    }
    for (; i < n; ++i) out[i] *= scale[i];
}

}  // namespace epinet::kernels::avx2
