#include <cmath>

#include "epinet/kernels.hpp"

namespace epinet::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

double dot3(const double* a, const double* b, const double* c, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i] * c[i];
    return sum;
}

RatioSums ratio_sums(const double* a, const double* s, double e, std::size_t n) {
    RatioSums r;
    for (std::size_t i = 0; i < n; ++i) {
        if (s[i] == 0.0) continue;
        const double q = s[i] / (a[i] + s[i] * e);
        r.value += q;
        r.slope += q * q;
    }
    return r;
}

void scaled_exp(const double* lp, const double* scale, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(lp[i]) * (scale ? scale[i] : 1.0);
}

}  // namespace epinet::kernels::scalar
