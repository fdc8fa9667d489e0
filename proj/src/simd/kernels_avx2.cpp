// Compiled with -mavx2 only (no -mfma): mul/add stay separately rounded so
// the elementwise kernels match the scalar reference exactly.

#include "kernels_impl.hpp"

#include <cassert>
#include <immintrin.h>

namespace harmony::simd::detail {

namespace {

inline double hsum(__m256d v)
{
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double sum(std::span<const double> x)
{
    const std::size_t n = x.size();
    const double* p = x.data();
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_add_pd(a0, _mm256_loadu_pd(p + i));
        a1 = _mm256_add_pd(a1, _mm256_loadu_pd(p + i + 4));
    }
    if (i + 4 <= n) {
        a0 = _mm256_add_pd(a0, _mm256_loadu_pd(p + i));
        i += 4;
    }
    double s = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i)
        s += p[i];
    return s;
}

double dot(std::span<const double> x, std::span<const double> y)
{
    assert(x.size() == y.size());
    const std::size_t n = x.size();
    const double* px = x.data();
    const double* py = y.data();
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        a0 = _mm256_add_pd(a0, _mm256_mul_pd(_mm256_loadu_pd(px + i), _mm256_loadu_pd(py + i)));
        a1 = _mm256_add_pd(a1, _mm256_mul_pd(_mm256_loadu_pd(px + i + 4), _mm256_loadu_pd(py + i + 4)));
    }
    if (i + 4 <= n) {
        a0 = _mm256_add_pd(a0, _mm256_mul_pd(_mm256_loadu_pd(px + i), _mm256_loadu_pd(py + i)));
        i += 4;
    }
    double s = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i)
        s += px[i] * py[i];
    return s;
}

double sum_sq_dev(std::span<const double> x, double center)
{
    const std::size_t n = x.size();
    const double* p = x.data();
    const __m256d c = _mm256_set1_pd(center);
    __m256d a0 = _mm256_setzero_pd();
    __m256d a1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(p + i), c);
        const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(p + i + 4), c);
        a0 = _mm256_add_pd(a0, _mm256_mul_pd(d0, d0));
        a1 = _mm256_add_pd(a1, _mm256_mul_pd(d1, d1));
    }
    if (i + 4 <= n) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(p + i), c);
        a0 = _mm256_add_pd(a0, _mm256_mul_pd(d0, d0));
        i += 4;
    }
    double s = hsum(_mm256_add_pd(a0, a1));
    for (; i < n; ++i) {
        const double d = p[i] - center;
        s += d * d;
    }
    return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y)
{
    assert(x.size() == y.size());
    const std::size_t n = x.size();
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_add_pd(_mm256_loadu_pd(y.data() + i),
                                        _mm256_mul_pd(a, _mm256_loadu_pd(x.data() + i)));
        _mm256_storeu_pd(y.data() + i, v);
    }
    for (; i < n; ++i)
        y[i] += alpha * x[i];
}

void standardize(std::span<const double> y, std::span<const double> mean, double sigma,
                 std::span<double> out)
{
    assert(y.size() == mean.size() && y.size() == out.size());
    const std::size_t n = y.size();
    const __m256d s = _mm256_set1_pd(sigma);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(y.data() + i), _mm256_loadu_pd(mean.data() + i));
        _mm256_storeu_pd(out.data() + i, _mm256_div_pd(d, s));
    }
    for (; i < n; ++i)
        out[i] = (y[i] - mean[i]) / sigma;
}

void adjust(std::span<const double> z, double shift, double scale, std::span<const double> mean,
            std::span<double> out)
{
    assert(z.size() == mean.size() && z.size() == out.size());
    const std::size_t n = z.size();
    const __m256d sh = _mm256_set1_pd(shift);
    const __m256d sc = _mm256_set1_pd(scale);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_mul_pd(sc, _mm256_sub_pd(_mm256_loadu_pd(z.data() + i), sh));
        _mm256_storeu_pd(out.data() + i, _mm256_add_pd(d, _mm256_loadu_pd(mean.data() + i)));
    }
    for (; i < n; ++i)
        out[i] = scale * (z[i] - shift) + mean[i];
}

} // namespace

const KernelTable avx2_table{
    Isa::Avx2, &sum, &dot, &sum_sq_dev, &axpy, &standardize, &adjust,
};

} // namespace harmony::simd::detail
