// AVX2 backend. This translation unit is the only one compiled with
// -mavx2; everything here is reached through runtime dispatch, after
// avx2::available() has confirmed CPU support.
//
// The accumulation mirrors the scalar reference exactly: four float64
// partial sums in vector lanes (element i in lane i % 4), remainder
// elements folded into their lane before the (s0+s2)+(s1+s3) combine.
// Conversions, subtractions, multiplies and adds are all IEEE-exact
// per lane and contraction is globally off, so results are bit-identical
// to the scalar backend.

#include "sidq/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace sidq::kernels::avx2 {

bool available() noexcept {
    return __builtin_cpu_supports("avx2") != 0;
}

namespace {

inline double finish(__m256d acc, const float* a, const float* b, std::size_t d4,
                     std::size_t d) noexcept {
    alignas(32) double s[4];
    _mm256_storeu_pd(s, acc);
    for (std::size_t i = d4; i < d; ++i) {
        const double diff = static_cast<double>(a[i]) - (b ? static_cast<double>(b[i]) : 0.0);
        s[i & 3] += diff * diff;
    }
    return (s[0] + s[2]) + (s[1] + s[3]);
}

inline double sq_l2_impl(const float* a, const float* b, std::size_t d) noexcept {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t d4 = d & ~static_cast<std::size_t>(3);
    for (std::size_t i = 0; i < d4; i += 4) {
        const __m256d ad = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
        const __m256d bd = _mm256_cvtps_pd(_mm_loadu_ps(b + i));
        const __m256d diff = _mm256_sub_pd(ad, bd);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    return finish(acc, a, b, d4, d);
}

}  // namespace

double squared_l2(const float* a, const float* b, std::size_t d) noexcept {
    return sq_l2_impl(a, b, d);
}

double squared_norm(const float* a, std::size_t d) noexcept {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t d4 = d & ~static_cast<std::size_t>(3);
    for (std::size_t i = 0; i < d4; i += 4) {
        const __m256d ad = _mm256_cvtps_pd(_mm_loadu_ps(a + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(ad, ad));
    }
    return finish(acc, a, nullptr, d4, d);
}

NearestHit nearest_centroid(const float* v, const float* centroids, std::size_t m,
                            std::size_t d) noexcept {
    NearestHit best{0, sq_l2_impl(v, centroids, d)};
    for (std::size_t c = 1; c < m; ++c) {
        const double dist = sq_l2_impl(v, centroids + c * d, d);
        if (dist < best.sq_dist) {
            best.index = static_cast<std::uint32_t>(c);
            best.sq_dist = dist;
        }
    }
    return best;
}

void sub_inplace(float* r, const float* q, std::size_t d) noexcept {
    const std::size_t d8 = d & ~static_cast<std::size_t>(7);
    for (std::size_t i = 0; i < d8; i += 8) {
        _mm256_storeu_ps(r + i, _mm256_sub_ps(_mm256_loadu_ps(r + i), _mm256_loadu_ps(q + i)));
    }
    for (std::size_t i = d8; i < d; ++i) r[i] -= q[i];
}

void add_inplace(float* acc, const float* x, std::size_t d) noexcept {
    const std::size_t d8 = d & ~static_cast<std::size_t>(7);
    for (std::size_t i = 0; i < d8; i += 8) {
        _mm256_storeu_ps(acc + i, _mm256_add_ps(_mm256_loadu_ps(acc + i), _mm256_loadu_ps(x + i)));
    }
    for (std::size_t i = d8; i < d; ++i) acc[i] += x[i];
}

}  // namespace sidq::kernels::avx2

#else  // non-x86 build: report unavailable, never called

namespace sidq::kernels::avx2 {

bool available() noexcept { return false; }
double squared_l2(const float*, const float*, std::size_t) noexcept { return 0.0; }
double squared_norm(const float*, std::size_t) noexcept { return 0.0; }
NearestHit nearest_centroid(const float*, const float*, std::size_t, std::size_t) noexcept {
    return {};
}
void sub_inplace(float*, const float*, std::size_t) noexcept {}
void add_inplace(float*, const float*, std::size_t) noexcept {}

}  // namespace sidq::kernels::avx2

#endif
