// NEON backend (aarch64). Same canonical accumulation as the scalar
// reference: element i feeds float64 partial i % 4 — here two 2-lane
// float64 accumulators covering lanes (0,1) and (2,3) — with remainder
// elements folded into their lane before the (s0+s2)+(s1+s3) combine.

#include "sidq/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace sidq::kernels::neon {

bool available() noexcept { return true; }

namespace {

inline double finish(float64x2_t acc01, float64x2_t acc23, const float* a, const float* b,
                     std::size_t d4, std::size_t d) noexcept {
    double s[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1), vgetq_lane_f64(acc23, 0),
                   vgetq_lane_f64(acc23, 1)};
    for (std::size_t i = d4; i < d; ++i) {
        const double diff = static_cast<double>(a[i]) - (b ? static_cast<double>(b[i]) : 0.0);
        s[i & 3] += diff * diff;
    }
    return (s[0] + s[2]) + (s[1] + s[3]);
}

inline double sq_l2_impl(const float* a, const float* b, std::size_t d) noexcept {
    float64x2_t acc01 = vdupq_n_f64(0.0);
    float64x2_t acc23 = vdupq_n_f64(0.0);
    const std::size_t d4 = d & ~static_cast<std::size_t>(3);
    for (std::size_t i = 0; i < d4; i += 4) {
        const float32x4_t af = vld1q_f32(a + i);
        const float32x4_t bf = vld1q_f32(b + i);
        const float64x2_t d01 = vsubq_f64(vcvt_f64_f32(vget_low_f32(af)),
                                          vcvt_f64_f32(vget_low_f32(bf)));
        const float64x2_t d23 = vsubq_f64(vcvt_f64_f32(vget_high_f32(af)),
                                          vcvt_f64_f32(vget_high_f32(bf)));
        acc01 = vaddq_f64(acc01, vmulq_f64(d01, d01));
        acc23 = vaddq_f64(acc23, vmulq_f64(d23, d23));
    }
    return finish(acc01, acc23, a, b, d4, d);
}

}  // namespace

double squared_l2(const float* a, const float* b, std::size_t d) noexcept {
    return sq_l2_impl(a, b, d);
}

double squared_norm(const float* a, std::size_t d) noexcept {
    float64x2_t acc01 = vdupq_n_f64(0.0);
    float64x2_t acc23 = vdupq_n_f64(0.0);
    const std::size_t d4 = d & ~static_cast<std::size_t>(3);
    for (std::size_t i = 0; i < d4; i += 4) {
        const float32x4_t af = vld1q_f32(a + i);
        const float64x2_t v01 = vcvt_f64_f32(vget_low_f32(af));
        const float64x2_t v23 = vcvt_f64_f32(vget_high_f32(af));
        acc01 = vaddq_f64(acc01, vmulq_f64(v01, v01));
        acc23 = vaddq_f64(acc23, vmulq_f64(v23, v23));
    }
    return finish(acc01, acc23, a, nullptr, d4, d);
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
    const std::size_t d4 = d & ~static_cast<std::size_t>(3);
    for (std::size_t i = 0; i < d4; i += 4) {
        vst1q_f32(r + i, vsubq_f32(vld1q_f32(r + i), vld1q_f32(q + i)));
    }
    for (std::size_t i = d4; i < d; ++i) r[i] -= q[i];
}

void add_inplace(float* acc, const float* x, std::size_t d) noexcept {
    const std::size_t d4 = d & ~static_cast<std::size_t>(3);
    for (std::size_t i = 0; i < d4; i += 4) {
        vst1q_f32(acc + i, vaddq_f32(vld1q_f32(acc + i), vld1q_f32(x + i)));
    }
    for (std::size_t i = d4; i < d; ++i) acc[i] += x[i];
}

}  // namespace sidq::kernels::neon

#else  // non-aarch64 build: report unavailable, never called

namespace sidq::kernels::neon {

bool available() noexcept { return false; }
double squared_l2(const float*, const float*, std::size_t) noexcept { return 0.0; }
double squared_norm(const float*, std::size_t) noexcept { return 0.0; }
NearestHit nearest_centroid(const float*, const float*, std::size_t, std::size_t) noexcept {
    return {};
}
void sub_inplace(float*, const float*, std::size_t) noexcept {}
void add_inplace(float*, const float*, std::size_t) noexcept {}

}  // namespace sidq::kernels::neon

#endif
