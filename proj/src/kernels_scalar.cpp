#include "sidq/kernels.hpp"

namespace sidq::kernels::scalar {

// The four-partial accumulation below is the canonical order every
// backend reproduces: partial i%4 takes element i, and the final combine
// is (s0 + s2) + (s1 + s3). Keeping the scalar reference in this shape
// (rather than a single running sum) is what makes a 4-lane vector
// implementation bit-identical.

double squared_l2(const float* a, const float* b, std::size_t d) noexcept {
    double s[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s[i & 3] += diff * diff;
    }
    return (s[0] + s[2]) + (s[1] + s[3]);
}

double squared_norm(const float* a, std::size_t d) noexcept {
    double s[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < d; ++i) {
        const double v = static_cast<double>(a[i]);
        s[i & 3] += v * v;
    }
    return (s[0] + s[2]) + (s[1] + s[3]);
}

NearestHit nearest_centroid(const float* v, const float* centroids, std::size_t m,
                            std::size_t d) noexcept {
    NearestHit best{0, squared_l2(v, centroids, d)};
    for (std::size_t c = 1; c < m; ++c) {
        const double dist = squared_l2(v, centroids + c * d, d);
        if (dist < best.sq_dist) {  // strict: ties keep the lowest index
            best.index = static_cast<std::uint32_t>(c);
            best.sq_dist = dist;
        }
    }
    return best;
}

void sub_inplace(float* r, const float* q, std::size_t d) noexcept {
    for (std::size_t i = 0; i < d; ++i) r[i] -= q[i];
}

void add_inplace(float* acc, const float* x, std::size_t d) noexcept {
    for (std::size_t i = 0; i < d; ++i) acc[i] += x[i];
}

}  // namespace sidq::kernels::scalar
