#include "sidq/kernels.hpp"

#include <atomic>

#include "sidq/error.hpp"

namespace sidq::kernels {

namespace {

Backend detect() noexcept {
    if (avx2::available()) return Backend::avx2;
    if (neon::available()) return Backend::neon;
    return Backend::scalar;
}

std::atomic<Backend> g_backend{detect()};

}  // namespace

const char* backend_name(Backend b) noexcept {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "?";
}

Backend active_backend() noexcept { return g_backend.load(std::memory_order_relaxed); }

bool backend_available(Backend b) noexcept {
    switch (b) {
        case Backend::scalar: return true;
        case Backend::avx2: return avx2::available();
        case Backend::neon: return neon::available();
    }
    return false;
}

void force_backend(Backend b) {
    if (!backend_available(b)) {
        throw ConfigError(std::string("kernel backend not available on this machine: ") +
                          backend_name(b));
    }
    g_backend.store(b, std::memory_order_relaxed);
}

double squared_l2(const float* a, const float* b, std::size_t d) noexcept {
    switch (active_backend()) {
        case Backend::avx2: return avx2::squared_l2(a, b, d);
        case Backend::neon: return neon::squared_l2(a, b, d);
        default: return scalar::squared_l2(a, b, d);
    }
}

double squared_norm(const float* a, std::size_t d) noexcept {
    switch (active_backend()) {
        case Backend::avx2: return avx2::squared_norm(a, d);
        case Backend::neon: return neon::squared_norm(a, d);
        default: return scalar::squared_norm(a, d);
    }
}

NearestHit nearest_centroid(const float* v, const float* centroids, std::size_t m,
                            std::size_t d) noexcept {
    switch (active_backend()) {
        case Backend::avx2: return avx2::nearest_centroid(v, centroids, m, d);
        case Backend::neon: return neon::nearest_centroid(v, centroids, m, d);
        default: return scalar::nearest_centroid(v, centroids, m, d);
    }
}

void sub_inplace(float* r, const float* q, std::size_t d) noexcept {
    switch (active_backend()) {
        case Backend::avx2: return avx2::sub_inplace(r, q, d);
        case Backend::neon: return neon::sub_inplace(r, q, d);
        default: return scalar::sub_inplace(r, q, d);
    }
}

void add_inplace(float* acc, const float* x, std::size_t d) noexcept {
    switch (active_backend()) {
        case Backend::avx2: return avx2::add_inplace(acc, x, d);
        case Backend::neon: return neon::add_inplace(acc, x, d);
        default: return scalar::add_inplace(acc, x, d);
    }
}

}  // namespace sidq::kernels
