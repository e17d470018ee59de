#pragma once

#include <cstddef>
#include <cstdint>

namespace sidq::kernels {

/// Result of a nearest-centroid scan: winning row index and its squared
/// Euclidean distance. Ties go to the lowest index.
struct NearestHit {
    std::uint32_t index = 0;
    double sq_dist = 0.0;
};

enum class Backend { scalar = 0, avx2 = 1, neon = 2 };

const char* backend_name(Backend b) noexcept;

/// Backend picked at process start: avx2 where the CPU supports it, neon
/// on aarch64, scalar otherwise.
Backend active_backend() noexcept;

bool backend_available(Backend b) noexcept;

/// Test hook: route the dispatched entry points through one backend.
/// Throws ConfigError if the backend is not available on this machine.
void force_backend(Backend b);

// ---------------------------------------------------------------------------
// Dispatched entry points. Storage is float32; accumulation is float64 in
// a canonical order shared by every backend: element i feeds partial sum
// i % 4, partials combine as (s0 + s2) + (s1 + s3), and no multiply-add
// fusion is allowed. Backends are therefore interchangeable bit for bit.
// ---------------------------------------------------------------------------

/// Squared Euclidean distance between two d-vectors.
double squared_l2(const float* a, const float* b, std::size_t d) noexcept;

/// Squared Euclidean norm of a d-vector.
double squared_norm(const float* a, std::size_t d) noexcept;

/// Scans m row-major centroids for the one nearest to v. m >= 1.
NearestHit nearest_centroid(const float* v, const float* centroids, std::size_t m,
                            std::size_t d) noexcept;

/// r -= q, elementwise in float32.
void sub_inplace(float* r, const float* q, std::size_t d) noexcept;

/// acc += x, elementwise in float32.
void add_inplace(float* acc, const float* x, std::size_t d) noexcept;

/// Reference implementations, always available; the dispatched entry
/// points must match these bit for bit on every input.
namespace scalar {
double squared_l2(const float* a, const float* b, std::size_t d) noexcept;
double squared_norm(const float* a, std::size_t d) noexcept;
NearestHit nearest_centroid(const float* v, const float* centroids, std::size_t m,
                            std::size_t d) noexcept;
void sub_inplace(float* r, const float* q, std::size_t d) noexcept;
void add_inplace(float* acc, const float* x, std::size_t d) noexcept;
}  // namespace scalar

namespace avx2 {
bool available() noexcept;
double squared_l2(const float* a, const float* b, std::size_t d) noexcept;
double squared_norm(const float* a, std::size_t d) noexcept;
NearestHit nearest_centroid(const float* v, const float* centroids, std::size_t m,
                            std::size_t d) noexcept;
void sub_inplace(float* r, const float* q, std::size_t d) noexcept;
void add_inplace(float* acc, const float* x, std::size_t d) noexcept;
}  // namespace avx2

namespace neon {
bool available() noexcept;
double squared_l2(const float* a, const float* b, std::size_t d) noexcept;
double squared_norm(const float* a, std::size_t d) noexcept;
NearestHit nearest_centroid(const float* v, const float* centroids, std::size_t m,
                            std::size_t d) noexcept;
void sub_inplace(float* r, const float* q, std::size_t d) noexcept;
void add_inplace(float* acc, const float* x, std::size_t d) noexcept;
}  // namespace neon

}  // namespace sidq::kernels
