#include "sidq/quantizer.hpp"

#include <cmath>
#include <cstdio>

#include "sidq/error.hpp"

namespace sidq {

kernels::NearestHit nearest_in_layer(std::span<const float> v, const CodebookLayer& layer,
                                     std::uint32_t d) {
    if (v.size() != d) throw_dim_mismatch("query vector", d, v.size());
    return kernels::nearest_centroid(v.data(), layer.centroids.data(), layer.m, d);
}

QuantizationResult quantize_fixed(std::span<const float> z, const CodebookStack& stack) {
    if (z.size() != stack.d) throw_dim_mismatch("quantizer input", stack.d, z.size());
    QuantizationResult out;
    const std::uint32_t L = stack.depth();
    out.sid.reserve(L);
    out.residual_norms.reserve(L + 1);

    std::vector<float> r(z.begin(), z.end());
    double sq = kernels::squared_norm(r.data(), r.size());
    out.residual_norms.push_back(std::sqrt(sq));
    for (std::uint32_t l = 0; l < L; ++l) {
        const CodebookLayer& layer = stack.layers[l];
        const kernels::NearestHit hit =
            kernels::nearest_centroid(r.data(), layer.centroids.data(), layer.m, stack.d);
        out.sid.push_back(hit.index);
        kernels::sub_inplace(r.data(), stack.centroid(l, hit.index), stack.d);
        sq = kernels::squared_norm(r.data(), r.size());
        out.residual_norms.push_back(std::sqrt(sq));
    }
    out.reconstruction_error = sq;
    return out;
}

std::vector<float> reconstruct(const SemanticId& sid, const CodebookStack& stack) {
    if (sid.empty()) throw FormatError("reconstruct: empty semantic id");
    if (sid.size() > stack.depth()) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "reconstruct: id has %zu codes but the stack has %u layers",
                      sid.size(), stack.depth());
        throw FormatError(buf);
    }
    std::vector<float> acc(stack.d, 0.0f);
    for (std::size_t l = 0; l < sid.size(); ++l) {
        if (sid[l] >= stack.layers[l].m) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "reconstruct: code %u out of range at layer %zu (m=%u)",
                          sid[l], l + 1, stack.layers[l].m);
            throw FormatError(buf);
        }
        kernels::add_inplace(acc.data(), stack.centroid(static_cast<std::uint32_t>(l), sid[l]),
                             stack.d);
    }
    return acc;
}

}  // namespace sidq
