#include "sidq/types.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_set>

#include "sidq/error.hpp"

namespace sidq {

void throw_dim_mismatch(const char* what, std::size_t expected, std::size_t got) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: expected dim %zu, got %zu", what, expected, got);
    throw FormatError(buf);
}

void EmbeddingMatrix::validate() const {
    if (d == 0) throw FormatError("embedding matrix: dimension is zero");
    if (item_ids.empty()) throw FormatError("embedding matrix: no items");
    if (data.size() != item_ids.size() * static_cast<std::size_t>(d)) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "embedding matrix: %zu values do not match %zu items of dim %u",
                      data.size(), item_ids.size(), d);
        throw FormatError(buf);
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "embedding matrix: non-finite value at row %zu col %zu",
                          i / d, i % d);
            throw NumericError(buf);
        }
    }
    std::unordered_set<ItemId> seen;
    seen.reserve(item_ids.size());
    for (ItemId id : item_ids) {
        if (!seen.insert(id).second) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "embedding matrix: duplicate item id %llu",
                          static_cast<unsigned long long>(id));
            throw FormatError(buf);
        }
    }
}

void CodebookStack::validate() const {
    if (d == 0) throw FormatError("codebook stack: dimension is zero");
    if (layers.empty()) throw FormatError("codebook stack: no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const CodebookLayer& layer = layers[l];
        if (layer.m == 0) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "codebook stack: layer %zu is empty", l + 1);
            throw FormatError(buf);
        }
        if (layer.centroids.size() != static_cast<std::size_t>(layer.m) * d ||
            layer.frozen.size() != layer.m) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "codebook stack: layer %zu shape mismatch (m=%u, d=%u, %zu values, "
                          "%zu flags)",
                          l + 1, layer.m, d, layer.centroids.size(), layer.frozen.size());
            throw FormatError(buf);
        }
        for (float v : layer.centroids) {
            if (!std::isfinite(v)) {
                char buf[96];
                std::snprintf(buf, sizeof buf, "codebook stack: non-finite centroid in layer %zu",
                              l + 1);
                throw NumericError(buf);
            }
        }
    }
}

}  // namespace sidq
