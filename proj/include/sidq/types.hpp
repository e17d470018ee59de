#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sidq {

using ItemId = std::uint64_t;

/// Variable-length semantic id: one code index per quantizer layer, most
/// significant (layer 1) first. Length between 1 and the stack depth.
using SemanticId = std::vector<std::uint32_t>;

/// Dense row-major matrix of item embeddings, one row per item, paired
/// with the item ids in row order.
struct EmbeddingMatrix {
    std::vector<ItemId> item_ids;
    std::vector<float> data;  // size() * d floats, row-major
    std::uint32_t d = 0;

    std::size_t size() const noexcept { return item_ids.size(); }

    const float* row(std::size_t i) const noexcept { return data.data() + i * d; }

    std::span<const float> row_span(std::size_t i) const noexcept {
        return {row(i), static_cast<std::size_t>(d)};
    }

    /// Shape consistency, finite values, unique item ids. Throws
    /// FormatError (shape/duplicates) or NumericError (non-finite).
    void validate() const;
};

/// One residual layer: m centroids plus per-centroid frozen flags.
/// Frozen centroids are read-only anchors during training. The row
/// dimension lives on the owning CodebookStack.
struct CodebookLayer {
    std::vector<float> centroids;      // m * d floats, row-major
    std::vector<std::uint8_t> frozen;  // m flags, 0 or 1
    std::uint32_t m = 0;
};

/// L residual layers sharing one embedding dimension. In a hybrid stack
/// the frozen anchor centroids occupy the lowest indices of every layer,
/// so code indices assigned before extension stay meaningful after it.
struct CodebookStack {
    std::vector<CodebookLayer> layers;
    std::uint32_t d = 0;

    std::uint32_t depth() const noexcept { return static_cast<std::uint32_t>(layers.size()); }

    const float* centroid(std::uint32_t layer, std::uint32_t code) const noexcept {
        return layers[layer].centroids.data() + static_cast<std::size_t>(code) * d;
    }

    /// Shape consistency, finite centroids, depth >= 1. Throws
    /// FormatError or NumericError.
    void validate() const;
};

/// One quantized item: emitted codes plus diagnostics of the residual
/// descent that produced them.
struct QuantizationResult {
    SemanticId sid;
    std::vector<double> residual_norms;  // |r_0| .. |r_k|, so sid.size() + 1 values
    double reconstruction_error = 0.0;   // |z - sum of selected centroids|^2 = |r_k|^2
    double path_information = 0.0;       // nats; self-information of the emitted prefix
    bool terminated_early = false;
};

/// (item, semantic id) pair; the unit the prefix table and trie index
/// are built from.
struct Assignment {
    ItemId item_id = 0;
    SemanticId sid;
};

enum class Segment : std::uint8_t { head = 0, tail = 1 };

/// Popularity metadata: interaction count plus the head/tail label the
/// count implies under a given head fraction.
struct ItemMeta {
    ItemId item_id = 0;
    std::uint64_t interaction_count = 0;
    Segment segment = Segment::tail;
};

}  // namespace sidq
