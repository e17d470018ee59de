#pragma once

#include <span>
#include <vector>

#include "sidq/kernels.hpp"
#include "sidq/types.hpp"

namespace sidq {

/// Nearest centroid of one layer to v under squared Euclidean distance;
/// ties resolve to the lowest index. Throws FormatError on a dimension
/// mismatch between v and the layer.
kernels::NearestHit nearest_in_layer(std::span<const float> v, const CodebookLayer& layer,
                                     std::uint32_t d);

/// Full-depth residual descent: greedily quantize z layer by layer,
/// subtracting the selected centroid from the running float32 residual.
/// residual_norms holds |r_0| .. |r_L|; reconstruction_error is |r_L|^2;
/// path_information is 0 and terminated_early false.
QuantizationResult quantize_fixed(std::span<const float> z, const CodebookStack& stack);

/// Sum of the centroids named by sid (one per leading layer). Throws
/// FormatError if sid is empty, longer than the stack, or any code is out
/// of range for its layer (the message names layer and index).
std::vector<float> reconstruct(const SemanticId& sid, const CodebookStack& stack);

}  // namespace sidq
