#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "sidq/types.hpp"

namespace sidq {

/// Distribution of items over distinct semantic ids. Quantiles are
/// nearest-rank (the ceil(p*n)-th order statistic of the ascending
/// items-per-id multiset), so they are always values the multiset
/// actually contains.
struct SidStats {
    std::uint64_t sid_count = 0;
    std::uint64_t total_items = 0;
    double q80 = 0.0;
    double q90 = 0.0;
    double q99 = 0.0;
    double q999 = 0.0;
    double mean = 0.0;  // total_items / sid_count
};

/// Throws ConfigError on empty input.
SidStats sid_stats(std::span<const Assignment> assignments);

/// Per-segment distributions plus id-space overlap between segments. A
/// segment with no items reports zeroed stats.
struct SegmentStats {
    SidStats head;
    SidStats tail;
    std::uint64_t head_only_sids = 0;
    std::uint64_t tail_only_sids = 0;
    std::uint64_t shared_sids = 0;
};

/// Throws ConfigError on empty input and FormatError when an assigned
/// item has no segment label in meta.
SegmentStats segment_stats(std::span<const Assignment> assignments,
                           std::span<const ItemMeta> meta);

/// Items per id length; values sum to the number of assignments.
/// Throws ConfigError on empty input.
std::map<std::uint32_t, std::uint64_t> length_histogram(std::span<const Assignment> assignments);

/// Machine-readable report with stable keys: sid_count, q80, q90, q99,
/// q999, mean, histogram, and (when meta is non-empty) segments.
std::string stats_json(std::span<const Assignment> assignments, std::span<const ItemMeta> meta);

/// The same numbers as an aligned human-readable table.
std::string stats_text(std::span<const Assignment> assignments, std::span<const ItemMeta> meta);

}  // namespace sidq
