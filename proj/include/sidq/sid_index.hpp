#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "sidq/prefix_table.hpp"
#include "sidq/types.hpp"

namespace sidq {

/// Prefix trie over assigned semantic ids. Items live at the node their
/// full id terminates on — with variable-length ids that is frequently
/// an interior node. Built once, then read-only (and safely readable
/// from many threads).
class SidIndex {
public:
    /// Inserts every assignment; the result is independent of input
    /// order. Throws ConfigError on empty input, FormatError on an
    /// empty sid or a duplicated item id.
    static SidIndex build(std::span<const Assignment> assignments);

    std::uint64_t total_items() const noexcept { return total_; }
    std::uint32_t max_length() const noexcept { return max_length_; }

    /// True iff at least one item's id is exactly sid.
    bool contains(std::span<const std::uint32_t> sid) const noexcept;

    /// Exact mode: item ids assigned exactly this sid. Prefix mode: all
    /// items in the subtree under it. Sorted ascending; empty when the
    /// path does not exist.
    std::vector<ItemId> retrieve(std::span<const std::uint32_t> sid, bool prefix_mode) const;

    /// Walks the trie from the root, stopping at a node with
    /// probability proportional to the items terminating there and
    /// descending with probability proportional to subtree mass. Every
    /// produced id therefore satisfies contains() — a zero-hallucination
    /// sampler by construction. Deterministic given seed.
    std::vector<SemanticId> sample_constrained(std::size_t n, std::uint64_t seed) const;

private:
    struct Node {
        std::map<std::uint32_t, std::unique_ptr<Node>> children;
        std::vector<ItemId> items;        // ids terminating exactly here
        std::uint64_t subtree_items = 0;  // here plus all descendants
    };

    Node root_;
    std::uint64_t total_ = 0;
    std::uint32_t max_length_ = 0;
};

/// Fraction of generated ids that match no real item. Throws
/// ConfigError when generated is empty.
double hallucination_rate(std::span<const SemanticId> generated, const SidIndex& index);

/// Mean over batches of the number of distinct items addressed by the
/// batch — the union of exact-mode retrievals over its ids. Throws
/// ConfigError when batches is empty.
double ret_per(std::span<const std::vector<SemanticId>> batches, const SidIndex& index);

/// Draws each of the `length` positions independently from that
/// position's marginal code distribution in the table, deliberately
/// ignoring the conditioning between positions — a toy stand-in for an
/// unconstrained generative decoder, so impossible combinations do
/// occur. Deterministic given seed. Throws ConfigError when length is
/// zero, exceeds the table depth, or has no observed codes.
std::vector<SemanticId> sample_unconstrained(const PrefixTable& table, std::size_t n,
                                             std::uint32_t length, std::uint64_t seed);

}  // namespace sidq
