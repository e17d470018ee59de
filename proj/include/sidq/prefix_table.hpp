#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sidq/types.hpp"

namespace sidq {

/// Empirical prefix counts over a population of semantic ids. count(p)
/// is the number of items whose id starts with p, for p of length 1 up
/// to max_depth; prefixes that never occur are simply absent. The table
/// is immutable once built — assignment-time consumers only read it.
class PrefixTable {
public:
    struct Entry {
        std::vector<std::uint32_t> prefix;
        std::uint64_t count = 0;
    };

    /// Counts every prefix (up to max_depth codes) of every assignment.
    /// Throws ConfigError on empty input, zero depth, or depth > 255
    /// (the serialized form stores depth in one byte).
    static PrefixTable build(std::span<const Assignment> assignments, std::uint32_t max_depth);

    /// Reassembles a table from serialized entries, validating that
    /// counts are positive, lengths fit max_depth, every prefix of
    /// length >= 2 has its parent present with a count at least as
    /// large, and length-1 counts sum to total_items. Throws
    /// FormatError on any violation.
    static PrefixTable from_entries(std::uint64_t total_items, std::uint32_t max_depth,
                                    std::span<const Entry> entries);

    std::uint64_t total_items() const noexcept { return total_; }
    std::uint32_t max_depth() const noexcept { return max_depth_; }
    std::size_t entry_count() const noexcept { return counts_.size(); }

    /// Items whose id starts with prefix; 0 if the prefix never occurs.
    /// The empty prefix counts everything.
    std::uint64_t count(std::span<const std::uint32_t> prefix) const noexcept;

    /// count(prefix) / total_items, 0 for unseen prefixes.
    double ratio(std::span<const std::uint32_t> prefix) const noexcept;

    /// Path self-information in nats, summed term by term along the
    /// prefix: -log(count(p_1)/total) - sum of -log(count(p_1..i) /
    /// count(p_1..i-1)). Every term is nonnegative, so extending a
    /// prefix never decreases the result. +inf as soon as a step has no
    /// support.
    double information(std::span<const std::uint32_t> prefix) const noexcept;

    /// Same chain, with each conditional smoothed by a pseudo-count:
    /// (count(child) + alpha) / (count(parent) + alpha * child_space[i]),
    /// where child_space[i] is the code-space size at position i.
    /// Finite for every prefix when alpha > 0.
    double information_smoothed(std::span<const std::uint32_t> prefix, double alpha,
                                std::span<const std::uint64_t> child_space) const;

    /// All stored prefixes sorted by (length, codes ascending) — the
    /// canonical serialization order.
    std::vector<Entry> entries() const;

private:
    std::unordered_map<std::string, std::uint64_t> counts_;  // key: codes as u32 LE bytes
    std::uint64_t total_ = 0;
    std::uint32_t max_depth_ = 0;
};

/// When and why assignment may stop emitting codes before the last
/// layer. Checked before quantizing layer l for l = 2..L, on the prefix
/// of the l-1 codes already emitted.
struct TerminationPolicy {
    enum class Mode {
        prefix_ratio,       // stop once the prefix ratio drops to tau or below
        information_budget  // stop once path information exceeds the layer budget
    };

    Mode mode = Mode::prefix_ratio;
    bool enabled = true;

    // prefix_ratio mode: stop iff the emitted prefix has at least
    // check_depth codes and ratio(prefix) <= tau. A budget of -ln(tau)
    // per layer makes the two modes agree on which prefixes qualify,
    // except for prefixes whose ratio lands exactly on tau (ratio mode
    // stops at the boundary, the strict budget comparison does not).
    double tau = 2e-6;
    std::uint32_t check_depth = 2;

    // information_budget mode: budgets[l - 2] is the bound checked
    // before layer l; optional pseudo-count smoothing of conditionals.
    std::vector<double> budgets;
    double alpha = 0.0;
    std::vector<std::uint64_t> child_space;

    static TerminationPolicy fixed_depth();
    static TerminationPolicy ratio_policy(double tau, std::uint32_t check_depth = 2);
    static TerminationPolicy budget_policy(std::vector<double> budgets);

    /// Parameter ranges plus compatibility with a stack of the given
    /// depth (check_depth < depth; a budget for every checked layer).
    /// Throws ConfigError.
    void validate(std::uint32_t stack_depth) const;
};

/// Decision for one item mid-descent: true means stop before quantizing
/// next_layer and keep the emitted prefix as the final id. prefix must
/// hold exactly next_layer - 1 codes and fit inside the table's depth.
bool should_terminate(const PrefixTable& table, std::span<const std::uint32_t> prefix,
                      const TerminationPolicy& policy, std::uint32_t next_layer);

}  // namespace sidq
