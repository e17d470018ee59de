#pragma once

#include <map>
#include <span>
#include <vector>

#include "sidq/prefix_table.hpp"
#include "sidq/types.hpp"

namespace sidq {

/// Residual descent with early termination: before each layer l >= 2 the
/// policy inspects the emitted prefix against the table, and on the
/// first stop signal the prefix becomes the final id. The recorded
/// path_information is the table's self-information of the emitted id
/// (clipped to the table depth); +inf when the id left the table's
/// support. With the policy disabled this is exactly quantize_fixed.
QuantizationResult quantize_adaptive(std::span<const float> z, const CodebookStack& stack,
                                     const PrefixTable& table, const TerminationPolicy& policy);

/// quantize_adaptive over every row. Work is split into contiguous
/// chunks across threads (0 = hardware concurrency) and results land by
/// row index, so the output is identical for any thread count.
std::vector<QuantizationResult> assign_corpus(const EmbeddingMatrix& emb,
                                              const CodebookStack& stack, const PrefixTable& table,
                                              const TerminationPolicy& policy,
                                              unsigned threads = 1);

struct SweepRow {
    double tau = 0.0;
    double truncated_fraction = 0.0;
    std::map<std::uint32_t, std::uint64_t> length_histogram;
    std::uint64_t distinct_sids = 0;
    double mean_items_per_sid = 0.0;
};

struct SweepReport {
    std::vector<SweepRow> rows;  // one per requested tau, input order
};

/// Effect of tau on id granularity, computed from one full-depth pass:
/// per tau, each item's code path is re-truncated at the first prefix
/// the ratio rule would stop at. Equivalent to rerunning assignment per
/// tau, because termination depends only on the already-emitted prefix
/// and the greedy code choices below it never change. base supplies the
/// min-prefix rule; its tau is overridden per row.
SweepReport tau_sweep(const EmbeddingMatrix& emb, const CodebookStack& stack,
                      const PrefixTable& table, const TerminationPolicy& base,
                      std::span<const double> taus, unsigned threads = 1);

}  // namespace sidq
