#pragma once

#include <iosfwd>
#include <vector>

#include "sidq/prefix_table.hpp"
#include "sidq/types.hpp"

namespace sidq {

/// Knobs for both training stages. head_sizes is the per-layer
/// curriculum M_1..M_L (strictly increasing unless strict_monotone is
/// relaxed); full_size is the final per-layer size M that extension pads
/// to (0 means "same as the last head size"). In gradient mode the
/// first warmup_epochs epochs still run EMA updates — the default
/// schedule — while kmeans_ema mode runs EMA throughout.
struct TrainConfig {
    enum class Mode { gradient, kmeans_ema };

    std::vector<std::uint32_t> head_sizes = {64, 128, 256};
    std::uint32_t full_size = 0;
    double beta = 0.25;
    Mode mode = Mode::gradient;
    double learning_rate = 0.1;
    double ema_decay = 0.5;
    std::uint32_t epochs = 10;
    std::uint32_t batch_size = 256;
    std::uint64_t seed = 1;
    std::uint64_t dead_code_threshold = 1;
    bool pinned_zero = false;
    bool strict_monotone = true;
    std::uint32_t warmup_epochs = 2;

    std::uint32_t layers() const noexcept { return static_cast<std::uint32_t>(head_sizes.size()); }

    /// Resolved extension target: full_size, or the last head size.
    std::uint32_t resolved_full_size() const noexcept {
        return full_size != 0 ? full_size : head_sizes.back();
    }

    /// Field ranges and the size curriculum (monotonicity, M_l <= M).
    /// Throws ConfigError.
    void validate() const;
};

/// Depth-conditioned loss summary over one batch: every term only sums
/// layers up to each item's emitted depth k. codebook and commit are
/// numerically equal (they differ only in which side the stop-gradient
/// marker sits on); total = recon + codebook + beta * commit.
struct LossReport {
    double recon = 0.0;
    double codebook = 0.0;
    double commit = 0.0;
    double total = 0.0;
    std::vector<double> per_layer_codebook;  // layer l term summed over batch / n
    std::vector<double> per_layer_commit;
};

/// Layer-sequential k-means++ seeding: layer l is seeded on the
/// residuals left by greedily quantizing through layers 1..l-1.
/// pinned_zero reserves a frozen all-zero centroid at index 0 of every
/// layer. Deterministic given config.seed. Throws ConfigError when a
/// layer wants more centroids than there are distinct residuals.
CodebookStack init_curriculum_codebooks(const EmbeddingMatrix& head_emb,
                                        const TrainConfig& config);

/// Losses of one batch under the current stack, depths fixed by
/// adaptive assignment against (table, policy).
LossReport compute_losses(const EmbeddingMatrix& batch, const CodebookStack& stack,
                          const PrefixTable& table, const TerminationPolicy& policy,
                          const TrainConfig& config);

/// Gradient of (codebook + beta * commit) w.r.t. every centroid, as one
/// m*d row-major block per layer, with the discrete assignments held
/// fixed (straight-through) and stop-gradient markers respected: the
/// codebook term pulls each selected centroid toward its input
/// residual, the commit term flows to earlier layers through the
/// residual chain, and frozen rows are exactly zero. The reconstruction
/// term trains an encoder this artifact does not have, so it
/// contributes no centroid gradient.
std::vector<std::vector<double>> codebook_gradients(const EmbeddingMatrix& batch,
                                                    const CodebookStack& stack,
                                                    const PrefixTable& table,
                                                    const TerminationPolicy& policy,
                                                    const TrainConfig& config);

struct TrainOutput {
    CodebookStack stack;
    PrefixTable table;
};

/// Stage 1: curriculum training on the head set. Epoch 0 runs at full
/// depth (no truncation) to bootstrap prefix statistics; every later
/// epoch rebuilds the prefix table from a fresh full-depth assignment
/// pass and then trains its minibatches adaptively against it.
/// Centroids assigned fewer than dead_code_threshold items in an epoch
/// are reseeded to the residual of a random member of that layer's
/// most-populated cluster. Returns the final stack plus the prefix
/// table of its full-depth head assignment. One log line per epoch when
/// log is non-null. Throws NumericError (with epoch/batch context) if a
/// loss goes non-finite.
TrainOutput train_head(const EmbeddingMatrix& head_emb, const TrainConfig& config,
                       const TerminationPolicy& policy, std::ostream* log = nullptr);

/// Pads every layer of a trained head stack to full_size: head
/// centroids keep their indices and become frozen; the appended slots
/// are trainable. With tail embeddings present, new slots are seeded by
/// novelty-gated k-means++ over tail residuals (candidates with
/// distance-squared to the nearest frozen-or-picked centroid above 4x
/// the median), and slots beyond the novel mass are parked at a far
/// sentinel that attracts no assignments. Without tail data, new slots
/// fall back to small seeded perturbations of head centroids.
CodebookStack extend_codebooks(const CodebookStack& head_stack, const TrainConfig& config,
                               const EmbeddingMatrix* tail_emb = nullptr);

/// Stage 2: anchored transfer on the tail set. Same loop as train_head
/// except termination always consults head_table (never rebuilt from
/// tail data), frozen centroids never change (bitwise), and dead-code
/// reseeding touches only unfrozen centroids, sourcing from the
/// most-populated unfrozen cluster (skipped if none has assignments).
CodebookStack train_tail(const EmbeddingMatrix& tail_emb, const CodebookStack& hybrid_stack,
                         const PrefixTable& head_table, const TrainConfig& config,
                         const TerminationPolicy& policy, std::ostream* log = nullptr);

}  // namespace sidq
