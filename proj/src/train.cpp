#include "sidq/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <unordered_set>

#include "sidq/adaptive.hpp"
#include "sidq/error.hpp"
#include "sidq/kernels.hpp"

namespace sidq {

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
    return std::mt19937_64(mix64(seed + mix64(stream)));
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// One item's residual descent with everything the trainer needs kept
// around: chain[l] is the float32 residual r_l (chain[0] = z), codes has
// the emitted k codes, layer_sq[l] = |r_l - q_{l+1}|^2 at selection time.
struct Descent {
    std::vector<std::uint32_t> codes;
    std::vector<std::vector<float>> chain;
    std::vector<double> layer_sq;
    double final_sq = 0.0;
};

Descent descend(const float* z, const CodebookStack& stack, const PrefixTable* table,
                const TerminationPolicy& policy) {
    Descent out;
    const std::uint32_t L = stack.depth();
    const std::uint32_t d = stack.d;
    out.chain.reserve(L + 1);
    out.chain.emplace_back(z, z + d);
    out.final_sq = kernels::squared_norm(z, d);
    for (std::uint32_t l = 1; l <= L; ++l) {
        if (l >= 2 && policy.enabled && should_terminate(*table, out.codes, policy, l)) break;
        const std::vector<float>& r = out.chain.back();
        const CodebookLayer& layer = stack.layers[l - 1];
        const kernels::NearestHit hit =
            kernels::nearest_centroid(r.data(), layer.centroids.data(), layer.m, d);
        out.codes.push_back(hit.index);
        out.layer_sq.push_back(hit.sq_dist);
        std::vector<float> next = r;
        kernels::sub_inplace(next.data(), stack.centroid(l - 1, hit.index), d);
        out.final_sq = kernels::squared_norm(next.data(), d);
        out.chain.push_back(std::move(next));
    }
    return out;
}

void check_policy_inputs(const CodebookStack& stack, const PrefixTable& table,
                         const TerminationPolicy& policy) {
    if (policy.enabled) {
        policy.validate(stack.depth());
        if (table.max_depth() + 1 < stack.depth()) {
            char buf[128];
            std::snprintf(buf, sizeof buf,
                          "training: table depth %u cannot cover prefixes of a %u-layer stack",
                          table.max_depth(), stack.depth());
            throw ConfigError(buf);
        }
    }
}

}  // namespace

void TrainConfig::validate() const {
    const std::uint32_t L = layers();
    if (L == 0) throw ConfigError("train config: no layer sizes");
    for (std::uint32_t m : head_sizes) {
        if (m == 0) throw ConfigError("train config: zero layer size");
    }
    for (std::uint32_t l = 1; l < L; ++l) {
        if (strict_monotone ? head_sizes[l] <= head_sizes[l - 1]
                            : head_sizes[l] < head_sizes[l - 1]) {
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "train config: layer sizes must be %s increasing, got %u then %u at "
                          "layer %u",
                          strict_monotone ? "strictly" : "weakly", head_sizes[l - 1],
                          head_sizes[l], l + 1);
            throw ConfigError(buf);
        }
    }
    const std::uint32_t M = resolved_full_size();
    if (full_size != 0 && head_sizes.back() != full_size) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "train config: last head size %u must equal the full size %u",
                      head_sizes.back(), full_size);
        throw ConfigError(buf);
    }
    for (std::uint32_t m : head_sizes) {
        if (m > M) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "train config: head size %u exceeds full size %u", m, M);
            throw ConfigError(buf);
        }
    }
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw ConfigError("train config: beta must be a nonnegative real");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("train config: learning_rate must be a positive real");
    }
    if (!(ema_decay > 0.0) || !(ema_decay < 1.0)) {
        throw ConfigError("train config: ema_decay must be in (0,1)");
    }
    if (batch_size == 0) throw ConfigError("train config: batch_size must be positive");
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

namespace {

// Count of distinct float32 rows by exact byte comparison; when a pinned
// zero centroid exists, rows equal to it cannot be seeded and do not
// count.
std::size_t distinct_rows(const std::vector<std::vector<float>>& rows, std::uint32_t d,
                          bool exclude_zero) {
    std::unordered_set<std::string> seen;
    seen.reserve(rows.size());
    const std::string zero(static_cast<std::size_t>(d) * 4, '\0');
    for (const std::vector<float>& r : rows) {
        std::string key(reinterpret_cast<const char*>(r.data()), static_cast<std::size_t>(d) * 4);
        if (exclude_zero && key == zero) continue;
        seen.insert(std::move(key));
    }
    return seen.size();
}

// k-means++ seeding: picks `want` rows, each with probability
// proportional to squared distance from everything picked (or otherwise
// present) so far. dist_sq arrives primed against pre-existing
// centroids (or infinity when there are none and the first pick is
// uniform). Returns indices of the picked rows.
std::vector<std::size_t> kmeanspp_pick(const std::vector<std::vector<float>>& rows,
                                       std::uint32_t d, std::vector<double>& dist_sq,
                                       std::size_t want, bool first_uniform,
                                       std::mt19937_64& rng) {
    std::vector<std::size_t> picks;
    picks.reserve(want);
    const std::size_t n = rows.size();
    for (std::size_t s = 0; s < want; ++s) {
        std::size_t chosen = n;
        if (s == 0 && first_uniform) {
            chosen = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
            if (chosen >= n) chosen = n - 1;
        } else {
            double total = 0.0;
            for (double v : dist_sq) total += v;
            if (!(total > 0.0)) break;  // nothing distinct left (callers pre-check sizes)
            const double target = uniform01(rng) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist_sq[i];
                if (acc > target) {
                    chosen = i;
                    break;
                }
            }
            if (chosen == n) {  // numeric edge: walk back to the last positive weight
                for (std::size_t i = n; i-- > 0;) {
                    if (dist_sq[i] > 0.0) {
                        chosen = i;
                        break;
                    }
                }
            }
        }
        picks.push_back(chosen);
        for (std::size_t i = 0; i < n; ++i) {
            const double ds = kernels::squared_l2(rows[i].data(), rows[chosen].data(), d);
            if (ds < dist_sq[i]) dist_sq[i] = ds;
        }
    }
    return picks;
}

}  // namespace

CodebookStack init_curriculum_codebooks(const EmbeddingMatrix& head_emb,
                                        const TrainConfig& config) {
    config.validate();
    head_emb.validate();
    const std::uint32_t L = config.layers();
    const std::uint32_t d = head_emb.d;
    const std::size_t n = head_emb.size();

    std::vector<std::vector<float>> residuals(n);
    for (std::size_t i = 0; i < n; ++i) {
        residuals[i].assign(head_emb.row(i), head_emb.row(i) + d);
    }

    std::mt19937_64 rng = stream_rng(config.seed, 0x1A17);
    CodebookStack stack;
    stack.d = d;
    stack.layers.resize(L);
    for (std::uint32_t l = 0; l < L; ++l) {
        CodebookLayer& layer = stack.layers[l];
        layer.m = config.head_sizes[l];
        layer.centroids.assign(static_cast<std::size_t>(layer.m) * d, 0.0f);
        layer.frozen.assign(layer.m, 0);
        const std::uint32_t pin = config.pinned_zero ? 1 : 0;
        if (pin) layer.frozen[0] = 1;  // the zero row is already there
        const std::size_t want = layer.m - pin;

        const std::size_t distinct = distinct_rows(residuals, d, pin != 0);
        if (want > distinct) {
            char buf[192];
            std::snprintf(buf, sizeof buf,
                          "init: layer %u wants %zu seeded centroids but only %zu distinct "
                          "residuals exist; reduce the layer size",
                          l + 1, want, distinct);
            throw ConfigError(buf);
        }

        std::vector<double> dist_sq(n, std::numeric_limits<double>::infinity());
        bool first_uniform = true;
        if (pin) {
            // The pinned zero behaves like a pre-existing centroid: the
            // first seed is already distance-weighted away from it.
            for (std::size_t i = 0; i < n; ++i) {
                dist_sq[i] = kernels::squared_norm(residuals[i].data(), d);
            }
            first_uniform = false;
        }
        const std::vector<std::size_t> picks =
            kmeanspp_pick(residuals, d, dist_sq, want, first_uniform, rng);
        for (std::size_t s = 0; s < picks.size(); ++s) {
            std::memcpy(layer.centroids.data() + (static_cast<std::size_t>(pin) + s) * d,
                        residuals[picks[s]].data(), static_cast<std::size_t>(d) * 4);
        }

        if (l + 1 < L) {
            for (std::size_t i = 0; i < n; ++i) {
                const kernels::NearestHit hit = kernels::nearest_centroid(
                    residuals[i].data(), layer.centroids.data(), layer.m, d);
                kernels::sub_inplace(residuals[i].data(), stack.centroid(l, hit.index), d);
            }
        }
    }
    return stack;
}

// ---------------------------------------------------------------------------
// Losses and gradients
// ---------------------------------------------------------------------------

LossReport compute_losses(const EmbeddingMatrix& batch, const CodebookStack& stack,
                          const PrefixTable& table, const TerminationPolicy& policy,
                          const TrainConfig& config) {
    config.validate();
    if (batch.d != stack.d) throw_dim_mismatch("loss batch vs codebooks", stack.d, batch.d);
    if (batch.size() == 0) throw ConfigError("compute_losses: empty batch");
    check_policy_inputs(stack, table, policy);

    LossReport report;
    report.per_layer_codebook.assign(stack.depth(), 0.0);
    report.per_layer_commit.assign(stack.depth(), 0.0);
    const double n = static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Descent path = descend(batch.row(i), stack, &table, policy);
        report.recon += path.final_sq / n;
        for (std::size_t l = 0; l < path.codes.size(); ++l) {
            // The two terms differ only in stop-gradient placement; the
            // numeric value is shared.
            report.per_layer_codebook[l] += path.layer_sq[l] / n;
            report.per_layer_commit[l] += path.layer_sq[l] / n;
            report.codebook += path.layer_sq[l] / n;
            report.commit += path.layer_sq[l] / n;
        }
    }
    report.total = report.recon + report.codebook + config.beta * report.commit;
    if (!std::isfinite(report.total)) throw NumericError("compute_losses: non-finite loss");
    return report;
}

namespace {

// Shared by codebook_gradients and the gradient-mode trainer: folds one
// descended item into the per-layer gradient accumulators (already
// containing the straight-through codebook pull and the commitment
// chain), skipping frozen rows. inv_n is 1/batch_size.
void accumulate_item_gradient(const Descent& path, const CodebookStack& stack, double beta,
                              double inv_n, std::vector<std::vector<double>>& grads) {
    const std::uint32_t d = stack.d;
    const std::size_t k = path.codes.size();
    // Codebook term: 2(q_l - r_{l-1}) / n on each selected, unfrozen row.
    for (std::size_t l = 0; l < k; ++l) {
        const std::uint32_t c = path.codes[l];
        if (stack.layers[l].frozen[c]) continue;
        const float* q = stack.centroid(static_cast<std::uint32_t>(l), c);
        const float* r = path.chain[l].data();
        double* g = grads[l].data() + static_cast<std::size_t>(c) * d;
        for (std::uint32_t j = 0; j < d; ++j) {
            g[j] += 2.0 * inv_n * (static_cast<double>(q[j]) - static_cast<double>(r[j]));
        }
    }
    if (beta == 0.0) return;
    // Commitment term: each earlier layer j feels -2b/n * sum over l>j of
    // (r_{l-1} - q_l); accumulate that suffix sum walking layers backward.
    std::vector<double> suffix(d, 0.0);
    for (std::size_t l = k; l-- > 1;) {
        const float* q = stack.centroid(static_cast<std::uint32_t>(l), path.codes[l]);
        const float* r_in = path.chain[l].data();
        for (std::uint32_t j = 0; j < d; ++j) {
            suffix[j] += static_cast<double>(r_in[j]) - static_cast<double>(q[j]);
        }
        const std::uint32_t c = path.codes[l - 1];
        if (stack.layers[l - 1].frozen[c]) continue;
        double* g = grads[l - 1].data() + static_cast<std::size_t>(c) * d;
        for (std::uint32_t j = 0; j < d; ++j) {
            g[j] += -2.0 * beta * inv_n * suffix[j];
        }
    }
}

std::vector<std::vector<double>> zero_gradients(const CodebookStack& stack) {
    std::vector<std::vector<double>> grads(stack.depth());
    for (std::uint32_t l = 0; l < stack.depth(); ++l) {
        grads[l].assign(static_cast<std::size_t>(stack.layers[l].m) * stack.d, 0.0);
    }
    return grads;
}

}  // namespace

std::vector<std::vector<double>> codebook_gradients(const EmbeddingMatrix& batch,
                                                    const CodebookStack& stack,
                                                    const PrefixTable& table,
                                                    const TerminationPolicy& policy,
                                                    const TrainConfig& config) {
    config.validate();
    if (batch.d != stack.d) throw_dim_mismatch("gradient batch vs codebooks", stack.d, batch.d);
    if (batch.size() == 0) throw ConfigError("codebook_gradients: empty batch");
    check_policy_inputs(stack, table, policy);

    std::vector<std::vector<double>> grads = zero_gradients(stack);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Descent path = descend(batch.row(i), stack, &table, policy);
        accumulate_item_gradient(path, stack, config.beta, inv_n, grads);
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Training loop (both stages)
// ---------------------------------------------------------------------------

namespace {

struct EpochLog {
    double recon = 0.0;
    double codebook = 0.0;
    std::size_t dead = 0;
};

// Residual of one item entering `layer` under the current stack,
// ignoring termination (members of a layer's cluster reached it by
// construction). Used to materialize reseed targets.
std::vector<float> residual_at_layer(const float* z, const CodebookStack& stack,
                                     std::uint32_t layer) {
    std::vector<float> r(z, z + stack.d);
    for (std::uint32_t l = 0; l < layer; ++l) {
        const CodebookLayer& cl = stack.layers[l];
        const kernels::NearestHit hit =
            kernels::nearest_centroid(r.data(), cl.centroids.data(), cl.m, stack.d);
        kernels::sub_inplace(r.data(), stack.centroid(l, hit.index), stack.d);
    }
    return r;
}

// Reseeds per-layer centroids that drew fewer than threshold items this
// epoch. The replacement is the current residual of a random member of
// the layer's most-populated cluster (stage 2: most-populated unfrozen
// cluster; if no unfrozen cluster has members the layer is skipped).
// Deeper-layer member lists go stale after a reseed; the next epoch's
// full pass refreshes them.
std::size_t reseed_dead(CodebookStack& stack, const EmbeddingMatrix& emb,
                        const std::vector<std::vector<std::uint64_t>>& counts,
                        const std::vector<std::vector<std::uint32_t>>& code_of,
                        const TrainConfig& config, bool stage2, std::mt19937_64& rng) {
    std::size_t reseeded = 0;
    if (config.dead_code_threshold == 0) return 0;
    for (std::uint32_t l = 0; l < stack.depth(); ++l) {
        CodebookLayer& layer = stack.layers[l];
        // Source cluster: the heaviest one this epoch (unfrozen only in
        // stage 2 — a frozen anchor's cluster must not bleed into
        // extension territory).
        std::uint32_t source = layer.m;
        std::uint64_t best = 0;
        for (std::uint32_t c = 0; c < layer.m; ++c) {
            if (stage2 && layer.frozen[c]) continue;
            if (counts[l][c] > best) {
                best = counts[l][c];
                source = c;
            }
        }
        if (source == layer.m || best == 0) continue;  // no usable mass at this layer

        std::vector<std::size_t> members;
        bool members_built = false;
        for (std::uint32_t c = 0; c < layer.m; ++c) {
            if (layer.frozen[c] || counts[l][c] >= config.dead_code_threshold) continue;
            if (!members_built) {
                for (std::size_t i = 0; i < emb.size(); ++i) {
                    if (code_of[l][i] == source) members.push_back(i);
                }
                members_built = true;
            }
            if (members.empty()) break;
            std::size_t pick = static_cast<std::size_t>(uniform01(rng) *
                                                        static_cast<double>(members.size()));
            if (pick >= members.size()) pick = members.size() - 1;
            const std::vector<float> r = residual_at_layer(emb.row(members[pick]), stack, l);
            std::memcpy(layer.centroids.data() + static_cast<std::size_t>(c) * stack.d, r.data(),
                        static_cast<std::size_t>(stack.d) * 4);
            ++reseeded;
        }
    }
    return reseeded;
}

void run_epochs(CodebookStack& stack, const EmbeddingMatrix& emb, const PrefixTable* head_table,
                const TrainConfig& config, const TerminationPolicy& policy, bool stage2,
                std::ostream* log) {
    const std::size_t n = emb.size();
    const std::uint32_t L = stack.depth();
    const std::uint32_t d = stack.d;

    for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
        // Termination regime for this epoch. Stage 1 bootstraps: epoch 0
        // runs full depth, later epochs consult a table rebuilt from a
        // fresh full-depth pass. Stage 2 always consults the head table.
        TerminationPolicy epoch_policy = policy;
        PrefixTable epoch_table_storage = PrefixTable();
        const PrefixTable* epoch_table = nullptr;
        if (!policy.enabled) {
            epoch_policy.enabled = false;
        } else if (stage2) {
            epoch_table = head_table;
        } else if (epoch == 0) {
            epoch_policy.enabled = false;
        } else {
            std::vector<Assignment> assigns(n);
            for (std::size_t i = 0; i < n; ++i) {
                assigns[i].item_id = emb.item_ids[i];
                assigns[i].sid =
                    descend(emb.row(i), stack, nullptr, TerminationPolicy::fixed_depth()).codes;
            }
            epoch_table_storage = PrefixTable::build(assigns, L);
            epoch_table = &epoch_table_storage;
        }

        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        {
            std::mt19937_64 shuffle_rng = stream_rng(config.seed, 2 * epoch + 1);
            std::shuffle(order.begin(), order.end(), shuffle_rng);
        }

        std::vector<std::vector<std::uint64_t>> counts(L);
        std::vector<std::vector<std::uint32_t>> code_of(L);
        for (std::uint32_t l = 0; l < L; ++l) {
            counts[l].assign(stack.layers[l].m, 0);
            code_of[l].assign(n, UINT32_MAX);
        }

        const bool ema_mode = config.mode == TrainConfig::Mode::kmeans_ema ||
                              epoch < config.warmup_epochs;
        EpochLog elog;

        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            const std::size_t bn = stop - start;
            std::vector<Descent> paths(bn);
            for (std::size_t b = 0; b < bn; ++b) {
                const std::size_t row = order[start + b];
                paths[b] = descend(emb.row(row), stack, epoch_table, epoch_policy);
                elog.recon += paths[b].final_sq;
                for (std::size_t l = 0; l < paths[b].codes.size(); ++l) {
                    elog.codebook += paths[b].layer_sq[l];
                    counts[l][paths[b].codes[l]]++;
                    code_of[l][row] = paths[b].codes[l];
                }
            }
            if (!std::isfinite(elog.recon + elog.codebook)) {
                char buf[128];
                std::snprintf(buf, sizeof buf,
                              "training: non-finite loss at epoch %u batch %zu", epoch,
                              start / config.batch_size);
                throw NumericError(buf);
            }

            if (ema_mode) {
                // EMA pull toward the mean residual each centroid drew in
                // this batch; frozen rows and unassigned rows stay put.
                for (std::uint32_t l = 0; l < L; ++l) {
                    std::vector<double> sums(static_cast<std::size_t>(stack.layers[l].m) * d, 0.0);
                    std::vector<std::uint64_t> bc(stack.layers[l].m, 0);
                    for (const Descent& p : paths) {
                        if (l >= p.codes.size()) continue;
                        const std::uint32_t c = p.codes[l];
                        if (stack.layers[l].frozen[c]) continue;
                        const float* r = p.chain[l].data();
                        double* s = sums.data() + static_cast<std::size_t>(c) * d;
                        for (std::uint32_t j = 0; j < d; ++j) s[j] += static_cast<double>(r[j]);
                        ++bc[c];
                    }
                    for (std::uint32_t c = 0; c < stack.layers[l].m; ++c) {
                        if (bc[c] == 0 || stack.layers[l].frozen[c]) continue;
                        float* q = stack.layers[l].centroids.data() +
                                   static_cast<std::size_t>(c) * d;
                        const double* s = sums.data() + static_cast<std::size_t>(c) * d;
                        for (std::uint32_t j = 0; j < d; ++j) {
                            const double mean = s[j] / static_cast<double>(bc[c]);
                            q[j] = static_cast<float>(config.ema_decay * q[j] +
                                                      (1.0 - config.ema_decay) * mean);
                        }
                    }
                }
            } else {
                std::vector<std::vector<double>> grads = zero_gradients(stack);
                const double inv_n = 1.0 / static_cast<double>(bn);
                for (const Descent& p : paths) {
                    accumulate_item_gradient(p, stack, config.beta, inv_n, grads);
                }
                for (std::uint32_t l = 0; l < L; ++l) {
                    float* q = stack.layers[l].centroids.data();
                    const double* g = grads[l].data();
                    for (std::size_t idx = 0; idx < grads[l].size(); ++idx) {
                        // Frozen rows have exactly-zero gradients; the
                        // subtraction below still skips them so their bits
                        // never pass through a float round-trip.
                        if (stack.layers[l].frozen[idx / d]) continue;
                        q[idx] = static_cast<float>(q[idx] - config.learning_rate * g[idx]);
                    }
                }
            }
        }

        std::mt19937_64 reseed_rng = stream_rng(config.seed, 2 * epoch + 2);
        elog.dead = reseed_dead(stack, emb, counts, code_of, config, stage2, reseed_rng);

        if (log) {
            const double dn = static_cast<double>(n);
            const double recon = elog.recon / dn;
            const double cb = elog.codebook / dn;
            char line[256];
            std::snprintf(line, sizeof line,
                          "epoch %u recon %.6f codebook %.6f commit %.6f total %.6f dead %zu\n",
                          epoch, recon, cb, cb, recon + cb + config.beta * cb, elog.dead);
            *log << line << std::flush;
        }
    }
}

PrefixTable final_table(const CodebookStack& stack, const EmbeddingMatrix& emb) {
    std::vector<Assignment> assigns(emb.size());
    for (std::size_t i = 0; i < emb.size(); ++i) {
        assigns[i].item_id = emb.item_ids[i];
        assigns[i].sid =
            descend(emb.row(i), stack, nullptr, TerminationPolicy::fixed_depth()).codes;
    }
    return PrefixTable::build(assigns, stack.depth());
}

}  // namespace

TrainOutput train_head(const EmbeddingMatrix& head_emb, const TrainConfig& config,
                       const TerminationPolicy& policy, std::ostream* log) {
    config.validate();
    head_emb.validate();
    if (policy.enabled) policy.validate(config.layers());

    TrainOutput out{init_curriculum_codebooks(head_emb, config), PrefixTable()};
    run_epochs(out.stack, head_emb, nullptr, config, policy, /*stage2=*/false, log);
    out.table = final_table(out.stack, head_emb);
    return out;
}

CodebookStack extend_codebooks(const CodebookStack& head_stack, const TrainConfig& config,
                               const EmbeddingMatrix* tail_emb) {
    config.validate();
    head_stack.validate();
    const std::uint32_t L = head_stack.depth();
    if (L != config.layers()) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "extend: stack has %u layers but the config lists %u", L,
                      config.layers());
        throw ConfigError(buf);
    }
    for (std::uint32_t l = 0; l < L; ++l) {
        if (head_stack.layers[l].m != config.head_sizes[l]) {
            char buf[128];
            std::snprintf(buf, sizeof buf,
                          "extend: layer %u has %u centroids but head_sizes says %u", l + 1,
                          head_stack.layers[l].m, config.head_sizes[l]);
            throw ConfigError(buf);
        }
    }
    const std::uint32_t M = config.resolved_full_size();
    const std::uint32_t d = head_stack.d;
    if (tail_emb != nullptr) {
        if (tail_emb->d != d) throw_dim_mismatch("tail embeddings vs codebooks", d, tail_emb->d);
    }

    CodebookStack out;
    out.d = d;
    out.layers.resize(L);

    // Tail residuals maintained layer by layer through the hybrid stack
    // being built (novelty is judged against each completed layer).
    std::vector<std::vector<float>> residuals;
    if (tail_emb != nullptr) {
        residuals.resize(tail_emb->size());
        for (std::size_t i = 0; i < tail_emb->size(); ++i) {
            residuals[i].assign(tail_emb->row(i), tail_emb->row(i) + d);
        }
    }

    std::mt19937_64 rng = stream_rng(config.seed, 0xE47E);
    for (std::uint32_t l = 0; l < L; ++l) {
        const CodebookLayer& head_layer = head_stack.layers[l];
        const std::uint32_t m_head = head_layer.m;
        if (M < m_head) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "extend: full size %u is below head size %u at layer %u",
                          M, m_head, l + 1);
            throw ConfigError(buf);
        }
        CodebookLayer& layer = out.layers[l];
        layer.m = M;
        layer.centroids.assign(static_cast<std::size_t>(M) * d, 0.0f);
        layer.frozen.assign(M, 0);
        std::memcpy(layer.centroids.data(), head_layer.centroids.data(),
                    static_cast<std::size_t>(m_head) * d * 4);
        for (std::uint32_t c = 0; c < m_head; ++c) layer.frozen[c] = 1;
        const std::uint32_t slots = M - m_head;
        if (slots == 0) continue;

        if (tail_emb == nullptr) {
            // No tail data in sight: small seeded perturbations of the head
            // centroids (scale tied to the layer's RMS magnitude).
            double ssq = 0.0;
            for (std::uint32_t c = 0; c < m_head; ++c) {
                ssq += kernels::squared_norm(head_stack.centroid(l, c), d);
            }
            const double rms =
                std::sqrt(ssq / (static_cast<double>(m_head) * static_cast<double>(d)));
            const double scale = 0.01 * (rms > 0.0 ? rms : 1.0);
            for (std::uint32_t s = 0; s < slots; ++s) {
                const float* base = head_stack.centroid(l, s % m_head);
                float* dst = layer.centroids.data() + (static_cast<std::size_t>(m_head) + s) * d;
                for (std::uint32_t j = 0; j < d; ++j) {
                    const double u1 =
                        static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
                    const double u2 = uniform01(rng);
                    const double g = std::sqrt(-2.0 * std::log(u1)) *
                                     std::cos(2.0 * 3.14159265358979323846 * u2);
                    dst[j] = static_cast<float>(static_cast<double>(base[j]) + scale * g);
                }
            }
            continue;
        }

        // Novelty-gated k-means++ continuation: distances start against
        // the frozen head part; only residuals far beyond the typical
        // head fit (4x median) may seed, so anchor territory stays with
        // the anchors.
        const std::size_t nt = residuals.size();
        std::vector<double> dist_sq(nt);
        double max_abs = 0.0;
        for (std::size_t i = 0; i < nt; ++i) {
            dist_sq[i] = kernels::nearest_centroid(residuals[i].data(), head_layer.centroids.data(),
                                                   m_head, d)
                             .sq_dist;
            for (std::uint32_t j = 0; j < d; ++j) {
                max_abs = std::max(max_abs, std::abs(static_cast<double>(residuals[i][j])));
            }
        }
        for (std::uint32_t c = 0; c < m_head; ++c) {
            const float* q = head_stack.centroid(l, c);
            for (std::uint32_t j = 0; j < d; ++j) {
                max_abs = std::max(max_abs, std::abs(static_cast<double>(q[j])));
            }
        }
        std::vector<double> med = dist_sq;
        std::nth_element(med.begin(), med.begin() + med.size() / 2, med.end());
        const double gate = 4.0 * med[med.size() / 2];
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < nt; ++i) {
            if (dist_sq[i] > gate) candidates.push_back(i);
        }

        // Any slot the novel mass cannot fill parks at a far sentinel:
        // guaranteed zero assignment mass, reclaimable by dead-code
        // reseeding if novel structure appears later.
        const float sentinel = static_cast<float>(1024.0 * (1.0 + max_abs));
        std::uint32_t filled = 0;
        for (std::uint32_t s = 0; s < slots; ++s) {
            double total = 0.0;
            for (std::size_t i : candidates) total += dist_sq[i];
            if (candidates.empty() || !(total > 0.0)) break;
            const double target = uniform01(rng) * total;
            double acc = 0.0;
            std::size_t chosen = candidates.back();
            for (std::size_t i : candidates) {
                acc += dist_sq[i];
                if (acc > target) {
                    chosen = i;
                    break;
                }
            }
            float* dst =
                layer.centroids.data() + (static_cast<std::size_t>(m_head) + filled) * d;
            std::memcpy(dst, residuals[chosen].data(), static_cast<std::size_t>(d) * 4);
            ++filled;
            for (std::size_t i : candidates) {
                const double ds = kernels::squared_l2(residuals[i].data(),
                                                      residuals[chosen].data(), d);
                if (ds < dist_sq[i]) dist_sq[i] = ds;
            }
        }
        for (std::uint32_t s = filled; s < slots; ++s) {
            float* dst = layer.centroids.data() + (static_cast<std::size_t>(m_head) + s) * d;
            for (std::uint32_t j = 0; j < d; ++j) dst[j] = sentinel;
        }

        if (l + 1 < L) {
            for (std::size_t i = 0; i < nt; ++i) {
                const kernels::NearestHit hit = kernels::nearest_centroid(
                    residuals[i].data(), layer.centroids.data(), layer.m, d);
                kernels::sub_inplace(residuals[i].data(), out.centroid(l, hit.index), d);
            }
        }
    }
    return out;
}

CodebookStack train_tail(const EmbeddingMatrix& tail_emb, const CodebookStack& hybrid_stack,
                         const PrefixTable& head_table, const TrainConfig& config,
                         const TerminationPolicy& policy, std::ostream* log) {
    config.validate();
    tail_emb.validate();
    hybrid_stack.validate();
    if (tail_emb.d != hybrid_stack.d) {
        throw_dim_mismatch("tail embeddings vs codebooks", hybrid_stack.d, tail_emb.d);
    }
    check_policy_inputs(hybrid_stack, head_table, policy);

    CodebookStack stack = hybrid_stack;
    run_epochs(stack, tail_emb, &head_table, config, policy, /*stage2=*/true, log);
    return stack;
}

}  // namespace sidq
