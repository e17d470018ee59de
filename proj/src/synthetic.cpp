#include "sidq/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "sidq/error.hpp"

namespace sidq {

namespace {

constexpr std::uint64_t kInteractionsPerItem = 20;  // total draws = 20 * n_items

// splitmix64: decorrelates the per-phase seeds derived from one user seed.
std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::mt19937_64 phase_rng(std::uint64_t seed, std::uint64_t phase) {
    return std::mt19937_64(mix(seed + mix(phase)));
}

// Uniform in [0,1) with exactly 53 random bits; avoids distribution
// objects so draws are identical across standard libraries.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Box-Muller pairs; u1 in (0,1] keeps the log finite.
class GaussianGen {
public:
    explicit GaussianGen(std::mt19937_64& rng) : rng_(rng) {}

    double next() {
        if (has_) {
            has_ = false;
            return cached_;
        }
        const double u1 = static_cast<double>((rng_() >> 11) + 1) * 0x1.0p-53;
        const double u2 = uniform01(rng_);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        cached_ = r * std::sin(a);
        has_ = true;
        return r * std::cos(a);
    }

private:
    std::mt19937_64& rng_;
    bool has_ = false;
    double cached_ = 0.0;
};

// Cumulative rank^-s weights for inverse-CDF sampling.
std::vector<double> zipf_cdf(std::uint64_t n, double s) {
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (std::uint64_t i = 0; i < n; ++i) {
        acc += std::pow(static_cast<double>(i + 1), -s);
        cdf[i] = acc;
    }
    for (double& v : cdf) v /= acc;
    return cdf;
}

std::uint64_t draw_from_cdf(const std::vector<double>& cdf, std::mt19937_64& rng) {
    const double u = uniform01(rng);
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return static_cast<std::uint64_t>(std::min<std::ptrdiff_t>(
        it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

// Length of the populous prefix of the cluster Zipf law: clusters that
// expect to hold at least 64 items. Falls back to the single most
// populous cluster when the corpus is too small for any to qualify.
std::uint32_t dense_cluster_count(const std::vector<double>& cdf, std::uint64_t n_items) {
    constexpr double kMinExpectedMembers = 64.0;
    std::uint32_t dense = 1;
    double prev = 0.0;
    for (std::size_t k = 0; k < cdf.size(); ++k) {
        const double share = cdf[k] - prev;
        prev = cdf[k];
        if (share * static_cast<double>(n_items) < kMinExpectedMembers) break;
        dense = static_cast<std::uint32_t>(k + 1);
    }
    return dense;
}

}  // namespace

void SyntheticSpec::validate() const {
    if (n_items == 0) throw ConfigError("synthetic spec: n_items must be positive");
    if (d == 0) throw ConfigError("synthetic spec: dimension must be positive");
    if (n_clusters == 0) throw ConfigError("synthetic spec: n_clusters must be positive");
    if (n_clusters > n_items) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "synthetic spec: n_clusters %u exceeds n_items %llu",
                      n_clusters, static_cast<unsigned long long>(n_items));
        throw ConfigError(buf);
    }
    if (!(zipf_exponent > 0.0) || !std::isfinite(zipf_exponent)) {
        throw ConfigError("synthetic spec: zipf_exponent must be a positive real");
    }
    if (!(cluster_std >= 0.0) || !std::isfinite(cluster_std)) {
        throw ConfigError("synthetic spec: cluster_std must be a nonnegative real");
    }
    if (!(head_fraction > 0.0) || !(head_fraction < 1.0)) {
        throw ConfigError("synthetic spec: head_fraction must be in (0,1)");
    }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const std::uint64_t n = spec.n_items;
    const std::uint32_t d = spec.d;

    // Phase 0: cluster centers, uniform in [-1,1]^d.
    std::vector<float> centers(static_cast<std::size_t>(spec.n_clusters) * d);
    {
        std::mt19937_64 rng = phase_rng(spec.seed, 0);
        for (float& c : centers) c = static_cast<float>(2.0 * uniform01(rng) - 1.0);
    }

    // Phase 1: cluster of each item, Zipf over cluster rank. Rows are
    // popularity-ordered (interactions are drawn over the row index in phase
    // 3), and embeddings trained on interaction data place data-rich items in
    // well-covered regions; to mirror that, the top-ranked slice draws its
    // cluster from the populous prefix of the same Zipf law while every other
    // row samples the full distribution. The slice is twice the head share so
    // sampling noise at the head/tail boundary stays inside it.
    std::vector<std::uint32_t> item_cluster(n);
    {
        std::mt19937_64 rng = phase_rng(spec.seed, 1);
        const std::vector<double> cdf = zipf_cdf(spec.n_clusters, spec.zipf_exponent);
        const std::uint32_t dense = dense_cluster_count(cdf, n);
        const double dense_mass = cdf[dense - 1];
        const auto top_rows = static_cast<std::uint64_t>(
            std::min(static_cast<double>(n),
                     std::ceil(2.0 * spec.head_fraction * static_cast<double>(n))));
        for (std::uint64_t i = 0; i < n; ++i) {
            if (i < top_rows) {
                const double u = uniform01(rng) * dense_mass;
                const auto it = std::upper_bound(cdf.begin(), cdf.begin() + dense, u);
                item_cluster[i] = static_cast<std::uint32_t>(std::min<std::ptrdiff_t>(
                    it - cdf.begin(), static_cast<std::ptrdiff_t>(dense) - 1));
            } else {
                item_cluster[i] = static_cast<std::uint32_t>(draw_from_cdf(cdf, rng));
            }
        }
    }

    // Phase 2: embeddings = center + isotropic Gaussian noise.
    SyntheticData out;
    out.embeddings.d = d;
    out.embeddings.item_ids.resize(n);
    out.embeddings.data.resize(n * static_cast<std::size_t>(d));
    {
        std::mt19937_64 rng = phase_rng(spec.seed, 2);
        GaussianGen gauss(rng);
        for (std::uint64_t i = 0; i < n; ++i) {
            out.embeddings.item_ids[i] = i + 1;
            const float* center = centers.data() + static_cast<std::size_t>(item_cluster[i]) * d;
            float* row = out.embeddings.data.data() + i * d;
            for (std::uint32_t j = 0; j < d; ++j) {
                row[j] = static_cast<float>(static_cast<double>(center[j]) +
                                            spec.cluster_std * gauss.next());
            }
        }
    }

    // Phase 3: interaction counts, multinomial over the item-rank Zipf
    // (rank = row order, so item 1 is the most popular in expectation).
    out.meta.resize(n);
    {
        std::mt19937_64 rng = phase_rng(spec.seed, 3);
        const std::vector<double> cdf = zipf_cdf(n, spec.zipf_exponent);
        for (std::uint64_t i = 0; i < n; ++i) out.meta[i].item_id = i + 1;
        const std::uint64_t draws = kInteractionsPerItem * n;
        for (std::uint64_t t = 0; t < draws; ++t) {
            ++out.meta[draw_from_cdf(cdf, rng)].interaction_count;
        }
    }

    split_head_tail(out.meta, spec.head_fraction);
    return out;
}

namespace {

// Indices of meta rows ordered by interaction count descending, ties by
// ascending item_id — the shared ordering for splitting and top_share.
std::vector<std::size_t> popularity_order(std::span<const ItemMeta> meta) {
    std::vector<std::size_t> order(meta.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (meta[a].interaction_count != meta[b].interaction_count) {
            return meta[a].interaction_count > meta[b].interaction_count;
        }
        return meta[a].item_id < meta[b].item_id;
    });
    return order;
}

std::size_t head_size(std::size_t n, double fraction) {
    return static_cast<std::size_t>(
        std::min<double>(static_cast<double>(n), std::ceil(fraction * static_cast<double>(n))));
}

}  // namespace

void split_head_tail(std::vector<ItemMeta>& meta, double head_fraction) {
    if (!(head_fraction > 0.0) || !(head_fraction < 1.0)) {
        throw ConfigError("split_head_tail: head_fraction must be in (0,1)");
    }
    if (meta.empty()) throw ConfigError("split_head_tail: no items");
    const std::vector<std::size_t> order = popularity_order(meta);
    const std::size_t h = head_size(meta.size(), head_fraction);
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        meta[order[rank]].segment = rank < h ? Segment::head : Segment::tail;
    }
}

double top_share(std::span<const ItemMeta> meta, double fraction) {
    if (meta.empty()) throw ConfigError("top_share: no items");
    const std::vector<std::size_t> order = popularity_order(meta);
    const std::size_t h = head_size(meta.size(), fraction);
    std::uint64_t top = 0;
    std::uint64_t total = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::uint64_t c = meta[order[rank]].interaction_count;
        total += c;
        if (rank < h) top += c;
    }
    if (total == 0) throw NumericError("top_share: zero total interactions");
    return static_cast<double>(top) / static_cast<double>(total);
}

}  // namespace sidq
