#include "sidq/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <string>
#include <thread>
#include <unordered_map>

#include "sidq/error.hpp"
#include "sidq/kernels.hpp"
#include "sidq/quantizer.hpp"

namespace sidq {

namespace {

void check_table_depth(const PrefixTable& table, std::uint32_t stack_depth) {
    if (table.max_depth() + 1 < stack_depth) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "adaptive assignment: table depth %u cannot cover prefixes of a %u-layer "
                      "stack",
                      table.max_depth(), stack_depth);
        throw ConfigError(buf);
    }
}

double emitted_information(const PrefixTable& table, const SemanticId& sid) {
    const std::size_t clip = std::min<std::size_t>(sid.size(), table.max_depth());
    return table.information(std::span<const std::uint32_t>(sid.data(), clip));
}

unsigned resolve_threads(unsigned threads, std::size_t n) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(threads, n));
}

}  // namespace

QuantizationResult quantize_adaptive(std::span<const float> z, const CodebookStack& stack,
                                     const PrefixTable& table, const TerminationPolicy& policy) {
    if (!policy.enabled) return quantize_fixed(z, stack);
    if (z.size() != stack.d) throw_dim_mismatch("quantizer input", stack.d, z.size());
    policy.validate(stack.depth());
    check_table_depth(table, stack.depth());

    QuantizationResult out;
    const std::uint32_t L = stack.depth();
    out.sid.reserve(L);
    out.residual_norms.reserve(L + 1);

    std::vector<float> r(z.begin(), z.end());
    double sq = kernels::squared_norm(r.data(), r.size());
    out.residual_norms.push_back(std::sqrt(sq));
    for (std::uint32_t l = 1; l <= L; ++l) {
        if (l >= 2 && should_terminate(table, out.sid, policy, l)) {
            out.terminated_early = true;
            break;
        }
        const CodebookLayer& layer = stack.layers[l - 1];
        const kernels::NearestHit hit =
            kernels::nearest_centroid(r.data(), layer.centroids.data(), layer.m, stack.d);
        out.sid.push_back(hit.index);
        kernels::sub_inplace(r.data(), stack.centroid(l - 1, hit.index), stack.d);
        sq = kernels::squared_norm(r.data(), r.size());
        out.residual_norms.push_back(std::sqrt(sq));
    }
    out.reconstruction_error = sq;
    out.path_information = emitted_information(table, out.sid);
    return out;
}

std::vector<QuantizationResult> assign_corpus(const EmbeddingMatrix& emb,
                                              const CodebookStack& stack, const PrefixTable& table,
                                              const TerminationPolicy& policy, unsigned threads) {
    if (emb.d != stack.d) throw_dim_mismatch("corpus embeddings vs codebooks", stack.d, emb.d);
    if (policy.enabled) {
        policy.validate(stack.depth());
        check_table_depth(table, stack.depth());
    }
    const std::size_t n = emb.size();
    std::vector<QuantizationResult> out(n);
    const unsigned t = resolve_threads(threads, n);
    if (t <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = quantize_adaptive(emb.row_span(i), stack, table, policy);
        }
        return out;
    }
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(t);
    workers.reserve(t);
    for (unsigned w = 0; w < t; ++w) {
        const std::size_t lo = n * w / t;
        const std::size_t hi = n * (w + 1) / t;
        workers.emplace_back([&, lo, hi, w] {
            try {
                for (std::size_t i = lo; i < hi; ++i) {
                    out[i] = quantize_adaptive(emb.row_span(i), stack, table, policy);
                }
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (std::thread& th : workers) th.join();
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

SweepReport tau_sweep(const EmbeddingMatrix& emb, const CodebookStack& stack,
                      const PrefixTable& table, const TerminationPolicy& base,
                      std::span<const double> taus, unsigned threads) {
    if (taus.empty()) throw ConfigError("tau sweep: no tau values");
    for (std::size_t i = 1; i < taus.size(); ++i) {
        if (!(taus[i] > taus[i - 1])) {
            throw ConfigError("tau sweep: tau values must be sorted strictly ascending");
        }
    }
    if (base.mode != TerminationPolicy::Mode::prefix_ratio) {
        throw ConfigError("tau sweep: base policy must be in prefix-ratio mode");
    }
    const std::vector<QuantizationResult> full =
        assign_corpus(emb, stack, table, TerminationPolicy::fixed_depth(), threads);
    const std::size_t n = full.size();
    const std::uint32_t L = stack.depth();

    SweepReport report;
    report.rows.reserve(taus.size());
    for (double tau : taus) {
        TerminationPolicy policy = base;
        policy.enabled = true;
        policy.tau = tau;
        policy.validate(L);
        check_table_depth(table, L);

        SweepRow row;
        row.tau = tau;
        std::uint64_t truncated = 0;
        std::unordered_map<std::string, std::uint64_t> distinct;
        distinct.reserve(n);
        for (const QuantizationResult& q : full) {
            std::uint32_t depth = L;
            for (std::uint32_t l = 2; l <= L; ++l) {
                const std::span<const std::uint32_t> prefix(q.sid.data(), l - 1);
                if (should_terminate(table, prefix, policy, l)) {
                    depth = l - 1;
                    break;
                }
            }
            if (depth < L) ++truncated;
            ++row.length_histogram[depth];
            std::string key(reinterpret_cast<const char*>(q.sid.data()), depth * 4);
            ++distinct[key];
        }
        row.truncated_fraction = static_cast<double>(truncated) / static_cast<double>(n);
        row.distinct_sids = distinct.size();
        row.mean_items_per_sid = static_cast<double>(n) / static_cast<double>(distinct.size());
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace sidq
