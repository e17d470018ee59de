#include "sidq/sid_index.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <unordered_set>

#include "sidq/error.hpp"

namespace sidq {

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

SidIndex SidIndex::build(std::span<const Assignment> assignments) {
    if (assignments.empty()) throw ConfigError("sid index: no assignments");
    SidIndex index;
    std::unordered_set<ItemId> seen;
    seen.reserve(assignments.size());
    for (const Assignment& a : assignments) {
        if (a.sid.empty()) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "sid index: item %llu has an empty id",
                          static_cast<unsigned long long>(a.item_id));
            throw FormatError(buf);
        }
        if (!seen.insert(a.item_id).second) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "sid index: duplicate item id %llu",
                          static_cast<unsigned long long>(a.item_id));
            throw FormatError(buf);
        }
        Node* node = &index.root_;
        node->subtree_items++;
        for (std::uint32_t code : a.sid) {
            std::unique_ptr<Node>& child = node->children[code];
            if (!child) child = std::make_unique<Node>();
            node = child.get();
            node->subtree_items++;
        }
        node->items.push_back(a.item_id);
        index.total_++;
        index.max_length_ = std::max(index.max_length_,
                                     static_cast<std::uint32_t>(a.sid.size()));
    }
    // Sort item lists once so retrieval is order-independent.
    std::vector<Node*> stack{&index.root_};
    while (!stack.empty()) {
        Node* node = stack.back();
        stack.pop_back();
        std::sort(node->items.begin(), node->items.end());
        for (auto& [code, child] : node->children) stack.push_back(child.get());
    }
    return index;
}

bool SidIndex::contains(std::span<const std::uint32_t> sid) const noexcept {
    const Node* node = &root_;
    for (std::uint32_t code : sid) {
        const auto it = node->children.find(code);
        if (it == node->children.end()) return false;
        node = it->second.get();
    }
    return node != &root_ && !node->items.empty();
}

std::vector<ItemId> SidIndex::retrieve(std::span<const std::uint32_t> sid,
                                       bool prefix_mode) const {
    const Node* node = &root_;
    for (std::uint32_t code : sid) {
        const auto it = node->children.find(code);
        if (it == node->children.end()) return {};
        node = it->second.get();
    }
    if (!prefix_mode) return node->items;
    std::vector<ItemId> out;
    out.reserve(node->subtree_items);
    std::vector<const Node*> stack{node};
    while (!stack.empty()) {
        const Node* cur = stack.back();
        stack.pop_back();
        out.insert(out.end(), cur->items.begin(), cur->items.end());
        for (const auto& [code, child] : cur->children) stack.push_back(child.get());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<SemanticId> SidIndex::sample_constrained(std::size_t n, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::vector<SemanticId> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        SemanticId sid;
        const Node* node = &root_;
        for (;;) {
            // Stop here with probability (terminating mass / subtree
            // mass); the root never terminates since ids are non-empty.
            const std::uint64_t here = node->items.size();
            if (node->children.empty() ||
                (node != &root_ && uniform01(rng) * static_cast<double>(node->subtree_items) <
                                       static_cast<double>(here))) {
                break;
            }
            std::uint64_t below = node->subtree_items - here;
            std::uint64_t target =
                static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(below));
            if (target >= below) target = below - 1;
            const Node* next = nullptr;
            std::uint32_t next_code = 0;
            std::uint64_t acc = 0;
            for (const auto& [code, child] : node->children) {
                acc += child->subtree_items;
                next = child.get();
                next_code = code;
                if (acc > target) break;
            }
            sid.push_back(next_code);
            node = next;
        }
        out.push_back(std::move(sid));
    }
    return out;
}

double hallucination_rate(std::span<const SemanticId> generated, const SidIndex& index) {
    if (generated.empty()) throw ConfigError("hallucination rate: no generated ids");
    std::size_t missing = 0;
    for (const SemanticId& sid : generated) {
        if (!index.contains(sid)) ++missing;
    }
    return static_cast<double>(missing) / static_cast<double>(generated.size());
}

double ret_per(std::span<const std::vector<SemanticId>> batches, const SidIndex& index) {
    if (batches.empty()) throw ConfigError("ret-per: no batches");
    double sum = 0.0;
    for (const std::vector<SemanticId>& batch : batches) {
        std::unordered_set<ItemId> uni;
        for (const SemanticId& sid : batch) {
            for (ItemId id : index.retrieve(sid, /*prefix_mode=*/false)) uni.insert(id);
        }
        sum += static_cast<double>(uni.size());
    }
    return sum / static_cast<double>(batches.size());
}

std::vector<SemanticId> sample_unconstrained(const PrefixTable& table, std::size_t n,
                                             std::uint32_t length, std::uint64_t seed) {
    if (length == 0) throw ConfigError("unconstrained sampler: length must be positive");
    if (length > table.max_depth()) {
        char buf[96];
        std::snprintf(buf, sizeof buf,
                      "unconstrained sampler: length %u exceeds the table depth %u", length,
                      table.max_depth());
        throw ConfigError(buf);
    }
    // Marginal weight of code c at position i: total count of length-i
    // prefixes ending in c.
    std::vector<std::map<std::uint32_t, std::uint64_t>> marginals(length);
    for (const PrefixTable::Entry& e : table.entries()) {
        const std::size_t pos = e.prefix.size() - 1;
        if (pos < length) marginals[pos][e.prefix.back()] += e.count;
    }
    std::vector<std::uint64_t> totals(length, 0);
    for (std::uint32_t i = 0; i < length; ++i) {
        for (const auto& [code, w] : marginals[i]) totals[i] += w;
        if (totals[i] == 0) {
            char buf[96];
            std::snprintf(buf, sizeof buf,
                          "unconstrained sampler: no observed codes at position %u", i + 1);
            throw ConfigError(buf);
        }
    }
    std::mt19937_64 rng(seed);
    std::vector<SemanticId> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        SemanticId sid(length);
        for (std::uint32_t i = 0; i < length; ++i) {
            std::uint64_t target = static_cast<std::uint64_t>(
                uniform01(rng) * static_cast<double>(totals[i]));
            if (target >= totals[i]) target = totals[i] - 1;
            std::uint64_t acc = 0;
            for (const auto& [code, w] : marginals[i]) {
                acc += w;
                sid[i] = code;
                if (acc > target) break;
            }
        }
        out.push_back(std::move(sid));
    }
    return out;
}

}  // namespace sidq
