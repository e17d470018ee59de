#include "sidq/prefix_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "sidq/error.hpp"

namespace sidq {

namespace {

void append_code(std::string& key, std::uint32_t code) {
    char b[4];
    std::memcpy(b, &code, 4);  // little-endian hosts only (checked in io.cpp)
    key.append(b, 4);
}

std::string make_key(std::span<const std::uint32_t> prefix) {
    std::string key;
    key.reserve(prefix.size() * 4);
    for (std::uint32_t c : prefix) append_code(key, c);
    return key;
}

std::vector<std::uint32_t> key_to_codes(const std::string& key) {
    std::vector<std::uint32_t> codes(key.size() / 4);
    if (!codes.empty()) std::memcpy(codes.data(), key.data(), key.size());
    return codes;
}

void check_depth(std::uint32_t max_depth) {
    if (max_depth == 0) throw ConfigError("prefix table: max_depth must be at least 1");
    if (max_depth > 255) throw ConfigError("prefix table: max_depth above 255 cannot be stored");
}

}  // namespace

PrefixTable PrefixTable::build(std::span<const Assignment> assignments, std::uint32_t max_depth) {
    check_depth(max_depth);
    if (assignments.empty()) throw ConfigError("prefix table: no assignments");
    PrefixTable t;
    t.total_ = assignments.size();
    t.max_depth_ = max_depth;
    for (const Assignment& a : assignments) {
        if (a.sid.empty()) throw ConfigError("prefix table: assignment with empty semantic id");
        std::string key;
        const std::size_t depth = std::min<std::size_t>(a.sid.size(), max_depth);
        key.reserve(depth * 4);
        for (std::size_t i = 0; i < depth; ++i) {
            append_code(key, a.sid[i]);
            ++t.counts_[key];
        }
    }
    return t;
}

PrefixTable PrefixTable::from_entries(std::uint64_t total_items, std::uint32_t max_depth,
                                      std::span<const Entry> entries) {
    check_depth(max_depth);
    if (total_items == 0) throw FormatError("prefix table: zero total items");
    PrefixTable t;
    t.total_ = total_items;
    t.max_depth_ = max_depth;
    for (const Entry& e : entries) {
        if (e.prefix.empty() || e.prefix.size() > max_depth) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "prefix table: entry length %zu outside 1..%u",
                          e.prefix.size(), max_depth);
            throw FormatError(buf);
        }
        if (e.count == 0) throw FormatError("prefix table: entry with zero count");
        if (!t.counts_.emplace(make_key(e.prefix), e.count).second) {
            throw FormatError("prefix table: duplicate prefix entry");
        }
    }
    // Hierarchy consistency: every parent present and at least as heavy.
    std::uint64_t level1 = 0;
    for (const auto& [key, cnt] : t.counts_) {
        if (key.size() == 4) {
            level1 += cnt;
            continue;
        }
        const auto parent = t.counts_.find(key.substr(0, key.size() - 4));
        if (parent == t.counts_.end()) {
            throw FormatError("prefix table: entry whose parent prefix is missing");
        }
        if (parent->second < cnt) {
            throw FormatError("prefix table: prefix heavier than its parent");
        }
    }
    if (level1 != total_items) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "prefix table: length-1 counts sum to %llu but total_items is %llu",
                      static_cast<unsigned long long>(level1),
                      static_cast<unsigned long long>(total_items));
        throw FormatError(buf);
    }
    return t;
}

std::uint64_t PrefixTable::count(std::span<const std::uint32_t> prefix) const noexcept {
    if (prefix.empty()) return total_;
    const auto it = counts_.find(make_key(prefix));
    return it == counts_.end() ? 0 : it->second;
}

double PrefixTable::ratio(std::span<const std::uint32_t> prefix) const noexcept {
    return static_cast<double>(count(prefix)) / static_cast<double>(total_);
}

double PrefixTable::information(std::span<const std::uint32_t> prefix) const noexcept {
    double info = 0.0;
    std::uint64_t parent = total_;
    std::string key;
    key.reserve(prefix.size() * 4);
    for (std::uint32_t c : prefix) {
        append_code(key, c);
        const auto it = counts_.find(key);
        if (it == counts_.end()) return std::numeric_limits<double>::infinity();
        // -log of a ratio <= 1: each term is >= 0, so partial sums never
        // decrease and extending a prefix never lowers the total.
        info += -std::log(static_cast<double>(it->second) / static_cast<double>(parent));
        parent = it->second;
    }
    return info;
}

double PrefixTable::information_smoothed(std::span<const std::uint32_t> prefix, double alpha,
                                         std::span<const std::uint64_t> child_space) const {
    if (alpha < 0.0) throw ConfigError("prefix table: smoothing alpha must be nonnegative");
    if (alpha == 0.0) return information(prefix);
    if (child_space.size() < prefix.size()) {
        throw ConfigError("prefix table: child_space shorter than the smoothed prefix");
    }
    double info = 0.0;
    std::uint64_t parent = total_;
    std::string key;
    key.reserve(prefix.size() * 4);
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        append_code(key, prefix[i]);
        const auto it = counts_.find(key);
        const std::uint64_t child = it == counts_.end() ? 0 : it->second;
        const double num = static_cast<double>(child) + alpha;
        const double den =
            static_cast<double>(parent) + alpha * static_cast<double>(child_space[i]);
        info += -std::log(num / den);
        parent = child;
    }
    return info;
}

std::vector<PrefixTable::Entry> PrefixTable::entries() const {
    std::vector<Entry> out;
    out.reserve(counts_.size());
    for (const auto& [key, cnt] : counts_) out.push_back({key_to_codes(key), cnt});
    std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) {
        if (a.prefix.size() != b.prefix.size()) return a.prefix.size() < b.prefix.size();
        return a.prefix < b.prefix;
    });
    return out;
}

TerminationPolicy TerminationPolicy::fixed_depth() {
    TerminationPolicy p;
    p.enabled = false;
    return p;
}

TerminationPolicy TerminationPolicy::ratio_policy(double tau, std::uint32_t check_depth) {
    TerminationPolicy p;
    p.mode = Mode::prefix_ratio;
    p.tau = tau;
    p.check_depth = check_depth;
    return p;
}

TerminationPolicy TerminationPolicy::budget_policy(std::vector<double> budgets) {
    TerminationPolicy p;
    p.mode = Mode::information_budget;
    p.budgets = std::move(budgets);
    return p;
}

void TerminationPolicy::validate(std::uint32_t stack_depth) const {
    if (!enabled) return;
    if (stack_depth < 2) {
        throw ConfigError("termination policy: adaptive assignment needs at least 2 layers");
    }
    if (mode == Mode::prefix_ratio) {
        if (!(tau > 0.0) || !(tau < 1.0)) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "termination policy: tau must be in (0,1), got %g", tau);
            throw ConfigError(buf);
        }
        if (check_depth < 1 || check_depth >= stack_depth) {
            char buf[128];
            std::snprintf(buf, sizeof buf,
                          "termination policy: min prefix length %u must be in 1..%u for %u layers",
                          check_depth, stack_depth - 1, stack_depth);
            throw ConfigError(buf);
        }
    } else {
        if (budgets.size() < stack_depth - 1) {
            char buf[128];
            std::snprintf(buf, sizeof buf,
                          "termination policy: %zu budgets cover layers 2..%zu but the stack has "
                          "%u layers",
                          budgets.size(), budgets.size() + 1, stack_depth);
            throw ConfigError(buf);
        }
        for (double b : budgets) {
            if (!std::isfinite(b) || b < 0.0) {
                throw ConfigError("termination policy: budgets must be finite and nonnegative");
            }
        }
        if (alpha < 0.0) throw ConfigError("termination policy: alpha must be nonnegative");
        if (alpha > 0.0 && child_space.size() < stack_depth - 1) {
            throw ConfigError(
                "termination policy: smoothing needs a child-space size per checked position");
        }
    }
}

bool should_terminate(const PrefixTable& table, std::span<const std::uint32_t> prefix,
                      const TerminationPolicy& policy, std::uint32_t next_layer) {
    if (!policy.enabled) return false;
    if (next_layer < 2) {
        throw ConfigError("termination check: layer 1 is always emitted, next_layer must be >= 2");
    }
    if (prefix.size() != static_cast<std::size_t>(next_layer) - 1) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "termination check: prefix has %zu codes, expected %u before layer %u",
                      prefix.size(), next_layer - 1, next_layer);
        throw ConfigError(buf);
    }
    if (prefix.size() > table.max_depth()) {
        char buf[128];
        std::snprintf(buf, sizeof buf,
                      "termination check: table depth %u is too shallow for a %zu-code prefix",
                      table.max_depth(), prefix.size());
        throw ConfigError(buf);
    }
    if (policy.mode == TerminationPolicy::Mode::prefix_ratio) {
        if (prefix.size() < policy.check_depth) return false;
        return table.ratio(prefix) <= policy.tau;
    }
    if (next_layer - 2 >= policy.budgets.size()) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "termination check: no budget for layer %u", next_layer);
        throw ConfigError(buf);
    }
    const double budget = policy.budgets[next_layer - 2];
    const double info = policy.alpha > 0.0
                            ? table.information_smoothed(prefix, policy.alpha, policy.child_space)
                            : table.information(prefix);
    return info > budget;
}

}  // namespace sidq
