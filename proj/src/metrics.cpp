#include "sidq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "sidq/error.hpp"

namespace sidq {

namespace {

std::string sid_key(const SemanticId& sid) {
    std::string key(sid.size() * 4, '\0');
    std::memcpy(key.data(), sid.data(), sid.size() * 4);
    return key;
}

double nearest_rank(const std::vector<std::uint64_t>& sorted_ascending, double p) {
    const std::size_t n = sorted_ascending.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    if (rank > n) rank = n;
    return static_cast<double>(sorted_ascending[rank - 1]);
}

SidStats stats_from_counts(std::vector<std::uint64_t> items_per_sid) {
    SidStats s;
    if (items_per_sid.empty()) return s;
    std::sort(items_per_sid.begin(), items_per_sid.end());
    s.sid_count = items_per_sid.size();
    for (std::uint64_t c : items_per_sid) s.total_items += c;
    s.q80 = nearest_rank(items_per_sid, 0.80);
    s.q90 = nearest_rank(items_per_sid, 0.90);
    s.q99 = nearest_rank(items_per_sid, 0.99);
    s.q999 = nearest_rank(items_per_sid, 0.999);
    s.mean = static_cast<double>(s.total_items) / static_cast<double>(s.sid_count);
    return s;
}

std::vector<std::uint64_t> count_items_per_sid(std::span<const Assignment> assignments) {
    std::unordered_map<std::string, std::uint64_t> by_sid;
    by_sid.reserve(assignments.size());
    for (const Assignment& a : assignments) by_sid[sid_key(a.sid)]++;
    std::vector<std::uint64_t> counts;
    counts.reserve(by_sid.size());
    for (const auto& [key, c] : by_sid) counts.push_back(c);
    return counts;
}

}  // namespace

SidStats sid_stats(std::span<const Assignment> assignments) {
    if (assignments.empty()) throw ConfigError("sid stats: no assignments");
    return stats_from_counts(count_items_per_sid(assignments));
}

SegmentStats segment_stats(std::span<const Assignment> assignments,
                           std::span<const ItemMeta> meta) {
    if (assignments.empty()) throw ConfigError("segment stats: no assignments");
    std::unordered_map<ItemId, Segment> segment_of;
    segment_of.reserve(meta.size());
    for (const ItemMeta& m : meta) segment_of[m.item_id] = m.segment;

    std::vector<Assignment> head_part, tail_part;
    std::unordered_map<std::string, std::uint8_t> sid_flags;  // bit 0 head, bit 1 tail
    for (const Assignment& a : assignments) {
        const auto it = segment_of.find(a.item_id);
        if (it == segment_of.end()) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "segment stats: item %llu has no segment label",
                          static_cast<unsigned long long>(a.item_id));
            throw FormatError(buf);
        }
        if (it->second == Segment::head) {
            head_part.push_back(a);
            sid_flags[sid_key(a.sid)] |= 1;
        } else {
            tail_part.push_back(a);
            sid_flags[sid_key(a.sid)] |= 2;
        }
    }

    SegmentStats out;
    if (!head_part.empty()) out.head = stats_from_counts(count_items_per_sid(head_part));
    if (!tail_part.empty()) out.tail = stats_from_counts(count_items_per_sid(tail_part));
    for (const auto& [key, flags] : sid_flags) {
        if (flags == 1) out.head_only_sids++;
        else if (flags == 2) out.tail_only_sids++;
        else out.shared_sids++;
    }
    return out;
}

std::map<std::uint32_t, std::uint64_t> length_histogram(std::span<const Assignment> assignments) {
    if (assignments.empty()) throw ConfigError("length histogram: no assignments");
    std::map<std::uint32_t, std::uint64_t> hist;
    for (const Assignment& a : assignments) {
        hist[static_cast<std::uint32_t>(a.sid.size())]++;
    }
    return hist;
}

namespace {

nlohmann::ordered_json stats_node(const SidStats& s) {
    nlohmann::ordered_json j;
    j["sid_count"] = s.sid_count;
    j["q80"] = s.q80;
    j["q90"] = s.q90;
    j["q99"] = s.q99;
    j["q999"] = s.q999;
    j["mean"] = s.mean;
    return j;
}

}  // namespace

std::string stats_json(std::span<const Assignment> assignments, std::span<const ItemMeta> meta) {
    const SidStats overall = sid_stats(assignments);
    nlohmann::ordered_json j = stats_node(overall);
    nlohmann::ordered_json hist = nlohmann::ordered_json::object();
    for (const auto& [length, count] : length_histogram(assignments)) {
        hist[std::to_string(length)] = count;
    }
    j["histogram"] = std::move(hist);
    if (!meta.empty()) {
        const SegmentStats seg = segment_stats(assignments, meta);
        nlohmann::ordered_json s;
        s["head"] = stats_node(seg.head);
        s["tail"] = stats_node(seg.tail);
        s["head_only_sids"] = seg.head_only_sids;
        s["tail_only_sids"] = seg.tail_only_sids;
        s["shared_sids"] = seg.shared_sids;
        j["segments"] = std::move(s);
    }
    return j.dump(2) + "\n";
}

std::string stats_text(std::span<const Assignment> assignments, std::span<const ItemMeta> meta) {
    const SidStats overall = sid_stats(assignments);
    std::string out;
    char buf[256];
    const auto row = [&](const char* name, const SidStats& s) {
        std::snprintf(buf, sizeof buf,
                      "%-8s sids %-10llu items %-10llu q80 %-8.1f q90 %-8.1f q99 %-8.1f q999 "
                      "%-8.1f mean %.4f\n",
                      name, static_cast<unsigned long long>(s.sid_count),
                      static_cast<unsigned long long>(s.total_items), s.q80, s.q90, s.q99, s.q999,
                      s.mean);
        out += buf;
    };
    row("all", overall);
    if (!meta.empty()) {
        const SegmentStats seg = segment_stats(assignments, meta);
        row("head", seg.head);
        row("tail", seg.tail);
        std::snprintf(buf, sizeof buf, "shared   head-only %llu tail-only %llu shared %llu\n",
                      static_cast<unsigned long long>(seg.head_only_sids),
                      static_cast<unsigned long long>(seg.tail_only_sids),
                      static_cast<unsigned long long>(seg.shared_sids));
        out += buf;
    }
    out += "lengths ";
    for (const auto& [length, count] : length_histogram(assignments)) {
        std::snprintf(buf, sizeof buf, " %u:%llu", length,
                      static_cast<unsigned long long>(count));
        out += buf;
    }
    out += "\n";
    return out;
}

}  // namespace sidq
