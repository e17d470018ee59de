#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sidq/prefix_table.hpp"
#include "sidq/types.hpp"

namespace sidq::io {

// Binary formats share a skeleton: 4-byte magic, u32 version (currently
// 1), then the payload; everything little-endian, floats as raw IEEE-754
// bits so write-then-read is a bitwise identity. Readers bound-check
// every field against the actual file size before allocating and report
// failures with the byte offset, so truncated or fuzzed files produce
// structured errors rather than crashes.

inline constexpr std::uint32_t kFormatVersion = 1;

/// "AEMB": n u64, d u32, n*d floats row-major, n item ids u64.
void write_embeddings(const std::string& path, const EmbeddingMatrix& emb);
EmbeddingMatrix read_embeddings(const std::string& path);

/// "ACBK": L u32, d u32, then per layer m u32, frozen bitmap
/// (ceil(m/8) bytes, centroid c at bit c%8 of byte c/8), m*d floats.
void write_codebooks(const std::string& path, const CodebookStack& stack);
CodebookStack read_codebooks(const std::string& path);

/// "APTB": total_items u64, max_depth u32, then records until EOF of
/// (len u8, len codes u16, count u64), in canonical (length, codes)
/// order. Codes above 65535 do not fit this format and are rejected at
/// write time.
void write_prefix_table(const std::string& path, const PrefixTable& table);
PrefixTable read_prefix_table(const std::string& path);

/// One quantized item as stored in the assignment TSV.
struct AssignmentRecord {
    ItemId item_id = 0;
    SemanticId sid;
    double reconstruction_error = 0.0;
    double path_information = 0.0;  // may be +inf ("inf" in the file)
    bool terminated_early = false;
};

/// UTF-8 TSV, one line per item, no header: item_id, comma-joined
/// codes, code_length, reconstruction_error, path_information ("inf"
/// literal for unbounded), terminated_early (0/1).
void write_assignments(const std::string& path, std::span<const AssignmentRecord> records);
std::vector<AssignmentRecord> read_assignments(const std::string& path);

/// Popularity sidecar TSV: item_id, interaction_count. Segment labels
/// are not persisted — they are re-derived from a head fraction.
void write_meta(const std::string& path, std::span<const ItemMeta> meta);
std::vector<ItemMeta> read_meta(const std::string& path);

}  // namespace sidq::io
