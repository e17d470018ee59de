#include "sidq/io.hpp"

#include <bit>
#include <cerrno>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>

#include "sidq/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian and this code writes native byte order");

namespace sidq::io {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw FormatError(path + ": " + what);
}

std::vector<std::uint8_t> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) fail(path, "cannot open");
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(size));
    if (size > 0 && !in.read(reinterpret_cast<char*>(buf.data()), size)) fail(path, "read failed");
    return buf;
}

/// Cursor over a fully loaded file; every getter bound-checks against
/// the real size and reports the byte offset of the violation.
class ByteReader {
public:
    ByteReader(const std::string& path, std::vector<std::uint8_t> buf)
        : path_(path), buf_(std::move(buf)) {}

    std::size_t remaining() const noexcept { return buf_.size() - pos_; }
    std::size_t offset() const noexcept { return pos_; }
    bool at_end() const noexcept { return pos_ == buf_.size(); }

    void need(std::uint64_t n, const char* what) const {
        if (n > remaining()) {
            char msg[192];
            std::snprintf(msg, sizeof msg,
                          "truncated file: need %" PRIu64 " bytes for %s at byte offset %zu but "
                          "only %zu remain",
                          n, what, pos_, remaining());
            fail(path_, msg);
        }
    }

    void magic(const char expect[4]) {
        need(4, "magic");
        if (std::memcmp(buf_.data() + pos_, expect, 4) != 0) {
            fail(path_, std::string("bad magic, expected \"") + std::string(expect, 4) + "\"");
        }
        pos_ += 4;
    }

    std::uint8_t u8(const char* what) {
        need(1, what);
        return buf_[pos_++];
    }

    std::uint16_t u16(const char* what) { return read_int<std::uint16_t>(what); }
    std::uint32_t u32(const char* what) { return read_int<std::uint32_t>(what); }
    std::uint64_t u64(const char* what) { return read_int<std::uint64_t>(what); }

    void floats(float* dst, std::uint64_t count, const char* what) {
        need(count * 4, what);
        std::memcpy(dst, buf_.data() + pos_, count * 4);
        pos_ += count * 4;
    }

    void u64s(std::uint64_t* dst, std::uint64_t count, const char* what) {
        need(count * 8, what);
        std::memcpy(dst, buf_.data() + pos_, count * 8);
        pos_ += count * 8;
    }

    void expect_end() const {
        if (!at_end()) {
            char msg[96];
            std::snprintf(msg, sizeof msg, "%zu trailing bytes at byte offset %zu", remaining(),
                          pos_);
            fail(path_, msg);
        }
    }

    const std::string& path() const noexcept { return path_; }

private:
    template <typename T>
    T read_int(const char* what) {
        need(sizeof(T), what);
        T v;
        std::memcpy(&v, buf_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }

    std::string path_;
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

class ByteWriter {
public:
    explicit ByteWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw ConfigError(path + ": cannot open for writing");
    }

    void magic(const char m[4]) { raw(m, 4); }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u16(std::uint16_t v) { raw(&v, 2); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void floats(const float* p, std::uint64_t count) { raw(p, count * 4); }
    void u64s(const std::uint64_t* p, std::uint64_t count) { raw(p, count * 8); }
    void bytes(const std::vector<std::uint8_t>& b) { raw(b.data(), b.size()); }

    void close() {
        out_.close();
        if (!out_) fail(path_, "write failed");
    }

private:
    void raw(const void* p, std::uint64_t n) {
        out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
        if (!out_) fail(path_, "write failed");
    }

    std::string path_;
    std::ofstream out_;
};

void check_version(ByteReader& r) {
    const std::uint32_t v = r.u32("version");
    if (v != kFormatVersion) {
        char msg[96];
        std::snprintf(msg, sizeof msg, "unsupported version %u (this build reads version %u)", v,
                      kFormatVersion);
        fail(r.path(), msg);
    }
}

}  // namespace

// --------------------------------------------------------------------------
// Embeddings ("AEMB")
// --------------------------------------------------------------------------

void write_embeddings(const std::string& path, const EmbeddingMatrix& emb) {
    if (emb.size() == 0) throw ConfigError(path + ": refusing to write zero items");
    if (emb.d == 0 || emb.data.size() != emb.size() * static_cast<std::size_t>(emb.d)) {
        throw ConfigError(path + ": embedding matrix shape is inconsistent");
    }
    ByteWriter w(path);
    w.magic("AEMB");
    w.u32(kFormatVersion);
    w.u64(emb.size());
    w.u32(emb.d);
    w.floats(emb.data.data(), emb.data.size());
    w.u64s(emb.item_ids.data(), emb.item_ids.size());
    w.close();
}

EmbeddingMatrix read_embeddings(const std::string& path) {
    ByteReader r(path, slurp(path));
    r.magic("AEMB");
    check_version(r);
    const std::uint64_t n = r.u64("item count");
    const std::uint32_t d = r.u32("dimension");
    if (n == 0) fail(path, "zero items");
    if (d == 0) fail(path, "zero dimension");
    // Bound the payload before allocating anything: a fuzzed header must
    // not turn into a giant allocation.
    const std::uint64_t per_item = static_cast<std::uint64_t>(d) * 4 + 8;
    if (n > r.remaining() / per_item) {
        char msg[128];
        std::snprintf(msg, sizeof msg,
                      "truncated file: %" PRIu64 " items of dim %u need more than the %zu bytes "
                      "present",
                      n, d, r.remaining());
        fail(path, msg);
    }
    EmbeddingMatrix emb;
    emb.d = d;
    emb.data.resize(static_cast<std::size_t>(n * d));
    emb.item_ids.resize(static_cast<std::size_t>(n));
    r.floats(emb.data.data(), n * d, "embedding rows");
    r.u64s(emb.item_ids.data(), n, "item ids");
    r.expect_end();
    return emb;
}

// --------------------------------------------------------------------------
// Codebooks ("ACBK")
// --------------------------------------------------------------------------

void write_codebooks(const std::string& path, const CodebookStack& stack) {
    stack.validate();
    ByteWriter w(path);
    w.magic("ACBK");
    w.u32(kFormatVersion);
    w.u32(stack.depth());
    w.u32(stack.d);
    for (const CodebookLayer& layer : stack.layers) {
        w.u32(layer.m);
        std::vector<std::uint8_t> bitmap((layer.m + 7) / 8, 0);
        for (std::uint32_t c = 0; c < layer.m; ++c) {
            if (layer.frozen[c]) bitmap[c >> 3] |= static_cast<std::uint8_t>(1u << (c & 7));
        }
        w.bytes(bitmap);
        w.floats(layer.centroids.data(), layer.centroids.size());
    }
    w.close();
}

CodebookStack read_codebooks(const std::string& path) {
    ByteReader r(path, slurp(path));
    r.magic("ACBK");
    check_version(r);
    const std::uint32_t L = r.u32("layer count");
    const std::uint32_t d = r.u32("dimension");
    if (L == 0) fail(path, "zero layers");
    if (d == 0) fail(path, "zero dimension");
    // A layer occupies at least 9 bytes (size field, one bitmap byte, one
    // float), so an honest header cannot claim more layers than this; checking
    // before the resize keeps a fuzzed count from becoming a giant allocation.
    if (L > r.remaining() / 9) {
        char msg[128];
        std::snprintf(msg, sizeof msg,
                      "truncated file: %u layers cannot fit in the %zu bytes present", L,
                      r.remaining());
        fail(path, msg);
    }
    CodebookStack stack;
    stack.d = d;
    stack.layers.resize(L);
    for (std::uint32_t l = 0; l < L; ++l) {
        CodebookLayer& layer = stack.layers[l];
        layer.m = r.u32("layer size");
        if (layer.m == 0) fail(path, "empty layer");
        const std::uint64_t bitmap_bytes = (static_cast<std::uint64_t>(layer.m) + 7) / 8;
        r.need(bitmap_bytes, "frozen bitmap");
        const std::uint64_t values = static_cast<std::uint64_t>(layer.m) * d;
        if (values > (r.remaining() - bitmap_bytes) / 4) {
            char msg[128];
            std::snprintf(msg, sizeof msg,
                          "truncated file: layer %u of size %u x %u overruns the %zu bytes left",
                          l + 1, layer.m, d, r.remaining());
            fail(path, msg);
        }
        std::vector<std::uint8_t> bitmap(static_cast<std::size_t>(bitmap_bytes));
        for (std::uint8_t& b : bitmap) b = r.u8("frozen bitmap");
        layer.frozen.resize(layer.m);
        for (std::uint32_t c = 0; c < layer.m; ++c) {
            layer.frozen[c] = (bitmap[c >> 3] >> (c & 7)) & 1u;
        }
        layer.centroids.resize(static_cast<std::size_t>(values));
        r.floats(layer.centroids.data(), values, "centroids");
    }
    r.expect_end();
    return stack;
}

// --------------------------------------------------------------------------
// Prefix table ("APTB")
// --------------------------------------------------------------------------

void write_prefix_table(const std::string& path, const PrefixTable& table) {
    ByteWriter w(path);
    w.magic("APTB");
    w.u32(kFormatVersion);
    w.u64(table.total_items());
    w.u32(table.max_depth());
    for (const PrefixTable::Entry& e : table.entries()) {
        w.u8(static_cast<std::uint8_t>(e.prefix.size()));
        for (std::uint32_t code : e.prefix) {
            if (code > 0xFFFF) {
                char msg[96];
                std::snprintf(msg, sizeof msg,
                              "code %u does not fit the 16-bit prefix-table record", code);
                fail(path, msg);
            }
            w.u16(static_cast<std::uint16_t>(code));
        }
        w.u64(e.count);
    }
    w.close();
}

PrefixTable read_prefix_table(const std::string& path) {
    ByteReader r(path, slurp(path));
    r.magic("APTB");
    check_version(r);
    const std::uint64_t total = r.u64("total items");
    const std::uint32_t max_depth = r.u32("max depth");
    if (total == 0) fail(path, "zero items");
    if (max_depth == 0 || max_depth > 255) fail(path, "max depth outside 1..255");
    std::vector<PrefixTable::Entry> entries;
    while (!r.at_end()) {
        PrefixTable::Entry e;
        const std::uint8_t len = r.u8("record length");
        if (len == 0 || len > max_depth) {
            char msg[96];
            std::snprintf(msg, sizeof msg, "record length %u outside 1..%u at byte offset %zu",
                          len, max_depth, r.offset() - 1);
            fail(path, msg);
        }
        e.prefix.resize(len);
        for (std::uint8_t i = 0; i < len; ++i) e.prefix[i] = r.u16("record code");
        e.count = r.u64("record count");
        entries.push_back(std::move(e));
    }
    try {
        return PrefixTable::from_entries(total, max_depth, entries);
    } catch (const FormatError& e) {
        fail(path, e.what());
    }
}

// --------------------------------------------------------------------------
// Assignments (TSV)
// --------------------------------------------------------------------------

void write_assignments(const std::string& path, std::span<const AssignmentRecord> records) {
    if (records.empty()) throw ConfigError(path + ": refusing to write zero assignments");
    std::ofstream out(path);
    if (!out) throw ConfigError(path + ": cannot open for writing");
    char num[64];
    for (const AssignmentRecord& rec : records) {
        if (rec.sid.empty()) throw ConfigError(path + ": assignment with empty semantic id");
        out << rec.item_id << '\t';
        for (std::size_t i = 0; i < rec.sid.size(); ++i) {
            if (i) out << ',';
            out << rec.sid[i];
        }
        out << '\t' << rec.sid.size() << '\t';
        std::snprintf(num, sizeof num, "%.17g", rec.reconstruction_error);
        out << num << '\t';
        if (std::isinf(rec.path_information)) {
            out << "inf";
        } else {
            std::snprintf(num, sizeof num, "%.17g", rec.path_information);
            out << num;
        }
        out << '\t' << (rec.terminated_early ? 1 : 0) << '\n';
    }
    out.close();
    if (!out) fail(path, "write failed");
}

namespace {

[[noreturn]] void fail_line(const std::string& path, std::size_t line, const std::string& what) {
    char msg[192];
    std::snprintf(msg, sizeof msg, "line %zu: %s", line, what.c_str());
    fail(path, msg);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::uint64_t parse_u64(const std::string& s, const std::string& path, std::size_t line,
                        const char* what) {
    if (s.empty() || s[0] == '-') fail_line(path, line, std::string("bad ") + what + ": '" + s + "'");
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (errno != 0 || end != s.c_str() + s.size()) {
        fail_line(path, line, std::string("bad ") + what + ": '" + s + "'");
    }
    return v;
}

double parse_f64(const std::string& s, const std::string& path, std::size_t line,
                 const char* what) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s.empty()) fail_line(path, line, std::string("bad ") + what + ": empty field");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end != s.c_str() + s.size()) {
        fail_line(path, line, std::string("bad ") + what + ": '" + s + "'");
    }
    return v;
}

}  // namespace

std::vector<AssignmentRecord> read_assignments(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open");
    std::vector<AssignmentRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::vector<std::string> cols = split(line, '\t');
        if (cols.size() != 6) {
            char msg[96];
            std::snprintf(msg, sizeof msg, "expected 6 tab-separated columns, got %zu",
                          cols.size());
            fail_line(path, lineno, msg);
        }
        AssignmentRecord rec;
        rec.item_id = parse_u64(cols[0], path, lineno, "item id");
        for (const std::string& code : split(cols[1], ',')) {
            const std::uint64_t c = parse_u64(code, path, lineno, "code");
            if (c > 0xFFFFFFFFULL) fail_line(path, lineno, "code exceeds 32 bits");
            rec.sid.push_back(static_cast<std::uint32_t>(c));
        }
        const std::uint64_t len = parse_u64(cols[2], path, lineno, "code length");
        if (len != rec.sid.size()) {
            char msg[96];
            std::snprintf(msg, sizeof msg, "code_length %llu does not match %zu codes",
                          static_cast<unsigned long long>(len), rec.sid.size());
            fail_line(path, lineno, msg);
        }
        rec.reconstruction_error = parse_f64(cols[3], path, lineno, "reconstruction error");
        rec.path_information = parse_f64(cols[4], path, lineno, "path information");
        if (cols[5] == "0") {
            rec.terminated_early = false;
        } else if (cols[5] == "1") {
            rec.terminated_early = true;
        } else {
            fail_line(path, lineno, "terminated_early must be 0 or 1, got '" + cols[5] + "'");
        }
        records.push_back(std::move(rec));
    }
    if (records.empty()) fail(path, "zero assignments");
    return records;
}

// --------------------------------------------------------------------------
// Popularity sidecar (TSV)
// --------------------------------------------------------------------------

void write_meta(const std::string& path, std::span<const ItemMeta> meta) {
    if (meta.empty()) throw ConfigError(path + ": refusing to write zero items");
    std::ofstream out(path);
    if (!out) throw ConfigError(path + ": cannot open for writing");
    for (const ItemMeta& m : meta) {
        out << m.item_id << '\t' << m.interaction_count << '\n';
    }
    out.close();
    if (!out) fail(path, "write failed");
}

std::vector<ItemMeta> read_meta(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(path, "cannot open");
    std::vector<ItemMeta> meta;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::vector<std::string> cols = split(line, '\t');
        if (cols.size() != 2) {
            char msg[96];
            std::snprintf(msg, sizeof msg, "expected 2 tab-separated columns, got %zu",
                          cols.size());
            fail_line(path, lineno, msg);
        }
        ItemMeta m;
        m.item_id = parse_u64(cols[0], path, lineno, "item id");
        m.interaction_count = parse_u64(cols[1], path, lineno, "interaction count");
        meta.push_back(m);
    }
    if (meta.empty()) fail(path, "zero items");
    return meta;
}

}  // namespace sidq::io
