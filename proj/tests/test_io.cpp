#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "sidq/error.hpp"
#include "sidq/io.hpp"

using namespace sidq;

namespace {

struct TempDir {
    std::filesystem::path path;

    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("sidq_io_test_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }

    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, const std::vector<char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

EmbeddingMatrix random_embeddings(std::mt19937& rng, std::size_t n, std::uint32_t d) {
    std::normal_distribution<float> g(0.0f, 2.0f);
    EmbeddingMatrix emb;
    emb.d = d;
    for (std::size_t i = 0; i < n; ++i) {
        emb.item_ids.push_back(1000 + i * 7);
        for (std::uint32_t k = 0; k < d; ++k) emb.data.push_back(g(rng));
    }
    return emb;
}

CodebookStack random_stack(std::mt19937& rng, std::uint32_t d,
                           const std::vector<std::uint32_t>& sizes) {
    std::normal_distribution<float> g(0.0f, 1.0f);
    std::bernoulli_distribution frozen(0.3);
    CodebookStack stack;
    stack.d = d;
    for (const std::uint32_t m : sizes) {
        CodebookLayer layer;
        layer.m = m;
        layer.centroids.resize(static_cast<std::size_t>(m) * d);
        for (float& v : layer.centroids) v = g(rng);
        layer.frozen.resize(m);
        for (auto& f : layer.frozen) f = frozen(rng) ? 1 : 0;
        stack.layers.push_back(std::move(layer));
    }
    return stack;
}

PrefixTable random_table(std::mt19937& rng, std::size_t n, std::uint32_t codes,
                         std::uint32_t depth) {
    std::uniform_int_distribution<std::uint32_t> code(0, codes - 1);
    std::vector<Assignment> assigns(n);
    for (std::size_t i = 0; i < n; ++i) {
        assigns[i].item_id = i + 1;
        assigns[i].sid.resize(depth);
        for (auto& c : assigns[i].sid) c = code(rng);
    }
    return PrefixTable::build(assigns, depth);
}

}  // namespace

TEST_CASE("embedding files round-trip bitwise") {
    TempDir dir;
    std::mt19937 rng(701);
    for (const auto& [n, d] : std::vector<std::pair<std::size_t, std::uint32_t>>{
             {1, 1}, {17, 3}, {256, 16}}) {
        const EmbeddingMatrix emb = random_embeddings(rng, n, d);
        const std::string path = dir.file("emb.aemb");
        io::write_embeddings(path, emb);
        const EmbeddingMatrix back = io::read_embeddings(path);
        CHECK(back.d == emb.d);
        CHECK(back.item_ids == emb.item_ids);
        CHECK(back.data == emb.data);  // float vectors compare bitwise via ==
    }
}

TEST_CASE("codebook files round-trip bitwise including frozen flags") {
    TempDir dir;
    std::mt19937 rng(702);
    for (const std::vector<std::uint32_t>& sizes :
         std::vector<std::vector<std::uint32_t>>{{1}, {3, 9}, {8, 16, 64}}) {
        const CodebookStack stack = random_stack(rng, 5, sizes);
        const std::string path = dir.file("cb.acbk");
        io::write_codebooks(path, stack);
        const CodebookStack back = io::read_codebooks(path);
        REQUIRE(back.depth() == stack.depth());
        CHECK(back.d == stack.d);
        for (std::size_t l = 0; l < stack.layers.size(); ++l) {
            CHECK(back.layers[l].m == stack.layers[l].m);
            CHECK(back.layers[l].centroids == stack.layers[l].centroids);
            CHECK(back.layers[l].frozen == stack.layers[l].frozen);
        }
    }
}

TEST_CASE("prefix table files round-trip exactly") {
    TempDir dir;
    std::mt19937 rng(703);
    const PrefixTable table = random_table(rng, 500, 12, 3);
    const std::string path = dir.file("table.aptb");
    io::write_prefix_table(path, table);
    const PrefixTable back = io::read_prefix_table(path);
    CHECK(back.total_items() == table.total_items());
    CHECK(back.max_depth() == table.max_depth());
    CHECK(back.entry_count() == table.entry_count());
    for (const PrefixTable::Entry& e : table.entries()) {
        CHECK(back.count(e.prefix) == e.count);
    }
}

TEST_CASE("table codes beyond sixteen bits are rejected at write time") {
    TempDir dir;
    const std::vector<Assignment> assigns = {{1, {70000}}};
    const PrefixTable table = PrefixTable::build(assigns, 1);
    CHECK_THROWS_WITH_AS(io::write_prefix_table(dir.file("t.aptb"), table),
                         doctest::Contains("70000"), FormatError);
}

TEST_CASE("assignment tsv round-trips, infinity included") {
    TempDir dir;
    std::vector<io::AssignmentRecord> records;
    records.push_back({42, {1, 2, 3}, 0.125, 7.25, false});
    records.push_back({43, {9}, 1e-300, std::numeric_limits<double>::infinity(), true});
    records.push_back({44, {0, 0}, 0.0, 0.30000000000000004, true});
    const std::string path = dir.file("assign.tsv");
    io::write_assignments(path, records);
    const std::vector<io::AssignmentRecord> back = io::read_assignments(path);
    REQUIRE(back.size() == records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        CHECK(back[i].item_id == records[i].item_id);
        CHECK(back[i].sid == records[i].sid);
        CHECK(back[i].reconstruction_error == records[i].reconstruction_error);
        if (std::isinf(records[i].path_information)) {
            CHECK(std::isinf(back[i].path_information));
        } else {
            CHECK(back[i].path_information == records[i].path_information);
        }
        CHECK(back[i].terminated_early == records[i].terminated_early);
    }
    // The infinity is written as a literal, not a giant decimal.
    const std::vector<char> bytes = slurp(path);
    const std::string text(bytes.begin(), bytes.end());
    CHECK(text.find("inf") != std::string::npos);
}

TEST_CASE("meta tsv round-trips counts and re-derives nothing") {
    TempDir dir;
    std::vector<ItemMeta> meta;
    meta.push_back({1, 500, Segment::head});
    meta.push_back({2, 3, Segment::tail});
    meta.push_back({900, 0, Segment::tail});
    const std::string path = dir.file("meta.tsv");
    io::write_meta(path, meta);
    const std::vector<ItemMeta> back = io::read_meta(path);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].item_id == meta[i].item_id);
        CHECK(back[i].interaction_count == meta[i].interaction_count);
    }
}

TEST_CASE("missing files raise format errors naming the path") {
    TempDir dir;
    const std::string path = dir.file("absent.aemb");
    CHECK_THROWS_WITH_AS(io::read_embeddings(path), doctest::Contains("absent.aemb"), FormatError);
    CHECK_THROWS_AS(io::read_codebooks(dir.file("absent.acbk")), FormatError);
    CHECK_THROWS_AS(io::read_prefix_table(dir.file("absent.aptb")), FormatError);
    CHECK_THROWS_AS(io::read_assignments(dir.file("absent.tsv")), FormatError);
    CHECK_THROWS_AS(io::read_meta(dir.file("absent.tsv")), FormatError);
}

TEST_CASE("wrong magic and wrong version are structured errors") {
    TempDir dir;
    std::mt19937 rng(704);
    const EmbeddingMatrix emb = random_embeddings(rng, 4, 2);
    const std::string path = dir.file("emb.aemb");
    io::write_embeddings(path, emb);
    std::vector<char> bytes = slurp(path);

    std::vector<char> bad_magic = bytes;
    bad_magic[0] = 'X';
    spit(path, bad_magic);
    CHECK_THROWS_WITH_AS(io::read_embeddings(path), doctest::Contains("magic"), FormatError);

    std::vector<char> bad_version = bytes;
    bad_version[4] = 9;
    spit(path, bad_version);
    CHECK_THROWS_WITH_AS(io::read_embeddings(path), doctest::Contains("version"), FormatError);
}

TEST_CASE("oversized counts cannot trigger huge allocations") {
    TempDir dir;
    std::mt19937 rng(705);
    const EmbeddingMatrix emb = random_embeddings(rng, 4, 2);
    const std::string path = dir.file("emb.aemb");
    io::write_embeddings(path, emb);
    std::vector<char> bytes = slurp(path);
    // The n field (offset 8, u64) claims ~1e18 rows; the file is tiny.
    for (int b = 0; b < 8; ++b) bytes[8 + b] = static_cast<char>(0x77);
    spit(path, bytes);
    CHECK_THROWS_AS(io::read_embeddings(path), FormatError);
}

TEST_CASE("header fuzzing never crashes any reader") {
    TempDir dir;
    std::mt19937 rng(706);

    // Seed corpus: one well-formed file per format.
    const EmbeddingMatrix emb = random_embeddings(rng, 12, 4);
    const CodebookStack stack = random_stack(rng, 4, {4, 8});
    const PrefixTable table = random_table(rng, 60, 6, 2);
    const std::string e_path = dir.file("f.aemb");
    const std::string c_path = dir.file("f.acbk");
    const std::string t_path = dir.file("f.aptb");
    io::write_embeddings(e_path, emb);
    io::write_codebooks(c_path, stack);
    io::write_prefix_table(t_path, table);
    const std::vector<std::vector<char>> seeds = {slurp(e_path), slurp(c_path), slurp(t_path)};

    std::uniform_int_distribution<int> pick_seed(0, 2);
    std::uniform_int_distribution<int> mode(0, 3);
    std::uniform_int_distribution<int> byte(0, 255);
    std::size_t structured_failures = 0;
    std::size_t clean_reads = 0;
    for (int iter = 0; iter < 1200; ++iter) {
        const int which = pick_seed(rng);
        std::vector<char> bytes = seeds[which];
        switch (mode(rng)) {
            case 0: {  // truncate anywhere
                std::uniform_int_distribution<std::size_t> cut(0, bytes.size() - 1);
                bytes.resize(cut(rng));
                break;
            }
            case 1: {  // flip random bytes
                std::uniform_int_distribution<std::size_t> pos(0, bytes.size() - 1);
                for (int k = 0; k < 8; ++k) bytes[pos(rng)] = static_cast<char>(byte(rng));
                break;
            }
            case 2: {  // corrupt the header region only
                std::uniform_int_distribution<std::size_t> pos(
                    0, std::min<std::size_t>(bytes.size(), 24) - 1);
                for (int k = 0; k < 4; ++k) bytes[pos(rng)] = static_cast<char>(byte(rng));
                break;
            }
            default: {  // append garbage
                for (int k = 0; k < 16; ++k) bytes.push_back(static_cast<char>(byte(rng)));
                break;
            }
        }
        const std::string path = dir.file("fuzz.bin");
        spit(path, bytes);
        try {
            switch (which) {
                case 0: (void)io::read_embeddings(path); break;
                case 1: (void)io::read_codebooks(path); break;
                default: (void)io::read_prefix_table(path); break;
            }
            ++clean_reads;  // mutation happened to stay valid
        } catch (const Error&) {
            ++structured_failures;  // the only acceptable failure mode
        }
    }
    CHECK(structured_failures + clean_reads == 1200);
    CHECK(structured_failures > 800);  // the corpus is genuinely hostile
}

TEST_CASE("assignment tsv rejects malformed rows") {
    TempDir dir;
    const std::string path = dir.file("bad.tsv");
    const auto write_text = [&](const std::string& text) {
        std::ofstream out(path, std::ios::trunc);
        out << text;
    };
    write_text("1\t2,3\tnot_a_number\t0.5\t0.1\t0\n");
    CHECK_THROWS_AS(io::read_assignments(path), FormatError);
    write_text("1\t2,3\n");
    CHECK_THROWS_AS(io::read_assignments(path), FormatError);
    write_text("1\t\t0\t0.5\t0.1\t0\n");
    CHECK_THROWS_AS(io::read_assignments(path), FormatError);
    // Length column disagreeing with the code list.
    write_text("1\t2,3\t3\t0.5\t0.1\t0\n");
    CHECK_THROWS_AS(io::read_assignments(path), FormatError);
    // A valid line parses.
    write_text("1\t2,3\t2\t0.5\t0.1\t1\n");
    const auto ok = io::read_assignments(path);
    REQUIRE(ok.size() == 1);
    CHECK(ok[0].sid == SemanticId{2, 3});
    CHECK(ok[0].terminated_early);
}

TEST_CASE("meta tsv rejects malformed rows") {
    TempDir dir;
    const std::string path = dir.file("bad_meta.tsv");
    const auto write_text = [&](const std::string& text) {
        std::ofstream out(path, std::ios::trunc);
        out << text;
    };
    write_text("1\n");
    CHECK_THROWS_AS(io::read_meta(path), FormatError);
    write_text("1\t-5\n");
    CHECK_THROWS_AS(io::read_meta(path), FormatError);
    write_text("x\t5\n");
    CHECK_THROWS_AS(io::read_meta(path), FormatError);
    write_text("1\t5\textra\n");
    CHECK_THROWS_AS(io::read_meta(path), FormatError);
}
