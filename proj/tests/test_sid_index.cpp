#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "sidq/error.hpp"
#include "sidq/sid_index.hpp"

using namespace sidq;

namespace {

std::vector<Assignment> make_assignments(
    const std::vector<std::pair<ItemId, SemanticId>>& pairs) {
    std::vector<Assignment> out;
    for (const auto& [id, sid] : pairs) out.push_back({id, sid});
    return out;
}

std::string key_of(const SemanticId& sid) {
    std::string key(sid.size() * 4, '\0');
    std::memcpy(key.data(), sid.data(), sid.size() * 4);
    return key;
}

std::vector<Assignment> random_corpus(std::mt19937& rng, std::size_t n, std::uint32_t codes,
                                      std::uint32_t max_len) {
    std::uniform_int_distribution<std::uint32_t> code(0, codes - 1);
    std::uniform_int_distribution<std::uint32_t> len(1, max_len);
    std::vector<Assignment> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].item_id = i + 1;
        out[i].sid.resize(len(rng));
        for (auto& c : out[i].sid) c = code(rng);
    }
    return out;
}

}  // namespace

TEST_CASE("items terminate on interior nodes under variable lengths") {
    const auto assigns = make_assignments({{7, {1, 2}}, {8, {1, 2}}, {9, {1}}});
    const SidIndex idx = SidIndex::build(assigns);
    CHECK(idx.total_items() == 3);
    CHECK(idx.max_length() == 2);
    CHECK(idx.retrieve(SemanticId{1}, false) == std::vector<ItemId>{9});
    CHECK(idx.retrieve(SemanticId{1, 2}, false) == std::vector<ItemId>{7, 8});
    CHECK(idx.retrieve(SemanticId{1}, true) == std::vector<ItemId>{7, 8, 9});
    CHECK(idx.retrieve(SemanticId{2}, true).empty());
    CHECK(idx.retrieve(SemanticId{1, 3}, false).empty());
}

TEST_CASE("contains answers exact membership only") {
    const auto assigns = make_assignments({{1, {4, 5, 6}}, {2, {4, 9}}});
    const SidIndex idx = SidIndex::build(assigns);
    CHECK(idx.contains(SemanticId{4, 5, 6}));
    CHECK(idx.contains(SemanticId{4, 9}));
    CHECK_FALSE(idx.contains(SemanticId{4}));      // interior, no item ends here
    CHECK_FALSE(idx.contains(SemanticId{4, 5}));   // interior
    CHECK_FALSE(idx.contains(SemanticId{9}));      // absent
    CHECK_FALSE(idx.contains(SemanticId{4, 5, 6, 1}));
}

TEST_CASE("build is independent of insertion order") {
    std::mt19937 rng(501);
    std::vector<Assignment> corpus = random_corpus(rng, 400, 6, 3);
    const SidIndex a = SidIndex::build(corpus);
    std::shuffle(corpus.begin(), corpus.end(), rng);
    const SidIndex b = SidIndex::build(corpus);
    for (const Assignment& item : corpus) {
        CHECK(a.retrieve(item.sid, false) == b.retrieve(item.sid, false));
        CHECK(a.retrieve({item.sid.data(), 1}, true) == b.retrieve({item.sid.data(), 1}, true));
    }
}

TEST_CASE("every assigned id is a member and retrieves its item") {
    std::mt19937 rng(502);
    const std::vector<Assignment> corpus = random_corpus(rng, 1000, 8, 3);
    const SidIndex idx = SidIndex::build(corpus);
    for (const Assignment& item : corpus) {
        CHECK(idx.contains(item.sid));
        const std::vector<ItemId> got = idx.retrieve(item.sid, false);
        CHECK(std::binary_search(got.begin(), got.end(), item.item_id));
    }
}

TEST_CASE("retrieval matches a flat hash-map oracle") {
    std::mt19937 rng(503);
    const std::vector<Assignment> corpus = random_corpus(rng, 1500, 5, 3);
    const SidIndex idx = SidIndex::build(corpus);

    std::unordered_set<std::string> exact;
    for (const Assignment& a : corpus) exact.insert(key_of(a.sid));

    std::uniform_int_distribution<std::uint32_t> code(0, 5);  // includes one unseen code
    for (int rep = 0; rep < 2000; ++rep) {
        SemanticId probe(1 + rep % 3);
        for (auto& c : probe) c = code(rng);
        CHECK(idx.contains(probe) == (exact.count(key_of(probe)) > 0));

        std::vector<ItemId> want_exact;
        std::vector<ItemId> want_prefix;
        for (const Assignment& a : corpus) {
            if (a.sid == probe) want_exact.push_back(a.item_id);
            if (a.sid.size() >= probe.size() &&
                std::equal(probe.begin(), probe.end(), a.sid.begin())) {
                want_prefix.push_back(a.item_id);
            }
        }
        std::sort(want_exact.begin(), want_exact.end());
        std::sort(want_prefix.begin(), want_prefix.end());
        CHECK(idx.retrieve(probe, false) == want_exact);
        CHECK(idx.retrieve(probe, true) == want_prefix);
    }
}

TEST_CASE("build rejects malformed input") {
    CHECK_THROWS_AS(SidIndex::build({}), ConfigError);
    const auto empty_sid = make_assignments({{1, {}}});
    CHECK_THROWS_AS(SidIndex::build(empty_sid), FormatError);
    const auto dupe = make_assignments({{1, {0}}, {1, {2}}});
    CHECK_THROWS_WITH_AS(SidIndex::build(dupe), doctest::Contains("duplicate"), FormatError);
}

// ---------------------------------------------------------------------------
// Hallucination
// ---------------------------------------------------------------------------

TEST_CASE("hallucination rate counts exact misses") {
    const auto assigns = make_assignments({{1, {0, 0}}, {2, {0, 1}}, {3, {2}}});
    const SidIndex idx = SidIndex::build(assigns);
    const std::vector<SemanticId> generated = {
        {0, 0},  // hit
        {2},     // hit
        {0},     // interior only -> miss
        {1, 1},  // miss
    };
    CHECK(hallucination_rate(generated, idx) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(hallucination_rate({generated.data(), 2}, idx) == 0.0);
    CHECK_THROWS_AS(hallucination_rate({}, idx), ConfigError);
}

TEST_CASE("constrained sampling never hallucinates and is deterministic") {
    std::mt19937 rng(504);
    const std::vector<Assignment> corpus = random_corpus(rng, 800, 6, 3);
    const SidIndex idx = SidIndex::build(corpus);
    const std::vector<SemanticId> a = idx.sample_constrained(500, 11);
    REQUIRE(a.size() == 500);
    CHECK(hallucination_rate(a, idx) == 0.0);
    const std::vector<SemanticId> b = idx.sample_constrained(500, 11);
    CHECK(a == b);
    const std::vector<SemanticId> c = idx.sample_constrained(500, 12);
    CHECK(a != c);
}

TEST_CASE("constrained sampling reaches rare leaves eventually") {
    // One dominant id and one singleton: with enough draws both appear.
    std::vector<Assignment> assigns;
    for (ItemId i = 1; i <= 50; ++i) assigns.push_back({i, {0, 0}});
    assigns.push_back({51, {7, 7}});
    const SidIndex idx = SidIndex::build(assigns);
    const std::vector<SemanticId> draws = idx.sample_constrained(2000, 5);
    bool saw_rare = false;
    for (const SemanticId& s : draws) saw_rare = saw_rare || s == SemanticId{7, 7};
    CHECK(saw_rare);
}

TEST_CASE("unconstrained sampling hallucinates on a correlated corpus") {
    // Position 1 and position 2 are perfectly correlated; independent
    // marginals must produce unseen combinations.
    std::vector<Assignment> assigns;
    for (ItemId i = 1; i <= 400; ++i) {
        const std::uint32_t c = i % 4;
        assigns.push_back({i, {c, c, c}});
    }
    const SidIndex idx = SidIndex::build(assigns);
    const PrefixTable table = PrefixTable::build(assigns, 3);
    const std::vector<SemanticId> draws = sample_unconstrained(table, 2000, 3, 7);
    REQUIRE(draws.size() == 2000);
    for (const SemanticId& s : draws) CHECK(s.size() == 3);
    const double rate = hallucination_rate(draws, idx);
    CHECK(rate > 0.5);  // only 4 of 64 combinations exist
    CHECK(rate < 1.0);  // diagonal combinations do get drawn
    // Deterministic in the seed.
    CHECK(draws == sample_unconstrained(table, 2000, 3, 7));
    CHECK(draws != sample_unconstrained(table, 2000, 3, 8));
}

TEST_CASE("unconstrained sampling validates length against the table") {
    const auto assigns = make_assignments({{1, {0, 1}}, {2, {2, 3}}});
    const PrefixTable table = PrefixTable::build(assigns, 2);
    CHECK_THROWS_AS(sample_unconstrained(table, 10, 0, 1), ConfigError);
    CHECK_THROWS_AS(sample_unconstrained(table, 10, 3, 1), ConfigError);
    CHECK_NOTHROW(sample_unconstrained(table, 10, 2, 1));
}

TEST_CASE("position marginals follow observed frequencies") {
    // 90 ids start with 0, 10 with 1: draws should reflect the skew.
    std::vector<Assignment> assigns;
    for (ItemId i = 1; i <= 90; ++i) assigns.push_back({i, {0, static_cast<std::uint32_t>(i)}});
    for (ItemId i = 91; i <= 100; ++i) assigns.push_back({i, {1, static_cast<std::uint32_t>(i)}});
    const PrefixTable table = PrefixTable::build(assigns, 2);
    const std::vector<SemanticId> draws = sample_unconstrained(table, 5000, 1, 3);
    std::size_t zeros = 0;
    for (const SemanticId& s : draws) zeros += s[0] == 0 ? 1 : 0;
    CHECK(static_cast<double>(zeros) / draws.size() == doctest::Approx(0.9).epsilon(0.03));
}

// ---------------------------------------------------------------------------
// Retrieval breadth
// ---------------------------------------------------------------------------

TEST_CASE("ret_per on hand-built batches") {
    const auto assigns = make_assignments(
        {{1, {0, 0}}, {2, {0, 0}}, {3, {0, 1}}, {4, {5}}});
    const SidIndex idx = SidIndex::build(assigns);
    // One batch addressing two items.
    const std::vector<std::vector<SemanticId>> one = {{{0, 0}}};
    CHECK(ret_per(one, idx) == doctest::Approx(2.0).epsilon(1e-12));
    // Duplicate ids in a batch count their items once.
    const std::vector<std::vector<SemanticId>> dupes = {{{0, 0}, {0, 0}, {0, 1}}};
    CHECK(ret_per(dupes, idx) == doctest::Approx(3.0).epsilon(1e-12));
    // Unknown ids contribute nothing; mean over batches.
    const std::vector<std::vector<SemanticId>> two = {{{0, 0}}, {{9, 9}, {5}}};
    CHECK(ret_per(two, idx) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK_THROWS_AS(ret_per({}, idx), ConfigError);
}

TEST_CASE("ret_per matches a brute-force union oracle") {
    std::mt19937 rng(505);
    const std::vector<Assignment> corpus = random_corpus(rng, 600, 4, 2);
    const SidIndex idx = SidIndex::build(corpus);
    std::uniform_int_distribution<std::uint32_t> code(0, 4);
    std::uniform_int_distribution<std::size_t> batch_len(1, 6);
    std::vector<std::vector<SemanticId>> batches;
    for (int b = 0; b < 50; ++b) {
        std::vector<SemanticId> batch;
        const std::size_t len = batch_len(rng);
        for (std::size_t j = 0; j < len; ++j) {
            SemanticId sid(1 + static_cast<std::size_t>(rng() % 2));
            for (auto& c : sid) c = code(rng);
            batch.push_back(std::move(sid));
        }
        batches.push_back(std::move(batch));
    }
    double want = 0.0;
    for (const auto& batch : batches) {
        std::set<ItemId> items;
        for (const SemanticId& sid : batch) {
            for (const Assignment& a : corpus) {
                if (a.sid == sid) items.insert(a.item_id);
            }
        }
        want += static_cast<double>(items.size());
    }
    want /= static_cast<double>(batches.size());
    CHECK(ret_per(batches, idx) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("subtree masses are consistent with retrieval sizes") {
    std::mt19937 rng(506);
    const std::vector<Assignment> corpus = random_corpus(rng, 700, 5, 3);
    const SidIndex idx = SidIndex::build(corpus);
    // The root subtree is everything; level-1 subtrees partition it.
    std::uint64_t level1 = 0;
    for (std::uint32_t c = 0; c <= 5; ++c) {
        level1 += idx.retrieve(SemanticId{c}, true).size();
    }
    CHECK(level1 == idx.total_items());
    CHECK(idx.total_items() == corpus.size());
}
