#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sidq/error.hpp"
#include "sidq/quantizer.hpp"
#include "sidq/types.hpp"

using namespace sidq;

namespace {

// Self-contained mirror of the kernel accumulation contract, kept
// independent of the library so quantizer bugs cannot hide behind
// kernel bugs.
double oracle_sq_l2(const float* a, const float* b, std::size_t d) {
    double s[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = static_cast<double>(a[i]) - (b ? static_cast<double>(b[i]) : 0.0);
        s[i % 4] += diff * diff;
    }
    return (s[0] + s[2]) + (s[1] + s[3]);
}

// Brute-force greedy residual descent: exhaustive argmin per layer with
// strict-less tie-break, float32 residual updates.
QuantizationResult oracle_fixed(std::span<const float> z, const CodebookStack& stack) {
    QuantizationResult out;
    std::vector<float> r(z.begin(), z.end());
    double sq = oracle_sq_l2(r.data(), nullptr, r.size());
    out.residual_norms.push_back(std::sqrt(sq));
    for (std::uint32_t l = 0; l < stack.depth(); ++l) {
        std::uint32_t best = 0;
        double best_sq = oracle_sq_l2(r.data(), stack.centroid(l, 0), stack.d);
        for (std::uint32_t c = 1; c < stack.layers[l].m; ++c) {
            const double ds = oracle_sq_l2(r.data(), stack.centroid(l, c), stack.d);
            if (ds < best_sq) {
                best = c;
                best_sq = ds;
            }
        }
        out.sid.push_back(best);
        const float* q = stack.centroid(l, best);
        for (std::uint32_t j = 0; j < stack.d; ++j) r[j] = r[j] - q[j];
        sq = oracle_sq_l2(r.data(), nullptr, r.size());
        out.residual_norms.push_back(std::sqrt(sq));
    }
    out.reconstruction_error = sq;
    return out;
}

CodebookStack random_stack(std::mt19937& rng, std::uint32_t L, std::uint32_t m, std::uint32_t d) {
    std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
    CodebookStack stack;
    stack.d = d;
    stack.layers.resize(L);
    for (auto& layer : stack.layers) {
        layer.m = m;
        layer.centroids.resize(static_cast<std::size_t>(m) * d);
        for (float& x : layer.centroids) x = dist(rng);
        layer.frozen.assign(m, 0);
    }
    return stack;
}

std::vector<float> random_point(std::mt19937& rng, std::uint32_t d) {
    std::uniform_real_distribution<float> dist(-1.5f, 1.5f);
    std::vector<float> z(d);
    for (float& x : z) x = dist(rng);
    return z;
}

}  // namespace

TEST_CASE("quantize_fixed equals the exhaustive greedy oracle on 1000 items") {
    std::mt19937 rng(101);
    const CodebookStack stack = random_stack(rng, 3, 16, 8);
    for (int i = 0; i < 1000; ++i) {
        const std::vector<float> z = random_point(rng, 8);
        const QuantizationResult got = quantize_fixed(z, stack);
        const QuantizationResult want = oracle_fixed(z, stack);
        REQUIRE(got.sid == want.sid);
        REQUIRE(got.residual_norms == want.residual_norms);
        CHECK(got.reconstruction_error == want.reconstruction_error);
        CHECK(got.path_information == 0.0);
        CHECK_FALSE(got.terminated_early);
        CHECK(got.residual_norms.size() == got.sid.size() + 1);
    }
}

TEST_CASE("duplicate centroids: the lowest index wins every layer") {
    CodebookStack stack;
    stack.d = 2;
    stack.layers.resize(1);
    stack.layers[0].m = 3;
    stack.layers[0].centroids = {0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f};
    stack.layers[0].frozen = {0, 0, 0};
    const std::vector<float> z = {0.5f, 0.5f};
    const QuantizationResult q = quantize_fixed(z, stack);
    CHECK(q.sid == SemanticId{0});
    CHECK(q.reconstruction_error == 0.0);
}

TEST_CASE("an exact centroid hit drives the residual to zero") {
    std::mt19937 rng(102);
    CodebookStack stack = random_stack(rng, 1, 4, 3);
    const std::vector<float> z = {stack.centroid(0, 2)[0], stack.centroid(0, 2)[1],
                                  stack.centroid(0, 2)[2]};
    const QuantizationResult q = quantize_fixed(z, stack);
    CHECK(q.sid == SemanticId{2});
    CHECK(q.reconstruction_error == 0.0);
    CHECK(q.residual_norms.back() == 0.0);
}

TEST_CASE("a zero centroid in every layer makes residual norms non-increasing") {
    std::mt19937 rng(103);
    CodebookStack stack = random_stack(rng, 4, 9, 6);
    for (auto& layer : stack.layers) {
        for (std::uint32_t j = 0; j < stack.d; ++j) layer.centroids[j] = 0.0f;
    }
    for (int i = 0; i < 200; ++i) {
        const std::vector<float> z = random_point(rng, 6);
        const QuantizationResult q = quantize_fixed(z, stack);
        for (std::size_t l = 1; l < q.residual_norms.size(); ++l) {
            CHECK(q.residual_norms[l] <= q.residual_norms[l - 1]);
        }
    }
}

TEST_CASE("quantize_fixed rejects a dimension mismatch") {
    std::mt19937 rng(104);
    const CodebookStack stack = random_stack(rng, 2, 4, 8);
    const std::vector<float> z(5, 0.0f);
    CHECK_THROWS_AS(quantize_fixed(z, stack), FormatError);
}

TEST_CASE("reconstruct sums the named centroids in float32") {
    std::mt19937 rng(105);
    const CodebookStack stack = random_stack(rng, 3, 8, 4);
    const SemanticId sid = {3, 0, 7};
    const std::vector<float> got = reconstruct(sid, stack);
    std::vector<float> want(4, 0.0f);
    for (std::size_t l = 0; l < sid.size(); ++l) {
        const float* q = stack.centroid(static_cast<std::uint32_t>(l), sid[l]);
        for (std::uint32_t j = 0; j < 4; ++j) want[j] = want[j] + q[j];
    }
    CHECK(got == want);
}

TEST_CASE("reconstruct accepts a short (truncated) id") {
    std::mt19937 rng(106);
    const CodebookStack stack = random_stack(rng, 3, 8, 4);
    const std::vector<float> one = reconstruct(SemanticId{5}, stack);
    std::vector<float> layer1(stack.centroid(0, 5), stack.centroid(0, 5) + 4);
    CHECK(one == layer1);
}

TEST_CASE("reconstruction error of the full descent matches |z - reconstruct|^2") {
    std::mt19937 rng(107);
    const CodebookStack stack = random_stack(rng, 3, 16, 8);
    for (int i = 0; i < 100; ++i) {
        const std::vector<float> z = random_point(rng, 8);
        const QuantizationResult q = quantize_fixed(z, stack);
        const std::vector<float> rec = reconstruct(q.sid, stack);
        double direct = 0.0;
        for (std::uint32_t j = 0; j < 8; ++j) {
            const double diff = static_cast<double>(z[j]) - static_cast<double>(rec[j]);
            direct += diff * diff;
        }
        // Chained float32 subtraction vs float32 centroid summation round
        // differently; agreement is close but not bitwise.
        CHECK(q.reconstruction_error ==
              doctest::Approx(direct).epsilon(1e-4).scale(1e-6));
    }
}

TEST_CASE("reconstruct rejects malformed ids with layer context") {
    std::mt19937 rng(108);
    const CodebookStack stack = random_stack(rng, 2, 4, 3);
    CHECK_THROWS_AS(reconstruct(SemanticId{}, stack), FormatError);
    CHECK_THROWS_AS(reconstruct(SemanticId{0, 0, 0}, stack), FormatError);
    CHECK_THROWS_AS(reconstruct(SemanticId{0, 4}, stack), FormatError);
    try {
        reconstruct(SemanticId{0, 9}, stack);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("layer 2") != std::string::npos);
        CHECK(msg.find("9") != std::string::npos);
    }
}

TEST_CASE("nearest_in_layer validates dimensions and finds the argmin") {
    std::mt19937 rng(109);
    const CodebookStack stack = random_stack(rng, 1, 12, 5);
    const std::vector<float> z = random_point(rng, 5);
    const kernels::NearestHit hit = nearest_in_layer(z, stack.layers[0], 5);
    double best = oracle_sq_l2(z.data(), stack.centroid(0, 0), 5);
    std::uint32_t best_idx = 0;
    for (std::uint32_t c = 1; c < 12; ++c) {
        const double ds = oracle_sq_l2(z.data(), stack.centroid(0, c), 5);
        if (ds < best) {
            best = ds;
            best_idx = c;
        }
    }
    CHECK(hit.index == best_idx);
    CHECK(hit.sq_dist == best);
    const std::vector<float> bad(4, 0.0f);
    CHECK_THROWS_AS(nearest_in_layer(bad, stack.layers[0], 5), FormatError);
}
