#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "ntpp/embeddings.hpp"

using namespace ntpp;

namespace {

EmbeddingTables random_tables(std::size_t v, std::size_t d, std::mt19937_64& rng) {
    return {testutil::random_tensor({v, d}, rng), testutil::random_tensor({2, d}, rng),
            testutil::random_tensor({2, d}, rng), 10000.0};
}

double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

}  // namespace

TEST_CASE("cyclic depth feature is periodic in D and unit norm") {
    for (std::size_t D = 1; D <= 5; ++D) {
        for (std::size_t i = 0; i < D; ++i) {
            const auto f = cyclic_depth(i, D);
            CHECK(f == cyclic_depth(i + D, D));
            CHECK(f[0] * f[0] + f[1] * f[1] == doctest::Approx(1.0));
            const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(D);
            CHECK(f[0] == doctest::Approx(std::sin(phase)));
        }
    }
    // Depth 1 carries no depth information: always the phase-zero vector.
    CHECK(cyclic_depth(0, 1) == std::array<double, 2>{0.0, 1.0});
}

TEST_CASE("embedding row is codebook + channel + depth projection") {
    std::mt19937_64 rng(1);
    const auto tables = random_tables(6, 4, rng);
    const auto s = DualTokenStream::from_grids({{1, 2}}, {{3, 1}});
    const auto seq = interleave(s);
    const Tensor e = embed_sequence(seq, tables);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& m = seq.meta[i];
        const auto f = cyclic_depth(m.depth - 1, 2);
        for (std::size_t k = 0; k < 4; ++k) {
            const double expect = tables.codebook.at(static_cast<std::size_t>(seq.tokens[i]), k) +
                                  tables.channel_proj.at(index_of(m.channel), k) +
                                  f[0] * tables.depth_proj.at(0, k) + f[1] * tables.depth_proj.at(1, k);
            CHECK(e.at(i, k) == doctest::Approx(expect).epsilon(1e-14));
        }
    }
}

TEST_CASE("both channels and all depths of a step share the rotation") {
    const auto seq = interleave(DualTokenStream(3, 2, std::vector<TokenId>(6, 0), std::vector<TokenId>(6, 0)));
    const RotaryTables r = rotary_tables(seq.meta, 8, 10000.0);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto angles = positional_angles(seq.meta[i].step, 8, 10000.0);
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(r.cos[i * 4 + j] == std::cos(angles[j]));
            CHECK(r.sin[i * 4 + j] == std::sin(angles[j]));
        }
    }
    const auto a0 = positional_angles(5, 8, 10000.0);
    CHECK(a0[0] == 5.0);
    CHECK(a0[1] == doctest::Approx(5.0 * std::pow(10000.0, -2.0 / 8.0)));
}

TEST_CASE("rotated dot products depend only on the step offset") {
    std::mt19937_64 rng(2);
    const std::size_t hd = 8;
    const Tensor q = testutil::random_tensor({1, hd}, rng, false);
    const Tensor k = testutil::random_tensor({1, hd}, rng, false);
    auto rotated = [&](const Tensor& x, std::size_t step) {
        const auto a = positional_angles(step, hd, 10000.0);
        std::vector<double> c, s;
        for (double t : a) {
            c.push_back(std::cos(t));
            s.push_back(std::sin(t));
        }
        return rotate_pairs(x, c, s);
    };
    const Tensor q3 = rotated(q, 3), k1 = rotated(k, 1);
    const Tensor q9 = rotated(q, 9), k7 = rotated(k, 7);
    CHECK(dot(q3.data().data(), k1.data().data(), hd) ==
          doctest::Approx(dot(q9.data().data(), k7.data().data(), hd)).epsilon(1e-12));
    CHECK(dot(q3.data().data(), q3.data().data(), hd) ==
          doctest::Approx(dot(q.data().data(), q.data().data(), hd)).epsilon(1e-12));
}
