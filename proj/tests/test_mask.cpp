#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdexcept>
#include <vector>

#include "ntpp/mask.hpp"
#include "ntpp/sequence.hpp"

using namespace ntpp;

namespace {

struct Slot {
    std::size_t t;
    int c;
    std::size_t d;
};

// Positions listed by walking the layout, then the visibility rule applied
// literally to every pair.
std::vector<std::vector<bool>> brute_force(std::size_t T, std::size_t D) {
    std::vector<Slot> slots;
    for (std::size_t t = 0; t < T; ++t)
        for (int c = 0; c < 2; ++c)
            for (std::size_t d = 1; d <= D; ++d) slots.push_back({t, c, d});
    std::vector<std::vector<bool>> m(slots.size(), std::vector<bool>(slots.size()));
    for (std::size_t i = 0; i < slots.size(); ++i)
        for (std::size_t j = 0; j < slots.size(); ++j) {
            const auto& q = slots[i];
            const auto& k = slots[j];
            m[i][j] = k.t < q.t || (k.t == q.t && k.c == q.c && k.d <= q.d);
        }
    return m;
}

}  // namespace

TEST_CASE("mask equals the brute-force rule for every T <= 6, D <= 4") {
    for (std::size_t T = 1; T <= 6; ++T) {
        for (std::size_t D = 1; D <= 4; ++D) {
            const auto oracle = brute_force(T, D);
            const AttentionMask m = build_mask(T, D);
            REQUIRE(m.side() == oracle.size());
            for (std::size_t i = 0; i < m.side(); ++i)
                for (std::size_t j = 0; j < m.side(); ++j) {
                    REQUIRE(m.allowed(i, j) == oracle[i][j]);
                    REQUIRE(visibility(i, j, T, D) == oracle[i][j]);
                }
        }
    }
}

TEST_CASE("depth 1 leaves only the diagonal of each pair block") {
    const AttentionMask m = build_mask(3, 1);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(m.allowed(2 * t, 2 * t));
        CHECK(m.allowed(2 * t + 1, 2 * t + 1));
        CHECK_FALSE(m.allowed(2 * t, 2 * t + 1));
        CHECK_FALSE(m.allowed(2 * t + 1, 2 * t));
    }
}

TEST_CASE("mask is lower triangular and the diagonal is always visible") {
    const AttentionMask m = build_mask(5, 3);
    for (std::size_t i = 0; i < m.side(); ++i) {
        CHECK(m.allowed(i, i));
        for (std::size_t j = i + 1; j < m.side(); ++j) CHECK_FALSE(m.allowed(i, j));
    }
}

TEST_CASE("text rendering for T=2, D=1") {
    CHECK(build_mask(2, 1).to_text() == "1000\n0100\n1110\n1101\n");
}

TEST_CASE("bounds and arguments") {
    CHECK_THROWS_AS(visibility(8, 0, 2, 2), std::out_of_range);
    CHECK_THROWS_AS(build_mask(0, 1), std::invalid_argument);
    CHECK(cached_mask(3, 2) == cached_mask(3, 2));
}
