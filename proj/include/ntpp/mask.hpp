#pragma once

// Pair-wise causal visibility over the interleaved layout.
//
// Position i may attend position j iff j belongs to a strictly earlier
// pair-step, or to the same step, the same channel and a depth <= depth(i).
// At D = 1 this leaves only the diagonal of every 2x2 step block; at D > 1
// each channel's DxD diagonal sub-block is lower-triangular and the
// cross-channel sub-blocks are empty.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace ntpp {

/// Closed-form rule. Throws std::out_of_range if i or j >= 2*T*D.
bool visibility(std::size_t i, std::size_t j, std::size_t steps, std::size_t depth);

/// Same rule without bounds checks; usable for unbounded (streaming) sequences.
bool visible_unchecked(std::size_t i, std::size_t j, std::size_t depth);

class AttentionMask {
public:
    AttentionMask(std::size_t steps, std::size_t depth);

    std::size_t steps() const { return steps_; }
    std::size_t depth() const { return depth_; }
    std::size_t side() const { return side_; }
    bool allowed(std::size_t i, std::size_t j) const { return allowed_[i * side_ + j] != 0; }
    /// Row-major side x side bytes, 1 = may attend.
    const std::vector<std::uint8_t>& bytes() const { return allowed_; }

    /// One line per row of '0'/'1' characters.
    std::string to_text() const;

private:
    std::size_t steps_;
    std::size_t depth_;
    std::size_t side_;
    std::vector<std::uint8_t> allowed_;
};

AttentionMask build_mask(std::size_t steps, std::size_t depth);

/// Process-wide cache keyed by (T, D). Thread-safe.
std::shared_ptr<const AttentionMask> cached_mask(std::size_t steps, std::size_t depth);

}  // namespace ntpp
