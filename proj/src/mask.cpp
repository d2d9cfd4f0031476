#include "ntpp/mask.hpp"

#include <map>
#include <mutex>
#include <stdexcept>

#include "ntpp/sequence.hpp"

namespace ntpp {

bool visible_unchecked(std::size_t i, std::size_t j, std::size_t depth) {
    const PositionMeta qi = position_meta(i, depth);
    const PositionMeta kj = position_meta(j, depth);
    if (kj.step < qi.step) return true;
    return kj.step == qi.step && kj.channel == qi.channel && kj.depth <= qi.depth;
}

bool visibility(std::size_t i, std::size_t j, std::size_t steps, std::size_t depth) {
    const std::size_t side = 2 * steps * depth;
    if (i >= side || j >= side) {
        throw std::out_of_range("visibility: index (" + std::to_string(i) + ", " +
                                std::to_string(j) + ") outside mask of side " +
                                std::to_string(side));
    }
    return visible_unchecked(i, j, depth);
}

AttentionMask::AttentionMask(std::size_t steps, std::size_t depth)
    : steps_(steps), depth_(depth), side_(2 * steps * depth), allowed_(side_ * side_, 0) {
    if (steps < 1 || depth < 1) throw std::invalid_argument("mask needs T >= 1 and D >= 1");
    // Block construction: everything left of the current step block is visible;
    // inside the 2D x 2D diagonal block only the two lower-triangular DxD
    // channel blocks are.
    const std::size_t block = 2 * depth;
    for (std::size_t t = 0; t < steps; ++t) {
        const std::size_t base = t * block;
        for (std::size_t r = 0; r < block; ++r) {
            auto* row = allowed_.data() + (base + r) * side_;
            for (std::size_t j = 0; j < base; ++j) row[j] = 1;
            const std::size_t half = r < depth ? 0 : depth;
            for (std::size_t c = half; c <= r; ++c) row[base + c] = 1;
        }
    }
}

std::string AttentionMask::to_text() const {
    std::string out;
    out.reserve(side_ * (side_ + 1));
    for (std::size_t i = 0; i < side_; ++i) {
        for (std::size_t j = 0; j < side_; ++j) out.push_back(allowed(i, j) ? '1' : '0');
        out.push_back('\n');
    }
    return out;
}

AttentionMask build_mask(std::size_t steps, std::size_t depth) { return AttentionMask(steps, depth); }

std::shared_ptr<const AttentionMask> cached_mask(std::size_t steps, std::size_t depth) {
    static std::mutex mu;
    static std::map<std::pair<std::size_t, std::size_t>, std::shared_ptr<const AttentionMask>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{steps, depth}];
    if (!slot) slot = std::make_shared<const AttentionMask>(steps, depth);
    return slot;
}

}  // namespace ntpp
