#pragma once

// Token-pair input embedding and rotary positions keyed by pair-step.
//
// Input row for interleaved position i:
//   codebook[token_i] + channel_proj[channel(i)] + cyclic_depth(depth(i)-1, D) * depth_proj
// Positions are not added here; attention rotates q and k by the pair-step
// angles, so both channels (and every depth) of a step share one rotation.

#include <array>
#include <cstddef>
#include <vector>

#include "ntpp/sequence.hpp"
#include "ntpp/tensor.hpp"

namespace ntpp {

struct EmbeddingTables {
    Tensor codebook;      // [V+S, d_model]
    Tensor channel_proj;  // [2, d_model], row 0 = A, row 1 = B
    Tensor depth_proj;    // [2, d_model]
    double rope_base = 10000.0;
};

/// (sin(2*pi*i/D), cos(2*pi*i/D)); periodic in i with period D.
std::array<double, 2> cyclic_depth(std::size_t i, std::size_t depth);

Tensor embed_sequence(const InterleavedSequence& seq, const EmbeddingTables& tables);

/// Rotation angles for pair-step t over head_dim/2 frequency pairs:
/// angle_j = t * base^(-2j/head_dim).
std::vector<double> positional_angles(std::size_t step, std::size_t head_dim, double base);

/// cos/sin tables [len, head_dim/2] for rotate_pairs, one row per position.
struct RotaryTables {
    std::vector<double> cos;
    std::vector<double> sin;
};
RotaryTables rotary_tables(const std::vector<PositionMeta>& meta, std::size_t head_dim,
                           double base);

}  // namespace ntpp
