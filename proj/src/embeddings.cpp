#include "ntpp/embeddings.hpp"

#include <cmath>
#include <numbers>

namespace ntpp {

std::array<double, 2> cyclic_depth(std::size_t i, std::size_t depth) {
    // Reduce first so that i and i + D give bit-identical angles.
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(i % depth) /
                         static_cast<double>(depth);
    return {std::sin(phase), std::cos(phase)};
}

Tensor embed_sequence(const InterleavedSequence& seq, const EmbeddingTables& tables) {
    if (seq.size() == 0) {
        throw NumericError(NumericErrorKind::invalid_argument, "embed_sequence: empty sequence");
    }
    if (tables.codebook.cols() % 2 != 0) {
        throw NumericError(NumericErrorKind::invalid_argument, "d_model must be even");
    }
    std::vector<std::int32_t> channels(seq.size());
    std::vector<double> depth_feats(seq.size() * 2);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto& m = seq.meta[i];
        channels[i] = static_cast<std::int32_t>(index_of(m.channel));
        const auto dv = cyclic_depth(m.depth - 1, seq.depth);
        depth_feats[2 * i] = dv[0];
        depth_feats[2 * i + 1] = dv[1];
    }
    Tensor content = embedding(tables.codebook, seq.tokens);
    Tensor chan = embedding(tables.channel_proj, channels);
    Tensor depth = matmul(Tensor::from({seq.size(), 2}, std::move(depth_feats)), tables.depth_proj);
    return add(add(content, chan), depth);
}

std::vector<double> positional_angles(std::size_t step, std::size_t head_dim, double base) {
    std::vector<double> out(head_dim / 2);
    for (std::size_t j = 0; j < out.size(); ++j) {
        const double inv_freq =
            std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(head_dim));
        out[j] = static_cast<double>(step) * inv_freq;
    }
    return out;
}

RotaryTables rotary_tables(const std::vector<PositionMeta>& meta, std::size_t head_dim,
                           double base) {
    const std::size_t h = head_dim / 2;
    RotaryTables rt;
    rt.cos.resize(meta.size() * h);
    rt.sin.resize(meta.size() * h);
    for (std::size_t i = 0; i < meta.size(); ++i) {
        const auto ang = positional_angles(meta[i].step, head_dim, base);
        for (std::size_t j = 0; j < h; ++j) {
            rt.cos[i * h + j] = std::cos(ang[j]);
            rt.sin[i * h + j] = std::sin(ang[j]);
        }
    }
    return rt;
}

}  // namespace ntpp
