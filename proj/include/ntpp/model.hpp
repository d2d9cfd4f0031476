#pragma once

// Decoder-only dual-channel transformer over the interleaved token layout.
//
// Pre-norm blocks (RMS norm, multi-head attention with pair-step rotary
// positions and the pair-wise causal mask, GELU feed-forward) and one shared
// output head. Position (t, c, d) is trained to predict channel c's next
// token in flattened per-channel order: (t, c, d+1) when d < D, otherwise
// (t+1, c, 1). A stream of T frames is modelled with one BOS pair-step
// prepended, so the first frame is predicted from BOS.

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ntpp/embeddings.hpp"
#include "ntpp/mask.hpp"
#include "ntpp/sequence.hpp"
#include "ntpp/tensor.hpp"

namespace ntpp {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ModelConfig {
    std::size_t d_model = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::int32_t vocab = 32;  // content tokens; SIL and BOS are appended
    std::size_t depth = 1;
    std::size_t max_steps = 512;  // pair-steps, BOS included
    std::size_t ffn_mult = 4;
    double rope_base = 10000.0;
    std::uint64_t seed = 1;

    Vocabulary vocabulary() const { return Vocabulary{vocab}; }
    std::size_t head_dim() const { return d_model / n_heads; }
    std::size_t out_classes() const { return static_cast<std::size_t>(vocabulary().total()); }
    /// Throws ModelError when inconsistent.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

struct LayerParams {
    Tensor attn_norm;  // [d]
    Tensor wq, wk, wv, wo;  // [d, d]
    Tensor ffn_norm;   // [d]
    Tensor w1;         // [d, f]
    Tensor b1;         // [f]
    Tensor w2;         // [f, d]
    Tensor b2;         // [d]
};

struct ModelParams {
    ModelConfig config;
    EmbeddingTables embed;
    std::vector<LayerParams> layers;
    Tensor final_norm;  // [d]
    Tensor head;        // [d, V+S]

    /// Named tensors in checkpoint order:
    ///   embed.codebook, embed.channel, embed.depth,
    ///   then per layer l: layers.l.{attn_norm, wq, wk, wv, wo, ffn_norm, w1, b1, w2, b2},
    ///   final_norm, head.
    std::vector<std::pair<std::string, Tensor>> named_tensors() const;
    std::vector<Tensor> tensors() const;
    std::size_t parameter_count() const;

    /// Deep copy with fresh leaf tensors.
    ModelParams clone() const;
    void zero_grad();
};

/// normal(0, 0.02) weights, residual output projections scaled by
/// 1/sqrt(2 * n_layers), unit norm gains, zero biases.
ModelParams init_params(const ModelConfig& config);

/// Exchanges the A and B rows of the channel embedding.
void swap_channel_rows(ModelParams& params);
/// Sets the B row of the channel embedding equal to the A row.
void tie_channel_rows(ModelParams& params);

/// Logits [len, V+S]. Row i depends only on positions j with visibility(i, j).
Tensor forward(const ModelParams& params, const InterleavedSequence& seq, const AttentionMask& mask);
Tensor forward(const ModelParams& params, const InterleavedSequence& seq);

/// Same-channel successor target for every interleaved position, -1 for the
/// last D positions of each channel. With `skip_first_step`, targets that lie
/// in pair-step 0 (the BOS step of a model input) are -1 as well.
std::vector<std::int32_t> build_targets(const InterleavedSequence& seq, bool skip_first_step = false);

/// Model input for a stream: BOS step + frames, interleaved.
InterleavedSequence model_input(const ModelParams& params, const DualTokenStream& stream);

/// Mean cross-entropy over both channels' targets (differentiable).
Tensor loss(const ModelParams& params, const DualTokenStream& stream);
double loss_value(const ModelParams& params, const DualTokenStream& stream);

/// Sum over targeted positions of log p(target | visible context).
double joint_logprob(const ModelParams& params, const DualTokenStream& stream);

/// Per-position log p(target) (0 where there is no target), interleaved order.
std::vector<double> position_logprobs(const ModelParams& params, const DualTokenStream& stream);

}  // namespace ntpp
