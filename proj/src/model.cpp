#include "ntpp/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace ntpp {

namespace {

constexpr double kMaskedLogit = -1e30;
constexpr double kInitStd = 0.02;

Tensor normal_tensor(Shape shape, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = dist(rng);
    return Tensor::from(std::move(shape), std::move(data), true);
}

Tensor filled(Shape shape, double value) {
    std::vector<double> data(shape_numel(shape), value);
    return Tensor::from(std::move(shape), std::move(data), true);
}

}  // namespace

void ModelConfig::validate() const {
    if (d_model == 0 || n_layers == 0 || n_heads == 0 || vocab <= 0 || depth == 0 ||
        max_steps == 0 || ffn_mult == 0 || !(rope_base > 0.0)) {
        throw ModelError("model config: all sizes must be positive");
    }
    if (d_model % n_heads != 0) throw ModelError("model config: d_model must be divisible by n_heads");
    if (head_dim() % 2 != 0) throw ModelError("model config: head_dim must be even for rotary pairs");
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named_tensors() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("embed.codebook", embed.codebook);
    out.emplace_back("embed.channel", embed.channel_proj);
    out.emplace_back("embed.depth", embed.depth_proj);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& L = layers[l];
        const std::string p = "layers." + std::to_string(l) + ".";
        out.emplace_back(p + "attn_norm", L.attn_norm);
        out.emplace_back(p + "wq", L.wq);
        out.emplace_back(p + "wk", L.wk);
        out.emplace_back(p + "wv", L.wv);
        out.emplace_back(p + "wo", L.wo);
        out.emplace_back(p + "ffn_norm", L.ffn_norm);
        out.emplace_back(p + "w1", L.w1);
        out.emplace_back(p + "b1", L.b1);
        out.emplace_back(p + "w2", L.w2);
        out.emplace_back(p + "b2", L.b2);
    }
    out.emplace_back("final_norm", final_norm);
    out.emplace_back("head", head);
    return out;
}

std::vector<Tensor> ModelParams::tensors() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_tensors()) out.push_back(t);
    return out;
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors()) n += t.numel();
    return n;
}

ModelParams ModelParams::clone() const {
    ModelParams p;
    p.config = config;
    p.embed.codebook = embed.codebook.detach_copy(true);
    p.embed.channel_proj = embed.channel_proj.detach_copy(true);
    p.embed.depth_proj = embed.depth_proj.detach_copy(true);
    p.embed.rope_base = embed.rope_base;
    for (const auto& L : layers) {
        p.layers.push_back(LayerParams{
            L.attn_norm.detach_copy(true), L.wq.detach_copy(true), L.wk.detach_copy(true),
            L.wv.detach_copy(true), L.wo.detach_copy(true), L.ffn_norm.detach_copy(true),
            L.w1.detach_copy(true), L.b1.detach_copy(true), L.w2.detach_copy(true),
            L.b2.detach_copy(true)});
    }
    p.final_norm = final_norm.detach_copy(true);
    p.head = head.detach_copy(true);
    return p;
}

void ModelParams::zero_grad() {
    for (auto& t : tensors()) t.zero_grad();
}

ModelParams init_params(const ModelConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    const std::size_t d = config.d_model;
    const std::size_t f = d * config.ffn_mult;
    const double resid_std = kInitStd / std::sqrt(2.0 * static_cast<double>(config.n_layers));

    ModelParams p;
    p.config = config;
    p.embed.codebook = normal_tensor({config.out_classes(), d}, kInitStd, rng);
    p.embed.channel_proj = normal_tensor({2, d}, kInitStd, rng);
    p.embed.depth_proj = normal_tensor({2, d}, kInitStd, rng);
    p.embed.rope_base = config.rope_base;
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        LayerParams L;
        L.attn_norm = filled({d}, 1.0);
        L.wq = normal_tensor({d, d}, kInitStd, rng);
        L.wk = normal_tensor({d, d}, kInitStd, rng);
        L.wv = normal_tensor({d, d}, kInitStd, rng);
        L.wo = normal_tensor({d, d}, resid_std, rng);
        L.ffn_norm = filled({d}, 1.0);
        L.w1 = normal_tensor({d, f}, kInitStd, rng);
        L.b1 = filled({f}, 0.0);
        L.w2 = normal_tensor({f, d}, resid_std, rng);
        L.b2 = filled({d}, 0.0);
        p.layers.push_back(std::move(L));
    }
    p.final_norm = filled({d}, 1.0);
    p.head = normal_tensor({d, config.out_classes()}, kInitStd, rng);
    return p;
}

void swap_channel_rows(ModelParams& params) {
    auto rows = params.embed.channel_proj.mutable_data();
    const std::size_t d = params.config.d_model;
    std::swap_ranges(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(d),
                     rows.begin() + static_cast<std::ptrdiff_t>(d));
}

void tie_channel_rows(ModelParams& params) {
    auto rows = params.embed.channel_proj.mutable_data();
    const std::size_t d = params.config.d_model;
    std::copy_n(rows.begin(), d, rows.begin() + static_cast<std::ptrdiff_t>(d));
}

Tensor forward(const ModelParams& params, const InterleavedSequence& seq, const AttentionMask& mask) {
    const auto& cfg = params.config;
    if (seq.depth != cfg.depth) {
        throw ModelError("forward: sequence depth " + std::to_string(seq.depth) +
                         " does not match model depth " + std::to_string(cfg.depth));
    }
    if (seq.size() == 0 || seq.size() % (2 * cfg.depth) != 0) {
        throw ModelError("forward: sequence length must be a positive multiple of 2D");
    }
    if (seq.size() > 2 * cfg.max_steps * cfg.depth) {
        throw ModelError("forward: sequence of " + std::to_string(seq.steps()) +
                         " steps exceeds max_steps " + std::to_string(cfg.max_steps));
    }
    if (mask.steps() != seq.steps() || mask.depth() != seq.depth) {
        throw ModelError("forward: mask does not match sequence (T, D)");
    }

    const std::size_t hd = cfg.head_dim();
    const ReduceOrder order{cfg.depth};
    const RotaryTables rot = rotary_tables(seq.meta, hd, params.embed.rope_base);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

    Tensor x = embed_sequence(seq, params.embed);
    for (const auto& L : params.layers) {
        Tensor h = rms_norm(x, L.attn_norm);
        Tensor q = matmul(h, L.wq);
        Tensor k = matmul(h, L.wk);
        Tensor v = matmul(h, L.wv);
        std::vector<Tensor> heads;
        heads.reserve(cfg.n_heads);
        for (std::size_t hi = 0; hi < cfg.n_heads; ++hi) {
            const std::size_t c0 = hi * hd, c1 = c0 + hd;
            Tensor qh = rotate_pairs(slice_cols(q, c0, c1), rot.cos, rot.sin);
            Tensor kh = rotate_pairs(slice_cols(k, c0, c1), rot.cos, rot.sin);
            Tensor vh = slice_cols(v, c0, c1);
            Tensor scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
            Tensor probs = softmax(masked_fill(scores, mask.bytes(), kMaskedLogit), order);
            heads.push_back(matmul(probs, vh, order));
        }
        x = add(x, matmul(concat_cols(heads), L.wo));
        Tensor h2 = rms_norm(x, L.ffn_norm);
        Tensor ff = gelu(add_row(matmul(h2, L.w1), L.b1));
        x = add(x, add_row(matmul(ff, L.w2), L.b2));
    }
    return matmul(rms_norm(x, params.final_norm), params.head);
}

Tensor forward(const ModelParams& params, const InterleavedSequence& seq) {
    return forward(params, seq, *cached_mask(seq.steps(), seq.depth));
}

std::vector<std::int32_t> build_targets(const InterleavedSequence& seq, bool skip_first_step) {
    const std::size_t D = seq.depth;
    const std::size_t T = seq.steps();
    std::vector<std::int32_t> targets(seq.size(), -1);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const auto m = seq.meta[i];
        if (m.depth < D) {
            if (!(skip_first_step && m.step == 0)) targets[i] = seq.tokens[i + 1];
        } else if (m.step + 1 < T) {
            targets[i] = seq.tokens[interleaved_index(m.step + 1, m.channel, 1, D)];
        }
    }
    return targets;
}

InterleavedSequence model_input(const ModelParams& params, const DualTokenStream& stream) {
    if (stream.depth() != params.config.depth) {
        throw ModelError("stream depth " + std::to_string(stream.depth()) +
                         " does not match model depth " + std::to_string(params.config.depth));
    }
    const Vocabulary vocab = params.config.vocabulary();
    stream.validate(vocab);
    return interleave(with_bos(stream, vocab));
}

Tensor loss(const ModelParams& params, const DualTokenStream& stream) {
    if (stream.steps() < 2) throw ModelError("loss: stream needs at least 2 frames");
    const InterleavedSequence seq = model_input(params, stream);
    const auto targets = build_targets(seq, true);
    Tensor logits = forward(params, seq);
    return cross_entropy(logits, targets, ReduceOrder{seq.depth});
}

double loss_value(const ModelParams& params, const DualTokenStream& stream) {
    NoGradGuard guard;
    return loss(params, stream).item();
}

std::vector<double> position_logprobs(const ModelParams& params, const DualTokenStream& stream) {
    NoGradGuard guard;
    const InterleavedSequence seq = model_input(params, stream);
    const auto targets = build_targets(seq, true);
    const Tensor logits = forward(params, seq);
    const std::size_t C = logits.cols();
    auto x = logits.data();
    std::vector<double> out(seq.size(), 0.0);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (targets[i] < 0) continue;
        const double* row = x.data() + i * C;
        const double mx = *std::max_element(row, row + C);
        double z = 0.0;
        for (std::size_t j = 0; j < C; ++j) z += std::exp(row[j] - mx);
        out[i] = row[targets[i]] - mx - std::log(z);
    }
    return out;
}

double joint_logprob(const ModelParams& params, const DualTokenStream& stream) {
    const auto lp = position_logprobs(params, stream);
    return ordered_sum(lp.size(), ReduceOrder{params.config.depth},
                       [&](std::size_t i) { return lp[i]; });
}

}  // namespace ntpp
