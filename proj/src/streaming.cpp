#include "ntpp/streaming.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>

#include "ntpp/embeddings.hpp"
#include "ntpp/mask.hpp"

namespace ntpp {

namespace {

std::atomic<std::size_t> g_live_caches{0};

constexpr double kNormEps = 1e-6;  // must match rms_norm's default

void rms_norm_into(std::span<const double> x, std::span<const double> gain, std::span<double> out) {
    double ss = 0.0;
    for (double v : x) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.size()) + kNormEps);
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] * inv * gain[j];
}

// out = in · W, W row-major [in.size(), out.size()]
void vecmat(std::span<const double> in, std::span<const double> w, std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const std::size_t n = out.size();
    for (std::size_t p = 0; p < in.size(); ++p) {
        const double a = in[p];
        const double* row = w.data() + p * n;
        for (std::size_t j = 0; j < n; ++j) out[j] += a * row[j];
    }
}

void rotate_in_place(std::span<double> v, std::size_t head_dim, std::size_t n_heads,
                     const std::vector<double>& angles) {
    for (std::size_t h = 0; h < n_heads; ++h) {
        double* x = v.data() + h * head_dim;
        for (std::size_t j = 0; j < head_dim / 2; ++j) {
            const double c = std::cos(angles[j]), s = std::sin(angles[j]);
            const double x0 = x[2 * j], x1 = x[2 * j + 1];
            x[2 * j] = x0 * c - x1 * s;
            x[2 * j + 1] = x0 * s + x1 * c;
        }
    }
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

// ---- KvCache -----------------------------------------------------------------

KvCache::KvCache(std::size_t n_layers, std::size_t d_model, std::size_t capacity)
    : d_model_(d_model), capacity_(capacity), keys_(n_layers), values_(n_layers) {
    ++g_live_caches;
}

KvCache::~KvCache() { --g_live_caches; }

std::size_t KvCache::live_count() { return g_live_caches.load(); }

std::size_t KvCache::bytes() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < keys_.size(); ++l) {
        n += (keys_[l].size() + values_[l].size()) * sizeof(double);
    }
    return n;
}

void KvCache::append(std::size_t layer, std::span<const double> key, std::span<const double> value) {
    if (committed_ >= capacity_) {
        throw ModelError("KV cache capacity of " + std::to_string(capacity_) +
                         " positions exceeded");
    }
    keys_[layer].insert(keys_[layer].end(), key.begin(), key.end());
    values_[layer].insert(values_[layer].end(), value.begin(), value.end());
}

void KvCache::seal() { ++committed_; }

std::size_t expected_cache_bytes(std::size_t positions, std::size_t n_layers, std::size_t d_model) {
    return positions * n_layers * 2 * d_model * 8;
}

// ---- IncrementalDecoder ------------------------------------------------------

IncrementalDecoder::IncrementalDecoder(const ModelParams& params)
    : IncrementalDecoder(params, params.config.max_steps) {}

IncrementalDecoder::IncrementalDecoder(const ModelParams& params, std::size_t capacity_steps)
    : params_(&params),
      cache_(std::make_unique<KvCache>(params.config.n_layers, params.config.d_model,
                                       2 * capacity_steps * params.config.depth)) {
    const std::size_t d = params.config.d_model;
    const std::size_t f = d * params.config.ffn_mult;
    x_.resize(d);
    h_.resize(d);
    q_.resize(d);
    k_.resize(d);
    v_.resize(d);
    att_.resize(d);
    ff_.resize(f);
    logits_.resize(params.config.out_classes());
}

PositionMeta IncrementalDecoder::next_meta() const {
    return position_meta(cache_->committed(), params_->config.depth);
}

std::span<const double> IncrementalDecoder::commit(TokenId token) {
    const auto& cfg = params_->config;
    const Vocabulary vocab = cfg.vocabulary();
    if (!vocab.valid(token)) {
        throw ModelError("token " + std::to_string(token) + " outside vocabulary");
    }
    if (cache_->committed() >= cache_->capacity()) {
        throw ModelError("KV cache capacity of " + std::to_string(cache_->capacity()) +
                         " positions exceeded");
    }
    const std::size_t d = cfg.d_model;
    const std::size_t D = cfg.depth;
    const std::size_t hd = cfg.head_dim();
    const std::size_t pos = cache_->committed();
    const PositionMeta meta = position_meta(pos, D);
    const ReduceOrder order{D};
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

    // Input embedding, same association as embed_sequence.
    {
        auto code = params_->embed.codebook.data().subspan(static_cast<std::size_t>(token) * d, d);
        auto chan = params_->embed.channel_proj.data().subspan(index_of(meta.channel) * d, d);
        auto dp = params_->embed.depth_proj.data();
        const auto feat = cyclic_depth(meta.depth - 1, D);
        for (std::size_t j = 0; j < d; ++j) {
            double depth_term = 0.0;
            depth_term += feat[0] * dp[j];
            depth_term += feat[1] * dp[d + j];
            x_[j] = (code[j] + chan[j]) + depth_term;
        }
    }
    const auto angles = positional_angles(meta.step, hd, params_->embed.rope_base);

    scores_.resize(pos + 1);
    for (std::size_t l = 0; l < params_->layers.size(); ++l) {
        const LayerParams& L = params_->layers[l];
        rms_norm_into(x_, L.attn_norm.data(), h_);
        vecmat(h_, L.wq.data(), q_);
        vecmat(h_, L.wk.data(), k_);
        vecmat(h_, L.wv.data(), v_);
        rotate_in_place(q_, hd, cfg.n_heads, angles);
        rotate_in_place(k_, hd, cfg.n_heads, angles);
        cache_->append(l, k_, v_);

        for (std::size_t hi = 0; hi < cfg.n_heads; ++hi) {
            const double* qh = q_.data() + hi * hd;
            double mx = -1e300;
            for (std::size_t j = 0; j <= pos; ++j) {
                if (!visible_unchecked(pos, j, D)) {
                    scores_[j] = -1e30;
                    continue;
                }
                const double* kj = cache_->key(l, j) + hi * hd;
                double dot = 0.0;
                for (std::size_t p = 0; p < hd; ++p) dot += qh[p] * kj[p];
                scores_[j] = dot * inv_sqrt;
                mx = std::max(mx, scores_[j]);
            }
            for (std::size_t j = 0; j <= pos; ++j) {
                scores_[j] = visible_unchecked(pos, j, D) ? std::exp(scores_[j] - mx) : 0.0;
            }
            const double z = ordered_sum(pos + 1, order, [&](std::size_t j) { return scores_[j]; });
            for (std::size_t j = 0; j <= pos; ++j) scores_[j] /= z;
            for (std::size_t c = 0; c < hd; ++c) {
                att_[hi * hd + c] = ordered_sum(pos + 1, order, [&](std::size_t j) {
                    return scores_[j] * cache_->value(l, j)[hi * hd + c];
                });
            }
        }
        vecmat(att_, L.wo.data(), h_);
        for (std::size_t j = 0; j < d; ++j) x_[j] += h_[j];

        rms_norm_into(x_, L.ffn_norm.data(), h_);
        vecmat(h_, L.w1.data(), ff_);
        auto b1 = L.b1.data();
        for (std::size_t j = 0; j < ff_.size(); ++j) ff_[j] = gelu_value(ff_[j] + b1[j]);
        vecmat(ff_, L.w2.data(), h_);
        auto b2 = L.b2.data();
        for (std::size_t j = 0; j < d; ++j) x_[j] += h_[j] + b2[j];
    }
    cache_->seal();

    rms_norm_into(x_, params_->final_norm.data(), h_);
    vecmat(h_, params_->head.data(), logits_);
    last_logits_[index_of(meta.channel)] = logits_;
    return logits_;
}

// ---- sampling ----------------------------------------------------------------

TokenId sample_token(std::span<const double> logits, double temperature, const Vocabulary& vocab,
                     std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(vocab.total());
    const auto bos = static_cast<std::size_t>(vocab.bos());
    if (logits.size() != n) throw ModelError("sample_token: logits size does not match vocabulary");
    if (temperature <= 0.0) {
        std::size_t best = bos == 0 ? 1 : 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j != bos && logits[j] > logits[best]) best = j;
        }
        return static_cast<TokenId>(best);
    }
    double mx = -1e300;
    for (std::size_t j = 0; j < n; ++j)
        if (j != bos) mx = std::max(mx, logits[j] / temperature);
    std::vector<double> w(n, 0.0);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == bos) continue;
        w[j] = std::exp(logits[j] / temperature - mx);
        z += w[j];
    }
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * z;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == bos) continue;
        acc += w[j];
        last = j;
        if (u < acc) return static_cast<TokenId>(j);
    }
    return static_cast<TokenId>(last);
}

DualTokenStream generate_free(const ModelParams& params, const DualTokenStream& prompt,
                              std::size_t steps, const SamplingConfig& sampling) {
    const auto& cfg = params.config;
    const Vocabulary vocab = cfg.vocabulary();
    const std::size_t D = cfg.depth;
    if (!prompt.empty()) {
        if (prompt.depth() != D) throw ModelError("generate_free: prompt depth mismatch");
        prompt.validate(vocab);
    }
    const std::size_t total_steps = 1 + prompt.steps() + steps;
    if (total_steps > cfg.max_steps) {
        throw ModelError("generate_free: " + std::to_string(total_steps) +
                         " pair-steps exceed capacity of " + std::to_string(cfg.max_steps));
    }
    IncrementalDecoder dec(params);
    for (std::size_t i = 0; i < 2 * D; ++i) dec.commit(vocab.bos());
    for (std::size_t t = 0; t < prompt.steps(); ++t)
        for (Channel c : {Channel::A, Channel::B})
            for (std::size_t d = 0; d < D; ++d) dec.commit(prompt.at(c, t, d));

    std::mt19937_64 rng[2] = {std::mt19937_64(sampling.seed_a), std::mt19937_64(sampling.seed_b)};
    std::vector<TokenId> a = prompt.tokens(Channel::A);
    std::vector<TokenId> b = prompt.tokens(Channel::B);
    for (std::size_t s = 0; s < steps; ++s) {
        for (Channel c : {Channel::A, Channel::B}) {
            auto& out = c == Channel::A ? a : b;
            for (std::size_t d = 0; d < D; ++d) {
                const TokenId tok =
                    sample_token(dec.last_logits(c), sampling.temperature, vocab, rng[index_of(c)]);
                dec.commit(tok);
                out.push_back(tok);
            }
        }
    }
    const double rate = prompt.empty() ? default_frame_rate_hz : prompt.frame_rate_hz();
    return DualTokenStream(prompt.steps() + steps, D, std::move(a), std::move(b), rate);
}

// ---- ConversationSession -----------------------------------------------------

ConversationSession::ConversationSession(const ModelParams& params, ChunkConfig chunk,
                                         SamplingConfig sampling)
    : params_(&params), chunk_(chunk), sampling_(sampling), decoder_(params),
      rng_b_(sampling.seed_b) {
    if (chunk_.frames < 1) throw ModelError("chunk size must be >= 1 frame");
    const Vocabulary vocab = params.config.vocabulary();
    for (std::size_t i = 0; i < 2 * params.config.depth; ++i) decoder_.commit(vocab.bos());
}

void ConversationSession::push_user_frame(std::vector<TokenId> frame) {
    const auto& cfg = params_->config;
    const Vocabulary vocab = cfg.vocabulary();
    if (frame.size() != cfg.depth) {
        throw SequenceError("user frame has " + std::to_string(frame.size()) + " tokens, expected " +
                            std::to_string(cfg.depth));
    }
    for (TokenId t : frame) {
        if (!vocab.valid(t) || t == vocab.bos()) {
            throw SequenceError("malformed user token " + std::to_string(t));
        }
    }
    pending_.push_back(std::move(frame));
}

std::vector<std::vector<TokenId>> ConversationSession::poll() {
    std::vector<std::vector<TokenId>> out;
    const std::size_t group = chunk_.eager ? 1 : chunk_.frames;
    while (pending_.size() >= group) {
        auto frames = process(group);
        out.insert(out.end(), frames.begin(), frames.end());
    }
    return out;
}

std::vector<std::vector<TokenId>> ConversationSession::finish() {
    auto out = poll();
    if (!pending_.empty()) {
        auto rest = process(pending_.size());
        out.insert(out.end(), rest.begin(), rest.end());
    }
    return out;
}

std::vector<std::vector<TokenId>> ConversationSession::process(std::size_t frames) {
    const auto& cfg = params_->config;
    const Vocabulary vocab = cfg.vocabulary();
    const std::size_t D = cfg.depth;
    RoundLog log;
    log.round = rounds_.size() + 1;
    const auto start = Clock::now();
    bool first = true;
    std::vector<std::vector<TokenId>> out;
    for (std::size_t k = 0; k < frames; ++k) {
        std::vector<TokenId> user = std::move(pending_.front());
        pending_.pop_front();
        TokenId head = 0;
        if (chunk_.sample_before_user_commit) {
            head = sample_token(decoder_.last_logits(Channel::B), sampling_.temperature, vocab, rng_b_);
        }
        for (TokenId t : user) decoder_.commit(t);
        if (!chunk_.sample_before_user_commit) {
            head = sample_token(decoder_.last_logits(Channel::B), sampling_.temperature, vocab, rng_b_);
        }
        if (first) {
            log.latency_ms = elapsed_ms(start);
            first = false;
        }
        std::vector<TokenId> reply{head};
        decoder_.commit(head);
        for (std::size_t d = 1; d < D; ++d) {
            const TokenId t =
                sample_token(decoder_.last_logits(Channel::B), sampling_.temperature, vocab, rng_b_);
            decoder_.commit(t);
            reply.push_back(t);
        }
        log.user_tokens += D;
        log.emitted_tokens += D;
        out.push_back(std::move(reply));
    }
    consumed_ += frames;
    emitted_ += frames;
    log.cache_bytes = decoder_.cache().bytes();
    log.committed = decoder_.committed();
    rounds_.push_back(log);
    return out;
}

// ---- benchmark ---------------------------------------------------------------

namespace {

std::vector<TokenId> random_user_frame(const Vocabulary& vocab, std::size_t depth,
                                       std::mt19937_64& rng) {
    std::uniform_int_distribution<TokenId> tok(0, vocab.content_size);  // includes SIL
    std::vector<TokenId> f(depth);
    for (auto& t : f) t = tok(rng);
    return f;
}

}  // namespace

BenchResult bench_latency(const ModelParams& params, const BenchConfig& config) {
    const Vocabulary vocab = params.config.vocabulary();
    const std::size_t D = params.config.depth;
    ChunkConfig chunk = config.chunk;
    chunk.eager = false;
    SamplingConfig sampling{config.temperature, config.seed, config.seed + 1};

    if (config.warmup_rounds > 0) {
        ConversationSession warm(params, chunk, sampling);
        std::mt19937_64 rng(config.seed ^ 0x5bd1e995u);
        for (std::size_t r = 0; r < config.warmup_rounds; ++r) {
            for (std::size_t k = 0; k < chunk.frames; ++k) warm.push_user_frame(random_user_frame(vocab, D, rng));
            warm.poll();
        }
    }

    BenchResult result;
    ConversationSession session(params, chunk, sampling);
    std::mt19937_64 rng(config.seed);
    for (std::size_t r = 0; r < config.rounds; ++r) {
        for (std::size_t k = 0; k < chunk.frames; ++k) session.push_user_frame(random_user_frame(vocab, D, rng));
        auto frames = session.poll();
        result.generated.insert(result.generated.end(), frames.begin(), frames.end());
    }
    result.rounds = session.rounds();
    return result;
}

double linear_fit_r2(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return 0.0;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) return 0.0;
    if (syy == 0.0) return 1.0;
    return (sxy * sxy) / (sxx * syy);
}

}  // namespace ntpp
