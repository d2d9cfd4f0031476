#pragma once

// Incremental decoding with a single KV cache, free-running dual-channel
// generation, chunk-wise conditional conversation and latency benchmarking.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "ntpp/model.hpp"
#include "ntpp/sequence.hpp"

namespace ntpp {

/// Per-layer keys (after rotation) and values for every committed position,
/// stored in interleaved order. Entries are append-only.
class KvCache {
public:
    KvCache(std::size_t n_layers, std::size_t d_model, std::size_t capacity);
    ~KvCache();
    KvCache(const KvCache&) = delete;
    KvCache& operator=(const KvCache&) = delete;

    std::size_t committed() const { return committed_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t n_layers() const { return keys_.size(); }
    std::size_t d_model() const { return d_model_; }
    /// Bytes held by committed keys and values.
    std::size_t bytes() const;

    const double* key(std::size_t layer, std::size_t pos) const { return keys_[layer].data() + pos * d_model_; }
    const double* value(std::size_t layer, std::size_t pos) const { return values_[layer].data() + pos * d_model_; }

    void append(std::size_t layer, std::span<const double> key, std::span<const double> value);
    /// Marks the position whose per-layer entries were just appended as committed.
    void seal();

    /// Number of KvCache objects currently alive in the process.
    static std::size_t live_count();

private:
    std::size_t d_model_;
    std::size_t capacity_;
    std::size_t committed_ = 0;
    std::vector<std::vector<double>> keys_;
    std::vector<std::vector<double>> values_;
};

/// Closed-form single-cache footprint for n committed positions.
std::size_t expected_cache_bytes(std::size_t positions, std::size_t n_layers, std::size_t d_model);

/// Runs the transformer one interleaved position at a time against a KvCache.
/// Positions are committed in interleaved order; the position of the next
/// token is implied by the committed count.
class IncrementalDecoder {
public:
    explicit IncrementalDecoder(const ModelParams& params);
    IncrementalDecoder(const ModelParams& params, std::size_t capacity_steps);

    /// Commits one token and returns the logits at its position.
    std::span<const double> commit(TokenId token);

    std::size_t committed() const { return cache_->committed(); }
    PositionMeta next_meta() const;
    const KvCache& cache() const { return *cache_; }
    const ModelParams& params() const { return *params_; }
    /// Logits at the most recently committed position of channel c.
    std::span<const double> last_logits(Channel c) const { return last_logits_[index_of(c)]; }

private:
    const ModelParams* params_;
    std::unique_ptr<KvCache> cache_;
    std::vector<double> last_logits_[2];
    // scratch
    std::vector<double> x_, h_, q_, k_, v_, att_, ff_, scores_, logits_;
};

struct SamplingConfig {
    double temperature = 1.0;  // <= 0 means greedy argmax
    std::uint64_t seed_a = 1;
    std::uint64_t seed_b = 2;
};

/// Draws a token from softmax(logits / temperature), never BOS. The stream
/// only advances on non-greedy draws.
TokenId sample_token(std::span<const double> logits, double temperature, const Vocabulary& vocab,
                     std::mt19937_64& rng);

/// Commits BOS and the prompt, then generates `steps` new pair-steps. Each
/// channel draws from its own seeded stream.
DualTokenStream generate_free(const ModelParams& params, const DualTokenStream& prompt,
                              std::size_t steps, const SamplingConfig& sampling);

struct ChunkConfig {
    std::size_t frames = 5;  // lambda; a chunk carries frames * D tokens per channel
    bool eager = false;      // process each user frame on arrival instead of per chunk
    /// Draw b_k (first depth) before committing a_k. Results are identical
    /// either way; the flag exists to demonstrate it.
    bool sample_before_user_commit = false;
};

struct RoundLog {
    std::size_t round = 0;            // 1-based
    std::size_t user_tokens = 0;      // consumed in this round
    std::size_t emitted_tokens = 0;   // generated in this round
    double latency_ms = 0.0;          // chunk complete -> first generated token
    std::size_t cache_bytes = 0;      // after the round
    std::size_t committed = 0;        // positions after the round
};

/// Conditional generation of channel B against a streamed channel A.
/// User frames are queued FIFO; a chunk is processed only once all of its
/// frames have arrived (unless eager). Within a chunk, frame k of A is
/// committed at its A slot, then B's frame k is sampled and committed.
class ConversationSession {
public:
    ConversationSession(const ModelParams& params, ChunkConfig chunk, SamplingConfig sampling);

    /// Queues one user frame of D tokens. Throws on malformed tokens.
    void push_user_frame(std::vector<TokenId> frame);
    /// Processes every complete chunk; returns the B frames generated.
    std::vector<std::vector<TokenId>> poll();
    /// Processes any remaining partial chunk.
    std::vector<std::vector<TokenId>> finish();

    std::size_t buffered_frames() const { return pending_.size(); }
    std::size_t consumed_frames() const { return consumed_; }
    std::size_t emitted_frames() const { return emitted_; }
    const std::vector<RoundLog>& rounds() const { return rounds_; }
    const IncrementalDecoder& decoder() const { return decoder_; }

private:
    std::vector<std::vector<TokenId>> process(std::size_t frames);

    const ModelParams* params_;
    ChunkConfig chunk_;
    SamplingConfig sampling_;
    IncrementalDecoder decoder_;
    std::mt19937_64 rng_b_;
    std::deque<std::vector<TokenId>> pending_;
    std::size_t consumed_ = 0;
    std::size_t emitted_ = 0;
    std::vector<RoundLog> rounds_;
};

struct BenchConfig {
    std::size_t rounds = 20;
    ChunkConfig chunk{};
    std::size_t warmup_rounds = 2;
    double temperature = 0.8;
    std::uint64_t seed = 7;
};

/// One conversation of `rounds` chunks with seeded random user frames.
/// Warmup rounds run on a separate session and are discarded.
struct BenchResult {
    std::vector<RoundLog> rounds;
    std::vector<std::vector<TokenId>> generated;  // B frames, for determinism checks
};
BenchResult bench_latency(const ModelParams& params, const BenchConfig& config);

/// Coefficient of determination of the least-squares line through (x, y).
double linear_fit_r2(std::span<const double> x, std::span<const double> y);

}  // namespace ntpp
