#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "ntpp/streaming.hpp"

using namespace ntpp;

namespace {

ModelConfig small(std::size_t depth) {
    ModelConfig c;
    c.d_model = 16;
    c.n_layers = 2;
    c.n_heads = 2;
    c.vocab = 6;
    c.depth = depth;
    c.max_steps = 80;
    c.ffn_mult = 2;
    c.seed = 9;
    return c;
}

ModelParams sharpened(const ModelConfig& c) {
    ModelParams p = init_params(c);
    for (auto& t : p.tensors())
        if (t.shape().size() == 2)
            for (auto& x : t.mutable_data()) x *= 6.0;
    return p;
}

DualTokenStream random_stream(std::size_t T, std::size_t D, std::int32_t V, std::mt19937_64& rng) {
    std::uniform_int_distribution<TokenId> tok(0, V);
    std::vector<TokenId> a(T * D), b(T * D);
    for (auto& x : a) x = tok(rng);
    for (auto& x : b) x = tok(rng);
    return DualTokenStream(T, D, a, b);
}

std::vector<std::vector<TokenId>> run_session(const ModelParams& p, const std::vector<std::vector<TokenId>>& user,
                                              ChunkConfig chunk, std::uint64_t seed = 5) {
    ConversationSession s(p, chunk, SamplingConfig{0.9, 1, seed});
    std::vector<std::vector<TokenId>> out;
    for (const auto& f : user) {
        s.push_user_frame(f);
        auto got = s.poll();
        out.insert(out.end(), got.begin(), got.end());
    }
    auto rest = s.finish();
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
}

}  // namespace

TEST_CASE("incremental logits equal full-forward logits") {
    for (std::size_t D : {1u, 2u}) {
        const ModelParams p = sharpened(small(D));
        std::mt19937_64 rng(D);
        const auto stream = random_stream(12, D, 6, rng);
        const auto seq = model_input(p, stream);
        Tensor full;
        {
            NoGradGuard g;
            full = forward(p, seq);
        }
        IncrementalDecoder dec(p);
        double worst = 0.0;
        for (std::size_t i = 0; i < seq.size(); ++i) {
            const auto row = dec.commit(seq.tokens[i]);
            for (std::size_t k = 0; k < row.size(); ++k) worst = std::max(worst, std::fabs(row[k] - full.at(i, k)));
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("cache bytes follow the closed form and one cache lives per session") {
    const ModelParams p = init_params(small(2));
    const std::size_t before = KvCache::live_count();
    {
        IncrementalDecoder dec(p);
        CHECK(KvCache::live_count() == before + 1);
        for (std::size_t n = 1; n <= 20; ++n) {
            dec.commit(0);
            CHECK(dec.cache().bytes() == n * p.config.n_layers * 2 * p.config.d_model * 8);
            CHECK(dec.cache().bytes() == expected_cache_bytes(n, p.config.n_layers, p.config.d_model));
        }
        ConversationSession s(p, ChunkConfig{}, SamplingConfig{});
        CHECK(KvCache::live_count() == before + 2);
    }
    CHECK(KvCache::live_count() == before);
}

TEST_CASE("capacity is enforced") {
    const ModelParams p = init_params(small(1));
    IncrementalDecoder dec(p, 2);
    for (int i = 0; i < 4; ++i) dec.commit(0);
    CHECK_THROWS_AS(dec.commit(0), ModelError);
    CHECK_THROWS_AS(generate_free(p, DualTokenStream(), 80, SamplingConfig{}), ModelError);
}

TEST_CASE("greedy decoding is the argmax of the logits and deterministic") {
    const ModelParams p = sharpened(small(1));
    const auto g1 = generate_free(p, DualTokenStream(), 10, SamplingConfig{0.0, 1, 2});
    const auto g2 = generate_free(p, DualTokenStream(), 10, SamplingConfig{0.0, 77, 78});
    CHECK(g1 == g2);
    IncrementalDecoder dec(p);
    const Vocabulary v = p.config.vocabulary();
    dec.commit(v.bos());
    dec.commit(v.bos());
    for (std::size_t t = 0; t < 10; ++t) {
        for (Channel c : {Channel::A, Channel::B}) {
            const auto logits = dec.last_logits(c);
            std::size_t best = 0;
            for (std::size_t k = 1; k < static_cast<std::size_t>(v.bos()); ++k)
                if (logits[k] > logits[best]) best = k;
            CHECK(g1.at(c, t, 0) == static_cast<TokenId>(best));
            dec.commit(g1.at(c, t, 0));
        }
    }
}

TEST_CASE("sampling never emits BOS and temperatures give distinct corpora") {
    const ModelParams p = sharpened(small(1));
    const Vocabulary v = p.config.vocabulary();
    std::vector<DualTokenStream> outs;
    for (double temp : {0.1, 0.5, 0.9}) {
        outs.push_back(generate_free(p, DualTokenStream(), 40, SamplingConfig{temp, 3, 4}));
        for (Channel c : {Channel::A, Channel::B})
            for (TokenId t : outs.back().tokens(c)) CHECK(t != v.bos());
    }
    CHECK(outs[0] != outs[1]);
    CHECK(outs[1] != outs[2]);
}

TEST_CASE("chunks are consumed and emitted in groups of lambda * D tokens") {
    const ModelParams p = init_params(small(2));
    ConversationSession s(p, ChunkConfig{5, false, false}, SamplingConfig{0.8, 1, 2});
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<TokenId> tok(0, 6);
    for (std::size_t k = 0; k < 23; ++k) {
        s.push_user_frame({tok(rng), tok(rng)});
        const auto out = s.poll();
        if ((k + 1) % 5 == 0) {
            CHECK(out.size() == 5);
        } else {
            CHECK(out.empty());
        }
    }
    CHECK(s.buffered_frames() == 3);
    CHECK(s.finish().size() == 3);
    CHECK(s.consumed_frames() == s.emitted_frames());
    for (std::size_t r = 0; r + 1 < s.rounds().size(); ++r) {
        CHECK(s.rounds()[r].user_tokens == 10);
        CHECK(s.rounds()[r].emitted_tokens == 10);
    }
}

TEST_CASE("lambda = 1 alternates a_1, b_1, a_2, b_2") {
    const ModelParams p = sharpened(small(1));
    const std::vector<std::vector<TokenId>> user = {{1}, {2}, {6}, {3}};
    const auto out = run_session(p, user, ChunkConfig{1, false, false});
    // Replay: the cache must hold BOS, a1, b1, a2, b2, ...
    IncrementalDecoder dec(p);
    dec.commit(7);
    dec.commit(7);
    for (std::size_t k = 0; k < user.size(); ++k) {
        dec.commit(user[k][0]);
        CHECK(dec.next_meta().channel == Channel::B);
        dec.commit(out[k][0]);
    }
    CHECK(out.size() == 4);
}

TEST_CASE("b_k does not depend on a_k") {
    const ModelParams p = sharpened(small(2));
    std::vector<std::vector<TokenId>> user = {{1, 2}, {3, 4}, {5, 0}, {6, 6}, {2, 1}};
    const auto base = run_session(p, user, ChunkConfig{5, false, false});
    const auto early = run_session(p, user, ChunkConfig{5, false, true});
    CHECK(base == early);
    // Change only the last user frame: every reply up to and including that
    // frame's reply stays the same.
    user[4] = {0, 3};
    const auto changed = run_session(p, user, ChunkConfig{5, false, false});
    CHECK(changed[4][0] == base[4][0]);
    CHECK(std::vector(changed.begin(), changed.begin() + 4) == std::vector(base.begin(), base.begin() + 4));
}

TEST_CASE("eager and chunked modes produce the same replies") {
    const ModelParams p = sharpened(small(1));
    std::vector<std::vector<TokenId>> user;
    for (TokenId t = 0; t < 12; ++t) user.push_back({t % 7});
    CHECK(run_session(p, user, ChunkConfig{4, false, false}) == run_session(p, user, ChunkConfig{4, true, false}));
}

TEST_CASE("malformed user frames are rejected") {
    const ModelParams p = init_params(small(2));
    ConversationSession s(p, ChunkConfig{}, SamplingConfig{});
    CHECK_THROWS_AS(s.push_user_frame({1}), SequenceError);
    CHECK_THROWS_AS(s.push_user_frame({1, 7}), SequenceError);
    CHECK_THROWS_AS(s.push_user_frame({1, -2}), SequenceError);
    CHECK_NOTHROW(s.push_user_frame({1, 6}));
}

TEST_CASE("benchmark memory grows linearly and runs are reproducible") {
    const ModelParams p = init_params(small(1));
    BenchConfig cfg;
    cfg.rounds = 8;
    const BenchResult r1 = bench_latency(p, cfg);
    const BenchResult r2 = bench_latency(p, cfg);
    CHECK(r1.generated == r2.generated);
    std::vector<double> x, y;
    for (const auto& r : r1.rounds) {
        x.push_back(static_cast<double>(r.committed));
        y.push_back(static_cast<double>(r.cache_bytes));
        CHECK(r.cache_bytes == expected_cache_bytes(r.committed, 2, 16));
        CHECK(r.latency_ms >= 0.0);
    }
    CHECK(linear_fit_r2(x, y) > 0.999);
}
