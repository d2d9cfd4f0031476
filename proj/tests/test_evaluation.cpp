#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ntpp/evaluation.hpp"
#include "ntpp/synthetic.hpp"
#include "ntpp/train.hpp"

using namespace ntpp;

namespace {

ModelConfig small() {
    ModelConfig c;
    c.d_model = 16;
    c.n_layers = 1;
    c.n_heads = 2;
    c.vocab = 8;
    c.ffn_mult = 2;
    c.max_steps = 128;
    return c;
}

struct Fixture {
    SyntheticCorpus corpus;
    ModelParams params;
    EventReport reference;
    ContinuationConfig cfg;

    Fixture() {
        DialogueProfile p;
        p.vocab = 8;
        corpus = generate(p, 400, 12);
        TrainHyper h;
        h.steps = 30;
        h.batch = 2;
        h.window = 24;
        h.lr = 1e-2;
        params = train(small(), corpus.streams, h).params;
        reference = report(corpus.traces);
        cfg.prompt_frames = 20;
        cfg.continuation_frames = 80;
    }
};

}  // namespace

TEST_CASE("continuations have the requested length and are seeded") {
    Fixture f;
    const auto a = continue_corpus(f.params, f.corpus.streams, f.cfg);
    REQUIRE(a.size() == f.corpus.streams.size());
    for (const auto& s : a) CHECK(s.steps() == 80);
    CHECK(continue_corpus(f.params, f.corpus.streams, f.cfg) == a);
    ContinuationConfig other = f.cfg;
    other.seed = 2;
    CHECK(continue_corpus(f.params, f.corpus.streams, other) != a);
}

TEST_CASE("tied channel embeddings give exactly swapped outputs and zero robustness") {
    Fixture f;
    tie_channel_rows(f.params);
    const auto orig = continue_corpus(f.params, f.corpus.streams, f.cfg);
    std::vector<DualTokenStream> swapped_prompts;
    for (const auto& s : f.corpus.streams) swapped_prompts.push_back(swap_channels(s));
    const auto swapped = continue_corpus(f.params, swapped_prompts, f.cfg, true);
    for (std::size_t i = 0; i < orig.size(); ++i) CHECK(swapped[i] == swap_channels(orig[i]));

    const SwapEvalResult r = swap_eval(f.params, f.corpus.streams, f.reference, f.cfg);
    for (const auto& [k, v] : r.robustness.metrics) {
        CHECK(v.occurrences_per_min == 0.0);
        CHECK(v.duration_per_min == 0.0);
    }
}

TEST_CASE("untied embeddings report finite robustness") {
    Fixture f;
    const SwapEvalResult r = swap_eval(f.params, f.corpus.streams, f.reference, f.cfg);
    REQUIRE(r.robustness.metrics.size() == 4);
    for (const auto& [k, v] : r.robustness.metrics) {
        CHECK(std::isfinite(v.occurrences_per_min));
        CHECK(std::isfinite(v.duration_per_min));
        CHECK(v.occurrences_per_min >= 0.0);
        // |Δo - Δs| never exceeds Δo + Δs.
        CHECK(v.occurrences_per_min <= r.delta_original.metrics.at(k).occurrences_per_min +
                                           r.delta_swapped.metrics.at(k).occurrences_per_min + 1e-12);
    }
}

TEST_CASE("temperature sweep yields one finite row per temperature") {
    Fixture f;
    const auto rows = temperature_sweep(f.params, f.corpus.streams, f.reference, {0.1, 0.5, 0.9}, f.cfg);
    REQUIRE(rows.size() == 3);
    const std::string csv = temperature_table_csv(rows);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.find("temp=0.5,") != std::string::npos);
    for (const auto& r : rows) {
        REQUIRE(r.delta.metrics.size() == 4);
        for (const auto& [k, v] : r.delta.metrics) {
            CHECK(std::isfinite(v.occurrences_per_min));
            CHECK(std::isfinite(v.duration_per_min));
        }
    }
    CHECK(temperature_table_csv(temperature_sweep(f.params, f.corpus.streams, f.reference, {0.1, 0.5, 0.9}, f.cfg)) == csv);
}
