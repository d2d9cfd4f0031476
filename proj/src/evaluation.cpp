#include "ntpp/evaluation.hpp"

#include <cstdio>

#include "ntpp/streaming.hpp"

namespace ntpp {

SamplingConfig continuation_sampling(const ContinuationConfig& cfg, std::size_t i) {
    SamplingConfig s;
    s.temperature = cfg.temperature;
    s.seed_a = cfg.seed * 1000003ULL + 2 * i + 1;
    s.seed_b = cfg.seed * 1000003ULL + 2 * i + 2;
    return s;
}

std::vector<DualTokenStream> continue_corpus(const ModelParams& params,
                                             const std::vector<DualTokenStream>& prompts,
                                             const ContinuationConfig& cfg, bool swap_seeds) {
    if (cfg.prompt_frames < 1) throw ModelError("continuation needs at least one prompt frame");
    std::vector<DualTokenStream> out;
    out.reserve(prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const auto& p = prompts[i];
        if (p.steps() < cfg.prompt_frames) throw ModelError("prompt shorter than prompt_frames");
        SamplingConfig s = continuation_sampling(cfg, i);
        if (swap_seeds) std::swap(s.seed_a, s.seed_b);
        const DualTokenStream full =
            generate_free(params, p.slice(0, cfg.prompt_frames), cfg.continuation_frames, s);
        out.push_back(full.slice(cfg.prompt_frames, full.steps()));
    }
    return out;
}

EventReport analyze_corpus(const std::vector<DualTokenStream>& corpus, TokenId sil, double silence_ms) {
    std::vector<EventTrace> traces;
    traces.reserve(corpus.size());
    for (const auto& s : corpus) traces.push_back(segment(s, sil, silence_ms));
    return report(traces);
}

SwapEvalResult swap_eval(const ModelParams& params, const std::vector<DualTokenStream>& prompts,
                         const EventReport& reference, const ContinuationConfig& cfg) {
    const TokenId sil = params.config.vocabulary().sil();
    std::vector<DualTokenStream> swapped_prompts;
    swapped_prompts.reserve(prompts.size());
    for (const auto& p : prompts) swapped_prompts.push_back(swap_channels(p));

    SwapEvalResult r;
    r.original = analyze_corpus(continue_corpus(params, prompts, cfg), sil, cfg.silence_ms);
    r.swapped = analyze_corpus(continue_corpus(params, swapped_prompts, cfg, true), sil, cfg.silence_ms);
    r.delta_original = delta(r.original, reference);
    r.delta_swapped = delta(r.swapped, reference);
    r.robustness = robustness(r.delta_original, r.delta_swapped);
    return r;
}

std::vector<TemperatureRow> temperature_sweep(const ModelParams& params,
                                              const std::vector<DualTokenStream>& prompts,
                                              const EventReport& reference,
                                              const std::vector<double>& temperatures,
                                              const ContinuationConfig& cfg) {
    const TokenId sil = params.config.vocabulary().sil();
    std::vector<TemperatureRow> rows;
    for (double t : temperatures) {
        ContinuationConfig c = cfg;
        c.temperature = t;
        TemperatureRow row;
        row.temperature = t;
        row.generated = analyze_corpus(continue_corpus(params, prompts, c), sil, c.silence_ms);
        row.delta = delta(row.generated, reference);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string temperature_table_csv(const std::vector<TemperatureRow>& rows) {
    std::string out = table_header() + "\n";
    for (const auto& r : rows) {
        char name[32];
        std::snprintf(name, sizeof name, "temp=%g", r.temperature);
        out += table_row(name, r.delta) + "\n";
    }
    return out;
}

}  // namespace ntpp
