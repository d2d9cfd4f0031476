#pragma once

// Corpus-level turn-taking evaluation of a model: continuation generation
// from prompts, |Δ| against a reference report, and speaker-swap robustness.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ntpp/analyzer.hpp"
#include "ntpp/model.hpp"
#include "ntpp/sequence.hpp"
#include "ntpp/streaming.hpp"

namespace ntpp {

struct ContinuationConfig {
    std::size_t prompt_frames = 40;
    std::size_t continuation_frames = 160;
    double temperature = 0.9;
    std::uint64_t seed = 1;
    double silence_ms = default_silence_ms;
};

/// Seeds of the two channel streams for prompt i.
SamplingConfig continuation_sampling(const ContinuationConfig& cfg, std::size_t i);

/// Continues the first prompt_frames of every prompt; returns only the
/// generated continuation_frames of each.
std::vector<DualTokenStream> continue_corpus(const ModelParams& params,
                                             const std::vector<DualTokenStream>& prompts,
                                             const ContinuationConfig& cfg, bool swap_seeds = false);

EventReport analyze_corpus(const std::vector<DualTokenStream>& corpus, TokenId sil,
                           double silence_ms = default_silence_ms);

struct SwapEvalResult {
    EventReport original;
    EventReport swapped;
    DeltaReport delta_original;
    DeltaReport delta_swapped;
    DeltaReport robustness;
};

/// Runs continuation on the prompts and on their channel-swapped copies
/// (with the per-channel seeds exchanged as well), takes |Δ| of each against
/// the reference, and reports |Δ_original - Δ_swapped|.
SwapEvalResult swap_eval(const ModelParams& params, const std::vector<DualTokenStream>& prompts,
                         const EventReport& reference, const ContinuationConfig& cfg);

struct TemperatureRow {
    double temperature = 0.0;
    EventReport generated;
    DeltaReport delta;
};

std::vector<TemperatureRow> temperature_sweep(const ModelParams& params,
                                              const std::vector<DualTokenStream>& prompts,
                                              const EventReport& reference,
                                              const std::vector<double>& temperatures,
                                              const ContinuationConfig& cfg);

/// table_header() plus one row per temperature, named "temp=<t>".
std::string temperature_table_csv(const std::vector<TemperatureRow>& rows);

}  // namespace ntpp
