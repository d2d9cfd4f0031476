#pragma once

// Synthetic two-speaker dialogue with known turn-taking structure.
//
// Activity comes from a semi-Markov process: a speaker holds the floor for a
// turn made of IPUs separated by pauses, then hands over through a gap, an
// overlap, or an interruption (the next speaker starts inside the current
// IPU and the current speaker stops within a bounded window). Backchannels
// are short IPUs of the listener placed strictly inside the speaker's IPUs.
// Voiced frames carry tokens from a per-speaker order-k Markov chain.

#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "ntpp/analyzer.hpp"
#include "ntpp/sequence.hpp"

namespace ntpp {

struct DialogueProfile {
    double frame_rate_hz = default_frame_rate_hz;
    double silence_ms = default_silence_ms;  // analyzer threshold the process respects
    double mean_ipu_frames = 60.0;
    double mean_pause_frames = 16.0;
    double mean_gap_frames = 12.0;
    double pause_rate = 0.4;          // P(another IPU in the same turn)
    double overlap_rate = 0.2;        // P(handover by overlap)
    double interruption_rate = 0.1;   // P(handover by interruption)
    double backchannel_rate = 0.2;    // P(backchannel inside an eligible IPU)
    std::size_t max_overlap_frames = 16;
    std::size_t interruption_window_frames = 12;  // speaker stops within this many frames
    std::size_t min_event_frames = 1;
    bool single_speaker = false;      // only channel A ever speaks
    std::size_t markov_order = 1;
    std::int32_t vocab = 32;
    std::uint64_t seed = 1;

    std::size_t threshold() const;
    /// Throws SequenceError when a field is out of range.
    void validate() const;
};

nlohmann::json profile_to_json(const DialogueProfile& p);
DialogueProfile profile_from_json(const nlohmann::json& j, const DialogueProfile& defaults = {});

/// Counts of the process's random decisions, for rate checks.
struct GenerationStats {
    std::size_t handovers = 0;
    std::size_t overlap_handovers = 0;       // handovers with both speakers voiced
    std::size_t interruptions = 0;
    std::size_t overlap_draws = 0;
    std::size_t ipu_draws = 0;
    double ipu_frames_drawn = 0.0;
    std::size_t pause_draws = 0;
    double pause_frames_drawn = 0.0;
    std::size_t continue_decisions = 0;      // IPU end inside the stream
    std::size_t pauses_chosen = 0;
    std::size_t backchannel_eligible = 0;
    std::size_t backchannels = 0;

    void merge(const GenerationStats& o);
};

struct SyntheticCorpus {
    std::vector<DualTokenStream> streams;
    std::vector<EventTrace> traces;  // ground truth, one per stream
    GenerationStats stats;
};

/// n streams of T frames (D = 1). Stream i uses a seed derived from
/// (profile.seed, i); the Markov chains depend on profile.seed only.
SyntheticCorpus generate(const DialogueProfile& profile, std::size_t frames, std::size_t n_streams);

/// Expands each frame token x to depth D via a seeded hash of (x, d).
/// Depth 1 keeps x, so the expansion is invertible; SIL becomes D SILs.
DualTokenStream to_rvq(const DualTokenStream& stream, std::size_t depth, std::int32_t vocab,
                       std::uint64_t seed = 0x5eed);

}  // namespace ntpp
