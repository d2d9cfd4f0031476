#include "ntpp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>

namespace ntpp {

using nlohmann::json;

std::size_t DialogueProfile::threshold() const { return threshold_frames(silence_ms, frame_rate_hz); }

void DialogueProfile::validate() const {
    auto rate = [](double r, const char* name) {
        if (!(r >= 0.0 && r <= 1.0)) throw SequenceError(std::string(name) + " must lie in [0, 1]");
    };
    rate(pause_rate, "pause_rate");
    rate(overlap_rate, "overlap_rate");
    rate(interruption_rate, "interruption_rate");
    rate(backchannel_rate, "backchannel_rate");
    if (overlap_rate + interruption_rate > 1.0) {
        throw SequenceError("overlap_rate + interruption_rate exceeds 1");
    }
    if (!(mean_ipu_frames >= 1.0 && mean_pause_frames >= 1.0 && mean_gap_frames >= 1.0)) {
        throw SequenceError("mean event lengths must be at least one frame");
    }
    if (min_event_frames < 1) throw SequenceError("min_event_frames must be at least 1");
    if (max_overlap_frames < 1 || interruption_window_frames < 1) {
        throw SequenceError("overlap and interruption windows must be at least one frame");
    }
    if (vocab < 1) throw SequenceError("vocab must be positive");
    if (markov_order < 1) throw SequenceError("markov_order must be at least 1");
    double rows = 1.0;
    for (std::size_t k = 0; k < markov_order; ++k) rows *= vocab;
    if (rows * vocab > 4.0e6) throw SequenceError("markov chain table too large (vocab^(k+1) > 4e6)");
    try {
        (void)threshold();
    } catch (const AnalysisError& e) {
        throw SequenceError(e.what());
    }
}

json profile_to_json(const DialogueProfile& p) {
    return json{{"frame_rate_hz", p.frame_rate_hz},
                {"silence_ms", p.silence_ms},
                {"mean_ipu_frames", p.mean_ipu_frames},
                {"mean_pause_frames", p.mean_pause_frames},
                {"mean_gap_frames", p.mean_gap_frames},
                {"pause_rate", p.pause_rate},
                {"overlap_rate", p.overlap_rate},
                {"interruption_rate", p.interruption_rate},
                {"backchannel_rate", p.backchannel_rate},
                {"max_overlap_frames", p.max_overlap_frames},
                {"interruption_window_frames", p.interruption_window_frames},
                {"min_event_frames", p.min_event_frames},
                {"single_speaker", p.single_speaker},
                {"markov_order", p.markov_order},
                {"vocab", p.vocab},
                {"seed", p.seed}};
}

DialogueProfile profile_from_json(const json& j, const DialogueProfile& d) {
    DialogueProfile p = d;
    try {
        p.frame_rate_hz = j.value("frame_rate_hz", p.frame_rate_hz);
        p.silence_ms = j.value("silence_ms", p.silence_ms);
        p.mean_ipu_frames = j.value("mean_ipu_frames", p.mean_ipu_frames);
        p.mean_pause_frames = j.value("mean_pause_frames", p.mean_pause_frames);
        p.mean_gap_frames = j.value("mean_gap_frames", p.mean_gap_frames);
        p.pause_rate = j.value("pause_rate", p.pause_rate);
        p.overlap_rate = j.value("overlap_rate", p.overlap_rate);
        p.interruption_rate = j.value("interruption_rate", p.interruption_rate);
        p.backchannel_rate = j.value("backchannel_rate", p.backchannel_rate);
        p.max_overlap_frames = j.value("max_overlap_frames", p.max_overlap_frames);
        p.interruption_window_frames = j.value("interruption_window_frames", p.interruption_window_frames);
        p.min_event_frames = j.value("min_event_frames", p.min_event_frames);
        p.single_speaker = j.value("single_speaker", p.single_speaker);
        p.markov_order = j.value("markov_order", p.markov_order);
        p.vocab = j.value("vocab", p.vocab);
        p.seed = j.value("seed", p.seed);
    } catch (const json::exception& e) {
        throw SequenceError(std::string("malformed profile: ") + e.what());
    }
    p.validate();
    return p;
}

void GenerationStats::merge(const GenerationStats& o) {
    handovers += o.handovers;
    overlap_handovers += o.overlap_handovers;
    interruptions += o.interruptions;
    overlap_draws += o.overlap_draws;
    ipu_draws += o.ipu_draws;
    ipu_frames_drawn += o.ipu_frames_drawn;
    pause_draws += o.pause_draws;
    pause_frames_drawn += o.pause_frames_drawn;
    continue_decisions += o.continue_decisions;
    pauses_chosen += o.pauses_chosen;
    backchannel_eligible += o.backchannel_eligible;
    backchannels += o.backchannels;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// min + Geometric on {0, 1, ...}, so the mean is max(mean, min).
std::size_t draw_length(std::mt19937_64& rng, double mean, std::size_t min) {
    const double extra = mean - static_cast<double>(min);
    if (extra <= 0.0) return min;
    return min + std::geometric_distribution<std::size_t>(1.0 / (1.0 + extra))(rng);
}

struct MarkovChain {
    std::size_t order;
    std::size_t states;
    std::int32_t vocab;
    mutable std::vector<std::discrete_distribution<int>> rows;  // stateless, operator() is non-const
};

MarkovChain make_chain(const DialogueProfile& p, std::uint64_t seed) {
    MarkovChain m{p.markov_order, 1, p.vocab, {}};
    for (std::size_t k = 0; k < p.markov_order; ++k) m.states *= static_cast<std::size_t>(p.vocab);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    m.rows.reserve(m.states);
    std::vector<double> w(static_cast<std::size_t>(p.vocab));
    for (std::size_t s = 0; s < m.states; ++s) {
        for (auto& x : w) x = std::exp(2.5 * n01(rng));
        m.rows.emplace_back(w.begin(), w.end());
    }
    return m;
}

struct Ipu {
    Channel channel;
    std::size_t start;
    std::size_t end;
    bool backchannel = false;
    std::size_t floor = 0;  // the IPU may not end before this frame
};

struct Stream {
    DualTokenStream tokens;
    EventTrace trace;
    GenerationStats stats;
};

Stream generate_one(const DialogueProfile& p, std::size_t frames, std::uint64_t seed,
                    const MarkovChain chains[2]) {
    std::mt19937_64 rng(seed);
    Stream out;
    GenerationStats& st = out.stats;
    const std::size_t theta = p.threshold();
    const std::size_t min_ev = p.min_event_frames;
    const std::size_t T = frames;

    std::vector<Ipu> ipus;
    std::vector<std::vector<std::size_t>> turns;  // ipu indices per turn
    std::vector<Event> silences;
    std::vector<Event> overlaps;
    std::optional<std::size_t> last_end[2];

    Channel cur = (p.single_speaker || uniform01(rng) < 0.5) ? Channel::A : Channel::B;
    std::size_t t = draw_length(rng, p.mean_gap_frames, 0);
    std::size_t min_first_end = 0;

    while (t < T) {
        std::vector<std::size_t> turn;
        std::size_t s = t;
        bool stream_done = false;
        for (;;) {
            const std::size_t len = draw_length(rng, p.mean_ipu_frames, min_ev);
            ++st.ipu_draws;
            st.ipu_frames_drawn += static_cast<double>(len);
            const std::size_t e = std::max(s + len, min_first_end);
            turn.push_back(ipus.size());
            ipus.push_back({cur, s, e, false, min_first_end});
            min_first_end = 0;
            if (e >= T) {
                stream_done = true;
                break;
            }
            ++st.continue_decisions;
            const bool pause = p.single_speaker || uniform01(rng) < p.pause_rate;
            if (!pause) break;
            ++st.pauses_chosen;
            const std::size_t plen = draw_length(rng, p.mean_pause_frames, std::max(theta, min_ev));
            ++st.pause_draws;
            st.pause_frames_drawn += static_cast<double>(plen);
            silences.push_back({EventKind::pause, cur, e, e + plen});
            s = e + plen;
            if (s >= T) {
                stream_done = true;
                break;
            }
        }
        turns.push_back(std::move(turn));
        last_end[index_of(cur)] = ipus.back().end;
        if (stream_done) break;

        // Handover to the other speaker. Overlapping onsets lie inside the
        // current IPU and no earlier than the listener may speak again.
        Ipu& last = ipus.back();
        const Channel nxt = other(cur);
        const std::size_t earliest =
            last_end[index_of(nxt)] ? *last_end[index_of(nxt)] + theta : 0;
        const std::size_t lo = std::max(last.start + min_ev, earliest);
        ++st.handovers;
        const double r = uniform01(rng);
        std::optional<std::size_t> onset;
        if (r < p.interruption_rate + p.overlap_rate && last.end < lo + min_ev) {
            // Too short to be overlapped legally: the speaker holds on a little longer.
            last.end = lo + min_ev;
        }
        if (r < p.interruption_rate) {
            const std::size_t o = uniform_int(rng, lo, last.end - min_ev);
            const std::size_t w = uniform_int(rng, min_ev, std::max(min_ev, p.interruption_window_frames));
            last.end = std::min(last.end, std::max(o + w, last.floor));
            onset = o;
            ++st.interruptions;
        } else if (r < p.interruption_rate + p.overlap_rate) {
            const std::size_t hi = std::max(min_ev, std::min(p.max_overlap_frames, last.end - lo));
            onset = last.end - uniform_int(rng, min_ev, hi);
            ++st.overlap_draws;
        }
        if (!onset) onset = last.end + draw_length(rng, p.mean_gap_frames, min_ev);

        const std::size_t le = last.end;
        last_end[index_of(cur)] = le;
        std::size_t ns = *onset;
        if (last_end[index_of(nxt)] && ns < *last_end[index_of(nxt)] + theta) {
            ns = *last_end[index_of(nxt)] + theta;
        }
        if (ns < le) {
            overlaps.push_back({EventKind::overlap, std::nullopt, ns, le});
            ++st.overlap_handovers;
            min_first_end = le + min_ev;
        } else if (ns > le) {
            silences.push_back({EventKind::gap, std::nullopt, le, ns});
        }
        cur = nxt;
        t = ns;
    }

    // Truncate to the stream. An IPU cut below min_ev is dropped together with
    // the silence or overlap that leads into it.
    std::vector<Ipu> kept;
    std::vector<std::vector<std::size_t>> kept_turns;
    std::vector<std::size_t> dropped_starts;
    for (const auto& turn : turns) {
        std::vector<std::size_t> idx;
        for (std::size_t i : turn) {
            if (ipus[i].start >= T) continue;
            Ipu u = ipus[i];
            u.end = std::min(u.end, T);
            if (u.end - u.start < min_ev) {
                dropped_starts.push_back(u.start);
                continue;
            }
            idx.push_back(kept.size());
            kept.push_back(u);
        }
        if (!idx.empty()) kept_turns.push_back(std::move(idx));
    }
    std::vector<Event> events;
    const auto dropped = [&](std::size_t start) {
        return std::find(dropped_starts.begin(), dropped_starts.end(), start) != dropped_starts.end();
    };
    for (const auto& s : silences)
        if (s.end < T && !dropped(s.end)) events.push_back(s);
    for (auto o : overlaps) {
        if (o.start >= T || dropped(o.start)) continue;
        o.end = std::min(o.end, T);
        events.push_back(o);
    }

    // Backchannels, in time order of the speaker IPUs.
    if (!p.single_speaker) {
        std::vector<std::size_t> order(kept.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t x, std::size_t y) { return kept[x].start < kept[y].start; });
        const std::size_t bc_lo = std::min(min_ev, theta);
        for (std::size_t i : order) {
            const Ipu host = kept[i];
            const Channel listener = other(host.channel);
            const std::size_t len = uniform_int(rng, bc_lo, theta);
            const double u = uniform01(rng);
            if (host.end < host.start + len + 2) continue;
            std::vector<std::size_t> feasible;
            for (std::size_t bs = host.start + 1; bs + len + 1 <= host.end; ++bs) {
                bool ok = true;
                for (const auto& j : kept) {
                    if (j.channel != listener) continue;
                    if (!(bs + len + theta <= j.start || j.end + theta <= bs)) {
                        ok = false;
                        break;
                    }
                }
                if (ok) feasible.push_back(bs);
            }
            if (feasible.empty()) continue;
            ++st.backchannel_eligible;
            if (u >= p.backchannel_rate) continue;
            const std::size_t bs = feasible[uniform_int(rng, 0, feasible.size() - 1)];
            ++st.backchannels;
            kept_turns.push_back({kept.size()});
            kept.push_back({listener, bs, bs + len, true});
            events.push_back({EventKind::overlap, std::nullopt, bs, bs + len});
        }
    }

    for (const auto& u : kept) events.push_back({EventKind::ipu, u.channel, u.start, u.end});
    for (const auto& turn : kept_turns) {
        events.push_back({EventKind::turn, kept[turn.front()].channel, kept[turn.front()].start,
                          kept[turn.back()].end});
    }
    sort_events(events);

    // Tokens.
    const Vocabulary vocab{p.vocab};
    std::vector<TokenId> grid[2] = {std::vector<TokenId>(T, vocab.sil()),
                                    std::vector<TokenId>(T, vocab.sil())};
    for (const auto& u : kept)
        for (std::size_t f = u.start; f < u.end; ++f) grid[index_of(u.channel)][f] = 0;
    for (Channel c : {Channel::A, Channel::B}) {
        const MarkovChain& m = chains[index_of(c)];
        std::size_t ctx = uniform_int(rng, 0, m.states - 1);
        for (auto& tok : grid[index_of(c)]) {
            if (tok == vocab.sil()) continue;
            tok = m.rows[ctx](rng);
            ctx = (ctx * static_cast<std::size_t>(m.vocab) + static_cast<std::size_t>(tok)) % m.states;
        }
    }

    out.tokens = DualTokenStream(T, 1, std::move(grid[0]), std::move(grid[1]), p.frame_rate_hz);
    out.trace.frames = T;
    out.trace.frame_rate_hz = p.frame_rate_hz;
    out.trace.events = std::move(events);
    return out;
}

}  // namespace

SyntheticCorpus generate(const DialogueProfile& profile, std::size_t frames, std::size_t n_streams) {
    profile.validate();
    const std::size_t theta = profile.threshold();
    if (frames < 2 * theta) throw SequenceError("stream length must be at least twice the silence threshold");
    const double T = static_cast<double>(frames);
    if (profile.mean_ipu_frames > T || profile.mean_pause_frames > T || profile.mean_gap_frames > T ||
        static_cast<double>(profile.min_event_frames) > T) {
        throw SequenceError("infeasible profile: mean event lengths exceed the stream length");
    }
    const MarkovChain chains[2] = {make_chain(profile, splitmix64(profile.seed ^ 0xa11ceULL)),
                                   make_chain(profile, splitmix64(profile.seed ^ 0xb0bULL))};
    SyntheticCorpus corpus;
    corpus.streams.reserve(n_streams);
    corpus.traces.reserve(n_streams);
    for (std::size_t i = 0; i < n_streams; ++i) {
        const std::uint64_t seed = splitmix64(profile.seed * 0x100000001b3ULL + i);
        Stream s = generate_one(profile, frames, seed, chains);
        corpus.streams.push_back(std::move(s.tokens));
        corpus.traces.push_back(std::move(s.trace));
        corpus.stats.merge(s.stats);
    }
    return corpus;
}

DualTokenStream to_rvq(const DualTokenStream& stream, std::size_t depth, std::int32_t vocab,
                       std::uint64_t seed) {
    if (stream.depth() != 1) throw SequenceError("to_rvq expects a depth-1 stream");
    if (depth < 1) throw SequenceError("depth must be at least 1");
    const Vocabulary v{vocab};
    std::vector<TokenId> out[2];
    for (Channel c : {Channel::A, Channel::B}) {
        auto& o = out[index_of(c)];
        o.reserve(stream.steps() * depth);
        for (std::size_t t = 0; t < stream.steps(); ++t) {
            const TokenId x = stream.at(c, t, 0);
            for (std::size_t d = 0; d < depth; ++d) {
                if (x == v.sil() || d == 0) {
                    o.push_back(x);
                    continue;
                }
                const std::uint64_t h =
                    splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(x) * 0x9e3779b97f4a7c15ULL + d));
                o.push_back(static_cast<TokenId>(h % static_cast<std::uint64_t>(vocab)));
            }
        }
    }
    return DualTokenStream(stream.steps(), depth, std::move(out[0]), std::move(out[1]),
                           stream.frame_rate_hz());
}

}  // namespace ntpp
