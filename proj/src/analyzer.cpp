#include "ntpp/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

namespace ntpp {

using nlohmann::json;

const char* event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::ipu: return "ipu";
        case EventKind::pause: return "pause";
        case EventKind::gap: return "gap";
        case EventKind::overlap: return "overlap";
        case EventKind::turn: return "turn";
    }
    return "?";
}

EventKind event_kind_from_name(const std::string& name) {
    for (EventKind k : {EventKind::ipu, EventKind::pause, EventKind::gap, EventKind::overlap,
                        EventKind::turn}) {
        if (name == event_kind_name(k)) return k;
    }
    throw AnalysisError("unknown event kind '" + name + "'");
}

std::size_t EventTrace::count(EventKind k) const {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [k](const Event& e) { return e.kind == k; }));
}

void sort_events(std::vector<Event>& events) {
    std::sort(events.begin(), events.end(), [](const Event& x, const Event& y) {
        return std::tie(x.start, x.end, x.kind, x.channel) < std::tie(y.start, y.end, y.kind, y.channel);
    });
}

ActivityStream activity_of(const DualTokenStream& stream, TokenId sil) {
    ActivityStream act;
    act.frame_rate_hz = stream.frame_rate_hz();
    act.a.resize(stream.steps());
    act.b.resize(stream.steps());
    for (std::size_t t = 0; t < stream.steps(); ++t) {
        act.a[t] = stream.at(Channel::A, t, 0) != sil;
        act.b[t] = stream.at(Channel::B, t, 0) != sil;
    }
    return act;
}

std::size_t threshold_frames(double silence_ms, double frame_rate_hz) {
    if (!(frame_rate_hz > 0.0)) throw AnalysisError("frame rate must be positive");
    const double frames = std::round(silence_ms / 1000.0 * frame_rate_hz);
    if (!(frames >= 1.0)) throw AnalysisError("silence threshold is shorter than one frame");
    return static_cast<std::size_t>(frames);
}

namespace {

struct Run {
    std::size_t start;
    std::size_t end;
};

// Maximal runs of frames where pred(t) holds.
template <class Pred>
std::vector<Run> runs(std::size_t n, Pred pred) {
    std::vector<Run> out;
    std::size_t t = 0;
    while (t < n) {
        if (!pred(t)) {
            ++t;
            continue;
        }
        std::size_t e = t;
        while (e < n && pred(e)) ++e;
        out.push_back({t, e});
        t = e;
    }
    return out;
}

}  // namespace

EventTrace segment(const ActivityStream& act, double silence_ms) {
    if (act.a.size() != act.b.size()) throw AnalysisError("activity channels differ in length");
    const std::size_t n = act.frames();
    const std::size_t theta = threshold_frames(silence_ms, act.frame_rate_hz);

    EventTrace trace;
    trace.frames = n;
    trace.frame_rate_hz = act.frame_rate_hz;

    std::vector<std::uint8_t> covered[2] = {std::vector<std::uint8_t>(n, 0),
                                            std::vector<std::uint8_t>(n, 0)};
    std::vector<Run> ipus[2];
    for (Channel c : {Channel::A, Channel::B}) {
        const auto& v = act.channel(c);
        auto& merged = ipus[index_of(c)];
        for (const Run& r : runs(n, [&](std::size_t t) { return v[t] != 0; })) {
            if (!merged.empty() && r.start - merged.back().end < theta) {
                merged.back().end = r.end;
            } else {
                merged.push_back(r);
            }
        }
        for (const Run& r : merged) {
            std::fill(covered[index_of(c)].begin() + static_cast<std::ptrdiff_t>(r.start),
                      covered[index_of(c)].begin() + static_cast<std::ptrdiff_t>(r.end), 1);
            trace.events.push_back({EventKind::ipu, c, r.start, r.end});
        }
    }
    const auto& ca = covered[0];
    const auto& cb = covered[1];

    for (const Run& r : runs(n, [&](std::size_t t) { return ca[t] && cb[t]; })) {
        trace.events.push_back({EventKind::overlap, std::nullopt, r.start, r.end});
    }

    for (const Run& r : runs(n, [&](std::size_t t) { return !ca[t] && !cb[t]; })) {
        if (r.start == 0 || r.end == n) continue;
        const bool before_a = ca[r.start - 1], before_b = cb[r.start - 1];
        const bool after_a = ca[r.end], after_b = cb[r.end];
        const bool same_a = before_a && after_a, same_b = before_b && after_b;
        if (same_a && same_b) {
            // Both speakers resume: a pause that belongs to neither.
            trace.events.push_back({EventKind::pause, std::nullopt, r.start, r.end});
        } else if (same_a) {
            trace.events.push_back({EventKind::pause, Channel::A, r.start, r.end});
        } else if (same_b) {
            trace.events.push_back({EventKind::pause, Channel::B, r.start, r.end});
        } else {
            trace.events.push_back({EventKind::gap, std::nullopt, r.start, r.end});
        }
    }

    // Turns: consecutive IPUs of one channel are merged while the other
    // channel has no IPU coverage between them.
    for (Channel c : {Channel::A, Channel::B}) {
        const auto& other_cov = covered[index_of(other(c))];
        std::vector<std::size_t> prefix(n + 1, 0);
        for (std::size_t t = 0; t < n; ++t) prefix[t + 1] = prefix[t] + other_cov[t];
        const auto& list = ipus[index_of(c)];
        std::size_t k = 0;
        while (k < list.size()) {
            std::size_t j = k;
            while (j + 1 < list.size() && prefix[list[j + 1].start] - prefix[list[j].end] == 0) ++j;
            trace.events.push_back({EventKind::turn, c, list[k].start, list[j].end});
            k = j + 1;
        }
    }

    sort_events(trace.events);
    return trace;
}

EventTrace segment(const DualTokenStream& stream, TokenId sil, double silence_ms) {
    return segment(activity_of(stream, sil), silence_ms);
}

// ---- reports -----------------------------------------------------------------

EventReport report(std::span<const EventTrace> traces) {
    double seconds = 0.0;
    double dur[4] = {0, 0, 0, 0};
    std::size_t occ[4] = {0, 0, 0, 0};
    std::size_t turns = 0;
    for (const auto& tr : traces) {
        if (!(tr.frame_rate_hz > 0.0)) throw AnalysisError("trace has a non-positive frame rate");
        seconds += static_cast<double>(tr.frames) / tr.frame_rate_hz;
        for (const auto& e : tr.events) {
            if (e.kind == EventKind::turn) {
                ++turns;
                continue;
            }
            const auto m = static_cast<std::size_t>(e.kind);
            ++occ[m];
            dur[m] += static_cast<double>(e.length()) / tr.frame_rate_hz;
        }
    }
    if (!(seconds > 0.0)) throw AnalysisError("cannot normalize a report over zero duration");
    EventReport r;
    r.minutes = seconds / 60.0;
    for (EventKind k : report_metrics) {
        const auto m = static_cast<std::size_t>(k);
        r.metrics[event_kind_name(k)] = {static_cast<double>(occ[m]) / r.minutes, dur[m] / r.minutes};
    }
    r.turn_count = turns;
    r.turns_per_min = static_cast<double>(turns) / r.minutes;
    return r;
}

namespace {

std::map<std::string, MetricValue> abs_diff(const std::map<std::string, MetricValue>& x,
                                            const std::map<std::string, MetricValue>& y) {
    if (x.size() != y.size()) throw AnalysisError("reports have different metric sets");
    std::map<std::string, MetricValue> out;
    for (const auto& [name, vx] : x) {
        auto it = y.find(name);
        if (it == y.end()) throw AnalysisError("metric '" + name + "' missing from one report");
        out[name] = {std::fabs(vx.occurrences_per_min - it->second.occurrences_per_min),
                     std::fabs(vx.duration_per_min - it->second.duration_per_min)};
    }
    return out;
}

}  // namespace

DeltaReport delta(const EventReport& generated, const EventReport& reference) {
    return {abs_diff(generated.metrics, reference.metrics)};
}

DeltaReport robustness(const DeltaReport& original, const DeltaReport& swapped) {
    return {abs_diff(original.metrics, swapped.metrics)};
}

// ---- serialization -------------------------------------------------------------

json trace_to_json(const EventTrace& trace) {
    json events = json::array();
    for (const auto& e : trace.events) {
        json je{{"kind", event_kind_name(e.kind)}, {"start", e.start}, {"end", e.end}};
        if (e.channel) je["channel"] = channel_name(*e.channel);
        events.push_back(std::move(je));
    }
    return json{{"frames", trace.frames}, {"frame_rate_hz", trace.frame_rate_hz}, {"events", events}};
}

EventTrace trace_from_json(const json& j) {
    EventTrace tr;
    try {
        tr.frames = j.at("frames").get<std::size_t>();
        tr.frame_rate_hz = j.value("frame_rate_hz", default_frame_rate_hz);
        for (const auto& je : j.at("events")) {
            Event e;
            e.kind = event_kind_from_name(je.at("kind").get<std::string>());
            e.start = je.at("start").get<std::size_t>();
            e.end = je.at("end").get<std::size_t>();
            if (je.contains("channel")) {
                const auto ch = je.at("channel").get<std::string>();
                if (ch == "a") e.channel = Channel::A;
                else if (ch == "b") e.channel = Channel::B;
                else throw AnalysisError("bad channel '" + ch + "'");
            }
            if (e.end < e.start || e.end > tr.frames) throw AnalysisError("event outside trace");
            tr.events.push_back(e);
        }
    } catch (const json::exception& e) {
        throw AnalysisError(std::string("malformed trace: ") + e.what());
    }
    sort_events(tr.events);
    return tr;
}

void write_traces_file(const std::string& path, const std::vector<EventTrace>& traces) {
    std::ofstream os(path);
    if (!os) throw AnalysisError("cannot write " + path);
    for (const auto& t : traces) os << trace_to_json(t).dump() << '\n';
}

std::vector<EventTrace> read_traces_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw AnalysisError("cannot read " + path);
    std::vector<EventTrace> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(trace_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw AnalysisError(std::string("malformed trace line: ") + e.what());
        }
    }
    return out;
}

json report_to_json(const EventReport& r) {
    json metrics = json::object();
    for (const auto& [name, v] : r.metrics) {
        metrics[name] = {{"occurrences_per_min", v.occurrences_per_min},
                         {"duration_per_min", v.duration_per_min}};
    }
    return json{{"metrics", metrics},
                {"turn_count", r.turn_count},
                {"turns_per_min", r.turns_per_min},
                {"minutes", r.minutes}};
}

EventReport report_from_json(const json& j) {
    EventReport r;
    try {
        for (const auto& [name, v] : j.at("metrics").items()) {
            r.metrics[name] = {v.at("occurrences_per_min").get<double>(),
                               v.at("duration_per_min").get<double>()};
        }
        r.turn_count = j.value("turn_count", std::size_t{0});
        r.turns_per_min = j.value("turns_per_min", 0.0);
        r.minutes = j.value("minutes", 0.0);
    } catch (const json::exception& e) {
        throw AnalysisError(std::string("malformed report: ") + e.what());
    }
    return r;
}

json delta_to_json(const DeltaReport& r) {
    json metrics = json::object();
    for (const auto& [name, v] : r.metrics) {
        metrics[name] = {{"occurrences_per_min", v.occurrences_per_min},
                         {"duration_per_min", v.duration_per_min}};
    }
    return json{{"metrics", metrics}};
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string metrics_csv(const std::map<std::string, MetricValue>& m) {
    std::string out = "metric,occurrences_per_min,duration_per_min\n";
    for (EventKind k : report_metrics) {
        auto it = m.find(event_kind_name(k));
        if (it == m.end()) continue;
        out += std::string(event_kind_name(k)) + "," + fmt(it->second.occurrences_per_min) + "," +
               fmt(it->second.duration_per_min) + "\n";
    }
    return out;
}

}  // namespace

std::string report_to_csv(const EventReport& r) { return metrics_csv(r.metrics); }
std::string delta_to_csv(const DeltaReport& r) { return metrics_csv(r.metrics); }

std::string table_header() {
    std::string h = "setting";
    for (EventKind k : report_metrics) h += std::string(",") + event_kind_name(k) + "_occ";
    for (EventKind k : report_metrics) h += std::string(",") + event_kind_name(k) + "_dur";
    return h;
}

std::string table_row(const std::string& setting, const DeltaReport& d) {
    std::string row = setting;
    for (EventKind k : report_metrics) row += "," + fmt(d.metrics.at(event_kind_name(k)).occurrences_per_min);
    for (EventKind k : report_metrics) row += "," + fmt(d.metrics.at(event_kind_name(k)).duration_per_min);
    return row;
}

}  // namespace ntpp
