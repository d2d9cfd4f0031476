#pragma once

// Turn-taking statistics over dual-channel activity.
//
// IPUs are maximal voiced runs of one channel, where silent runs shorter than
// the threshold (200 ms by default) are bridged. Silence is a run of frames
// covered by no IPU on either channel; interior silences are pauses when the
// same speaker is active on both sides and gaps otherwise, while silences
// touching a stream edge are left unclassified. Overlaps are runs covered by
// IPUs of both channels. A turn is a run of one channel's IPUs with no IPU
// coverage of the other channel in between.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ntpp/sequence.hpp"

namespace ntpp {

enum class EventKind : std::uint8_t { ipu, pause, gap, overlap, turn };

const char* event_kind_name(EventKind k);
EventKind event_kind_from_name(const std::string& name);

struct Event {
    EventKind kind = EventKind::ipu;
    std::optional<Channel> channel;  // set for ipu, pause, turn
    std::size_t start = 0;           // frames, half-open
    std::size_t end = 0;

    std::size_t length() const { return end - start; }
    auto operator<=>(const Event&) const = default;
};

struct EventTrace {
    std::size_t frames = 0;
    double frame_rate_hz = default_frame_rate_hz;
    std::vector<Event> events;  // canonical order, see sort_events

    std::size_t count(EventKind k) const;
    bool operator==(const EventTrace&) const = default;
};

/// Orders events by (start, end, kind, channel).
void sort_events(std::vector<Event>& events);

struct ActivityStream {
    std::vector<std::uint8_t> a;
    std::vector<std::uint8_t> b;
    double frame_rate_hz = default_frame_rate_hz;

    const std::vector<std::uint8_t>& channel(Channel c) const { return c == Channel::A ? a : b; }
    std::size_t frames() const { return a.size(); }
};

/// Voiced iff the frame's first-depth token is not SIL.
ActivityStream activity_of(const DualTokenStream& stream, TokenId sil);

inline constexpr double default_silence_ms = 200.0;

/// round(silence_ms / 1000 * frame_rate_hz); throws if below one frame.
std::size_t threshold_frames(double silence_ms, double frame_rate_hz);

EventTrace segment(const ActivityStream& activity, double silence_ms = default_silence_ms);
EventTrace segment(const DualTokenStream& stream, TokenId sil,
                   double silence_ms = default_silence_ms);

// ---- reports -----------------------------------------------------------------

inline constexpr std::array<EventKind, 4> report_metrics = {EventKind::ipu, EventKind::pause,
                                                            EventKind::gap, EventKind::overlap};

struct MetricValue {
    double occurrences_per_min = 0.0;
    double duration_per_min = 0.0;  // seconds of event per minute of dialogue

    bool operator==(const MetricValue&) const = default;
};

struct EventReport {
    std::map<std::string, MetricValue> metrics;  // "ipu", "pause", "gap", "overlap"
    std::size_t turn_count = 0;
    double turns_per_min = 0.0;
    double minutes = 0.0;

    bool operator==(const EventReport&) const = default;
};

/// Per-minute normalization over the total duration of all traces.
EventReport report(std::span<const EventTrace> traces);

struct DeltaReport {
    std::map<std::string, MetricValue> metrics;  // absolute differences

    bool operator==(const DeltaReport&) const = default;
};

/// |M(generated) - M(reference)| per metric. Throws if metric sets differ.
DeltaReport delta(const EventReport& generated, const EventReport& reference);
/// |x - y| per metric of two delta reports.
DeltaReport robustness(const DeltaReport& original, const DeltaReport& swapped);

class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- serialization -------------------------------------------------------------

nlohmann::json trace_to_json(const EventTrace& trace);
EventTrace trace_from_json(const nlohmann::json& j);
void write_traces_file(const std::string& path, const std::vector<EventTrace>& traces);
std::vector<EventTrace> read_traces_file(const std::string& path);

nlohmann::json report_to_json(const EventReport& r);
EventReport report_from_json(const nlohmann::json& j);
nlohmann::json delta_to_json(const DeltaReport& r);

/// metric,occurrences_per_min,duration_per_min
std::string report_to_csv(const EventReport& r);
std::string delta_to_csv(const DeltaReport& r);

/// Header of a temperature table: setting + 4 occurrence + 4 duration columns.
std::string table_header();
std::string table_row(const std::string& setting, const DeltaReport& d);

}  // namespace ntpp
