#pragma once

// Dual-channel token streams and their interleaved (pair-step major) layout.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace ntpp {

using TokenId = std::int32_t;

enum class Channel : std::uint8_t { A = 0, B = 1 };

inline Channel other(Channel c) { return c == Channel::A ? Channel::B : Channel::A; }
inline std::size_t index_of(Channel c) { return static_cast<std::size_t>(c); }
const char* channel_name(Channel c);  // "a" / "b"

class SequenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Content ids are [0, content_size); SIL and BOS follow them.
struct Vocabulary {
    static constexpr std::int32_t num_specials = 2;

    std::int32_t content_size = 0;

    TokenId sil() const { return content_size; }
    TokenId bos() const { return content_size + 1; }
    std::int32_t total() const { return content_size + num_specials; }
    bool valid(TokenId id) const { return id >= 0 && id < total(); }
    bool is_content(TokenId id) const { return id >= 0 && id < content_size; }
};

inline constexpr double default_frame_rate_hz = 40.0;

/// Two time-aligned T x D token grids (row-major, frame major).
class DualTokenStream {
public:
    DualTokenStream() = default;
    DualTokenStream(std::size_t steps, std::size_t depth, std::vector<TokenId> a,
                    std::vector<TokenId> b, double frame_rate_hz = default_frame_rate_hz);

    /// Builds a stream from nested [T][D] grids.
    static DualTokenStream from_grids(const std::vector<std::vector<TokenId>>& a,
                                      const std::vector<std::vector<TokenId>>& b,
                                      double frame_rate_hz = default_frame_rate_hz);

    std::size_t steps() const { return steps_; }
    std::size_t depth() const { return depth_; }
    double frame_rate_hz() const { return frame_rate_hz_; }
    bool empty() const { return steps_ == 0; }

    const std::vector<TokenId>& tokens(Channel c) const { return c == Channel::A ? a_ : b_; }
    TokenId at(Channel c, std::size_t t, std::size_t d) const {
        return tokens(c)[t * depth_ + d];
    }
    void set(Channel c, std::size_t t, std::size_t d, TokenId v) {
        (c == Channel::A ? a_ : b_)[t * depth_ + d] = v;
    }

    /// Frames [begin, end) of both channels.
    DualTokenStream slice(std::size_t begin, std::size_t end) const;
    /// Throws unless every token is valid in `vocab`.
    void validate(const Vocabulary& vocab) const;

    bool operator==(const DualTokenStream& o) const = default;

private:
    std::size_t steps_ = 0;
    std::size_t depth_ = 1;
    std::vector<TokenId> a_;
    std::vector<TokenId> b_;
    double frame_rate_hz_ = default_frame_rate_hz;
};

/// Where position i of an interleaved sequence sits. depth is 1-based.
struct PositionMeta {
    std::size_t step = 0;
    Channel channel = Channel::A;
    std::size_t depth = 1;

    bool operator==(const PositionMeta&) const = default;
};

/// t = floor(i / 2D); channel A iff (i mod 2D) < D; depth = (i mod D) + 1.
PositionMeta position_meta(std::size_t i, std::size_t depth);
/// Inverse of position_meta.
std::size_t interleaved_index(std::size_t step, Channel c, std::size_t depth_1based,
                              std::size_t depth);

struct InterleavedSequence {
    std::vector<TokenId> tokens;
    std::vector<PositionMeta> meta;
    std::size_t depth = 1;
    double frame_rate_hz = default_frame_rate_hz;

    std::size_t size() const { return tokens.size(); }
    std::size_t steps() const { return tokens.size() / (2 * depth); }
};

/// Per step: channel A depths 1..D, then channel B depths 1..D.
InterleavedSequence interleave(const DualTokenStream& stream);
DualTokenStream deinterleave(const InterleavedSequence& seq);
DualTokenStream deinterleave(const std::vector<TokenId>& tokens, std::size_t depth,
                             double frame_rate_hz = default_frame_rate_hz);

DualTokenStream swap_channels(const DualTokenStream& stream);

/// Prepends one all-BOS pair-step.
DualTokenStream with_bos(const DualTokenStream& stream, const Vocabulary& vocab);

/// Frames-major concatenation of streams with identical depth and rate.
DualTokenStream concat(const std::vector<DualTokenStream>& streams);

// ---- JSONL -----------------------------------------------------------------
// {"frame_rate_hz": number, "depth": D, "a": [[int,...],...], "b": [[int,...],...]}

std::string stream_to_json(const DualTokenStream& stream);
DualTokenStream stream_from_json(const std::string& line);

void write_streams(std::ostream& os, const std::vector<DualTokenStream>& streams);
std::vector<DualTokenStream> read_streams(std::istream& is);
void write_streams_file(const std::string& path, const std::vector<DualTokenStream>& streams);
std::vector<DualTokenStream> read_streams_file(const std::string& path);

}  // namespace ntpp
