#include "ntpp/sequence.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

namespace ntpp {

using nlohmann::json;

const char* channel_name(Channel c) { return c == Channel::A ? "a" : "b"; }

DualTokenStream::DualTokenStream(std::size_t steps, std::size_t depth, std::vector<TokenId> a,
                                 std::vector<TokenId> b, double frame_rate_hz)
    : steps_(steps), depth_(depth), a_(std::move(a)), b_(std::move(b)),
      frame_rate_hz_(frame_rate_hz) {
    if (depth_ < 1) throw SequenceError("stream depth must be >= 1");
    if (!(frame_rate_hz_ > 0.0)) throw SequenceError("frame_rate_hz must be positive");
    if (a_.size() != steps_ * depth_ || b_.size() != steps_ * depth_) {
        throw SequenceError("channel grids must both hold T*D = " +
                            std::to_string(steps_ * depth_) + " tokens (got " +
                            std::to_string(a_.size()) + " and " + std::to_string(b_.size()) + ")");
    }
    for (TokenId v : a_)
        if (v < 0) throw SequenceError("negative token id in channel a");
    for (TokenId v : b_)
        if (v < 0) throw SequenceError("negative token id in channel b");
}

DualTokenStream DualTokenStream::from_grids(const std::vector<std::vector<TokenId>>& a,
                                            const std::vector<std::vector<TokenId>>& b,
                                            double frame_rate_hz) {
    if (a.size() != b.size()) throw SequenceError("channels have different lengths");
    const std::size_t depth = a.empty() ? 1 : a.front().size();
    std::vector<TokenId> fa, fb;
    fa.reserve(a.size() * depth);
    fb.reserve(a.size() * depth);
    for (std::size_t t = 0; t < a.size(); ++t) {
        if (a[t].size() != depth || b[t].size() != depth) {
            throw SequenceError("ragged depth at frame " + std::to_string(t));
        }
        fa.insert(fa.end(), a[t].begin(), a[t].end());
        fb.insert(fb.end(), b[t].begin(), b[t].end());
    }
    return DualTokenStream(a.size(), depth, std::move(fa), std::move(fb), frame_rate_hz);
}

DualTokenStream DualTokenStream::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > steps_) throw SequenceError("slice out of range");
    auto cut = [&](const std::vector<TokenId>& v) {
        return std::vector<TokenId>(v.begin() + static_cast<std::ptrdiff_t>(begin * depth_),
                                    v.begin() + static_cast<std::ptrdiff_t>(end * depth_));
    };
    return DualTokenStream(end - begin, depth_, cut(a_), cut(b_), frame_rate_hz_);
}

void DualTokenStream::validate(const Vocabulary& vocab) const {
    for (Channel c : {Channel::A, Channel::B}) {
        for (TokenId v : tokens(c)) {
            if (!vocab.valid(v)) {
                throw SequenceError("token " + std::to_string(v) + " in channel " +
                                    channel_name(c) + " outside vocabulary of size " +
                                    std::to_string(vocab.total()));
            }
        }
    }
}

PositionMeta position_meta(std::size_t i, std::size_t depth) {
    const std::size_t block = 2 * depth;
    const std::size_t r = i % block;
    return PositionMeta{i / block, r < depth ? Channel::A : Channel::B, (i % depth) + 1};
}

std::size_t interleaved_index(std::size_t step, Channel c, std::size_t depth_1based,
                              std::size_t depth) {
    return step * 2 * depth + (c == Channel::B ? depth : 0) + (depth_1based - 1);
}

InterleavedSequence interleave(const DualTokenStream& stream) {
    InterleavedSequence seq;
    const std::size_t D = stream.depth();
    seq.depth = D;
    seq.frame_rate_hz = stream.frame_rate_hz();
    seq.tokens.reserve(2 * stream.steps() * D);
    seq.meta.reserve(2 * stream.steps() * D);
    for (std::size_t t = 0; t < stream.steps(); ++t) {
        for (Channel c : {Channel::A, Channel::B}) {
            for (std::size_t d = 0; d < D; ++d) {
                seq.tokens.push_back(stream.at(c, t, d));
                seq.meta.push_back(PositionMeta{t, c, d + 1});
            }
        }
    }
    return seq;
}

DualTokenStream deinterleave(const std::vector<TokenId>& tokens, std::size_t depth,
                             double frame_rate_hz) {
    if (depth < 1) throw SequenceError("depth must be >= 1");
    if (tokens.size() % (2 * depth) != 0) {
        throw SequenceError("interleaved length " + std::to_string(tokens.size()) +
                            " is not a multiple of 2D = " + std::to_string(2 * depth));
    }
    const std::size_t T = tokens.size() / (2 * depth);
    std::vector<TokenId> a(T * depth), b(T * depth);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t d = 0; d < depth; ++d) {
            a[t * depth + d] = tokens[t * 2 * depth + d];
            b[t * depth + d] = tokens[t * 2 * depth + depth + d];
        }
    }
    return DualTokenStream(T, depth, std::move(a), std::move(b), frame_rate_hz);
}

DualTokenStream deinterleave(const InterleavedSequence& seq) {
    return deinterleave(seq.tokens, seq.depth, seq.frame_rate_hz);
}

DualTokenStream swap_channels(const DualTokenStream& stream) {
    return DualTokenStream(stream.steps(), stream.depth(), stream.tokens(Channel::B),
                           stream.tokens(Channel::A), stream.frame_rate_hz());
}

DualTokenStream with_bos(const DualTokenStream& stream, const Vocabulary& vocab) {
    const std::size_t D = stream.depth();
    std::vector<TokenId> a(D, vocab.bos()), b(D, vocab.bos());
    a.insert(a.end(), stream.tokens(Channel::A).begin(), stream.tokens(Channel::A).end());
    b.insert(b.end(), stream.tokens(Channel::B).begin(), stream.tokens(Channel::B).end());
    return DualTokenStream(stream.steps() + 1, D, std::move(a), std::move(b),
                           stream.frame_rate_hz());
}

DualTokenStream concat(const std::vector<DualTokenStream>& streams) {
    if (streams.empty()) return {};
    const std::size_t D = streams.front().depth();
    const double rate = streams.front().frame_rate_hz();
    std::vector<TokenId> a, b;
    std::size_t T = 0;
    for (const auto& s : streams) {
        if (s.depth() != D || s.frame_rate_hz() != rate) {
            throw SequenceError("concat: streams differ in depth or frame rate");
        }
        a.insert(a.end(), s.tokens(Channel::A).begin(), s.tokens(Channel::A).end());
        b.insert(b.end(), s.tokens(Channel::B).begin(), s.tokens(Channel::B).end());
        T += s.steps();
    }
    return DualTokenStream(T, D, std::move(a), std::move(b), rate);
}

// ---- JSONL -----------------------------------------------------------------

namespace {

json grid_json(const DualTokenStream& s, Channel c) {
    json rows = json::array();
    for (std::size_t t = 0; t < s.steps(); ++t) {
        json row = json::array();
        for (std::size_t d = 0; d < s.depth(); ++d) row.push_back(s.at(c, t, d));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<std::vector<TokenId>> grid_from_json(const json& j, const char* name) {
    if (!j.is_array()) throw SequenceError(std::string("field '") + name + "' must be an array");
    std::vector<std::vector<TokenId>> out;
    out.reserve(j.size());
    for (const auto& row : j) {
        if (!row.is_array()) {
            throw SequenceError(std::string("field '") + name + "' must hold arrays of ints");
        }
        std::vector<TokenId> r;
        for (const auto& v : row) {
            if (!v.is_number_integer()) {
                throw SequenceError(std::string("non-integer token in '") + name + "'");
            }
            r.push_back(v.get<TokenId>());
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

std::string stream_to_json(const DualTokenStream& stream) {
    json j;
    j["frame_rate_hz"] = stream.frame_rate_hz();
    j["depth"] = stream.depth();
    j["a"] = grid_json(stream, Channel::A);
    j["b"] = grid_json(stream, Channel::B);
    return j.dump();
}

DualTokenStream stream_from_json(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw SequenceError(std::string("malformed stream record: ") + e.what());
    }
    for (const char* key : {"frame_rate_hz", "depth", "a", "b"}) {
        if (!j.contains(key)) throw SequenceError(std::string("stream record missing '") + key + "'");
    }
    const auto depth = j.at("depth").get<std::size_t>();
    auto a = grid_from_json(j.at("a"), "a");
    auto b = grid_from_json(j.at("b"), "b");
    if (a.size() != b.size()) throw SequenceError("channels have different lengths");
    if (a.empty()) {
        return DualTokenStream(0, depth, {}, {}, j.at("frame_rate_hz").get<double>());
    }
    auto s = DualTokenStream::from_grids(a, b, j.at("frame_rate_hz").get<double>());
    if (s.depth() != depth) throw SequenceError("declared depth does not match grid");
    return s;
}

void write_streams(std::ostream& os, const std::vector<DualTokenStream>& streams) {
    for (const auto& s : streams) os << stream_to_json(s) << '\n';
}

std::vector<DualTokenStream> read_streams(std::istream& is) {
    std::vector<DualTokenStream> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(stream_from_json(line));
    }
    return out;
}

void write_streams_file(const std::string& path, const std::vector<DualTokenStream>& streams) {
    std::ofstream os(path);
    if (!os) throw SequenceError("cannot open " + path + " for writing");
    write_streams(os, streams);
}

std::vector<DualTokenStream> read_streams_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw SequenceError("cannot open " + path);
    return read_streams(is);
}

}  // namespace ntpp
