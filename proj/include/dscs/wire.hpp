#ifndef DSCS_WIRE_HPP
#define DSCS_WIRE_HPP

#include <functional>

#include "dscs/codec.hpp"
#include "dscs/error.hpp"

// Frame: "DSCS" | version(1) | type(1) | fid_len(2) | fid | payload_len(4) | payload.
// All integers big-endian.

namespace dscs::wire {

inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 8;  // magic, version, type, fid_len
inline constexpr std::uint32_t kMaxPayload = 1u << 30;

enum class MsgType : std::uint8_t {
    Upload = 0x01,
    Read = 0x02,
    Update = 0x03,
    Challenge = 0x04,
    Error = 0x7F,
};

inline bool known_type(std::uint8_t t) { return (t >= 0x01 && t <= 0x04) || t == 0x7F; }

enum class Protocol : std::uint8_t { Dscs1 = 1, Dscs2 = 2 };

inline const char* to_string(Protocol p) { return p == Protocol::Dscs1 ? "dscs1" : "dscs2"; }

inline Protocol protocol_from(std::uint8_t b) {
    if (b != 1 && b != 2) fail(ErrorCode::Malformed, "unknown protocol");
    return static_cast<Protocol>(b);
}

inline constexpr std::uint8_t kReadProofOnly = 0x01;

struct Frame {
    std::uint8_t version = kVersion;
    std::uint8_t type = 0;  // raw, so unknown types survive parsing
    Bytes fid;
    Bytes payload;

    Frame() = default;
    Frame(MsgType t, Bytes f, Bytes p) : type(static_cast<std::uint8_t>(t)), fid(std::move(f)), payload(std::move(p)) {}

    MsgType msg_type() const { return static_cast<MsgType>(type); }
    bool operator==(const Frame&) const = default;
};

inline Bytes encode(const Frame& f) {
    if (f.fid.size() > 0xFFFF) fail(ErrorCode::Malformed, "fid too long");
    if (f.payload.size() > kMaxPayload) fail(ErrorCode::Malformed, "payload too long");
    ByteWriter w;
    w.raw(to_bytes("DSCS")).u8(f.version).u8(f.type);
    w.u16(static_cast<std::uint16_t>(f.fid.size())).raw(f.fid);
    w.u32(static_cast<std::uint32_t>(f.payload.size())).raw(f.payload);
    return w.take();
}

/// Pulls exactly n bytes or throws; used for both buffers and sockets.
using ReadExact = std::function<Bytes(std::size_t)>;

inline Frame read_frame(const ReadExact& pull) {
    Bytes head = pull(kHeaderBytes);
    ByteReader r(head);
    auto magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), "DSCS")) fail(ErrorCode::Malformed, "bad magic");
    Frame f;
    f.version = r.u8();
    if (f.version != kVersion) fail(ErrorCode::Malformed, "unsupported wire version");
    f.type = r.u8();
    f.fid = pull(r.u16());
    Bytes len = pull(4);
    std::uint32_t n = ByteReader(len).u32();
    if (n > kMaxPayload) fail(ErrorCode::Malformed, "payload too long");
    f.payload = pull(n);
    return f;
}

/// Parses one complete frame; trailing bytes are an error.
inline Frame decode(ByteView bytes) {
    std::size_t off = 0;
    Frame f = read_frame([&](std::size_t n) {
        if (bytes.size() - off < n) fail(ErrorCode::Malformed, "truncated frame");
        Bytes out(bytes.begin() + static_cast<long>(off), bytes.begin() + static_cast<long>(off + n));
        off += n;
        return out;
    });
    if (off != bytes.size()) fail(ErrorCode::Malformed, "trailing bytes after frame");
    return f;
}

inline Frame error_frame(ErrorCode code, const std::string& message, Bytes fid = {}) {
    ByteWriter w;
    w.u16(static_cast<std::uint16_t>(code)).raw(to_bytes(message));
    return Frame(MsgType::Error, std::move(fid), w.take());
}

inline std::pair<ErrorCode, std::string> parse_error(const Frame& f) {
    ByteReader r(f.payload);
    auto code = static_cast<ErrorCode>(r.u16());
    auto rest = r.raw(r.remaining());
    return {code, std::string(rest.begin(), rest.end())};
}

/// Error replies become exceptions carrying the server's code.
inline const Frame& expect_ok(const Frame& f, MsgType want) {
    if (f.type == static_cast<std::uint8_t>(MsgType::Error)) {
        auto [code, msg] = parse_error(f);
        throw Error(code, "server: " + msg);
    }
    if (f.type != static_cast<std::uint8_t>(want)) fail(ErrorCode::Transport, "reply has an unexpected type");
    return f;
}

} // namespace dscs::wire

#endif // DSCS_WIRE_HPP
