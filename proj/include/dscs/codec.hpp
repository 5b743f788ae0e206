#ifndef DSCS_CODEC_HPP
#define DSCS_CODEC_HPP

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dscs/error.hpp"

namespace dscs {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline std::string to_hex(ByteView b) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(b.size() * 2);
    for (auto c : b) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xf]);
    }
    return out;
}

inline Bytes from_hex(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        fail(ErrorCode::Malformed, "bad hex digit");
    };
    if (hex.size() % 2) fail(ErrorCode::Malformed, "odd hex length");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    return out;
}

/// Appends big-endian fields to a growing buffer.
class ByteWriter {
public:
    ByteWriter& u8(std::uint8_t v) {
        buf_.push_back(v);
        return *this;
    }
    ByteWriter& u16(std::uint16_t v) { return be(v, 2); }
    ByteWriter& u32(std::uint32_t v) { return be(v, 4); }
    ByteWriter& u64(std::uint64_t v) { return be(v, 8); }

    ByteWriter& raw(ByteView b) {
        buf_.insert(buf_.end(), b.begin(), b.end());
        return *this;
    }

    // len(4B BE) || bytes; the same shape as the INT encoding.
    ByteWriter& blob(ByteView b) {
        if (b.size() > UINT32_MAX) fail(ErrorCode::Malformed, "blob too large");
        u32(static_cast<std::uint32_t>(b.size()));
        return raw(b);
    }

    std::size_t size() const { return buf_.size(); }
    const Bytes& bytes() const& { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    ByteWriter& be(std::uint64_t v, int width) {
        for (int k = width - 1; k >= 0; --k) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
        return *this;
    }

    Bytes buf_;
};

/// Bounds-checked cursor over an immutable buffer; any overrun is Malformed.
class ByteReader {
public:
    explicit ByteReader(ByteView data) : data_(data) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(be(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(be(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(be(4)); }
    std::uint64_t u64() { return be(8); }

    ByteView raw(std::size_t n) {
        need(n);
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }

    Bytes blob() {
        auto n = u32();
        auto v = raw(n);
        return Bytes(v.begin(), v.end());
    }

    std::size_t remaining() const { return data_.size() - pos_; }
    bool done() const { return pos_ == data_.size(); }

    void expect_done() const {
        if (!done()) fail(ErrorCode::Malformed, "trailing bytes");
    }

private:
    void need(std::size_t n) const {
        if (n > remaining()) fail(ErrorCode::Malformed, "truncated input");
    }

    std::uint64_t be(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int k = 0; k < width; ++k) v = v << 8 | data_[pos_++];
        return v;
    }

    ByteView data_;
    std::size_t pos_ = 0;
};

} // namespace dscs

#endif // DSCS_CODEC_HPP
