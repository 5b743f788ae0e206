#ifndef DSCS_LAYOUT_HPP
#define DSCS_LAYOUT_HPP

#include "dscs/vector.hpp"

// File <-> blocks. The plaintext is prefixed with its length (8 bytes BE),
// cut into fixed-width segments, grouped n per block; the tail of the last
// block is zero padded. An empty file still yields one block.

namespace dscs {

struct Layout {
    std::size_t segment_bytes;
    std::size_t segments_per_block;

    std::size_t block_bytes() const { return segment_bytes * segments_per_block; }

    /// Layout whose blocks hold at least n' bytes (rounded up to whole segments),
    /// so a file of k * n' bytes splits into exactly k blocks.
    static Layout for_block_bytes(std::size_t block_bytes, std::size_t segment_bytes) {
        if (segment_bytes == 0) fail(ErrorCode::Usage, "segment width must be positive");
        if (block_bytes == 0) fail(ErrorCode::Usage, "block size must be positive");
        std::size_t n = (block_bytes + segment_bytes - 1) / segment_bytes;
        return {segment_bytes, n};
    }

    std::uint64_t block_count(std::size_t file_bytes) const {
        std::size_t total = 8 + file_bytes;
        return (total + block_bytes() - 1) / block_bytes();
    }

    std::vector<DataBlock> split(ByteView file) const {
        ByteWriter w;
        w.u64(file.size()).raw(file);
        Bytes padded = w.take();
        padded.resize(block_count(file.size()) * block_bytes(), 0);
        std::vector<DataBlock> blocks;
        for (std::size_t off = 0; off < padded.size(); off += block_bytes()) {
            DataBlock v(segments_per_block);
            for (std::size_t j = 0; j < segments_per_block; ++j)
                v[j] = from_magnitude(ByteView(padded).subspan(off + j * segment_bytes, segment_bytes));
            blocks.push_back(std::move(v));
        }
        return blocks;
    }

    /// Segments of one block as raw bytes.
    Bytes block_bytes_of(const DataBlock& v) const {
        if (v.size() != segments_per_block) fail(ErrorCode::LengthMismatch, "block has the wrong number of segments");
        Bytes out;
        out.reserve(block_bytes());
        for (const auto& seg : v) {
            Bytes b = fixed_bytes(seg, segment_bytes);
            out.insert(out.end(), b.begin(), b.end());
        }
        return out;
    }

    /// Arbitrary bytes (at most one block) as a zero-padded block, for updates.
    DataBlock pack_block(ByteView bytes) const {
        if (bytes.size() > block_bytes()) fail(ErrorCode::LengthMismatch, "data larger than one block");
        Bytes padded(bytes.begin(), bytes.end());
        padded.resize(block_bytes(), 0);
        DataBlock v(segments_per_block);
        for (std::size_t j = 0; j < segments_per_block; ++j)
            v[j] = from_magnitude(ByteView(padded).subspan(j * segment_bytes, segment_bytes));
        return v;
    }

    Bytes join(const std::vector<DataBlock>& blocks) const {
        Bytes all;
        for (const auto& v : blocks) {
            Bytes b = block_bytes_of(v);
            all.insert(all.end(), b.begin(), b.end());
        }
        ByteReader r(all);
        std::uint64_t len = r.u64();
        if (len > r.remaining()) fail(ErrorCode::Malformed, "length header exceeds block data");
        auto body = r.raw(len);
        return Bytes(body.begin(), body.end());
    }
};

} // namespace dscs

#endif // DSCS_LAYOUT_HPP
