#ifndef DSCS_DSCS2_HPP
#define DSCS_DSCS2_HPP

#include <map>
#include <mutex>
#include <set>

#include "dscs/dscs1.hpp"
#include "dscs/layout.hpp"
#include "dscs/profile.hpp"
#include "dscs/snc_pairing.hpp"

// Append-only protocol: pairing-based tags, constant-size keys and proofs,
// no freshness structure.

namespace dscs::dscs2 {

using Suite = TypeASuite;
using G1 = Suite::G1;
using PublicKey = snc::PairPublicKey<Suite>;
using dscs1::Challenge;
using skiplist::UpdateType;

inline constexpr std::uint32_t kClientStateVersion = 1;

/// Suites are immutable after construction and shared per curve id.
inline const Suite& suite_for(const std::string& curve_id) {
    static std::mutex mu;
    static std::map<std::string, std::unique_ptr<Suite>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[curve_id];
    if (!slot) slot = std::make_unique<Suite>(curve_id);
    return *slot;
}

/// Segment width: the largest whole byte count below the group order.
inline std::size_t segment_bytes(const Suite& s) { return (bit_length(s.order()) - 1) / 8; }

/// Everything an auditor needs: no secret.
struct PublicParams {
    PublicKey pk;
    Bytes fid;
    std::uint64_t m = 0;

    const Suite& suite() const { return suite_for(pk.suite.curve_id); }

    void write(ByteWriter& w) const {
        pk.write(w, suite());
        w.blob(fid).u64(m);
    }
    static PublicParams read(ByteReader& r) {
        // The curve id leads the key, so peek it to pick the suite.
        ByteReader peek = r;
        peek.u32();
        auto id = peek.blob();
        const Suite& s = suite_for(std::string(id.begin(), id.end()));
        PublicParams p;
        p.pk = PublicKey::read(r, s);
        p.fid = r.blob();
        p.m = r.u64();
        return p;
    }
};

struct ClientState {
    SecurityProfile profile;
    snc::PairSecret sk;
    PublicParams pub;

    const Suite& suite() const { return pub.suite(); }
    Layout layout() const { return {segment_bytes(suite()), pub.pk.segments()}; }

    Bytes encode() const {
        ByteWriter w;
        w.u32(kClientStateVersion);
        w.blob(to_bytes(profile.name));
        put_int(w, sk.alpha);
        pub.write(w);
        return w.take();
    }
    static ClientState decode(ByteView b) {
        ByteReader r(b);
        if (r.u32() != kClientStateVersion) fail(ErrorCode::Malformed, "unsupported client state version");
        auto name = r.blob();
        ClientState st;
        st.profile = profile_by_name(std::string(name.begin(), name.end()));
        st.sk.alpha = get_int(r);
        st.pub = PublicParams::read(r);
        r.expect_done();
        if (st.suite().g2_mul(st.pub.pk.h, st.sk.alpha) != st.pub.pk.z) fail(ErrorCode::Malformed, "secret does not match z");
        return st;
    }
};

inline ClientState keygen2(const SecurityProfile& profile, std::uint64_t m, std::size_t n, Rng& rng) {
    const Suite& s = suite_for(profile.curve_id);
    auto kp = snc::pair_keygen(s, n, rng);
    ClientState st{profile, kp.sk, {std::move(kp.pk), rng.bytes(profile.lambda / 8), m}};
    return st;
}

inline Bytes encode_tag(const Suite& s, const G1& t) { return encode_int(from_magnitude(s.encode_g1(t))); }

inline G1 decode_tag(const Suite& s, ByteReader& r) { return s.decode_g1(magnitude_bytes(get_int(r))); }

struct UploadBundle {
    PublicParams pub;
    std::vector<DataBlock> blocks;
    std::vector<G1> tags;

    void write(ByteWriter& w) const {
        pub.write(w);
        w.u32(static_cast<std::uint32_t>(blocks.size()));
        for (const auto& b : blocks) put_block(w, b);
        w.u32(static_cast<std::uint32_t>(tags.size()));
        for (const auto& t : tags) w.raw(encode_tag(pub.suite(), t));
    }
    static UploadBundle read(ByteReader& r) {
        UploadBundle u;
        u.pub = PublicParams::read(r);
        auto nb = r.u32();
        if (nb > r.remaining() / 4) fail(ErrorCode::Malformed, "block count exceeds payload");
        for (std::uint32_t i = 0; i < nb; ++i) u.blocks.push_back(get_block(r));
        auto nt = r.u32();
        if (nt > r.remaining() / 4) fail(ErrorCode::Malformed, "tag count exceeds payload");
        for (std::uint32_t i = 0; i < nt; ++i) u.tags.push_back(decode_tag(u.pub.suite(), r));
        return u;
    }
};

inline void check_block(const DataBlock& v, const Suite& s, std::size_t n) {
    if (v.size() != n) fail(ErrorCode::LengthMismatch, "block has the wrong number of segments");
    for (const auto& seg : v)
        if (seg < 0 || seg >= s.order()) fail(ErrorCode::SegmentOutOfField, "segment not in Z_r");
}

inline UploadBundle outsource2_blocks(std::vector<DataBlock> blocks, ClientState& st) {
    const Suite& s = st.suite();
    UploadBundle out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        check_block(blocks[i], s, st.pub.pk.segments());
        out.tags.push_back(snc::pair_tag_gen(s, blocks[i], i + 1, st.pub.fid, st.sk, st.pub.pk));
    }
    st.pub.m = blocks.size();
    out.blocks = std::move(blocks);
    out.pub = st.pub;
    return out;
}

inline UploadBundle outsource2(ByteView file, ClientState& st) { return outsource2_blocks(st.layout().split(file), st); }

struct AppendMessage {
    DataBlock block;
    G1 tag;

    void write(ByteWriter& w, const Suite& s) const {
        put_block(w, block);
        w.raw(encode_tag(s, tag));
    }
    static AppendMessage read(ByteReader& r, const Suite& s) {
        AppendMessage m;
        m.block = get_block(r);
        m.tag = decode_tag(s, r);
        return m;
    }
};

/// Tags the block for position m + 1 and advances the local count.
inline AppendMessage append(ClientState& st, const DataBlock& block) {
    const Suite& s = st.suite();
    check_block(block, s, st.pub.pk.segments());
    AppendMessage msg{block, snc::pair_tag_gen(s, block, st.pub.m + 1, st.pub.fid, st.sk, st.pub.pk)};
    ++st.pub.m;
    return msg;
}

/// Only appends exist; anything else is refused at the API.
inline AppendMessage request_update(ClientState& st, UpdateType type, std::uint64_t i, const DataBlock& block) {
    if (type != UpdateType::Insert || i != st.pub.m)
        fail(ErrorCode::AppendOnly, "append-only file: only inserts after the last block are allowed");
    return append(st, block);
}

/// Owner form of the read check, using alpha.
inline bool verify_read2_owner(const ClientState& st, std::uint64_t i, const DataBlock& v, const G1& t) {
    if (i == 0 || i > st.pub.m) return false;
    return snc::pair_check_owner(st.suite(), v, i, t, st.pub.fid, st.sk, st.pub.pk);
}

/// Public pairing form: e(t, h) == e(H(fid, i) * prod g_j^{v_j}, z).
inline bool verify_read2(const PublicParams& pub, std::uint64_t i, const DataBlock& v, const G1& t) {
    if (i == 0 || i > pub.m) return false;
    return snc::pair_verify(pub.suite(), AugmentedVector::unit(v, i), t, pub.fid, pub.pk, pub.m);
}

struct StorageProof {
    DataBlock y;
    G1 t;

    // VEC(y) || INT(t). Each y_j is written at the full width of the group
    // order so the proof length depends on n alone.
    Bytes encode(const Suite& s) const {
        const std::size_t width = (bit_length(s.order()) + 7) / 8;
        ByteWriter w;
        w.u32(static_cast<std::uint32_t>(y.size()));
        for (const auto& v : y) w.blob(fixed_bytes(v, width));
        w.raw(encode_tag(s, t));
        return w.take();
    }
    static StorageProof read(const Suite& s, ByteReader& r) {
        const std::size_t width = (bit_length(s.order()) + 7) / 8;
        StorageProof p;
        auto count = r.u32();
        if (count > r.remaining() / (4 + width)) fail(ErrorCode::Malformed, "proof length exceeds payload");
        for (std::uint32_t j = 0; j < count; ++j) {
            auto b = r.blob();
            if (b.size() != width) fail(ErrorCode::Malformed, "proof element has the wrong width");
            p.y.push_back(from_magnitude(b));
        }
        p.t = decode_tag(s, r);
        return p;
    }
    static StorageProof decode(const Suite& s, ByteView b) {
        ByteReader r(b);
        auto p = read(s, r);
        r.expect_done();
        return p;
    }
};

inline Challenge challenge2(const PublicParams& pub, std::uint64_t l, Rng& rng) {
    return dscs1::sample_challenge(pub.m, l, pub.suite().order(), rng);
}

struct ServerFile {
    PublicParams pub;
    std::vector<DataBlock> blocks;
    std::vector<G1> tags;

    std::uint64_t size() const { return blocks.size(); }

    static ServerFile from_upload(UploadBundle u) {
        if (u.blocks.size() != u.tags.size() || u.blocks.size() != u.pub.m)
            fail(ErrorCode::CountMismatch, "blocks and tags differ in length");
        return {std::move(u.pub), std::move(u.blocks), std::move(u.tags)};
    }

    void apply(const AppendMessage& msg) {
        if (msg.block.size() != pub.pk.segments()) fail(ErrorCode::LengthMismatch, "block has the wrong number of segments");
        blocks.push_back(msg.block);
        tags.push_back(msg.tag);
        pub.m = blocks.size();
    }

    std::pair<DataBlock, G1> read(std::uint64_t i) const {
        if (i == 0 || i > size()) fail(ErrorCode::IndexOutOfRange, "read position out of range");
        return {blocks[i - 1], tags[i - 1]};
    }
};

template <class BlockAt, class TagAt>
StorageProof prove2_from(const Suite& s, const Challenge& c, BlockAt&& block_at, TagAt&& tag_at) {
    std::vector<snc::PairItem<Suite>> items;
    for (const auto& [i, nu] : c.pairs) items.push_back({AugmentedVector::unit(block_at(i), i), tag_at(i), nu});
    auto comb = snc::pair_combine(s, items);
    return {std::move(comb.w.data), comb.tag};
}

inline StorageProof prove2(const ServerFile& f, const Challenge& c) {
    dscs1::check_challenge(c, f.size());
    return prove2_from(
        f.pub.suite(), c, [&](std::uint64_t i) -> const DataBlock& { return f.blocks[i - 1]; },
        [&](std::uint64_t i) -> const G1& { return f.tags[i - 1]; });
}

inline bool verify_audit2(const Challenge& c, const StorageProof& proof, const PublicParams& pub) {
    if (c.pairs.empty()) return false;
    const auto& r = pub.suite().order();
    AugmentedVector w;
    w.data = proof.y;
    std::set<std::uint64_t> seen;
    for (const auto& [i, nu] : c.pairs) {
        if (i == 0 || i > pub.m || !seen.insert(i).second || nu <= 0 || nu >= r) return false;
        w.coeffs.emplace(i, nu);
    }
    return snc::pair_verify(pub.suite(), w, proof.t, pub.fid, pub.pk, pub.m);
}

} // namespace dscs::dscs2

#endif // DSCS_DSCS2_HPP
