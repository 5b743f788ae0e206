#ifndef DSCS_CLIENT_HPP
#define DSCS_CLIENT_HPP

#include "dscs/dscs1.hpp"
#include "dscs/dscs2.hpp"
#include "dscs/service/transport.hpp"

// Client side of the wire protocol, plus the multi-message flows (update
// with anchors, audit) built on it. Server error replies surface as Error
// with the server's code.

namespace dscs {

using service::Transport;
using wire::MsgType;
using skiplist::UpdateType;

class Remote {
public:
    explicit Remote(Transport& t) : t_(t) {}

    std::uint64_t upload(const dscs1::UploadBundle& b) {
        ByteWriter w;
        w.u8(1);
        b.write(w);
        return ack(call(MsgType::Upload, magnitude_bytes(b.pk.e), w.take()));
    }
    std::uint64_t upload(const dscs2::UploadBundle& b) {
        ByteWriter w;
        w.u8(2);
        b.write(w);
        return ack(call(MsgType::Upload, b.pub.fid, w.take()));
    }

    dscs1::ReadResponse read1(ByteView fid, std::uint64_t i, bool proof_only = false) {
        ByteWriter w;
        w.u64(i).u8(proof_only ? wire::kReadProofOnly : 0);
        Bytes p = call(MsgType::Read, fid, w.take());
        ByteReader r(p);
        auto resp = dscs1::ReadResponse::read(r);
        r.expect_done();
        return resp;
    }

    std::pair<DataBlock, dscs2::G1> read2(const dscs2::PublicParams& pub, std::uint64_t i) {
        ByteWriter w;
        w.u64(i).u8(0);
        Bytes p = call(MsgType::Read, pub.fid, w.take());
        ByteReader r(p);
        auto v = get_block(r);
        auto t = dscs2::decode_tag(pub.suite(), r);
        r.expect_done();
        return {std::move(v), t};
    }

    skiplist::Proof update1(ByteView fid, const dscs1::UpdateRequest& req) {
        ByteWriter w;
        req.write(w);
        Bytes p = call(MsgType::Update, fid, w.take());
        return skiplist::Proof::decode(p);
    }

    std::uint64_t append2(const dscs2::PublicParams& pub, const dscs2::AppendMessage& msg) {
        ByteWriter w;
        msg.write(w, pub.suite());
        return ack(call(MsgType::Update, pub.fid, w.take()));
    }

    dscs1::StorageProof challenge1(ByteView fid, const dscs1::Challenge& c) {
        return dscs1::StorageProof::decode(call(MsgType::Challenge, fid, encode_challenge(c)));
    }

    dscs2::StorageProof challenge2(const dscs2::PublicParams& pub, const dscs1::Challenge& c) {
        return dscs2::StorageProof::decode(pub.suite(), call(MsgType::Challenge, pub.fid, encode_challenge(c)));
    }

    /// Size of the last reply payload, for communication accounting.
    std::size_t last_reply_bytes() const { return last_reply_bytes_; }

private:
    static Bytes encode_challenge(const dscs1::Challenge& c) {
        ByteWriter w;
        c.write(w);
        return w.take();
    }

    static std::uint64_t ack(ByteView p) {
        ByteReader r(p);
        auto m = r.u64();
        r.expect_done();
        return m;
    }

    Bytes call(MsgType type, ByteView fid, Bytes payload) {
        wire::Frame req(type, Bytes(fid.begin(), fid.end()), std::move(payload));
        wire::Frame rep = t_.roundtrip(req);
        wire::expect_ok(rep, type);
        last_reply_bytes_ = rep.payload.size();
        return std::move(rep.payload);
    }

    Transport& t_;
    std::size_t last_reply_bytes_ = 0;
};

// DSCS I flows.

inline bool verified_read1(Remote& remote, const dscs1::ClientState& st, std::uint64_t i, DataBlock* out = nullptr) {
    auto resp = remote.read1(st.fid(), i);
    if (!dscs1::verify_read(st.pk, i, resp)) return false;
    if (out) *out = *resp.block;
    return true;
}

/// Anchor reads, InitUpdate, PerformUpdate, VerifyUpdate. The client state
/// only moves forward when the server's proof checks out.
inline bool remote_update1(Remote& remote, dscs1::ClientState& st, UpdateType type, std::uint64_t i,
                           std::optional<DataBlock> block, Rng& rng) {
    std::vector<dscs1::ReadResponse> anchors;
    for (auto j : dscs1::update_anchors(type, i)) anchors.push_back(remote.read1(st.fid(), j, true));
    auto pending = dscs1::init_update(st, type, i, block, anchors, rng);
    auto proof = remote.update1(st.fid(), pending.request);
    return dscs1::verify_update(st, pending, proof);
}

inline bool remote_audit1(Remote& remote, const dscs1::RsaPublicKey& pk, std::uint64_t l, Rng& rng) {
    auto c = dscs1::challenge(pk, l, rng);
    return dscs1::verify_audit(c, remote.challenge1(magnitude_bytes(pk.e), c), pk);
}

// DSCS II flows.

inline bool verified_read2(Remote& remote, const dscs2::PublicParams& pub, std::uint64_t i, DataBlock* out = nullptr) {
    auto [v, t] = remote.read2(pub, i);
    if (!dscs2::verify_read2(pub, i, v, t)) return false;
    if (out) *out = std::move(v);
    return true;
}

/// The local count advances only once the server has acknowledged the
/// append at the expected position.
inline bool remote_append2(Remote& remote, dscs2::ClientState& st, const DataBlock& block) {
    auto before = st;
    auto msg = dscs2::append(st, block);
    std::uint64_t m = 0;
    try {
        m = remote.append2(st.pub, msg);
    } catch (...) {
        st = std::move(before);
        throw;
    }
    if (m != st.pub.m) {
        st = std::move(before);
        return false;
    }
    return true;
}

inline bool remote_audit2(Remote& remote, const dscs2::PublicParams& pub, std::uint64_t l, Rng& rng) {
    auto c = dscs2::challenge2(pub, l, rng);
    return dscs2::verify_audit2(c, remote.challenge2(pub, c), pub);
}

} // namespace dscs

#endif // DSCS_CLIENT_HPP
