#ifndef DSCS_SERVICE_RECORD_HPP
#define DSCS_SERVICE_RECORD_HPP

#include <variant>

#include "dscs/dscs1.hpp"
#include "dscs/dscs2.hpp"
#include "dscs/service/storage.hpp"
#include "dscs/wire.hpp"

// In-memory state of one stored file, and its mapping to the on-disk
// snapshot. Updates are applied through the same code path live and during
// WAL replay, so replay reproduces the live state exactly.

namespace dscs::service {

using wire::Protocol;

struct FileRecord {
    Bytes fid;
    std::variant<dscs1::ServerFile, dscs2::ServerFile> file;

    Protocol protocol() const { return file.index() == 0 ? Protocol::Dscs1 : Protocol::Dscs2; }
    dscs1::ServerFile& f1() { return std::get<0>(file); }
    const dscs1::ServerFile& f1() const { return std::get<0>(file); }
    dscs2::ServerFile& f2() { return std::get<1>(file); }
    const dscs2::ServerFile& f2() const { return std::get<1>(file); }

    std::uint64_t size() const {
        return std::visit([](const auto& f) { return f.size(); }, file);
    }

    /// |blocks| = |tags| (= |h-list| = list size for DSCS I). Empty when OK.
    std::string check_counts() const {
        if (protocol() == Protocol::Dscs1) {
            const auto& f = f1();
            if (f.tags.size() != f.blocks.size() || f.pk.hs.size() != f.blocks.size() || f.list.size() != f.blocks.size())
                return "DSCS I component counts differ";
        } else {
            const auto& f = f2();
            if (f.tags.size() != f.blocks.size() || f.pub.m != f.blocks.size()) return "DSCS II component counts differ";
        }
        return "";
    }

    Snapshot snapshot() const {
        Snapshot s;
        ByteWriter pub;
        if (protocol() == Protocol::Dscs1) {
            const auto& f = f1();
            auto pk = f.pk;
            pk.hs.clear();
            pk.metadata.reset();
            pk.write(pub);
            for (const auto& b : f.blocks) s.blocks.push_back(encode_block(b));
            for (const auto& t : f.tags) s.tags.push_back(t.encode());
            for (const auto& h : f.pk.hs) s.hlist.push_back(encode_int(h));
            s.list = f.list.serialize();
        } else {
            const auto& f = f2();
            f.pub.write(pub);
            for (const auto& b : f.blocks) s.blocks.push_back(encode_block(b));
            for (const auto& t : f.tags) s.tags.push_back(dscs2::encode_tag(f.pub.suite(), t));
        }
        s.pub = pub.take();
        return s;
    }

    static FileRecord from_snapshot(Protocol p, Bytes fid, const Snapshot& s) {
        FileRecord rec;
        rec.fid = std::move(fid);
        ByteReader pub(s.pub);
        if (p == Protocol::Dscs1) {
            dscs1::ServerFile f;
            f.pk = snc::RsaPublicKey::read(pub);
            pub.expect_done();
            for (const auto& b : s.blocks) f.blocks.push_back(decode_block(b));
            for (const auto& t : s.tags) f.tags.push_back(snc::RsaTag::decode(t));
            for (const auto& h : s.hlist) f.pk.hs.push_back(decode_int(h));
            f.list = skiplist::SkipList::deserialize(s.list);
            for (std::uint64_t i = 1; i <= f.list.size() && i <= f.tags.size(); ++i)
                if (f.list.element(i) != f.tags[i - 1].encode()) fail(ErrorCode::Malformed, "skip list disagrees with tag store");
            rec.file = std::move(f);
        } else {
            dscs2::ServerFile f;
            f.pub = dscs2::PublicParams::read(pub);
            pub.expect_done();
            const auto& suite = f.pub.suite();
            for (const auto& b : s.blocks) f.blocks.push_back(decode_block(b));
            for (const auto& t : s.tags) {
                ByteReader r(t);
                f.tags.push_back(dscs2::decode_tag(suite, r));
                r.expect_done();
            }
            rec.file = std::move(f);
        }
        if (auto why = rec.check_counts(); !why.empty()) fail(ErrorCode::Malformed, why);
        return rec;
    }

    /// Parses and bounds-checks an update payload without touching state.
    void validate_update(ByteView payload) const {
        ByteReader r(payload);
        if (protocol() == Protocol::Dscs1) {
            auto req = dscs1::UpdateRequest::read(r);
            r.expect_done();
            f1().check_request(req);
        } else {
            auto msg = dscs2::AppendMessage::read(r, f2().pub.suite());
            r.expect_done();
            if (msg.block.size() != f2().pub.pk.segments()) fail(ErrorCode::LengthMismatch, "block has the wrong number of segments");
        }
    }

    /// Applies a validated update; returns the reply payload.
    Bytes apply_update(ByteView payload) {
        ByteReader r(payload);
        ByteWriter out;
        if (protocol() == Protocol::Dscs1) {
            auto req = dscs1::UpdateRequest::read(r);
            f1().perform_update(req).write(out);
        } else {
            auto& f = f2();
            f.apply(dscs2::AppendMessage::read(r, f.pub.suite()));
            out.u64(f.size());
        }
        return out.take();
    }

private:
    static Bytes encode_block(const DataBlock& b) {
        ByteWriter w;
        put_block(w, b);
        return w.take();
    }
    static DataBlock decode_block(ByteView b) {
        ByteReader r(b);
        auto v = get_block(r);
        r.expect_done();
        return v;
    }
};

/// Builds the record for an upload payload: protocol(1B) || bundle.
inline FileRecord record_from_upload(ByteView fid, ByteView payload) {
    ByteReader r(payload);
    auto p = wire::protocol_from(r.u8());
    FileRecord rec;
    rec.fid.assign(fid.begin(), fid.end());
    if (p == Protocol::Dscs1) {
        auto bundle = dscs1::UploadBundle::read(r);
        r.expect_done();
        if (magnitude_bytes(bundle.pk.e) != rec.fid) fail(ErrorCode::Malformed, "fid does not match the public exponent");
        rec.file = dscs1::ServerFile::from_upload(std::move(bundle));
    } else {
        auto bundle = dscs2::UploadBundle::read(r);
        r.expect_done();
        if (bundle.pub.fid != rec.fid) fail(ErrorCode::Malformed, "fid does not match the public parameters");
        rec.file = dscs2::ServerFile::from_upload(std::move(bundle));
    }
    return rec;
}

} // namespace dscs::service

#endif // DSCS_SERVICE_RECORD_HPP
