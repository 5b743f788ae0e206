#ifndef DSCS_SERVICE_HANDLER_HPP
#define DSCS_SERVICE_HANDLER_HPP

#include <memory>
#include <shared_mutex>
#include <unordered_map>

#include "dscs/service/behavior.hpp"
#include "dscs/service/record.hpp"
#include "dscs/service/trace.hpp"

// Request dispatch for the storage server. Each file has a reader-writer
// lock: reads and audits share it, updates take it exclusively. Audits and
// updates never wait; they get Busy if the lock is held the other way.

namespace dscs::service {

using skiplist::Proof;
using skiplist::UpdateType;

struct ServiceOptions {
    fs::path data_dir;
    std::size_t checkpoint_every = 64;  // WAL records between checkpoints
    Behavior behavior;
    TraceRecorder* trace = nullptr;
    CrashHook crash;
    std::function<void(OpKind)> on_locked;  // runs while the file lock is held (tests)
};

class Service {
public:
    explicit Service(ServiceOptions opts) : opts_(std::move(opts)) {
        fs::create_directories(opts_.data_dir);
        recover();
    }

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Never throws an Error; failures come back as error frames.
    wire::Frame handle(const wire::Frame& req) {
        try {
            if (!wire::known_type(req.type) || req.type == static_cast<std::uint8_t>(wire::MsgType::Error))
                fail(ErrorCode::UnknownMessage, "unknown message type " + std::to_string(req.type));
            switch (req.msg_type()) {
            case wire::MsgType::Upload: return reply(req, upload(req.fid, req.payload));
            case wire::MsgType::Read: return reply(req, read(req.fid, req.payload));
            case wire::MsgType::Update: return reply(req, update(req.fid, req.payload));
            case wire::MsgType::Challenge: return reply(req, challenge(req.fid, req.payload));
            default: break;
            }
            fail(ErrorCode::UnknownMessage, "unhandled message type");
        } catch (const Error& e) {
            return wire::error_frame(e.code(), e.what(), req.fid);
        } catch (const std::exception& e) {
            return wire::error_frame(ErrorCode::Internal, e.what(), req.fid);
        }
    }

    std::size_t file_count() const {
        std::lock_guard lock(map_mu_);
        return files_.size();
    }

    /// Copy of a file's current state, for tests and tooling.
    std::optional<FileRecord> snapshot_of(ByteView fid) const {
        auto e = find(fid);
        if (!e) return std::nullopt;
        std::shared_lock lock(e->mu);
        return e->rec;
    }

private:
    struct Entry {
        std::shared_mutex mu;
        bool ready = false;
        FileRecord rec;
        FileDisk disk;
        std::map<std::uint64_t, dscs1::ReadResponse> stale;  // behaviour layer only
    };

    static wire::Frame reply(const wire::Frame& req, Bytes payload) {
        wire::Frame f;
        f.type = req.type;
        f.fid = req.fid;
        f.payload = std::move(payload);
        return f;
    }

    void recover() {
        for (const auto& de : fs::directory_iterator(opts_.data_dir)) {
            if (!de.is_directory()) continue;
            auto name = de.path().filename().string();
            if (name.ends_with(".creating")) {
                fs::remove_all(de.path());  // upload that never got published
                continue;
            }
            if (!fs::exists(de.path() / "MANIFEST")) continue;
            auto e = std::make_shared<Entry>();
            e->disk = FileDisk::open_dir(de.path(), opts_.crash);
            const auto& mf = e->disk.manifest();
            e->rec = FileRecord::from_snapshot(wire::protocol_from(mf.protocol), mf.fid, e->disk.load_snapshot());
            for (const auto& rec : e->disk.take_pending()) e->rec.apply_update(rec.payload);
            if (auto why = e->rec.check_counts(); !why.empty()) fail(ErrorCode::Malformed, why);
            e->ready = true;
            files_[to_hex(mf.fid)] = std::move(e);
        }
    }

    std::shared_ptr<Entry> find(ByteView fid) const {
        std::lock_guard lock(map_mu_);
        auto it = files_.find(to_hex(fid));
        return it == files_.end() ? nullptr : it->second;
    }

    std::shared_ptr<Entry> get(ByteView fid) const {
        auto e = find(fid);
        if (!e) fail(ErrorCode::UnknownFid, "no such file " + to_hex(fid));
        return e;
    }

    Bytes upload(ByteView fid, ByteView payload) {
        if (fid.empty()) fail(ErrorCode::Malformed, "upload without fid");
        FileRecord rec = record_from_upload(fid, payload);
        auto e = std::make_shared<Entry>();
        std::unique_lock entry_lock(e->mu);
        {
            std::lock_guard lock(map_mu_);
            if (!files_.emplace(to_hex(fid), e).second) fail(ErrorCode::DuplicateFid, "file id already stored");
        }
        try {
            Manifest mf;
            mf.protocol = static_cast<std::uint8_t>(rec.protocol());
            mf.fid = rec.fid;
            mf.m = rec.size();
            e->disk = FileDisk::create(opts_.data_dir, mf, rec.snapshot(), opts_.crash);
        } catch (...) {
            std::lock_guard lock(map_mu_);
            files_.erase(to_hex(fid));
            throw;
        }
        e->rec = std::move(rec);
        e->ready = true;
        ByteWriter w;
        w.u64(e->rec.size());
        return w.take();
    }

    static void require_ready(const Entry& e) {
        if (!e.ready) fail(ErrorCode::UnknownFid, "file is still being created");
    }

    DataBlock served_block(const Entry& e, std::uint64_t i, const DataBlock& honest) const {
        if (opts_.behavior.corrupted(e.rec.fid, i)) return Behavior::corrupt(honest);
        return honest;
    }

    Bytes read(ByteView fid, ByteView payload) {
        ByteReader r(payload);
        std::uint64_t i = r.u64();
        std::uint8_t flags = r.u8();
        r.expect_done();
        if (flags & ~wire::kReadProofOnly) fail(ErrorCode::Malformed, "unknown read flags");
        auto e = get(fid);
        std::shared_lock lock(e->mu);
        require_ready(*e);
        TraceRecorder::Scope scope(opts_.trace, to_hex(fid), OpKind::Read);
        if (opts_.on_locked) opts_.on_locked(OpKind::Read);
        ByteWriter w;
        if (e->rec.protocol() == Protocol::Dscs1) {
            bool proof_only = flags & wire::kReadProofOnly;
            dscs1::ReadResponse resp;
            if (auto it = e->stale.find(i); opts_.behavior.serve_stale && it != e->stale.end() && i <= e->rec.size()) {
                resp = it->second;
                if (proof_only) resp.block.reset();
            } else {
                resp = e->rec.f1().read(i, proof_only);
            }
            if (resp.block) resp.block = served_block(*e, i, *resp.block);
            resp.write(w);
        } else {
            auto [v, t] = e->rec.f2().read(i);
            put_block(w, served_block(*e, i, v));
            w.raw(dscs2::encode_tag(e->rec.f2().pub.suite(), t));
        }
        return w.take();
    }

    /// Where a misplacing server puts update (type, i) instead; nullopt when
    /// there is no other valid position.
    static std::optional<std::uint64_t> misplaced_index(UpdateType type, std::uint64_t i, std::uint64_t m) {
        std::uint64_t lo = type == UpdateType::Insert ? 0 : 1;
        if (i + 1 <= m) return i + 1;
        if (i >= lo + 1) return i - 1;
        return std::nullopt;
    }

    static Proof honest_looking_proof(const dscs1::ServerFile& f, UpdateType type, std::uint64_t i) {
        std::uint64_t pos = type == UpdateType::Insert ? i + 1 : type == UpdateType::Modify ? i : (i == 0 ? 0 : i - 1);
        return f.list.prove(std::min(pos, f.size()));
    }

    Bytes update(ByteView fid, ByteView payload) {
        auto e = get(fid);
        std::unique_lock lock(e->mu, std::try_to_lock);
        if (!lock.owns_lock()) fail(ErrorCode::Busy, "file is being read or audited");
        require_ready(*e);
        TraceRecorder::Scope scope(opts_.trace, to_hex(fid), OpKind::Write);
        if (opts_.on_locked) opts_.on_locked(OpKind::Write);
        e->rec.validate_update(payload);

        Bytes effective(payload.begin(), payload.end());
        const auto& b = opts_.behavior;
        if (e->rec.protocol() == Protocol::Dscs1 && !b.honest()) {
            ByteReader r(payload);
            auto req = dscs1::UpdateRequest::read(r);
            auto& f = e->rec.f1();
            std::optional<std::uint64_t> moved;
            if (b.misplace_updates) moved = misplaced_index(req.type, req.index, f.size());
            if (b.drop_updates || (b.misplace_updates && !moved)) {
                ByteWriter out;
                honest_looking_proof(f, req.type, req.index).write(out);
                return out.take();
            }
            if (moved) {
                req.index = *moved;
                ByteWriter w;
                req.write(w);
                effective = w.take();
            }
            if (b.serve_stale && req.type == UpdateType::Modify) e->stale[req.index] = f.read(req.index);
            if (req.type != UpdateType::Modify) e->stale.clear();
        } else if (e->rec.protocol() == Protocol::Dscs2 && (b.drop_updates || b.misplace_updates)) {
            ByteWriter out;
            out.u64(e->rec.size());
            return out.take();
        }

        e->disk.log(effective);
        Bytes out = e->rec.apply_update(effective);
        if (opts_.crash) opts_.crash("update.applied");
        if (e->disk.wal_records() >= opts_.checkpoint_every) e->disk.checkpoint(e->rec.size(), e->rec.snapshot());
        return out;
    }

    Bytes challenge(ByteView fid, ByteView payload) {
        ByteReader r(payload);
        auto c = dscs1::Challenge::read(r);
        r.expect_done();
        auto e = get(fid);
        std::shared_lock lock(e->mu, std::try_to_lock);
        if (!lock.owns_lock()) fail(ErrorCode::Busy, "file is being updated");
        require_ready(*e);
        TraceRecorder::Scope scope(opts_.trace, to_hex(fid), OpKind::Audit);
        if (opts_.on_locked) opts_.on_locked(OpKind::Audit);
        dscs1::check_challenge(c, e->rec.size());
        ByteWriter w;
        if (e->rec.protocol() == Protocol::Dscs1) {
            const auto& f = e->rec.f1();
            auto stale = [&](std::uint64_t i) -> const dscs1::ReadResponse* {
                if (!opts_.behavior.serve_stale) return nullptr;
                auto it = e->stale.find(i);
                return it == e->stale.end() ? nullptr : &it->second;
            };
            auto proof = dscs1::prove_from(
                c, f.pk,
                [&](std::uint64_t i) {
                    auto s = stale(i);
                    return served_block(*e, i, s ? *s->block : f.blocks[i - 1]);
                },
                [&](std::uint64_t i) -> const snc::RsaTag& {
                    auto s = stale(i);
                    return s ? *s->tag : f.tags[i - 1];
                },
                [&](std::uint64_t i) {
                    auto s = stale(i);
                    return s ? s->proof : f.list.prove(i);
                });
            proof.write(w);
        } else {
            const auto& f = e->rec.f2();
            auto proof = dscs2::prove2_from(
                f.pub.suite(), c, [&](std::uint64_t i) { return served_block(*e, i, f.blocks[i - 1]); },
                [&](std::uint64_t i) -> const dscs2::G1& { return f.tags[i - 1]; });
            w.raw(proof.encode(f.pub.suite()));
        }
        return w.take();
    }

    ServiceOptions opts_;
    mutable std::mutex map_mu_;
    std::unordered_map<std::string, std::shared_ptr<Entry>> files_;
};

} // namespace dscs::service

#endif // DSCS_SERVICE_HANDLER_HPP
