#ifndef DSCS_SERVICE_STORAGE_HPP
#define DSCS_SERVICE_STORAGE_HPP

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <functional>

#include "dscs/codec.hpp"
#include "dscs/error.hpp"

// Durable file primitives for the server. Layout of one file directory:
//
//   MANIFEST            protocol, fid, m, generation, last applied WAL seq
//   gen-<N>/pub.dat     public parameters (h-list stripped)
//   gen-<N>/blocks.dat  fixed-width records, one per block
//   gen-<N>/tags.dat    fixed-width records, one per tag
//   gen-<N>/hlist.dat   fixed-width records (DSCS I only)
//   gen-<N>/list.dat    serialized skip list (DSCS I only)
//   wal.log             update records newer than the checkpoint
//
// A checkpoint is published by renaming MANIFEST.tmp over MANIFEST.

namespace dscs::service {

namespace fs = std::filesystem;

/// Thrown by crash hooks. Deliberately not a std::exception so no handler
/// swallows it: it models the process dying at that point.
struct SimulatedCrash {
    std::string point;
};

using CrashHook = std::function<void(const char* point)>;

inline std::uint32_t crc32_of(ByteView b) {
    return static_cast<std::uint32_t>(::crc32(0L, b.data(), static_cast<uInt>(b.size())));
}

[[noreturn]] inline void io_fail(const std::string& what) {
    fail(ErrorCode::Io, what + ": " + std::strerror(errno));
}

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    ~Fd() { reset(); }

    int get() const { return fd_; }
    explicit operator bool() const { return fd_ >= 0; }
    void reset() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

inline Fd open_or_throw(const fs::path& p, int flags, mode_t mode = 0644) {
    int fd = ::open(p.c_str(), flags | O_CLOEXEC, mode);
    if (fd < 0) io_fail("open " + p.string());
    return Fd(fd);
}

inline void write_all(int fd, ByteView b) {
    std::size_t off = 0;
    while (off < b.size()) {
        ssize_t n = ::write(fd, b.data() + off, b.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            io_fail("write");
        }
        off += static_cast<std::size_t>(n);
    }
}

inline void fsync_or_throw(int fd) {
    if (::fsync(fd) != 0) io_fail("fsync");
}

inline void fsync_dir(const fs::path& dir) {
    Fd d = open_or_throw(dir, O_RDONLY | O_DIRECTORY);
    fsync_or_throw(d.get());
}

/// Writes via a temp file and rename, so readers see old or new, never half.
inline void write_file_durable(const fs::path& p, ByteView b) {
    fs::path tmp = p;
    tmp += ".tmp";
    {
        Fd fd = open_or_throw(tmp, O_WRONLY | O_CREAT | O_TRUNC);
        write_all(fd.get(), b);
        fsync_or_throw(fd.get());
    }
    if (::rename(tmp.c_str(), p.c_str()) != 0) io_fail("rename " + tmp.string());
    fsync_dir(p.parent_path());
}

inline Bytes read_file(const fs::path& p) {
    Fd fd = open_or_throw(p, O_RDONLY);
    Bytes out;
    std::uint8_t buf[1 << 16];
    for (;;) {
        ssize_t n = ::read(fd.get(), buf, sizeof buf);
        if (n < 0) {
            if (errno == EINTR) continue;
            io_fail("read " + p.string());
        }
        if (n == 0) break;
        out.insert(out.end(), buf, buf + n);
    }
    return out;
}

/// Record file: width(4B) count(8B) then `count` slots of `width` bytes, each
/// slot a 4-byte length followed by the record and zero fill. Slot k lives at
/// a fixed offset, so one record can be located without parsing the rest.
inline Bytes encode_records(const std::vector<Bytes>& records) {
    std::size_t width = 4;
    for (const auto& r : records) width = std::max(width, r.size() + 4);
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(width)).u64(records.size());
    Bytes pad(width);
    for (const auto& r : records) {
        w.u32(static_cast<std::uint32_t>(r.size())).raw(r);
        w.raw(ByteView(pad).first(width - 4 - r.size()));
    }
    return w.take();
}

inline std::vector<Bytes> decode_records(ByteView b) {
    ByteReader r(b);
    std::size_t width = r.u32();
    std::uint64_t count = r.u64();
    if (width < 4 || (count > 0 && r.remaining() / width < count) || r.remaining() != count * width)
        fail(ErrorCode::Malformed, "record file size does not match its header");
    std::vector<Bytes> out;
    out.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        ByteReader slot(r.raw(width));
        std::uint32_t len = slot.u32();
        if (len > width - 4) fail(ErrorCode::Malformed, "record longer than its slot");
        auto body = slot.raw(len);
        out.emplace_back(body.begin(), body.end());
    }
    return out;
}

struct Manifest {
    std::uint8_t protocol = 0;
    Bytes fid;
    std::uint64_t m = 0;
    std::uint64_t generation = 0;
    std::uint64_t applied_seq = 0;  // highest WAL seq folded into the checkpoint

    Bytes encode() const {
        ByteWriter w;
        w.raw(to_bytes("DSMF")).u32(1).u8(protocol).blob(fid).u64(m).u64(generation).u64(applied_seq);
        Bytes body = w.take();
        ByteWriter out;
        out.raw(body).u32(crc32_of(body));
        return out.take();
    }

    static Manifest decode(ByteView b) {
        if (b.size() < 4) fail(ErrorCode::Malformed, "manifest truncated");
        auto body = b.first(b.size() - 4);
        if (ByteReader(b.last(4)).u32() != crc32_of(body)) fail(ErrorCode::Malformed, "manifest checksum mismatch");
        ByteReader r(body);
        auto magic = r.raw(4);
        if (!std::equal(magic.begin(), magic.end(), "DSMF") || r.u32() != 1) fail(ErrorCode::Malformed, "not a manifest");
        Manifest m;
        m.protocol = r.u8();
        m.fid = r.blob();
        m.m = r.u64();
        m.generation = r.u64();
        m.applied_seq = r.u64();
        r.expect_done();
        return m;
    }
};

/// WAL record: seq(8B) len(4B) crc(4B over seq, len and payload) payload.
struct WalRecord {
    std::uint64_t seq = 0;
    Bytes payload;
};

inline Bytes encode_wal_record(const WalRecord& rec) {
    ByteWriter body;
    body.u64(rec.seq).u32(static_cast<std::uint32_t>(rec.payload.size()));
    Bytes head = body.take();
    Bytes covered = head;
    covered.insert(covered.end(), rec.payload.begin(), rec.payload.end());
    ByteWriter w;
    w.raw(head).u32(crc32_of(covered)).raw(rec.payload);
    return w.take();
}

/// Parses the log up to the first torn or corrupt record. `valid_bytes`
/// receives the length of the intact prefix so the tail can be cut off.
inline std::vector<WalRecord> scan_wal(ByteView b, std::size_t* valid_bytes = nullptr) {
    std::vector<WalRecord> out;
    std::size_t off = 0;
    while (b.size() - off >= 16) {
        ByteReader r(b.subspan(off));
        WalRecord rec;
        rec.seq = r.u64();
        std::uint32_t len = r.u32();
        std::uint32_t crc = r.u32();
        if (r.remaining() < len) break;
        auto payload = r.raw(len);
        Bytes covered(b.begin() + static_cast<long>(off), b.begin() + static_cast<long>(off + 12));
        covered.insert(covered.end(), payload.begin(), payload.end());
        if (crc32_of(covered) != crc) break;
        if (!out.empty() && rec.seq != out.back().seq + 1) break;
        rec.payload.assign(payload.begin(), payload.end());
        out.push_back(std::move(rec));
        off += 16 + len;
    }
    if (valid_bytes) *valid_bytes = off;
    return out;
}

/// One checkpoint's worth of component files.
struct Snapshot {
    Bytes pub;
    std::vector<Bytes> blocks;
    std::vector<Bytes> tags;
    std::vector<Bytes> hlist;
    Bytes list;  // empty for DSCS II

    bool operator==(const Snapshot&) const = default;
};

/// Durable state of one file directory: checkpoints plus the live WAL.
class FileDisk {
public:
    FileDisk() = default;

    static std::string dir_name(ByteView fid) { return to_hex(fid); }

    /// Creates the directory atomically (built under a temp name, then renamed).
    static FileDisk create(const fs::path& root, const Manifest& mf, const Snapshot& snap, const CrashHook& crash) {
        fs::path final_dir = root / dir_name(mf.fid);
        fs::path tmp = root / (dir_name(mf.fid) + ".creating");
        fs::remove_all(tmp);
        fs::create_directories(tmp);
        write_snapshot(tmp, mf.generation, snap, crash);
        write_file_durable(tmp / "MANIFEST", mf.encode());
        { Fd w = open_or_throw(tmp / "wal.log", O_WRONLY | O_CREAT | O_TRUNC); fsync_or_throw(w.get()); }
        fsync_dir(tmp);
        hit(crash, "upload.before_publish");
        if (::rename(tmp.c_str(), final_dir.c_str()) != 0) {
            if (errno == EEXIST || errno == ENOTEMPTY) fail(ErrorCode::DuplicateFid, "file id already stored");
            io_fail("rename " + tmp.string());
        }
        fsync_dir(root);
        hit(crash, "upload.after_publish");
        return open_dir(final_dir, crash);
    }

    /// Opens an existing directory, cutting any torn WAL tail.
    static FileDisk open_dir(const fs::path& dir, const CrashHook& crash) {
        FileDisk d;
        d.dir_ = dir;
        d.crash_ = crash;
        d.manifest_ = Manifest::decode(read_file(dir / "MANIFEST"));
        Bytes wal = fs::exists(dir / "wal.log") ? read_file(dir / "wal.log") : Bytes{};
        std::size_t valid = 0;
        auto records = scan_wal(wal, &valid);
        d.pending_.clear();
        for (auto& r : records)
            if (r.seq > d.manifest_.applied_seq) d.pending_.push_back(std::move(r));
        d.next_seq_ = d.pending_.empty() ? d.manifest_.applied_seq + 1 : d.pending_.back().seq + 1;
        d.wal_ = open_or_throw(dir / "wal.log", O_WRONLY | O_CREAT);
        if (valid != wal.size()) {
            if (::ftruncate(d.wal_.get(), static_cast<off_t>(valid)) != 0) io_fail("truncate wal");
            fsync_or_throw(d.wal_.get());
        }
        if (::lseek(d.wal_.get(), static_cast<off_t>(valid), SEEK_SET) < 0) io_fail("seek wal");
        // Leftovers from a checkpoint that never got published.
        for (const auto& e : fs::directory_iterator(dir)) {
            auto name = e.path().filename().string();
            if (name.rfind("gen-", 0) == 0 && name != gen_name(d.manifest_.generation)) fs::remove_all(e.path());
        }
        return d;
    }

    const Manifest& manifest() const { return manifest_; }
    const fs::path& dir() const { return dir_; }
    std::size_t wal_records() const { return next_seq_ - manifest_.applied_seq - 1; }

    Snapshot load_snapshot() const {
        fs::path g = dir_ / gen_name(manifest_.generation);
        Snapshot s;
        s.pub = read_file(g / "pub.dat");
        s.blocks = decode_records(read_file(g / "blocks.dat"));
        s.tags = decode_records(read_file(g / "tags.dat"));
        if (fs::exists(g / "hlist.dat")) s.hlist = decode_records(read_file(g / "hlist.dat"));
        if (fs::exists(g / "list.dat")) s.list = read_file(g / "list.dat");
        return s;
    }

    /// Records that still need replaying on top of the checkpoint.
    std::vector<WalRecord> take_pending() { return std::exchange(pending_, {}); }

    /// Appends and fsyncs one record; the update counts as committed after this.
    void log(ByteView payload) {
        Bytes rec = encode_wal_record({next_seq_, Bytes(payload.begin(), payload.end())});
        hit(crash_, "wal.before_write");
        std::size_t half = rec.size() / 2;
        write_all(wal_.get(), ByteView(rec).first(half));
        hit(crash_, "wal.torn");
        write_all(wal_.get(), ByteView(rec).subspan(half));
        hit(crash_, "wal.before_fsync");
        fsync_or_throw(wal_.get());
        hit(crash_, "wal.after_fsync");
        ++next_seq_;
    }

    /// Writes the full state as a new generation and empties the WAL.
    void checkpoint(std::uint64_t m, const Snapshot& snap) {
        Manifest next = manifest_;
        next.generation = manifest_.generation + 1;
        next.applied_seq = next_seq_ - 1;
        next.m = m;
        fs::path g = dir_ / gen_name(next.generation);
        fs::remove_all(g);
        fs::create_directories(g);
        write_snapshot_into(g, snap, crash_);
        fsync_dir(dir_);
        hit(crash_, "ckpt.before_manifest");
        write_file_durable(dir_ / "MANIFEST", next.encode());
        hit(crash_, "ckpt.after_manifest");
        std::uint64_t old = manifest_.generation;
        manifest_ = next;
        if (::ftruncate(wal_.get(), 0) != 0) io_fail("truncate wal");
        if (::lseek(wal_.get(), 0, SEEK_SET) < 0) io_fail("seek wal");
        fsync_or_throw(wal_.get());
        hit(crash_, "ckpt.after_truncate");
        fs::remove_all(dir_ / gen_name(old));
    }

private:
    static std::string gen_name(std::uint64_t g) { return "gen-" + std::to_string(g); }

    static void hit(const CrashHook& crash, const char* point) {
        if (crash) crash(point);
    }

    static void write_snapshot(const fs::path& dir, std::uint64_t gen, const Snapshot& snap, const CrashHook& crash) {
        fs::path g = dir / gen_name(gen);
        fs::create_directories(g);
        write_snapshot_into(g, snap, crash);
    }

    static void write_snapshot_into(const fs::path& g, const Snapshot& snap, const CrashHook& crash) {
        write_file_durable(g / "pub.dat", snap.pub);
        write_file_durable(g / "blocks.dat", encode_records(snap.blocks));
        hit(crash, "ckpt.mid_files");
        write_file_durable(g / "tags.dat", encode_records(snap.tags));
        if (!snap.list.empty()) {
            write_file_durable(g / "hlist.dat", encode_records(snap.hlist));
            write_file_durable(g / "list.dat", snap.list);
        }
        fsync_dir(g);
    }

    fs::path dir_;
    CrashHook crash_;
    Manifest manifest_;
    std::vector<WalRecord> pending_;
    std::uint64_t next_seq_ = 1;
    Fd wal_;
};

} // namespace dscs::service

#endif // DSCS_SERVICE_STORAGE_HPP
