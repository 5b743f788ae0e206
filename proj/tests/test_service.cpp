#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <future>
#include <thread>

#include "dscs/client.hpp"
#include "support.hpp"

using namespace dscs;
using namespace dscs::service;
using dscs::testing::random_block;
using dscs::testing::TempDir;

namespace {

struct Client1 {
    dscs1::ClientState st;
    dscs1::UploadBundle bundle;

    static Client1 make(Rng& rng, std::uint64_t m, std::size_t n = 3) {
        auto st = dscs1::keygen(test_profile(), m, n, rng);
        std::vector<DataBlock> blocks;
        for (std::uint64_t i = 0; i < m; ++i) blocks.push_back(random_block(rng, n, BigInt(1) << 16));
        auto bundle = dscs1::outsource_blocks(blocks, st, rng);
        return {std::move(st), std::move(bundle)};
    }
};

struct Client2 {
    dscs2::ClientState st;
    dscs2::UploadBundle bundle;

    static Client2 make(Rng& rng, std::uint64_t m, std::size_t n = 3) {
        auto st = dscs2::keygen2(test_profile(), m, n, rng);
        std::vector<DataBlock> blocks;
        for (std::uint64_t i = 0; i < m; ++i) blocks.push_back(random_block(rng, n, BigInt(1) << 56));
        auto bundle = dscs2::outsource2_blocks(blocks, st);
        return {std::move(st), std::move(bundle)};
    }
};

/// Service over a scratch directory, reachable in-process.
struct Node {
    TempDir dir;
    ServiceOptions opts;
    std::unique_ptr<Service> svc;
    std::unique_ptr<InProcessTransport> transport;
    std::unique_ptr<Remote> remote;

    explicit Node(ServiceOptions o = {}) : opts(std::move(o)) {
        opts.data_dir = dir.path;
        start();
    }
    void start() {
        remote.reset();
        transport.reset();
        svc.reset();
        svc = std::make_unique<Service>(opts);
        transport = std::make_unique<InProcessTransport>(*svc);
        remote = std::make_unique<Remote>(*transport);
    }
};

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode{};
}

Bytes read_payload(std::uint64_t i, std::uint8_t flags = 0) {
    ByteWriter w;
    w.u64(i).u8(flags);
    return w.take();
}

} // namespace

TEST(Wire, FrameRoundTripFuzz) {
    auto rng = Rng::deterministic(1);
    for (int k = 0; k < 1000; ++k) {
        wire::Frame f;
        f.type = static_cast<std::uint8_t>(rng.below_u64(256));
        f.fid = rng.bytes(rng.below_u64(40));
        f.payload = rng.bytes(rng.below_u64(300));
        Bytes enc = wire::encode(f);
        ASSERT_EQ(enc.size(), 12 + f.fid.size() + f.payload.size());
        ASSERT_EQ(wire::decode(enc), f);
        // Any strict prefix is truncated, any extension has trailing bytes.
        std::size_t cut = rng.below_u64(enc.size());
        EXPECT_EQ(code_of([&] { wire::decode(ByteView(enc).first(cut)); }), ErrorCode::Malformed);
        Bytes longer = enc;
        longer.push_back(0);
        EXPECT_EQ(code_of([&] { wire::decode(longer); }), ErrorCode::Malformed);
    }
}

TEST(Wire, HeaderFieldsAreBigEndian) {
    wire::Frame f(wire::MsgType::Read, Bytes{0xAA, 0xBB}, Bytes{1, 2, 3});
    Bytes enc = wire::encode(f);
    Bytes want = {'D', 'S', 'C', 'S', 1, 0x02, 0x00, 0x02, 0xAA, 0xBB, 0, 0, 0, 3, 1, 2, 3};
    EXPECT_EQ(enc, want);
    Bytes bad = enc;
    bad[0] = 'X';
    EXPECT_EQ(code_of([&] { wire::decode(bad); }), ErrorCode::Malformed);
    bad = enc;
    bad[4] = 2;
    EXPECT_EQ(code_of([&] { wire::decode(bad); }), ErrorCode::Malformed);
    auto err = wire::error_frame(ErrorCode::Busy, "x");
    EXPECT_EQ(err.payload, (Bytes{0x00, 0x0F, 'x'}));
}

TEST(Wire, EveryReplyReparses) {
    auto rng = Rng::deterministic(2);
    Node node;
    auto c1 = Client1::make(rng, 6);
    auto c2 = Client2::make(rng, 4);
    node.remote->upload(c1.bundle);
    node.remote->upload(c2.bundle);
    std::vector<Bytes> fids = {c1.st.fid(), c2.st.pub.fid, rng.bytes(3), {}};
    for (int k = 0; k < 2000; ++k) {
        wire::Frame req;
        req.type = k % 5 == 0 ? static_cast<std::uint8_t>(rng.below_u64(256)) : static_cast<std::uint8_t>(1 + rng.below_u64(4));
        req.fid = fids[rng.below_u64(fids.size())];
        switch (rng.below_u64(3)) {
        case 0: req.payload = read_payload(rng.below_u64(9), static_cast<std::uint8_t>(rng.below_u64(3))); break;
        case 1: {
            auto c = dscs1::sample_challenge(4, 1 + rng.below_u64(4), BigInt(1) << 16, rng);
            ByteWriter w;
            c.write(w);
            req.payload = w.take();
            break;
        }
        default: req.payload = rng.bytes(rng.below_u64(64));
        }
        auto rep = node.svc->handle(req);
        Bytes enc = wire::encode(rep);
        ASSERT_EQ(wire::decode(enc), rep);
        if (rep.type == static_cast<std::uint8_t>(wire::MsgType::Error)) {
            auto [code, msg] = wire::parse_error(rep);
            auto v = static_cast<unsigned>(code);
            EXPECT_TRUE(v >= 1 && v <= 20) << v;
        } else {
            EXPECT_EQ(rep.type, req.type);
        }
    }
}

TEST(Service, UnknownMessageTypeGetsErrorReply) {
    Node node;
    auto rep = node.svc->handle(wire::Frame{});
    ASSERT_EQ(rep.msg_type(), wire::MsgType::Error);
    EXPECT_EQ(wire::parse_error(rep).first, ErrorCode::UnknownMessage);
    wire::Frame f;
    f.type = 0x7F;
    EXPECT_EQ(wire::parse_error(node.svc->handle(f)).first, ErrorCode::UnknownMessage);
}

TEST(Service, UploadErrors) {
    auto rng = Rng::deterministic(3);
    Node node;
    auto c = Client1::make(rng, 4);
    EXPECT_EQ(node.remote->upload(c.bundle), 4u);
    EXPECT_EQ(code_of([&] { node.remote->upload(c.bundle); }), ErrorCode::DuplicateFid);

    auto d = Client1::make(rng, 4);
    auto short_tags = d.bundle;
    short_tags.tags.pop_back();
    EXPECT_EQ(code_of([&] { node.remote->upload(short_tags); }), ErrorCode::CountMismatch);
    EXPECT_EQ(node.svc->file_count(), 1u);
    EXPECT_EQ(node.remote->upload(d.bundle), 4u);

    auto e = Client2::make(rng, 2);
    auto extra = e.bundle;
    extra.tags.push_back(extra.tags.front());
    EXPECT_EQ(code_of([&] { node.remote->upload(extra); }), ErrorCode::CountMismatch);
    EXPECT_EQ(node.remote->upload(e.bundle), 2u);
    EXPECT_EQ(code_of([&] { node.remote->upload(e.bundle); }), ErrorCode::DuplicateFid);
}

TEST(Service, ReadBoundaries) {
    auto rng = Rng::deterministic(4);
    Node node;
    auto c1 = Client1::make(rng, 5);
    auto c2 = Client2::make(rng, 5);
    node.remote->upload(c1.bundle);
    node.remote->upload(c2.bundle);
    for (std::uint64_t i : {1u, 5u}) {
        EXPECT_TRUE(verified_read1(*node.remote, c1.st, i));
        EXPECT_TRUE(verified_read2(*node.remote, c2.st.pub, i));
    }
    EXPECT_EQ(code_of([&] { node.remote->read1(c1.st.fid(), 6); }), ErrorCode::IndexOutOfRange);
    EXPECT_EQ(code_of([&] { node.remote->read2(c2.st.pub, 6); }), ErrorCode::IndexOutOfRange);
    EXPECT_EQ(code_of([&] { node.remote->read1(c1.st.fid(), 0); }), ErrorCode::IndexOutOfRange);
    EXPECT_EQ(node.remote->read1(c1.st.fid(), 0, true).index, 0u);
    EXPECT_EQ(code_of([&] { node.remote->read1(Bytes{1, 2, 3}, 1); }), ErrorCode::UnknownFid);
}

TEST(Service, HonestUpdatesAndAudits) {
    auto rng = Rng::deterministic(5);
    Node node;
    auto c = Client1::make(rng, 6);
    node.remote->upload(c.bundle);
    auto& st = c.st;
    EXPECT_TRUE(remote_update1(*node.remote, st, UpdateType::Insert, 6, random_block(rng, 3, 1 << 16), rng));
    EXPECT_TRUE(remote_update1(*node.remote, st, UpdateType::Modify, 1, random_block(rng, 3, 1 << 16), rng));
    EXPECT_TRUE(remote_update1(*node.remote, st, UpdateType::Insert, 0, random_block(rng, 3, 1 << 16), rng));
    EXPECT_TRUE(remote_update1(*node.remote, st, UpdateType::Delete, 8, std::nullopt, rng));
    EXPECT_EQ(st.pk.blocks(), 7u);
    for (int k = 0; k < 5; ++k) EXPECT_TRUE(remote_audit1(*node.remote, st.pk, 4, rng));
    EXPECT_EQ(code_of([&] { node.remote->read1(st.fid(), 8); }), ErrorCode::IndexOutOfRange);

    dscs1::Challenge gone;
    gone.pairs = {{8, 1}};
    EXPECT_EQ(code_of([&] { node.remote->challenge1(st.fid(), gone); }), ErrorCode::IndexOutOfRange);
}

TEST(Service, Dscs2AppendAuditAndRejectsFalseAcks) {
    auto rng = Rng::deterministic(6);
    Node node;
    auto c = Client2::make(rng, 0);
    node.remote->upload(c.bundle);
    for (int k = 0; k < 6; ++k) ASSERT_TRUE(remote_append2(*node.remote, c.st, random_block(rng, 3, BigInt(1) << 56)));
    EXPECT_EQ(c.st.pub.m, 6u);
    EXPECT_TRUE(remote_audit2(*node.remote, c.st.pub, 6, rng));
    EXPECT_TRUE(verified_read2(*node.remote, c.st.pub, 6));

    ServiceOptions o;
    o.behavior.drop_updates = true;
    Node lying(o);
    auto d = Client2::make(rng, 2);
    lying.remote->upload(d.bundle);
    EXPECT_FALSE(remote_append2(*lying.remote, d.st, random_block(rng, 3, 5)));
    EXPECT_EQ(d.st.pub.m, 2u);
}

TEST(Service, RestartRecoversCheckpointPlusWal) {
    auto rng = Rng::deterministic(7);
    ServiceOptions o;
    o.checkpoint_every = 3;
    Node node(o);
    auto c = Client1::make(rng, 5);
    node.remote->upload(c.bundle);
    for (int k = 0; k < 20; ++k) {
        auto m = c.st.pk.blocks();
        auto type = static_cast<UpdateType>(1 + rng.below_u64(3));
        if (m <= 1 && type == UpdateType::Delete) type = UpdateType::Insert;
        std::uint64_t i = type == UpdateType::Insert ? rng.below_u64(m + 1) : 1 + rng.below_u64(m);
        std::optional<DataBlock> v;
        if (type != UpdateType::Delete) v = random_block(rng, 3, 1 << 16);
        ASSERT_TRUE(remote_update1(*node.remote, c.st, type, i, v, rng));
    }
    auto before = node.svc->snapshot_of(c.st.fid())->snapshot();
    node.start();
    EXPECT_EQ(node.svc->snapshot_of(c.st.fid())->snapshot(), before);
    EXPECT_TRUE(remote_audit1(*node.remote, c.st.pk, std::min<std::uint64_t>(3, c.st.pk.blocks()), rng));

    // A torn record at the tail is cut off on the next start.
    auto wal = node.dir.path / FileDisk::dir_name(c.st.fid()) / "wal.log";
    {
        Fd fd = open_or_throw(wal, O_WRONLY | O_APPEND);
        write_all(fd.get(), Bytes{0, 0, 0, 0, 0, 0, 0, 99, 0, 0});
    }
    node.start();
    EXPECT_EQ(node.svc->snapshot_of(c.st.fid())->snapshot(), before);
    EXPECT_TRUE(remote_update1(*node.remote, c.st, UpdateType::Insert, 0, random_block(rng, 3, 9), rng));
    node.start();
    EXPECT_TRUE(remote_audit1(*node.remote, c.st.pk, std::min<std::uint64_t>(3, c.st.pk.blocks()), rng));

    auto d = Client2::make(rng, 1);
    node.remote->upload(d.bundle);
    for (int k = 0; k < 7; ++k) ASSERT_TRUE(remote_append2(*node.remote, d.st, random_block(rng, 3, 77)));
    node.start();
    EXPECT_EQ(node.svc->snapshot_of(d.st.pub.fid)->size(), 8u);
    EXPECT_TRUE(remote_audit2(*node.remote, d.st.pub, 8, rng));
}

namespace {

struct CrashPlan {
    int counter = 0;
    int kill_at = 0;  // 0: never
    std::string point;

    CrashHook hook() {
        return [this](const char* p) {
            if (kill_at && ++counter == kill_at) {
                point = p;
                throw SimulatedCrash{p};
            }
        };
    }
    void arm(int k) {
        counter = 0;
        kill_at = k;
    }
};

} // namespace

TEST(Service, CrashAtRandomPointsLeavesPreOrPostState) {
    auto rng = Rng::deterministic(8);
    CrashPlan plan;
    ServiceOptions o;
    o.checkpoint_every = 2;
    o.crash = plan.hook();
    Node node(o);
    auto c = Client1::make(rng, 6);
    node.remote->upload(c.bundle);
    auto& st = c.st;

    int crashes = 0, pre = 0, post = 0, upload_crashes = 0;
    std::map<std::string, int> points;
    for (int attempt = 0; crashes < 200 && attempt < 5000; ++attempt) {
        if (attempt % 10 == 9) {
            // Uploads: the file is either absent or complete.
            auto fresh = Client1::make(rng, 3);
            auto fid = fresh.st.fid();
            if (node.svc->snapshot_of(fid)) continue;
            auto want = record_from_upload(fid, [&] {
                            ByteWriter w;
                            w.u8(1);
                            fresh.bundle.write(w);
                            return w.take();
                        }()).snapshot();
            plan.arm(1 + static_cast<int>(rng.below_u64(4)));
            bool crashed = false;
            try {
                node.remote->upload(fresh.bundle);
            } catch (const SimulatedCrash&) {
                crashed = true;
            }
            plan.arm(0);
            if (!crashed) continue;
            ++crashes;
            ++upload_crashes;
            ++points[plan.point];
            node.start();
            auto got = node.svc->snapshot_of(fid);
            if (got) {
                EXPECT_EQ(got->snapshot(), want) << plan.point;
            }
            continue;
        }

        auto m = st.pk.blocks();
        auto type = static_cast<UpdateType>(1 + rng.below_u64(3));
        if (m <= 2 && type == UpdateType::Delete) type = UpdateType::Insert;
        std::uint64_t i = type == UpdateType::Insert ? rng.below_u64(m + 1) : 1 + rng.below_u64(m);
        std::optional<DataBlock> v;
        if (type != UpdateType::Delete) v = random_block(rng, 3, 1 << 16);

        std::vector<dscs1::ReadResponse> anchors;
        for (auto j : dscs1::update_anchors(type, i)) anchors.push_back(node.remote->read1(st.fid(), j, true));
        auto pending = dscs1::init_update(st, type, i, v, anchors, rng);
        auto before = *node.svc->snapshot_of(st.fid());
        auto after = before;
        ByteWriter req;
        pending.request.write(req);
        after.apply_update(req.take());

        plan.arm(1 + static_cast<int>(rng.below_u64(10)));
        std::optional<skiplist::Proof> proof;
        try {
            proof = node.remote->update1(st.fid(), pending.request);
        } catch (const SimulatedCrash&) {
        }
        plan.arm(0);
        if (proof) {
            ASSERT_TRUE(dscs1::verify_update(st, pending, *proof));
            continue;
        }
        ++crashes;
        ++points[plan.point];
        node.start();
        auto got = node.svc->snapshot_of(st.fid())->snapshot();
        if (got == before.snapshot()) {
            ++pre;
        } else {
            ASSERT_EQ(got, after.snapshot()) << "neither pre nor post state after crash at " << plan.point;
            ++post;
            st.pk.metadata = pending.list.expected;
            st.pk.hs = pending.new_hs;
        }
        ASSERT_EQ(skiplist::check_invariants(node.svc->snapshot_of(st.fid())->f1().list.tree()), "");
        ASSERT_TRUE(remote_audit1(*node.remote, st.pk, std::min<std::uint64_t>(3, st.pk.blocks()), rng));
    }
    EXPECT_EQ(crashes, 200);
    EXPECT_GT(pre, 0);
    EXPECT_GT(post, 0);
    EXPECT_GT(upload_crashes, 0);
    EXPECT_GE(points.size(), 8u);
}

TEST(Service, UpdateDuringAuditIsBusy) {
    auto rng = Rng::deterministic(9);
    std::promise<void> entered, release;
    auto release_f = release.get_future().share();
    std::atomic<bool> hold{true};
    ServiceOptions o;
    o.on_locked = [&](OpKind k) {
        if (k == OpKind::Audit && hold.exchange(false)) {
            entered.set_value();
            release_f.wait();
        }
    };
    Node node(o);
    auto c = Client1::make(rng, 4);
    node.remote->upload(c.bundle);
    auto pk = c.st.pk;
    auto audit = std::async(std::launch::async, [&] {
        Rng r = Rng::deterministic(10);
        InProcessTransport t(*node.svc);
        Remote remote(t);
        return remote_audit1(remote, pk, 2, r);
    });
    entered.get_future().wait();
    EXPECT_EQ(code_of([&] { remote_update1(*node.remote, c.st, UpdateType::Modify, 1, random_block(rng, 3, 5), rng); }),
              ErrorCode::Busy);
    EXPECT_TRUE(verified_read1(*node.remote, c.st, 2));  // reads share with audits
    release.set_value();
    EXPECT_TRUE(audit.get());
    EXPECT_TRUE(remote_update1(*node.remote, c.st, UpdateType::Modify, 1, random_block(rng, 3, 5), rng));
}

TEST(Service, AuditDuringUpdateIsBusy) {
    auto rng = Rng::deterministic(11);
    std::promise<void> entered, release;
    auto release_f = release.get_future().share();
    std::atomic<bool> hold{true};
    ServiceOptions o;
    o.on_locked = [&](OpKind k) {
        if (k == OpKind::Write && hold.exchange(false)) {
            entered.set_value();
            release_f.wait();
        }
    };
    Node node(o);
    auto c = Client1::make(rng, 4);
    node.remote->upload(c.bundle);
    auto pk = c.st.pk;
    auto update = std::async(std::launch::async, [&] {
        Rng r = Rng::deterministic(12);
        InProcessTransport t(*node.svc);
        Remote remote(t);
        return remote_update1(remote, c.st, UpdateType::Insert, 2, random_block(r, 3, 5), r);
    });
    entered.get_future().wait();
    EXPECT_EQ(code_of([&] { remote_audit1(*node.remote, pk, 2, rng); }), ErrorCode::Busy);
    release.set_value();
    EXPECT_TRUE(update.get());
    EXPECT_TRUE(remote_audit1(*node.remote, c.st.pk, 2, rng));
}

TEST(Service, TwoConcurrentAuditsBothSucceed) {
    auto rng = Rng::deterministic(13);
    std::atomic<int> inside{0}, peak{0};
    ServiceOptions o;
    o.on_locked = [&](OpKind k) {
        if (k != OpKind::Audit) return;
        int now = ++inside;
        int p = peak.load();
        while (now > p && !peak.compare_exchange_weak(p, now)) {
        }
        auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
        while (peak.load() < 2 && std::chrono::steady_clock::now() < deadline) std::this_thread::yield();
        --inside;
    };
    Node node(o);
    auto c = Client1::make(rng, 8);
    node.remote->upload(c.bundle);
    auto pk = c.st.pk;
    auto run = [&](std::uint64_t seed) {
        Rng r = Rng::deterministic(seed);
        InProcessTransport t(*node.svc);
        Remote remote(t);
        return remote_audit1(remote, pk, 4, r);
    };
    auto a = std::async(std::launch::async, run, 1);
    auto b = std::async(std::launch::async, run, 2);
    EXPECT_TRUE(a.get());
    EXPECT_TRUE(b.get());
    EXPECT_EQ(peak.load(), 2);
}

TEST(Service, LockTraceHasNoWriteOverlap) {
    auto rng = Rng::deterministic(14);
    TraceRecorder trace;
    ServiceOptions o;
    o.trace = &trace;
    o.checkpoint_every = 16;
    Node node(o);
    std::vector<Client1> clients;
    for (int k = 0; k < 2; ++k) {
        clients.push_back(Client1::make(rng, 6));
        node.remote->upload(clients.back().bundle);
    }
    std::atomic<int> busy{0};
    std::vector<std::thread> threads;
    for (std::size_t f = 0; f < clients.size(); ++f) {
        threads.emplace_back([&, f] {
            Rng r = Rng::deterministic(100 + f);
            InProcessTransport t(*node.svc);
            Remote remote(t);
            int done = 0;
            while (done < 40) {
                try {
                    auto m = clients[f].st.pk.blocks();
                    auto type = r.below_u64(2) ? UpdateType::Insert : UpdateType::Modify;
                    std::uint64_t i = type == UpdateType::Insert ? r.below_u64(m + 1) : 1 + r.below_u64(m);
                    remote_update1(remote, clients[f].st, type, i, random_block(r, 3, 99), r);
                    ++done;
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::Busy) throw;
                    ++busy;
                }
            }
        });
    }
    std::vector<Bytes> fids = {clients[0].st.fid(), clients[1].st.fid()};
    for (int k = 0; k < 4; ++k) {
        threads.emplace_back([&, k] {
            Rng r = Rng::deterministic(200 + k);
            InProcessTransport t(*node.svc);
            Remote remote(t);
            for (int q = 0; q < 60; ++q) {
                const auto& fid = fids[r.below_u64(2)];
                try {
                    if (q % 2) {
                        remote.read1(fid, 1 + r.below_u64(6));
                    } else {
                        remote.challenge1(fid, dscs1::sample_challenge(6, 3, BigInt(1) << 16, r));
                    }
                } catch (const Error& e) {
                    if (e.code() != ErrorCode::Busy) throw;
                    ++busy;
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    auto events = trace.events();
    EXPECT_EQ(check_lock_discipline(events), "");
    std::map<OpKind, int> kinds;
    for (const auto& e : events) ++kinds[e.kind];
    EXPECT_GE(kinds[OpKind::Write], 80);
    EXPECT_GT(kinds[OpKind::Audit], 0);
    EXPECT_GT(kinds[OpKind::Read], 0);

    // The checker itself flags an overlap.
    std::vector<TraceEvent> bad = {{"f", OpKind::Audit, 1, 4}, {"f", OpKind::Write, 3, 6}, {"g", OpKind::Write, 2, 5}};
    EXPECT_NE(check_lock_discipline(bad), "");
    bad[1].begin = 4;
    EXPECT_EQ(check_lock_discipline(bad), "");
}

TEST(Service, MisbehavingServerIsCaught) {
    auto rng = Rng::deterministic(15);
    for (int mode = 0; mode < 2; ++mode) {
        for (auto type : {UpdateType::Insert, UpdateType::Modify, UpdateType::Delete}) {
            ServiceOptions o;
            (mode == 0 ? o.behavior.drop_updates : o.behavior.misplace_updates) = true;
            Node node(o);
            auto c = Client1::make(rng, 5);
            node.remote->upload(c.bundle);
            auto md = *c.st.pk.metadata;
            std::optional<DataBlock> v;
            if (type != UpdateType::Delete) v = random_block(rng, 3, 5);
            bool accepted = remote_update1(*node.remote, c.st, type, 3, v, rng);
            // A dropped modify leaves identical list siblings, so only the
            // follow-up read exposes it.
            if (mode == 0 && type == UpdateType::Modify) {
                EXPECT_TRUE(accepted);
                EXPECT_FALSE(verified_read1(*node.remote, c.st, 3));
                continue;
            }
            EXPECT_FALSE(accepted) << mode << " " << skiplist::to_string(type);
            EXPECT_EQ(*c.st.pk.metadata, md);  // client kept its state
            if (mode == 1) {
                // The server moved on without the client: the next anchor read is stale.
                EXPECT_EQ(code_of([&] { remote_update1(*node.remote, c.st, UpdateType::Modify, 1, random_block(rng, 3, 5), rng); }),
                          ErrorCode::StaleProof);
            }
        }
    }

    ServiceOptions stale;
    stale.behavior.serve_stale = true;
    Node node(stale);
    auto c = Client1::make(rng, 5);
    node.remote->upload(c.bundle);
    ASSERT_TRUE(remote_update1(*node.remote, c.st, UpdateType::Modify, 3, random_block(rng, 3, 5), rng));
    EXPECT_FALSE(verified_read1(*node.remote, c.st, 3));
    EXPECT_TRUE(verified_read1(*node.remote, c.st, 2));
    dscs1::Challenge ch;
    ch.pairs = {{1, 7}, {3, 9}};
    EXPECT_FALSE(dscs1::verify_audit(ch, node.remote->challenge1(c.st.fid(), ch), c.st.pk));
    ch.pairs = {{1, 7}, {2, 9}};
    EXPECT_TRUE(dscs1::verify_audit(ch, node.remote->challenge1(c.st.fid(), ch), c.st.pk));

    ServiceOptions corrupt;
    corrupt.behavior.corrupt_fraction = 1;
    Node bad(corrupt);
    auto d = Client1::make(rng, 4);
    auto e = Client2::make(rng, 4);
    bad.remote->upload(d.bundle);
    bad.remote->upload(e.bundle);
    EXPECT_FALSE(remote_audit1(*bad.remote, d.st.pk, 2, rng));
    EXPECT_FALSE(remote_audit2(*bad.remote, e.st.pub, 2, rng));
    EXPECT_FALSE(verified_read1(*bad.remote, d.st, 1));
    EXPECT_FALSE(verified_read2(*bad.remote, e.st.pub, 1));
}

TEST(Tcp, RoundTripsAndKeepsConnectionOnUnknownType) {
    auto rng = Rng::deterministic(16);
    TempDir dir;
    ServiceOptions o;
    o.data_dir = dir.path;
    Service svc(o);
    TcpServer server(svc, Endpoint::parse("127.0.0.1:0"), 2);
    Endpoint ep{"127.0.0.1", server.port()};

    TcpTransport t(ep);
    Remote remote(t);
    auto c = Client1::make(rng, 4);
    remote.upload(c.bundle);
    EXPECT_TRUE(remote_update1(remote, c.st, UpdateType::Insert, 4, random_block(rng, 3, 8), rng));
    EXPECT_TRUE(remote_audit1(remote, c.st.pk, 3, rng));

    wire::Frame odd;
    odd.type = 0x42;
    auto rep = t.roundtrip(odd);
    ASSERT_EQ(rep.msg_type(), wire::MsgType::Error);
    EXPECT_EQ(wire::parse_error(rep).first, ErrorCode::UnknownMessage);
    EXPECT_TRUE(verified_read1(remote, c.st, 5));  // same connection still works

    TcpTransport raw(ep);
    auto err = raw.roundtrip_raw(to_bytes("HTTP/1.1 GET /\r\n\r\n"));
    EXPECT_EQ(wire::parse_error(err).first, ErrorCode::Malformed);
    EXPECT_EQ(code_of([&] { raw.roundtrip(wire::Frame(wire::MsgType::Read, c.st.fid(), read_payload(1))); }),
              ErrorCode::Transport);

    // Several clients at once, more than there are workers.
    std::vector<std::future<bool>> runs;
    for (int k = 0; k < 6; ++k) {
        runs.push_back(std::async(std::launch::async, [&, k] {
            Rng r = Rng::deterministic(300 + k);
            TcpTransport tk(ep);
            Remote rk(tk);
            bool ok = true;
            for (int q = 0; q < 5; ++q) ok = ok && remote_audit1(rk, c.st.pk, 2, r);
            return ok;
        }));
    }
    for (auto& f : runs) EXPECT_TRUE(f.get());
    server.stop();
    EXPECT_EQ(code_of([&] { TcpTransport again(ep); }), ErrorCode::Transport);
}
