#include <gtest/gtest.h>

#include <cmath>

#include "dscs/crypto/bigint.hpp"
#include "dscs/skiplist.hpp"

using namespace dscs;
using namespace dscs::skiplist;

namespace {

std::vector<Bytes> random_elements(Rng& rng, std::size_t m) {
    std::vector<Bytes> out;
    for (std::size_t i = 0; i < m; ++i) out.push_back(rng.bytes(24));
    return out;
}

// Oracle: labels computed straight from the definition over the flat list.
// Tower p (0 = sentinel) has a node at every level up to its height; the
// right child of node (l, p) is the next tower reaching level l, kept only if
// that tower stops exactly at l.
struct FlatOracle {
    std::vector<Bytes> elements;  // 1-based through index + 1
    std::vector<unsigned> levels;

    explicit FlatOracle(std::vector<Bytes> els) : elements(std::move(els)) {
        for (auto& e : elements) levels.push_back(element_level(e));
    }
    FlatOracle(std::vector<Bytes> els, std::vector<unsigned> lv) : elements(std::move(els)), levels(std::move(lv)) {}

    unsigned height(std::size_t p) const {
        if (p == 0) return levels.empty() ? 0 : *std::max_element(levels.begin(), levels.end());
        return levels[p - 1];
    }

    std::pair<std::uint64_t, Digest> node(unsigned l, std::size_t p) const {
        std::size_t q = p + 1;
        while (q <= elements.size() && height(q) < l) ++q;
        std::uint64_t rr = 0;
        Digest rl = kZeroDigest;
        if (q <= elements.size() && height(q) == l) std::tie(rr, rl) = node(l, q);
        if (l == 0) {
            std::uint64_t own = p == 0 ? 0 : 1;
            Digest x = p == 0 ? kZeroDigest : digest(elements[p - 1]);
            std::uint64_t rank = own + rr;
            Hasher h;
            h.update_u8(0).update_u64(rank).update(x).update(rl);
            return {rank, h.finish()};
        }
        auto [dr, dl] = node(l - 1, p);
        std::uint64_t rank = dr + rr;
        Hasher h;
        h.update_u8(static_cast<std::uint8_t>(l)).update_u64(rank).update(dl).update(rl);
        return {rank, h.finish()};
    }

    Metadata metadata() const {
        auto [rank, label] = node(height(0), 0);
        return {label, rank};
    }
};

std::vector<AnchorRead> anchors_for(const SkipList& s, UpdateType t, std::uint64_t i) {
    std::vector<AnchorRead> out;
    for (auto j : update_anchors(t, i)) {
        AnchorRead a;
        a.index = j;
        if (j > 0) a.element = s.element(j);
        a.proof = s.prove(j);
        out.push_back(std::move(a));
    }
    return out;
}

} // namespace

TEST(SkipList, EmptyListIsSentinelOnly) {
    auto s = SkipList::build({});
    auto md = s.metadata();
    EXPECT_EQ(md.count, 0u);
    EXPECT_EQ(s.height(), 0u);
    Hasher h;
    h.update_u8(0).update_u64(0).update(kZeroDigest).update(kZeroDigest);
    EXPECT_EQ(md.root, h.finish());
    EXPECT_TRUE(verify_read(0, md, std::nullopt, s.prove(0)));
    EXPECT_THROW(s.prove(1), Error);
}

TEST(SkipList, SingleElementByHand) {
    Bytes t1 = to_bytes("t1");
    auto s = SkipList::build({t1});
    unsigned L = element_level(t1);
    // Bottom node of t1, then its tower, then the head tower above the sentinel.
    Digest f = Hasher().update_u8(0).update_u64(1).update(digest(t1)).update(kZeroDigest).finish();
    for (unsigned l = 1; l <= L; ++l)
        f = Hasher().update_u8(static_cast<std::uint8_t>(l)).update_u64(1).update(f).update(kZeroDigest).finish();
    // Sentinel chain: the top head node holds t1's tower as its right child.
    Digest sent = Hasher().update_u8(0).update_u64(L == 0 ? 1 : 0).update(kZeroDigest).update(L == 0 ? f : kZeroDigest).finish();
    Digest root = sent;
    for (unsigned l = 1; l <= L; ++l) {
        bool top = l == L;
        root = Hasher().update_u8(static_cast<std::uint8_t>(l)).update_u64(top ? 1 : 0).update(root).update(top ? f : kZeroDigest).finish();
    }
    EXPECT_EQ(s.metadata().root, root);
    EXPECT_EQ(s.metadata().count, 1u);
    auto p = s.prove(1);
    EXPECT_TRUE(verify_read(1, s.metadata(), t1, p));
    if (L == 0) {
        EXPECT_LE(p.entries.size(), 2u);
    }
}

TEST(SkipList, NineTagsRootRank) {
    std::vector<Bytes> tags;
    for (int i = 1; i <= 9; ++i) tags.push_back(to_bytes("t" + std::to_string(i)));
    auto s = SkipList::build(tags);
    EXPECT_EQ(s.metadata().count, 9u);
    EXPECT_EQ(s.metadata(), FlatOracle(tags).metadata());
    EXPECT_EQ(check_invariants(s.tree()), "");
    for (std::uint64_t i = 1; i <= 9; ++i) EXPECT_TRUE(verify_read(i, s.metadata(), tags[i - 1], s.prove(i)));
}

TEST(SkipList, BuildMatchesFlatOracle) {
    auto rng = Rng::deterministic(11);
    for (std::size_t m : {0u, 1u, 2u, 3u, 17u, 100u, 513u}) {
        auto els = random_elements(rng, m);
        auto s = SkipList::build(els);
        EXPECT_EQ(s.metadata(), FlatOracle(els).metadata()) << "m=" << m;
        EXPECT_EQ(check_invariants(s.tree()), "");
    }
}

TEST(SkipList, ReadOutOfRange) {
    auto rng = Rng::deterministic(2);
    auto s = SkipList::build(random_elements(rng, 5));
    EXPECT_THROW(s.element(0), Error);
    EXPECT_THROW(s.prove(6), Error);
    try {
        s.prove(6);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
    }
}

TEST(SkipList, BitFlipRejected) {
    auto rng = Rng::deterministic(3);
    auto els = random_elements(rng, 64);
    auto s = SkipList::build(els);
    auto md = s.metadata();
    for (std::uint64_t i = 1; i <= 64; i += 7) {
        auto tag = els[i - 1];
        tag[rng.below_u64(tag.size())] ^= static_cast<std::uint8_t>(1u << rng.below_u64(8));
        EXPECT_FALSE(verify_read(i, md, tag, s.prove(i)));
    }
}

TEST(SkipList, RandomProofMutationsRejected) {
    auto rng = Rng::deterministic(4);
    auto els = random_elements(rng, 200);
    auto s = SkipList::build(els);
    auto md = s.metadata();
    int accepted = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        auto i = 1 + rng.below_u64(200);
        Bytes enc = s.prove(i).encode();
        // Skip the 4-byte count; flipping it only makes the proof unparsable.
        std::size_t byte = 4 + rng.below_u64(enc.size() - 4);
        enc[byte] ^= static_cast<std::uint8_t>(1u << rng.below_u64(8));
        try {
            if (verify_read(i, md, els[i - 1], Proof::decode(enc))) ++accepted;
        } catch (const Error&) {
        }
    }
    EXPECT_EQ(accepted, 0);
}

TEST(SkipList, PositionalBinding) {
    auto rng = Rng::deterministic(5);
    auto els = random_elements(rng, 32);
    auto s = SkipList::build(els);
    auto md = s.metadata();
    for (std::uint64_t i = 1; i <= 32; ++i) {
        auto p = s.prove(i);
        for (std::uint64_t j = 0; j <= 33; ++j) {
            std::optional<Bytes> el;
            if (j != 0) el = els[i - 1];
            EXPECT_EQ(verify_read(j, md, el, p), i == j) << i << " as " << j;
        }
    }
}

TEST(SkipList, ProofRoundTripsOnWire) {
    auto rng = Rng::deterministic(6);
    auto s = SkipList::build(random_elements(rng, 50));
    for (std::uint64_t i = 0; i <= 50; ++i) {
        auto p = s.prove(i);
        EXPECT_EQ(Proof::decode(p.encode()), p);
    }
    Bytes bad = s.prove(3).encode();
    bad.pop_back();
    EXPECT_THROW(Proof::decode(bad), Error);
}

TEST(SkipList, SerializationRoundTrip) {
    auto rng = Rng::deterministic(7);
    auto els = random_elements(rng, 300);
    auto s = SkipList::build(els);
    auto t = SkipList::deserialize(s.serialize());
    EXPECT_EQ(t.metadata(), s.metadata());
    EXPECT_EQ(check_invariants(t.tree()), "");
    for (std::uint64_t i = 1; i <= 300; i += 13) EXPECT_EQ(t.element(i), els[i - 1]);

    Bytes dump = s.serialize();
    dump[dump.size() / 2] ^= 1;
    EXPECT_THROW(SkipList::deserialize(dump), Error);
}

TEST(SkipList, StaleRootRejectsOldProof) {
    auto rng = Rng::deterministic(8);
    auto els = random_elements(rng, 8);
    auto s = SkipList::build(els);
    auto old_md = s.metadata();
    auto old_proof = s.prove(3);
    s.modify(5, rng.bytes(24));
    EXPECT_TRUE(verify_read(3, old_md, els[2], old_proof));
    EXPECT_FALSE(verify_read(3, s.metadata(), els[2], old_proof));
}

TEST(SkipList, ModifySameTagIsIdempotent) {
    auto rng = Rng::deterministic(9);
    auto els = random_elements(rng, 8);
    auto s = SkipList::build(els);
    auto md = s.metadata();
    auto pending = init_update(4, UpdateType::Modify, md, els[3], anchors_for(s, UpdateType::Modify, 4));
    EXPECT_EQ(pending.expected, md);
}

TEST(SkipList, InsertThenDeleteRestoresRoot) {
    auto rng = Rng::deterministic(10);
    auto els = random_elements(rng, 8);
    auto s = SkipList::build(els);
    auto md0 = s.metadata();

    Bytes extra = rng.bytes(24);
    auto p1 = init_update(8, UpdateType::Insert, md0, extra, anchors_for(s, UpdateType::Insert, 8));
    auto proof1 = s.perform_update(8, UpdateType::Insert, extra);
    ASSERT_TRUE(verify_update(p1, proof1));
    EXPECT_EQ(p1.expected.count, 9u);
    EXPECT_EQ(s.size(), 9u);

    auto p2 = init_update(9, UpdateType::Delete, p1.expected, std::nullopt, anchors_for(s, UpdateType::Delete, 9));
    EXPECT_EQ(p2.expected, md0);
    auto proof2 = s.perform_update(9, UpdateType::Delete, std::nullopt);
    EXPECT_TRUE(verify_update(p2, proof2));
    EXPECT_EQ(s.metadata(), md0);
}

TEST(SkipList, DeleteBounds) {
    auto s = SkipList::build({});
    EXPECT_THROW(init_update(1, UpdateType::Delete, s.metadata(), std::nullopt, {}), Error);
    EXPECT_THROW(init_update(0, UpdateType::Delete, s.metadata(), std::nullopt, {}), Error);
    EXPECT_THROW(init_update(2, UpdateType::Insert, s.metadata(), to_bytes("x"), {}), Error);
}

TEST(SkipList, InitUpdateRejectsForgedAnchor) {
    auto rng = Rng::deterministic(12);
    auto els = random_elements(rng, 10);
    auto s = SkipList::build(els);
    auto reads = anchors_for(s, UpdateType::Modify, 4);
    reads[0].element->at(0) ^= 1;
    try {
        init_update(4, UpdateType::Modify, s.metadata(), rng.bytes(24), reads);
        FAIL() << "forged anchor accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::StaleProof);
    }
}

TEST(SkipList, DeleteFirstUsesSentinelAnchor) {
    auto rng = Rng::deterministic(13);
    auto els = random_elements(rng, 6);
    auto s = SkipList::build(els);
    auto p = init_update(1, UpdateType::Delete, s.metadata(), std::nullopt, anchors_for(s, UpdateType::Delete, 1));
    auto proof = s.perform_update(1, UpdateType::Delete, std::nullopt);
    EXPECT_TRUE(verify_update(p, proof));
    els.erase(els.begin());
    EXPECT_EQ(s.metadata(), FlatOracle(els).metadata());
}

TEST(SkipList, DeleteLastElementEmptiesList) {
    auto s = SkipList::build({to_bytes("only")});
    auto p = init_update(1, UpdateType::Delete, s.metadata(), std::nullopt, anchors_for(s, UpdateType::Delete, 1));
    EXPECT_EQ(p.expected.count, 0u);
    auto proof = s.perform_update(1, UpdateType::Delete, std::nullopt);
    EXPECT_TRUE(verify_update(p, proof));
    EXPECT_EQ(s.metadata(), SkipList::build({}).metadata());
}

TEST(SkipList, SkippedOrMisplacedUpdateFailsVerification) {
    auto rng = Rng::deterministic(14);
    auto els = random_elements(rng, 20);
    auto s = SkipList::build(els);
    Bytes fresh = rng.bytes(24);
    const auto md = s.metadata();

    // Skipped insert/delete: the pre-update proof at the confirm position has
    // the old ranks.
    auto ins = init_update(5, UpdateType::Insert, md, fresh, anchors_for(s, UpdateType::Insert, 5));
    EXPECT_FALSE(verify_update(ins, s.prove(6)));
    auto del = init_update(5, UpdateType::Delete, md, std::nullopt, anchors_for(s, UpdateType::Delete, 5));
    EXPECT_FALSE(verify_update(del, s.prove(4)));

    // Misplaced by one position, every update type.
    for (auto type : {UpdateType::Insert, UpdateType::Modify, UpdateType::Delete}) {
        std::optional<Bytes> el;
        if (type != UpdateType::Delete) el = fresh;
        auto p = init_update(5, type, md, el, anchors_for(s, type, 5));
        auto wrong = SkipList::deserialize(s.serialize());
        auto proof = wrong.perform_update(6, type, el);
        EXPECT_FALSE(verify_update(p, proof)) << to_string(type);
        auto right = SkipList::deserialize(s.serialize());
        EXPECT_TRUE(verify_update(p, right.perform_update(5, type, el))) << to_string(type);
    }

    // A skipped modify leaves every sibling on the path unchanged, so its
    // pre-update proof is the honest one; the stale element surfaces on the
    // next read or audit instead.
    auto mod = init_update(5, UpdateType::Modify, md, fresh, anchors_for(s, UpdateType::Modify, 5));
    EXPECT_TRUE(verify_update(mod, s.prove(5)));
    EXPECT_FALSE(verify_read(5, mod.expected, s.element(5), s.prove(5)));
}

// Random updates checked against three oracles at every step: the client's
// prediction, the flat recomputation, and the full structural scan.
TEST(SkipList, UpdateFuzz) {
    auto rng = Rng::deterministic(15);
    std::vector<Bytes> els = random_elements(rng, 10);
    std::vector<unsigned> levels;
    for (auto& e : els) levels.push_back(element_level(e));
    auto s = SkipList::build(els);
    auto md = s.metadata();
    for (int step = 0; step < 1000; ++step) {
        auto m = els.size();
        auto kind = rng.below_u64(3);
        UpdateType type = m == 0 || kind == 0 ? UpdateType::Insert : kind == 1 ? UpdateType::Modify : UpdateType::Delete;
        std::uint64_t i = type == UpdateType::Insert ? rng.below_u64(m + 1) : 1 + rng.below_u64(m);
        std::optional<Bytes> el;
        if (type != UpdateType::Delete) el = rng.bytes(24);

        auto pending = init_update(i, type, md, el, anchors_for(s, type, i));
        auto proof = s.perform_update(i, type, el);
        ASSERT_TRUE(verify_update(pending, proof)) << "step " << step;
        md = pending.expected;
        ASSERT_EQ(md, s.metadata());

        // A modify keeps the tower height of the replaced element.
        if (type == UpdateType::Insert) {
            els.insert(els.begin() + static_cast<long>(i), *el);
            levels.insert(levels.begin() + static_cast<long>(i), element_level(*el));
        } else if (type == UpdateType::Modify) {
            els[i - 1] = *el;
        } else {
            els.erase(els.begin() + static_cast<long>(i - 1));
            levels.erase(levels.begin() + static_cast<long>(i - 1));
        }
        ASSERT_EQ(check_invariants(s.tree()), "") << "step " << step;
        if (step % 25 == 0) {
            ASSERT_EQ(md, FlatOracle(els, levels).metadata()) << "step " << step;
        }
    }
}

TEST(SkipList, ProofLengthLogarithmic) {
    auto rng = Rng::deterministic(16);
    const std::uint64_t m = 1 << 14;
    auto s = SkipList::build(random_elements(rng, m));
    const double bound = 3 * std::log2(static_cast<double>(m));
    int over = 0;
    const int reads = 2000;
    for (int k = 0; k < reads; ++k)
        if (s.prove(1 + rng.below_u64(m)).entries.size() > bound) ++over;
    EXPECT_LE(over, reads / 100);
}

TEST(SkipList, LevelRule) {
    Digest d{};
    EXPECT_EQ(level_of(d), kLevelCap);
    d[31] = 1;
    EXPECT_EQ(level_of(d), 0u);
    d[31] = 8;
    EXPECT_EQ(level_of(d), 3u);
    d[31] = 0;
    d[30] = 2;
    EXPECT_EQ(level_of(d), 9u);
}
