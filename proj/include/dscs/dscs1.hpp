#ifndef DSCS_DSCS1_HPP
#define DSCS_DSCS1_HPP

#include <algorithm>
#include <optional>
#include <set>
#include <vector>

#include "dscs/layout.hpp"
#include "dscs/profile.hpp"
#include "dscs/skiplist.hpp"
#include "dscs/snc_rsa.hpp"

// Fully dynamic protocol: RSA homomorphic tags bound to a rank-based
// authenticated skip list over the serialized tags.

namespace dscs::dscs1 {

using skiplist::Proof;
using skiplist::UpdateType;
using snc::RsaPublicKey;
using snc::RsaTag;

inline constexpr std::uint32_t kClientStateVersion = 1;

struct ClientState {
    SecurityProfile profile;
    RsaTrapdoor trapdoor;
    RsaPublicKey pk;

    Bytes fid() const { return magnitude_bytes(pk.e); }
    Layout layout() const { return {profile.segment_bytes(), pk.segments()}; }

    Bytes encode() const {
        ByteWriter w;
        w.u32(kClientStateVersion);
        w.blob(to_bytes(profile.name));
        put_int(w, trapdoor.p());
        put_int(w, trapdoor.q());
        pk.write(w);
        return w.take();
    }

    static ClientState decode(ByteView b) {
        ByteReader r(b);
        if (r.u32() != kClientStateVersion) fail(ErrorCode::Malformed, "unsupported client state version");
        auto name = r.blob();
        ClientState st;
        st.profile = profile_by_name(std::string(name.begin(), name.end()));
        BigInt p = get_int(r);
        BigInt q = get_int(r);
        st.trapdoor = RsaTrapdoor(p, q);
        st.pk = RsaPublicKey::read(r);
        r.expect_done();
        if (p * q != st.pk.n) fail(ErrorCode::Malformed, "trapdoor does not factor the modulus");
        return st;
    }
};

/// Picks a (e_bits)-bit prime e with gcd(e, phi(N)) = 1, resampling otherwise.
inline BigInt pick_exponent(const RsaTrapdoor& td, std::size_t e_bits, Rng& rng) {
    const BigInt phi = td.phi();
    for (;;) {
        BigInt e = gen_prime(e_bits, rng);
        if (gcd(e, phi) == 1) return e;
    }
}

inline ClientState keygen(const SecurityProfile& profile, std::uint64_t m, std::size_t n, Rng& rng,
                          std::uint64_t max_candidates = 0) {
    if (m == 0 || n == 0) fail(ErrorCode::Usage, "keygen needs m >= 1 and n >= 1");
    auto kp = gen_rsa_modulus(profile.rsa_prime_bits, rng, max_candidates);
    ClientState st{profile, kp.trapdoor, {}};
    auto& pk = st.pk;
    pk.n = kp.modulus.n;
    pk.e = pick_exponent(kp.trapdoor, profile.e_bits, rng);
    pk.g = random_unit(pk.n, rng);
    for (std::size_t j = 0; j < n; ++j) pk.gs.push_back(random_unit(pk.n, rng));
    for (std::uint64_t i = 0; i < m; ++i) pk.hs.push_back(random_unit(pk.n, rng));
    st.trapdoor.inverse_exponent(pk.e);
    return st;
}

/// What the client ships to the server. The server rebuilds the skip list
/// from the tags; the list is deterministic, so both sides agree on d_M.
struct UploadBundle {
    RsaPublicKey pk;  // without metadata
    std::vector<DataBlock> blocks;
    std::vector<RsaTag> tags;

    void write(ByteWriter& w) const {
        pk.write(w);
        w.u32(static_cast<std::uint32_t>(blocks.size()));
        for (const auto& b : blocks) put_block(w, b);
        w.u32(static_cast<std::uint32_t>(tags.size()));
        for (const auto& t : tags) t.write(w);
    }

    static UploadBundle read(ByteReader& r) {
        UploadBundle u;
        u.pk = RsaPublicKey::read(r);
        auto nb = r.u32();
        if (nb > r.remaining() / 4) fail(ErrorCode::Malformed, "block count exceeds payload");
        for (std::uint32_t i = 0; i < nb; ++i) u.blocks.push_back(get_block(r));
        auto nt = r.u32();
        if (nt > r.remaining() / 8) fail(ErrorCode::Malformed, "tag count exceeds payload");
        for (std::uint32_t i = 0; i < nt; ++i) u.tags.push_back(RsaTag::read(r));
        return u;
    }
};

inline std::vector<Bytes> tag_elements(const std::vector<RsaTag>& tags) {
    std::vector<Bytes> out;
    out.reserve(tags.size());
    for (const auto& t : tags) out.push_back(t.encode());
    return out;
}

/// Tags pre-split blocks; the h-list is resized to the block count.
inline UploadBundle outsource_blocks(std::vector<DataBlock> blocks, ClientState& st, Rng& rng) {
    if (blocks.empty()) fail(ErrorCode::Usage, "nothing to outsource");
    auto& pk = st.pk;
    while (pk.hs.size() < blocks.size()) pk.hs.push_back(random_unit(pk.n, rng));
    pk.hs.resize(blocks.size());

    UploadBundle out;
    out.tags.reserve(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) out.tags.push_back(snc::tag_gen(blocks[i], i + 1, st.trapdoor, pk, rng));
    pk.metadata = skiplist::SkipList::build(tag_elements(out.tags)).metadata();
    out.blocks = std::move(blocks);
    out.pk = pk;
    out.pk.metadata.reset();
    return out;
}

inline UploadBundle outsource(ByteView file, ClientState& st, Rng& rng) {
    return outsource_blocks(st.layout().split(file), st, rng);
}

struct ReadResponse {
    std::uint64_t index = 0;
    std::optional<DataBlock> block;
    std::optional<RsaTag> tag;
    Proof proof;

    // index(8B) || flags(1B: 1 block, 2 tag) || [VEC block] || [tag] || proof
    void write(ByteWriter& w) const {
        w.u64(index).u8(static_cast<std::uint8_t>((block ? 1 : 0) | (tag ? 2 : 0)));
        if (block) put_block(w, *block);
        if (tag) tag->write(w);
        proof.write(w);
    }

    static ReadResponse read(ByteReader& r) {
        ReadResponse out;
        out.index = r.u64();
        auto flags = r.u8();
        if (flags & ~3u) fail(ErrorCode::Malformed, "unknown read flags");
        if (flags & 1) out.block = get_block(r);
        if (flags & 2) out.tag = RsaTag::read(r);
        out.proof = Proof::read(r);
        return out;
    }
};

/// Read check: list proof against d_M and the tag equation against h_i.
inline bool verify_read(const RsaPublicKey& pk, std::uint64_t i, const ReadResponse& resp) {
    if (!pk.metadata || !resp.block || !resp.tag || resp.index != i) return false;
    if (i == 0 || i > pk.blocks()) return false;
    if (!skiplist::verify_read(i, *pk.metadata, resp.tag->encode(), resp.proof)) return false;
    return snc::verify_single(*resp.block, i, *resp.tag, pk);
}

struct UpdateRequest {
    UpdateType type{};
    std::uint64_t index = 0;
    std::optional<BigInt> h;  // fresh h' for inserts
    std::optional<DataBlock> block;
    std::optional<RsaTag> tag;

    // type(1B) || index(8B) || flags(1B: 1 h, 2 block, 4 tag) || fields
    void write(ByteWriter& w) const {
        w.u8(static_cast<std::uint8_t>(type)).u64(index);
        w.u8(static_cast<std::uint8_t>((h ? 1 : 0) | (block ? 2 : 0) | (tag ? 4 : 0)));
        if (h) put_int(w, *h);
        if (block) put_block(w, *block);
        if (tag) tag->write(w);
    }

    static UpdateRequest read(ByteReader& r) {
        UpdateRequest u;
        auto t = r.u8();
        if (t < 1 || t > 3) fail(ErrorCode::Malformed, "unknown update type");
        u.type = static_cast<UpdateType>(t);
        u.index = r.u64();
        auto flags = r.u8();
        if (flags & ~7u) fail(ErrorCode::Malformed, "unknown update flags");
        if (flags & 1) u.h = get_int(r);
        if (flags & 2) u.block = get_block(r);
        if (flags & 4) u.tag = RsaTag::read(r);
        return u;
    }
};

struct PendingUpdate {
    UpdateRequest request;
    skiplist::PendingUpdate list;
    std::vector<BigInt> new_hs;
};

/// Positions to read (with proofs) before an update.
inline std::vector<std::uint64_t> update_anchors(UpdateType type, std::uint64_t i) {
    return skiplist::update_anchors(type, i);
}

/// Client half of an update: fresh tag (and fresh h' for inserts), then the
/// predicted metadata from verified anchor reads. State is not touched.
inline PendingUpdate init_update(const ClientState& st, UpdateType type, std::uint64_t i,
                                 const std::optional<DataBlock>& block, std::span<const ReadResponse> anchors, Rng& rng) {
    const auto& pk = st.pk;
    if (!pk.metadata) fail(ErrorCode::Usage, "file not outsourced yet");
    const std::uint64_t m = pk.blocks();
    if (type == UpdateType::Insert ? i > m : (i == 0 || i > m))
        fail(ErrorCode::IndexOutOfRange, std::string(skiplist::to_string(type)) + " position out of range");

    PendingUpdate out;
    out.request.type = type;
    out.request.index = i;
    out.new_hs = pk.hs;
    std::optional<Bytes> element;
    switch (type) {
    case UpdateType::Insert: {
        if (!block) fail(ErrorCode::Malformed, "insert needs a block");
        BigInt h = random_unit(pk.n, rng);
        out.request.h = h;
        out.request.tag = snc::tag_gen_with(*block, h, st.trapdoor, pk, rng);
        out.new_hs.insert(out.new_hs.begin() + static_cast<long>(i), h);
        break;
    }
    case UpdateType::Modify:
        if (!block) fail(ErrorCode::Malformed, "modify needs a block");
        out.request.tag = snc::tag_gen(*block, i, st.trapdoor, pk, rng);
        break;
    case UpdateType::Delete:
        out.new_hs.erase(out.new_hs.begin() + static_cast<long>(i - 1));
        break;
    }
    if (out.request.tag) element = out.request.tag->encode();
    out.request.block = block;
    if (type == UpdateType::Delete) out.request.block.reset();

    std::vector<skiplist::AnchorRead> reads;
    for (const auto& a : anchors) {
        skiplist::AnchorRead ar;
        ar.index = a.index;
        if (a.index > 0) {
            if (!a.tag) fail(ErrorCode::StaleProof, "anchor read lacks its tag");
            ar.element = a.tag->encode();
        }
        ar.proof = a.proof;
        reads.push_back(std::move(ar));
    }
    out.list = skiplist::init_update(i, type, *pk.metadata, element, reads);
    return out;
}

/// Commits (m, d_M, h-list) iff the server's proof matches the prediction.
inline bool verify_update(ClientState& st, const PendingUpdate& pending, const Proof& proof) {
    if (!st.pk.metadata || !(*st.pk.metadata == pending.list.previous)) return false;
    if (!skiplist::verify_update(pending.list, proof)) return false;
    st.pk.metadata = pending.list.expected;
    st.pk.hs = pending.new_hs;
    return true;
}

struct Challenge {
    std::vector<std::pair<std::uint64_t, BigInt>> pairs;

    std::size_t size() const { return pairs.size(); }

    // count(4B) || {index(8B), INT nu}*
    void write(ByteWriter& w) const {
        w.u32(static_cast<std::uint32_t>(pairs.size()));
        for (const auto& [i, nu] : pairs) {
            w.u64(i);
            put_int(w, nu);
        }
    }
    static Challenge read(ByteReader& r) {
        Challenge c;
        auto count = r.u32();
        if (count > r.remaining() / 12) fail(ErrorCode::Malformed, "challenge count exceeds payload");
        for (std::uint32_t k = 0; k < count; ++k) {
            auto i = r.u64();
            c.pairs.emplace_back(i, get_int(r));
        }
        return c;
    }
};

/// l distinct indices from [1, m] (Floyd's sampling), coefficients uniform in
/// F_e without zero: a zero coefficient would silently drop its block.
inline Challenge sample_challenge(std::uint64_t m, std::uint64_t l, const BigInt& field, Rng& rng) {
    if (l == 0 || l > m) fail(ErrorCode::BadCardinality, "challenge size must lie in [1, m]");
    std::set<std::uint64_t> chosen;
    for (std::uint64_t j = m - l + 1; j <= m; ++j) {
        std::uint64_t t = 1 + rng.below_u64(j);
        if (!chosen.insert(t).second) chosen.insert(j);
    }
    Challenge c;
    for (auto i : chosen) c.pairs.emplace_back(i, 1 + rng.below(field - 1));
    return c;
}

inline Challenge challenge(const RsaPublicKey& pk, std::uint64_t l, Rng& rng) {
    return sample_challenge(pk.blocks(), l, pk.e, rng);
}

struct StorageProof {
    DataBlock y;
    RsaTag t;
    std::vector<std::pair<RsaTag, Proof>> items;  // in challenge order

    // VEC y || tag || count(4B) || {tag || list proof}*
    void write(ByteWriter& w) const {
        put_block(w, y);
        t.write(w);
        w.u32(static_cast<std::uint32_t>(items.size()));
        for (const auto& [tag, proof] : items) {
            tag.write(w);
            proof.write(w);
        }
    }
    static StorageProof read(ByteReader& r) {
        StorageProof p;
        p.y = get_block(r);
        p.t = RsaTag::read(r);
        auto count = r.u32();
        if (count > r.remaining() / 12) fail(ErrorCode::Malformed, "proof item count exceeds payload");
        for (std::uint32_t k = 0; k < count; ++k) {
            auto tag = RsaTag::read(r);
            p.items.emplace_back(std::move(tag), Proof::read(r));
        }
        return p;
    }
    Bytes encode() const {
        ByteWriter w;
        write(w);
        return w.take();
    }
    static StorageProof decode(ByteView b) {
        ByteReader r(b);
        auto p = read(r);
        r.expect_done();
        return p;
    }
};

/// Server-held file: blocks, tags, the h-list (inside pk) and the skip list.
struct ServerFile {
    RsaPublicKey pk;
    std::vector<DataBlock> blocks;
    std::vector<RsaTag> tags;
    skiplist::SkipList list;

    std::uint64_t size() const { return blocks.size(); }

    static ServerFile from_upload(UploadBundle bundle) {
        if (bundle.blocks.size() != bundle.tags.size() || bundle.blocks.size() != bundle.pk.hs.size())
            fail(ErrorCode::CountMismatch, "blocks, tags and h-list differ in length");
        ServerFile f;
        f.list = skiplist::SkipList::build(tag_elements(bundle.tags));
        f.pk = std::move(bundle.pk);
        f.pk.metadata.reset();
        f.blocks = std::move(bundle.blocks);
        f.tags = std::move(bundle.tags);
        return f;
    }

    /// i = 0 answers with the sentinel proof only.
    ReadResponse read(std::uint64_t i, bool proof_only = false) const {
        if (i > size() || (i == 0 && !proof_only)) fail(ErrorCode::IndexOutOfRange, "read position out of range");
        ReadResponse r;
        r.index = i;
        if (i > 0) {
            r.tag = tags[i - 1];
            if (!proof_only) r.block = blocks[i - 1];
        }
        r.proof = list.prove(i);
        return r;
    }

    void check_request(const UpdateRequest& req) const {
        const auto m = size();
        if (req.type == UpdateType::Insert ? req.index > m : (req.index == 0 || req.index > m))
            fail(ErrorCode::IndexOutOfRange, "update position out of range");
        if (req.type != UpdateType::Delete) {
            if (!req.tag || !req.block) fail(ErrorCode::Malformed, "update lacks block or tag");
            if (req.block->size() != pk.segments()) fail(ErrorCode::LengthMismatch, "block has the wrong number of segments");
        }
        if (req.type == UpdateType::Insert && !req.h) fail(ErrorCode::Malformed, "insert lacks h'");
    }

    /// Applies the update to blocks, tags, h-list and skip list; returns the
    /// list proof the client checks.
    Proof perform_update(const UpdateRequest& req) {
        check_request(req);
        const auto i = req.index;
        std::optional<Bytes> element;
        if (req.tag) element = req.tag->encode();
        switch (req.type) {
        case UpdateType::Insert:
            blocks.insert(blocks.begin() + static_cast<long>(i), *req.block);
            tags.insert(tags.begin() + static_cast<long>(i), *req.tag);
            pk.hs.insert(pk.hs.begin() + static_cast<long>(i), *req.h);
            break;
        case UpdateType::Modify:
            blocks[i - 1] = *req.block;
            tags[i - 1] = *req.tag;
            break;
        case UpdateType::Delete:
            blocks.erase(blocks.begin() + static_cast<long>(i - 1));
            tags.erase(tags.begin() + static_cast<long>(i - 1));
            pk.hs.erase(pk.hs.begin() + static_cast<long>(i - 1));
            break;
        }
        return list.perform_update(i, req.type, element);
    }
};

inline void check_challenge(const Challenge& c, std::uint64_t m) {
    if (c.pairs.empty()) fail(ErrorCode::BadCardinality, "empty challenge");
    std::set<std::uint64_t> seen;
    for (const auto& [i, nu] : c.pairs) {
        if (i == 0 || i > m) fail(ErrorCode::IndexOutOfRange, "challenged index out of range");
        if (!seen.insert(i).second) fail(ErrorCode::Malformed, "challenge repeats an index");
    }
}

/// Server-side proof from explicit (block, tag) sources, so adversarial
/// doubles can substitute either.
template <class BlockAt, class TagAt, class ProofAt>
StorageProof prove_from(const Challenge& c, const RsaPublicKey& pk, BlockAt&& block_at, TagAt&& tag_at, ProofAt&& proof_at) {
    std::vector<snc::RsaItem> items;
    StorageProof out;
    for (const auto& [i, nu] : c.pairs) {
        const RsaTag& t = tag_at(i);
        items.push_back({AugmentedVector::unit(block_at(i), i), t, mod(nu, pk.e)});
        out.items.emplace_back(t, proof_at(i));
    }
    auto comb = snc::combine(items, pk);
    out.y = std::move(comb.w.data);
    out.t = comb.tag;
    return out;
}

inline StorageProof prove(const ServerFile& f, const Challenge& c) {
    check_challenge(c, f.size());
    return prove_from(
        c, f.pk, [&](std::uint64_t i) -> const DataBlock& { return f.blocks[i - 1]; },
        [&](std::uint64_t i) -> const RsaTag& { return f.tags[i - 1]; }, [&](std::uint64_t i) { return f.list.prove(i); });
}

/// Public verification: list proofs against d_M, the s cross-check, and the
/// combined tag equation with nu_i at challenged slots.
inline bool verify_audit(const Challenge& c, const StorageProof& proof, const RsaPublicKey& pk) {
    if (!pk.metadata || c.pairs.empty() || proof.items.size() != c.pairs.size()) return false;
    std::set<std::uint64_t> seen;
    AugmentedVector w;
    w.data = proof.y;
    BigInt s_bar = 0;
    for (std::size_t k = 0; k < c.pairs.size(); ++k) {
        const auto& [i, nu] = c.pairs[k];
        const auto& [tag, list_proof] = proof.items[k];
        if (i == 0 || i > pk.blocks() || !seen.insert(i).second) return false;
        if (nu <= 0 || nu >= pk.e) return false;
        if (!skiplist::verify_read(i, *pk.metadata, tag.encode(), list_proof)) return false;
        s_bar += nu * tag.s;
        w.coeffs.emplace(i, nu);
    }
    if (mod(s_bar, pk.e) != proof.t.s) return false;
    return snc::verify_combined(w, proof.t, pk);
}

} // namespace dscs::dscs1

#endif // DSCS_DSCS1_HPP
