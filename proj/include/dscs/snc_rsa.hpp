#ifndef DSCS_SNC_RSA_HPP
#define DSCS_SNC_RSA_HPP

#include <optional>
#include <vector>

#include "dscs/crypto/rsa.hpp"
#include "dscs/skiplist.hpp"
#include "dscs/vector.hpp"

// RSA-based homomorphic network-coding authenticator over Z_N^*, exponents in
// F_e. A tag (s, x) on the augmented vector [v | e_i] satisfies
//
//     x^e = g^s * prod_j g_j^{v_j} * h_i   (mod N)
//
// and linear combinations of tagged vectors can be tagged without the trapdoor.

namespace dscs::snc {

inline constexpr std::uint32_t kRsaKeyVersion = 1;

struct RsaPublicKey {
    BigInt n;
    BigInt e;  // doubles as the file identifier
    BigInt g;
    std::vector<BigInt> gs;  // g_1..g_n
    std::vector<BigInt> hs;  // h_1..h_m, tracks the file length
    std::optional<skiplist::Metadata> metadata;  // d_M; absent until outsourced

    std::size_t segments() const { return gs.size(); }
    std::uint64_t blocks() const { return hs.size(); }
    const BigInt& h(std::uint64_t i) const {
        if (i == 0 || i > hs.size()) fail(ErrorCode::IndexOutOfRange, "no h for block " + std::to_string(i));
        return hs[i - 1];
    }

    bool operator==(const RsaPublicKey&) const = default;

    // version(4B) || INT N || INT e || INT g || VEC gs || VEC hs || has_md(1B) [|| root(32B) || m(8B)]
    void write(ByteWriter& w) const {
        w.u32(kRsaKeyVersion);
        put_int(w, n);
        put_int(w, e);
        put_int(w, g);
        put_int_vec(w, gs);
        put_int_vec(w, hs);
        w.u8(metadata ? 1 : 0);
        if (metadata) w.raw(view(metadata->root)).u64(metadata->count);
    }

    static RsaPublicKey read(ByteReader& r) {
        if (r.u32() != kRsaKeyVersion) fail(ErrorCode::Malformed, "unsupported public key version");
        RsaPublicKey pk;
        pk.n = get_int(r);
        pk.e = get_int(r);
        pk.g = get_int(r);
        pk.gs = get_int_vec(r);
        pk.hs = get_int_vec(r);
        auto flag = r.u8();
        if (flag > 1) fail(ErrorCode::Malformed, "bad metadata flag");
        if (flag) {
            skiplist::Metadata md;
            auto root = r.raw(kDigestSize);
            std::copy(root.begin(), root.end(), md.root.begin());
            md.count = r.u64();
            pk.metadata = md;
        }
        return pk;
    }

    Bytes encode() const {
        ByteWriter w;
        write(w);
        return w.take();
    }
    static RsaPublicKey decode(ByteView b) {
        ByteReader r(b);
        auto pk = read(r);
        r.expect_done();
        return pk;
    }
};

struct RsaTag {
    BigInt s;
    BigInt x;

    bool operator==(const RsaTag&) const = default;

    // INT(s) || INT(x)
    void write(ByteWriter& w) const {
        put_int(w, s);
        put_int(w, x);
    }
    static RsaTag read(ByteReader& r) {
        RsaTag t;
        t.s = get_int(r);
        t.x = get_int(r);
        return t;
    }
    Bytes encode() const {
        ByteWriter w;
        write(w);
        return w.take();
    }
    static RsaTag decode(ByteView b) {
        ByteReader r(b);
        auto t = read(r);
        r.expect_done();
        return t;
    }
};

inline void check_segments(const DataBlock& v, const RsaPublicKey& pk) {
    if (v.size() != pk.segments()) fail(ErrorCode::LengthMismatch, "block has the wrong number of segments");
    for (const auto& seg : v)
        if (seg < 0 || seg >= pk.e) fail(ErrorCode::SegmentOutOfField, "segment not in F_e");
}

/// g^s * prod g_j^{v_j} * h  (mod N)
inline BigInt tag_base(const DataBlock& v, const BigInt& s, const BigInt& h, const RsaPublicKey& pk) {
    std::vector<BigInt> bases, exps;
    bases.reserve(v.size() + 1);
    exps.reserve(v.size() + 1);
    bases.push_back(pk.g);
    exps.push_back(s);
    for (std::size_t j = 0; j < v.size(); ++j) {
        if (v[j] == 0) continue;
        bases.push_back(pk.gs[j]);
        exps.push_back(v[j]);
    }
    return mod(multi_exp(bases, exps, pk.n) * h, pk.n);
}

/// Tag for block v against the given h value (h_i, or a fresh h' for inserts).
inline RsaTag tag_gen_with(const DataBlock& v, const BigInt& h, const RsaTrapdoor& sk, const RsaPublicKey& pk, Rng& rng,
                           std::optional<BigInt> forced_s = std::nullopt) {
    check_segments(v, pk);
    BigInt s = forced_s ? mod(*forced_s, pk.e) : rng.below(pk.e);
    BigInt x = eth_root(tag_base(v, s, h, pk), pk.e, sk);
    return {s, x};
}

inline RsaTag tag_gen(const DataBlock& v, std::uint64_t i, const RsaTrapdoor& sk, const RsaPublicKey& pk, Rng& rng,
                      std::optional<BigInt> forced_s = std::nullopt) {
    return tag_gen_with(v, pk.h(i), sk, pk, rng, std::move(forced_s));
}

inline bool verify_single_with(const DataBlock& v, const BigInt& h, const RsaTag& t, const RsaPublicKey& pk) {
    if (v.size() != pk.segments()) return false;
    for (const auto& seg : v)
        if (seg < 0 || seg >= pk.e) return false;
    if (t.s < 0 || t.s >= pk.e || t.x <= 0 || t.x >= pk.n) return false;
    return powm(t.x, pk.e, pk.n) == tag_base(v, t.s, h, pk);
}

/// Single-tag check against h_i.
inline bool verify_single(const DataBlock& v, std::uint64_t i, const RsaTag& t, const RsaPublicKey& pk) {
    if (i == 0 || i > pk.blocks()) return false;
    return verify_single_with(v, pk.hs[i - 1], t, pk);
}

struct RsaItem {
    AugmentedVector u;
    RsaTag tag;
    BigInt nu;
};

struct RsaCombined {
    AugmentedVector w;
    RsaTag tag;
    // Exact integer carries: sum = reduced + e * carry.
    BigInt s_carry;
    std::vector<BigInt> data_carry;
    std::map<std::uint64_t, BigInt> coeff_carry;
};

/// Homomorphic combination sum nu_i * u_i with the tag
///   x = prod x_i^{nu_i} * (g^{s'} prod g_j^{w'_j} prod h_j^{w'_{n+j}})^{-1}.
inline RsaCombined combine(const std::vector<RsaItem>& items, const RsaPublicKey& pk) {
    if (items.empty()) fail(ErrorCode::LengthMismatch, "combine needs at least one item");
    const std::size_t n = pk.segments();
    BigInt s_sum = 0;
    std::vector<BigInt> w_sum(n, 0);
    std::map<std::uint64_t, BigInt> c_sum;
    std::vector<BigInt> xs, nus;
    for (const auto& it : items) {
        if (it.u.data.size() != n) fail(ErrorCode::LengthMismatch, "vector has the wrong number of segments");
        if (it.nu < 0 || it.nu >= pk.e) fail(ErrorCode::SegmentOutOfField, "coefficient not in F_e");
        s_sum += it.nu * it.tag.s;
        for (std::size_t j = 0; j < n; ++j) w_sum[j] += it.nu * it.u.data[j];
        for (const auto& [k, c] : it.u.coeffs) c_sum[k] += it.nu * c;
        xs.push_back(it.tag.x);
        nus.push_back(it.nu);
    }

    RsaCombined out;
    auto split = [&](const BigInt& total, BigInt& reduced, BigInt& carry) {
        mpz_fdiv_qr(carry.get_mpz_t(), reduced.get_mpz_t(), total.get_mpz_t(), pk.e.get_mpz_t());
    };
    split(s_sum, out.tag.s, out.s_carry);
    out.w.data.resize(n);
    out.data_carry.resize(n);
    for (std::size_t j = 0; j < n; ++j) split(w_sum[j], out.w.data[j], out.data_carry[j]);
    for (const auto& [k, total] : c_sum) {
        BigInt r, q;
        split(total, r, q);
        if (r != 0) out.w.coeffs.emplace(k, r);
        if (q != 0) out.coeff_carry.emplace(k, q);
    }

    std::vector<BigInt> bases{pk.g}, exps{out.s_carry};
    for (std::size_t j = 0; j < n; ++j) {
        if (out.data_carry[j] == 0) continue;
        bases.push_back(pk.gs[j]);
        exps.push_back(out.data_carry[j]);
    }
    for (const auto& [k, q] : out.coeff_carry) {
        bases.push_back(pk.h(k));
        exps.push_back(q);
    }
    BigInt denom = multi_exp(bases, exps, pk.n);
    BigInt inv;
    if (!invert(inv, denom, pk.n)) fail(ErrorCode::NonInvertibleDenominator, "carry term shares a factor with N");
    out.tag.x = mod(multi_exp(xs, nus, pk.n) * inv, pk.n);
    return out;
}

/// x^e == g^s * prod g_j^{w_j} * prod h_j^{w_{n+j}}  (mod N)
inline bool verify_combined(const AugmentedVector& w, const RsaTag& t, const RsaPublicKey& pk) {
    if (w.data.size() != pk.segments()) return false;
    if (t.s < 0 || t.s >= pk.e || t.x <= 0 || t.x >= pk.n) return false;
    std::vector<BigInt> bases{pk.g}, exps{t.s};
    for (std::size_t j = 0; j < w.data.size(); ++j) {
        if (w.data[j] < 0 || w.data[j] >= pk.e) return false;
        if (w.data[j] == 0) continue;
        bases.push_back(pk.gs[j]);
        exps.push_back(w.data[j]);
    }
    // Unlisted coefficient slots are zero and contribute nothing.
    for (const auto& [k, c] : w.coeffs) {
        if (k == 0 || k > pk.blocks() || c < 0 || c >= pk.e) return false;
        if (c == 0) continue;
        bases.push_back(pk.hs[k - 1]);
        exps.push_back(c);
    }
    return powm(t.x, pk.e, pk.n) == multi_exp(bases, exps, pk.n);
}

} // namespace dscs::snc

#endif // DSCS_SNC_RSA_HPP
