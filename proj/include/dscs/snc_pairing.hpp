#ifndef DSCS_SNC_PAIRING_HPP
#define DSCS_SNC_PAIRING_HPP

#include <vector>

#include "dscs/crypto/pairing.hpp"
#include "dscs/vector.hpp"

// Pairing-based homomorphic network-coding signature. A tag on [v | e_i] is
//     t = (H(fid, i) * prod g_j^{v_j})^alpha
// and any combination verifies through
//     e(t, h) == e(prod H(fid, j)^{w_{n+j}} * prod g_j^{w_j}, z),   z = h^alpha.

namespace dscs::snc {

inline constexpr std::uint32_t kPairKeyVersion = 1;

template <BilinearSuite S>
struct PairPublicKey {
    SuiteDescriptor suite;
    std::vector<typename S::G1> gs;
    typename S::G2 h;
    typename S::G2 z;

    std::size_t segments() const { return gs.size(); }

    // version(4B) || blob(curve id) || blob(hash method) || VEC(INT g_j) || INT h || INT z
    void write(ByteWriter& w, const S& s) const {
        w.u32(kPairKeyVersion);
        w.blob(to_bytes(suite.curve_id));
        w.blob(to_bytes(suite.hash_method));
        w.u32(static_cast<std::uint32_t>(gs.size()));
        for (const auto& g : gs) w.blob(s.encode_g1(g));
        w.blob(s.encode_g2(h));
        w.blob(s.encode_g2(z));
    }

    static PairPublicKey read(ByteReader& r, const S& s) {
        if (r.u32() != kPairKeyVersion) fail(ErrorCode::Malformed, "unsupported public key version");
        PairPublicKey pk;
        auto id = r.blob();
        auto method = r.blob();
        pk.suite = {std::string(id.begin(), id.end()), std::string(method.begin(), method.end())};
        if (!(pk.suite == s.descriptor())) fail(ErrorCode::Malformed, "public key names a different suite");
        auto count = r.u32();
        if (count > r.remaining() / 4) fail(ErrorCode::Malformed, "generator count exceeds payload");
        for (std::uint32_t j = 0; j < count; ++j) pk.gs.push_back(s.decode_g1(r.blob()));
        pk.h = s.decode_g2(r.blob());
        pk.z = s.decode_g2(r.blob());
        return pk;
    }
};

struct PairSecret {
    BigInt alpha;
};

template <BilinearSuite S>
struct PairKeyPair {
    PairSecret sk;
    PairPublicKey<S> pk;
};

template <BilinearSuite S>
PairKeyPair<S> pair_keygen(const S& s, std::size_t n, Rng& rng) {
    if (n == 0) fail(ErrorCode::Usage, "need at least one segment per block");
    PairKeyPair<S> kp;
    kp.pk.suite = s.descriptor();
    for (std::size_t j = 0; j < n; ++j) kp.pk.gs.push_back(s.random_g1(rng));
    kp.pk.h = s.random_g2(rng);
    do kp.sk.alpha = rng.below(s.order());
    while (kp.sk.alpha == 0);
    kp.pk.z = s.g2_mul(kp.pk.h, kp.sk.alpha);
    return kp;
}

/// H(fid, i) * prod g_j^{v_j}
template <BilinearSuite S>
typename S::G1 pair_tag_base(const S& s, const DataBlock& v, std::uint64_t i, ByteView fid, const PairPublicKey<S>& pk) {
    if (v.size() != pk.segments()) fail(ErrorCode::LengthMismatch, "block has the wrong number of segments");
    auto acc = s.g1_multi_mul(std::span<const typename S::G1>(pk.gs), std::span<const BigInt>(v));
    return s.g1_add(acc, s.hash_to_g1(fid, i));
}

template <BilinearSuite S>
typename S::G1 pair_tag_gen(const S& s, const DataBlock& v, std::uint64_t i, ByteView fid, const PairSecret& sk,
                            const PairPublicKey<S>& pk) {
    if (i == 0) fail(ErrorCode::IndexOutOfRange, "block indices start at 1");
    return s.g1_mul(pair_tag_base(s, v, i, fid, pk), sk.alpha);
}

/// Owner-side check with the secret exponent: t == (H(fid, i) * prod g_j^{v_j})^alpha.
template <BilinearSuite S>
bool pair_check_owner(const S& s, const DataBlock& v, std::uint64_t i, const typename S::G1& t, ByteView fid,
                      const PairSecret& sk, const PairPublicKey<S>& pk) {
    if (i == 0 || v.size() != pk.segments()) return false;
    return s.g1_mul(pair_tag_base(s, v, i, fid, pk), sk.alpha) == t;
}

template <BilinearSuite S>
struct PairItem {
    AugmentedVector u;
    typename S::G1 tag;
    BigInt nu;
};

template <BilinearSuite S>
struct PairCombined {
    AugmentedVector w;
    typename S::G1 tag;
};

template <BilinearSuite S>
PairCombined<S> pair_combine(const S& s, const std::vector<PairItem<S>>& items) {
    if (items.empty()) fail(ErrorCode::LengthMismatch, "combine needs at least one item");
    const auto& r = s.order();
    const std::size_t n = items.front().u.data.size();
    PairCombined<S> out;
    out.w.data.assign(n, 0);
    std::vector<typename S::G1> tags;
    std::vector<BigInt> nus;
    std::map<std::uint64_t, BigInt> coeffs;
    for (const auto& it : items) {
        if (it.u.data.size() != n) fail(ErrorCode::LengthMismatch, "vectors differ in length");
        BigInt nu = mod(it.nu, r);
        for (std::size_t j = 0; j < n; ++j) out.w.data[j] += nu * it.u.data[j];
        for (const auto& [k, c] : it.u.coeffs) coeffs[k] += nu * c;
        tags.push_back(it.tag);
        nus.push_back(nu);
    }
    for (auto& x : out.w.data) x = mod(x, r);
    for (auto& [k, c] : coeffs) {
        BigInt v = mod(c, r);
        if (v != 0) out.w.coeffs.emplace(k, v);
    }
    out.tag = s.g1_multi_mul(std::span<const typename S::G1>(tags), std::span<const BigInt>(nus));
    return out;
}

/// e(t, h) == e(prod H(fid, j)^{w_{n+j}} * prod g_j^{w_j}, z), for coefficient
/// slots 1..m.
template <BilinearSuite S>
bool pair_verify(const S& s, const AugmentedVector& w, const typename S::G1& t, ByteView fid, const PairPublicKey<S>& pk,
                 std::uint64_t m) {
    if (w.data.size() != pk.segments()) return false;
    const auto& r = s.order();
    std::vector<typename S::G1> points(pk.gs);
    std::vector<BigInt> scalars;
    scalars.reserve(points.size() + w.coeffs.size());
    for (const auto& x : w.data) {
        if (x < 0 || x >= r) return false;
        scalars.push_back(x);
    }
    for (const auto& [k, c] : w.coeffs) {
        if (k == 0 || k > m || c < 0 || c >= r) return false;
        if (c == 0) continue;
        points.push_back(s.hash_to_g1(fid, k));
        scalars.push_back(c);
    }
    if (!s.g1_is_member(t)) return false;
    auto rhs_point = s.g1_multi_mul(std::span<const typename S::G1>(points), std::span<const BigInt>(scalars));
    return s.pair(t, pk.h) == s.pair(rhs_point, pk.z);
}

} // namespace dscs::snc

#endif // DSCS_SNC_PAIRING_HPP
