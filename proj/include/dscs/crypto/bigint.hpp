#ifndef DSCS_CRYPTO_BIGINT_HPP
#define DSCS_CRYPTO_BIGINT_HPP

#include <gmpxx.h>
#include <sys/random.h>

#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "dscs/codec.hpp"

namespace dscs {

using BigInt = mpz_class;

inline std::size_t bit_length(const BigInt& v) {
    return v == 0 ? 0 : mpz_sizeinbase(v.get_mpz_t(), 2);
}

/// Big-endian magnitude bytes; zero encodes as the empty string.
inline Bytes magnitude_bytes(const BigInt& v) {
    if (v < 0) fail(ErrorCode::Malformed, "negative integer has no canonical encoding");
    if (v == 0) return {};
    std::size_t count = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
    Bytes out(count);
    mpz_export(out.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
    out.resize(count);
    return out;
}

inline BigInt from_magnitude(ByteView b) {
    BigInt v;
    if (!b.empty()) mpz_import(v.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
    return v;
}

/// Fixed-width big-endian, left padded with zeros.
inline Bytes fixed_bytes(const BigInt& v, std::size_t width) {
    Bytes mag = magnitude_bytes(v);
    if (mag.size() > width) fail(ErrorCode::Malformed, "integer wider than field");
    Bytes out(width - mag.size(), 0);
    out.insert(out.end(), mag.begin(), mag.end());
    return out;
}

// INT = len(4B BE) || magnitude(BE)
inline void put_int(ByteWriter& w, const BigInt& v) { w.blob(magnitude_bytes(v)); }

inline BigInt get_int(ByteReader& r) {
    auto len = r.u32();
    auto mag = r.raw(len);
    if (!mag.empty() && mag[0] == 0) fail(ErrorCode::Malformed, "non-canonical INT (leading zero)");
    return from_magnitude(mag);
}

// VEC = count(4B BE) || elements
inline void put_int_vec(ByteWriter& w, const std::vector<BigInt>& v) {
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (const auto& x : v) put_int(w, x);
}

inline std::vector<BigInt> get_int_vec(ByteReader& r) {
    auto count = r.u32();
    // Every INT needs at least its 4-byte length, which bounds hostile counts.
    if (count > r.remaining() / 4) fail(ErrorCode::Malformed, "VEC count exceeds payload");
    std::vector<BigInt> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) out.push_back(get_int(r));
    return out;
}

inline Bytes encode_int(const BigInt& v) {
    ByteWriter w;
    put_int(w, v);
    return w.take();
}

inline BigInt decode_int(ByteView b) {
    ByteReader r(b);
    auto v = get_int(r);
    r.expect_done();
    return v;
}

inline BigInt powm(const BigInt& base, const BigInt& exp, const BigInt& mod) {
    BigInt out;
    mpz_powm(out.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
    return out;
}

inline BigInt mod(const BigInt& a, const BigInt& m) {
    BigInt out;
    mpz_mod(out.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t());
    return out;
}

inline bool invert(BigInt& out, const BigInt& a, const BigInt& m) {
    return mpz_invert(out.get_mpz_t(), a.get_mpz_t(), m.get_mpz_t()) != 0;
}

inline BigInt gcd(const BigInt& a, const BigInt& b) {
    BigInt out;
    mpz_gcd(out.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
    return out;
}

inline bool probably_prime(const BigInt& v, int reps = 30) {
    return mpz_probab_prime_p(v.get_mpz_t(), reps) > 0;
}

/// Randomness source. Deterministic instances drive tests and benches;
/// `system()` draws from the kernel entropy pool.
class Rng {
public:
    using result_type = std::uint64_t;

    static Rng deterministic(std::uint64_t seed) { return Rng(seed); }
    static Rng system() { return Rng(); }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        std::uint8_t buf[8];
        fill(buf, sizeof buf);
        result_type v = 0;
        for (auto b : buf) v = v << 8 | b;
        return v;
    }

    /// Uniform in [0, 2^bits).
    BigInt bits(std::size_t nbits) {
        if (nbits == 0) return 0;
        if (gmp_) return gmp_->get_z_bits(static_cast<mp_bitcnt_t>(nbits));
        Bytes buf((nbits + 7) / 8);
        fill(buf.data(), buf.size());
        if (nbits % 8) buf[0] &= static_cast<std::uint8_t>((1u << (nbits % 8)) - 1);
        return from_magnitude(buf);
    }

    /// Uniform in [0, bound); bound > 0.
    BigInt below(const BigInt& bound) {
        if (bound <= 0) fail(ErrorCode::Internal, "Rng::below needs a positive bound");
        if (gmp_) return gmp_->get_z_range(bound);
        auto nb = bit_length(bound);
        for (;;) {
            BigInt v = bits(nb);
            if (v < bound) return v;
        }
    }

    /// Uniform in [lo, hi].
    BigInt range(const BigInt& lo, const BigInt& hi) { return lo + below(hi - lo + 1); }

    std::uint64_t below_u64(std::uint64_t bound) {
        return below(BigInt(static_cast<unsigned long>(bound))).get_ui();
    }

    double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    Bytes bytes(std::size_t n) {
        Bytes out(n);
        fill(out.data(), n);
        return out;
    }

    /// Independent deterministic child stream (for per-trial isolation).
    Rng fork() { return gmp_ ? Rng((*this)()) : Rng(); }

private:
    explicit Rng(std::uint64_t seed) : gmp_(std::make_unique<gmp_randclass>(gmp_randinit_mt)) {
        gmp_->seed(static_cast<unsigned long>(seed));
    }
    Rng() = default;

    void fill(std::uint8_t* out, std::size_t n) {
        if (gmp_) {
            auto v = gmp_->get_z_bits(static_cast<mp_bitcnt_t>(8 * n));
            Bytes b = fixed_bytes(v, n);
            std::memcpy(out, b.data(), n);
            return;
        }
        while (n > 0) {
            auto got = getrandom(out, n, 0);
            if (got < 0) fail(ErrorCode::Io, "getrandom failed");
            out += got;
            n -= static_cast<std::size_t>(got);
        }
    }

    std::unique_ptr<gmp_randclass> gmp_;
};

} // namespace dscs

#endif // DSCS_CRYPTO_BIGINT_HPP
