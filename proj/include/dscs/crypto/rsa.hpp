#ifndef DSCS_CRYPTO_RSA_HPP
#define DSCS_CRYPTO_RSA_HPP

#include <algorithm>
#include <array>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "dscs/crypto/bigint.hpp"

namespace dscs {

namespace detail {

// Odd primes below 2^14, used to sieve safe-prime candidates.
inline const std::vector<unsigned>& small_primes() {
    static const std::vector<unsigned> primes = [] {
        constexpr unsigned limit = 1u << 14;
        std::vector<bool> composite(limit, false);
        std::vector<unsigned> out;
        for (unsigned i = 3; i < limit; i += 2) {
            if (composite[i]) continue;
            out.push_back(i);
            for (unsigned j = i * i; j < limit; j += 2 * i) composite[j] = true;
        }
        return out;
    }();
    return primes;
}

} // namespace detail

/// Random prime with exactly `bits` bits.
inline BigInt gen_prime(std::size_t bits, Rng& rng) {
    if (bits < 2) fail(ErrorCode::Internal, "gen_prime needs at least 2 bits");
    for (;;) {
        BigInt c = rng.bits(bits - 1);
        mpz_setbit(c.get_mpz_t(), bits - 1);
        if (bits > 2) mpz_setbit(c.get_mpz_t(), 0);
        if (probably_prime(c)) return c;
    }
}

/// Random safe prime r = 2r' + 1 with exactly `bits` bits.
/// `max_candidates` bounds the search (0 = unbounded); exceeding it raises
/// GenerationTimeout.
inline BigInt gen_safe_prime(std::size_t bits, Rng& rng, std::uint64_t max_candidates = 0) {
    if (bits < 3) fail(ErrorCode::Internal, "gen_safe_prime needs at least 3 bits");
    std::uint64_t examined = 0;
    auto budget = [&] {
        if (max_candidates && ++examined > max_candidates)
            fail(ErrorCode::GenerationTimeout, "no safe prime within candidate budget");
    };

    if (bits <= 16) {
        // Tiny sizes: plain rejection sampling over r' in [2^(bits-2), 2^(bits-1)).
        BigInt lo = BigInt(1) << (bits - 2);
        for (;;) {
            budget();
            BigInt half = lo + rng.below(lo);
            BigInt r = 2 * half + 1;
            if (probably_prime(half) && probably_prime(r)) return r;
        }
    }

    const auto& primes = detail::small_primes();
    std::vector<unsigned> residues(primes.size());
    const BigInt top = BigInt(1) << (bits - 1);
    for (;;) {
        // r' odd with bits-1 bits; walk r' += 2 from a random start.
        BigInt half = rng.bits(bits - 2);
        mpz_setbit(half.get_mpz_t(), bits - 2);
        mpz_setbit(half.get_mpz_t(), 0);
        for (std::size_t k = 0; k < primes.size(); ++k)
            residues[k] = static_cast<unsigned>(mpz_fdiv_ui(half.get_mpz_t(), primes[k]));

        for (unsigned step = 0; step < (1u << 16); ++step, half += 2) {
            if (step) {
                for (std::size_t k = 0; k < primes.size(); ++k) {
                    residues[k] += 2;
                    if (residues[k] >= primes[k]) residues[k] -= primes[k];
                }
            }
            BigInt r = 2 * half + 1;
            if (r >= (top << 1)) break;
            budget();
            bool sieved = true;
            for (std::size_t k = 0; k < primes.size(); ++k) {
                unsigned p = primes[k];
                if (p >= half) break;
                // p | r'  or  p | 2r'+1  (i.e. r' = (p-1)/2 mod p)
                if (residues[k] == 0 || residues[k] == (p - 1) / 2) {
                    sieved = false;
                    break;
                }
            }
            if (!sieved) continue;
            if (!probably_prime(half, 1) || !probably_prime(r, 1)) continue;
            if (probably_prime(half) && probably_prime(r)) return r;
        }
    }
}

struct RsaModulus {
    BigInt n;

    std::size_t bit_length() const { return dscs::bit_length(n); }
    bool operator==(const RsaModulus&) const = default;
};

/// Factorisation of the modulus; caches e^{-1} mod phi(N) per public prime e.
class RsaTrapdoor {
public:
    RsaTrapdoor() = default;
    RsaTrapdoor(BigInt p, BigInt q) : p_(std::move(p)), q_(std::move(q)) {}

    RsaTrapdoor(const RsaTrapdoor& o) : p_(o.p_), q_(o.q_) {
        std::lock_guard lock(o.mu_);
        cache_ = o.cache_;
    }
    RsaTrapdoor& operator=(const RsaTrapdoor& o) {
        if (this != &o) {
            RsaTrapdoor tmp(o);
            std::scoped_lock lock(mu_);
            p_ = std::move(tmp.p_);
            q_ = std::move(tmp.q_);
            cache_ = std::move(tmp.cache_);
        }
        return *this;
    }

    const BigInt& p() const { return p_; }
    const BigInt& q() const { return q_; }
    BigInt phi() const { return (p_ - 1) * (q_ - 1); }
    RsaModulus modulus() const { return {p_ * q_}; }

    /// e^{-1} mod phi(N); NotInvertible when gcd(e, phi(N)) != 1.
    BigInt inverse_exponent(const BigInt& e) const {
        std::lock_guard lock(mu_);
        auto it = cache_.find(e);
        if (it != cache_.end()) return it->second;
        BigInt d;
        if (!invert(d, e, phi())) fail(ErrorCode::NotInvertible, "gcd(e, phi(N)) != 1");
        cache_.emplace(e, d);
        return d;
    }

    std::size_t cached_exponents() const {
        std::lock_guard lock(mu_);
        return cache_.size();
    }

private:
    BigInt p_, q_;
    mutable std::mutex mu_;
    mutable std::map<BigInt, BigInt> cache_;
};

struct RsaKeyPair {
    RsaModulus modulus;
    RsaTrapdoor trapdoor;
};

/// N = p*q for two distinct random safe primes of `prime_bits` bits each.
inline RsaKeyPair gen_rsa_modulus(std::size_t prime_bits, Rng& rng, std::uint64_t max_candidates = 0) {
    for (;;) {
        BigInt p = gen_safe_prime(prime_bits, rng, max_candidates);
        BigInt q = gen_safe_prime(prime_bits, rng, max_candidates);
        if (p == q) continue;
        BigInt n = p * q;
        if (dscs::bit_length(n) != 2 * prime_bits) continue;
        return {RsaModulus{n}, RsaTrapdoor(p, q)};
    }
}

/// x with x^e = a (mod N), via x = a^{e^{-1} mod phi(N)}.
inline BigInt eth_root(const BigInt& a, const BigInt& e, const RsaTrapdoor& trapdoor) {
    BigInt n = trapdoor.p() * trapdoor.q();
    return powm(a, trapdoor.inverse_exponent(e), n);
}

/// prod bases_i^{exps_i} mod N using one shared squaring chain.
inline BigInt multi_exp(std::span<const BigInt> bases, std::span<const BigInt> exps, const BigInt& n) {
    if (bases.size() != exps.size()) fail(ErrorCode::LengthMismatch, "multi_exp: bases/exps differ in length");
    if (bases.empty()) fail(ErrorCode::LengthMismatch, "multi_exp: empty input");

    std::size_t width = 0;
    for (const auto& x : exps) {
        if (x < 0) fail(ErrorCode::Internal, "multi_exp: negative exponent");
        width = std::max(width, dscs::bit_length(x));
    }
    // A single large exponent is faster through GMP's windowed powm.
    std::size_t nonzero = std::count_if(exps.begin(), exps.end(), [](const BigInt& x) { return x != 0; });
    BigInt acc = 1;
    if (nonzero <= 1) {
        for (std::size_t i = 0; i < bases.size(); ++i)
            if (exps[i] != 0) acc = powm(bases[i], exps[i], n);
        return mod(acc, n);
    }

    std::vector<BigInt> reduced(bases.size());
    for (std::size_t i = 0; i < bases.size(); ++i) reduced[i] = mod(bases[i], n);
    for (std::size_t bit = width; bit-- > 0;) {
        acc = acc * acc;
        mpz_mod(acc.get_mpz_t(), acc.get_mpz_t(), n.get_mpz_t());
        for (std::size_t i = 0; i < bases.size(); ++i) {
            if (mpz_tstbit(exps[i].get_mpz_t(), bit)) {
                acc *= reduced[i];
                mpz_mod(acc.get_mpz_t(), acc.get_mpz_t(), n.get_mpz_t());
            }
        }
    }
    return mod(acc, n);
}

inline BigInt multi_exp(const std::vector<BigInt>& bases, const std::vector<BigInt>& exps, const BigInt& n) {
    return multi_exp(std::span<const BigInt>(bases), std::span<const BigInt>(exps), n);
}

/// Uniform element of Z_N^* (rejects the negligible non-units).
inline BigInt random_unit(const BigInt& n, Rng& rng) {
    for (;;) {
        BigInt v = rng.range(1, n - 1);
        if (gcd(v, n) == 1) return v;
    }
}

} // namespace dscs

#endif // DSCS_CRYPTO_RSA_HPP
