#ifndef DSCS_CRYPTO_PAIRING_HPP
#define DSCS_CRYPTO_PAIRING_HPP

#include <concepts>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dscs/crypto/bigint.hpp"
#include "dscs/crypto/digest.hpp"

namespace dscs {

/// Identifies a bilinear suite on the wire so both parties agree on the
/// curve and on the hash-to-group construction.
struct SuiteDescriptor {
    std::string curve_id;
    std::string hash_method;

    bool operator==(const SuiteDescriptor&) const = default;
};

/// Abstract bilinear group contract used by the pairing-based authenticator.
template <class S>
concept BilinearSuite = requires(const S s, const typename S::G1& a, const typename S::G2& b,
                                 const typename S::GT& t, const BigInt& k, ByteView bytes,
                                 std::uint64_t index, Rng& rng,
                                 std::span<const typename S::G1> points, std::span<const BigInt> scalars) {
    { s.order() } -> std::convertible_to<const BigInt&>;
    { s.descriptor() } -> std::convertible_to<SuiteDescriptor>;
    { s.g1_identity() } -> std::same_as<typename S::G1>;
    { s.g1_add(a, a) } -> std::same_as<typename S::G1>;
    { s.g1_mul(a, k) } -> std::same_as<typename S::G1>;
    { s.g1_multi_mul(points, scalars) } -> std::same_as<typename S::G1>;
    { s.g1_is_member(a) } -> std::same_as<bool>;
    { s.g2_mul(b, k) } -> std::same_as<typename S::G2>;
    { s.pair(a, b) } -> std::same_as<typename S::GT>;
    { s.gt_mul(t, t) } -> std::same_as<typename S::GT>;
    { s.gt_pow(t, k) } -> std::same_as<typename S::GT>;
    { s.gt_is_one(t) } -> std::same_as<bool>;
    { s.hash_to_g1(bytes, index) } -> std::same_as<typename S::G1>;
    { s.random_g1(rng) } -> std::same_as<typename S::G1>;
    { s.random_g2(rng) } -> std::same_as<typename S::G2>;
    { s.encode_g1(a) } -> std::same_as<Bytes>;
    { s.decode_g1(bytes) } -> std::same_as<typename S::G1>;
    { s.encode_g2(b) } -> std::same_as<Bytes>;
    { s.decode_g2(bytes) } -> std::same_as<typename S::G2>;
};

/// Parameters of a supersingular curve y^2 = x^3 + x over F_q, q = 3 (mod 4),
/// with #E(F_q) = q + 1 = h * r and embedding degree 2.
struct TypeACurve {
    std::string id;
    BigInt q;
    BigInt r;
    BigInt h;
};

inline const TypeACurve& type_a_curve(std::string_view id) {
    static const TypeACurve test{
        "typeA-q160-r64",
        BigInt("0xd751fe5d0986f2debbbd2dff23de92e238b97927"),
        BigInt("0xf06d3fef701966a1"),
        BigInt("0xe5446dd554ae0bdaf8fb7028"),
    };
    static const TypeACurve full{
        "typeA-q1024-r224",
        BigInt("0x94637c7b230ff3ea12f169d98dfc906617ed00da7130f7ad404729c8a5276edb70a4ad87d01178fcc4ca3538"
               "f7425c527f2932badc29f71d6017a3423de48057fd5e95d73ce7077926cd2f8bb58340134e5b71fbbe4adaa3"
               "1419a460340ab030ac51671e4c967dcf2b50c52fbdf04d444256aeea5b9320400417fe4999f77fb7"),
        BigInt("0xee9b14f66b415a7ecde9e144ba588a82f4670327b83438617a415783"),
        BigInt("0x9f34c001a1013b4458c1d9d5cdbe3b76c7d053cf147ea3880e7ff3e8c67b75572329352ea1b7f92c7e36d51a"
               "9d249b1856f9f659bfd9515ef0d37636237aa10e80681f00c6b2cb9a217d142914f7bba94bdc3b79b7c31d4d"
               "34d4a521bc73205849073be8"),
    };
    if (id == test.id) return test;
    if (id == full.id) return full;
    fail(ErrorCode::Malformed, "unknown curve id: " + std::string(id));
}

/// Type-A (symmetric) pairing: G1 = G2 = E(F_q)[r], GT = order-r subgroup
/// of F_{q^2}^*, e(P, Q) = TatePairing(P, distort(Q)).
class TypeASuite {
public:
    struct Point {
        BigInt x, y;
        bool infinity = true;

        bool operator==(const Point&) const = default;
    };
    // a + b*i with i^2 = -1
    struct Fq2 {
        BigInt a, b;

        bool operator==(const Fq2&) const = default;
    };

    using G1 = Point;
    using G2 = Point;
    using GT = Fq2;

    static constexpr const char* kHashMethod = "sha256-try-and-increment-cofactor-v1";

    explicit TypeASuite(std::string_view curve_id) : curve_(type_a_curve(curve_id)) {
        qbytes_ = (bit_length(curve_.q) + 7) / 8;
        sqrt_exp_ = (curve_.q + 1) / 4;
        generator_ = map_to_group(digest(to_bytes("DSCS TypeA generator")));
    }

    const BigInt& order() const { return curve_.r; }
    const BigInt& field() const { return curve_.q; }
    const TypeACurve& curve() const { return curve_; }
    SuiteDescriptor descriptor() const { return {curve_.id, kHashMethod}; }
    const Point& generator() const { return generator_; }

    Point g1_identity() const { return Point{}; }

    bool on_curve(const Point& p) const {
        if (p.infinity) return true;
        if (p.x < 0 || p.x >= curve_.q || p.y < 0 || p.y >= curve_.q) return false;
        return fq(p.y * p.y) == fq(p.x * p.x * p.x + p.x);
    }

    bool g1_is_member(const Point& p) const { return on_curve(p) && g1_mul(p, curve_.r).infinity; }

    Point g1_neg(const Point& p) const {
        if (p.infinity) return p;
        return Point{p.x, fq(-p.y), false};
    }

    Point g1_add(const Point& a, const Point& b) const {
        Jac acc = to_jac(a);
        if (b.infinity) return a;
        add_mixed(acc, b);
        return to_affine(acc);
    }

    Point g1_mul(const Point& p, const BigInt& k) const {
        BigInt e = mod(k, curve_.r);
        if (p.infinity || e == 0) return Point{};
        Jac acc;
        for (std::size_t bit = bit_length(e); bit-- > 0;) {
            dbl(acc);
            if (mpz_tstbit(e.get_mpz_t(), bit)) add_mixed(acc, p);
        }
        return to_affine(acc);
    }

    /// prod-style sum: sum_i scalars_i * points_i with shared doublings.
    Point g1_multi_mul(std::span<const Point> points, std::span<const BigInt> scalars) const {
        if (points.size() != scalars.size()) fail(ErrorCode::LengthMismatch, "multi_mul length mismatch");
        std::vector<BigInt> e(scalars.size());
        std::size_t width = 0;
        for (std::size_t i = 0; i < scalars.size(); ++i) {
            e[i] = mod(scalars[i], curve_.r);
            if (!points[i].infinity) width = std::max(width, bit_length(e[i]));
        }
        Jac acc;
        for (std::size_t bit = width; bit-- > 0;) {
            dbl(acc);
            for (std::size_t i = 0; i < points.size(); ++i)
                if (!points[i].infinity && mpz_tstbit(e[i].get_mpz_t(), bit)) add_mixed(acc, points[i]);
        }
        return to_affine(acc);
    }

    Point g2_mul(const Point& p, const BigInt& k) const { return g1_mul(p, k); }

    GT pair(const Point& p, const Point& q) const {
        if (p.infinity || q.infinity) return gt_one();
        return final_exp(miller(p, q));
    }

    GT gt_one() const { return Fq2{1, 0}; }
    bool gt_is_one(const GT& t) const { return t.a == 1 && t.b == 0; }
    GT gt_mul(const GT& x, const GT& y) const { return f2_mul(x, y); }

    GT gt_pow(const GT& x, const BigInt& k) const {
        BigInt e = mod(k, curve_.r);
        GT acc = gt_one();
        for (std::size_t bit = bit_length(e); bit-- > 0;) {
            acc = f2_sqr(acc);
            if (mpz_tstbit(e.get_mpz_t(), bit)) acc = f2_mul(acc, x);
        }
        return acc;
    }

    /// H(fid || index): digest-then-map into the order-r subgroup.
    Point hash_to_g1(ByteView fid, std::uint64_t index) const {
        Hasher h;
        h.update(to_bytes("DSCS-H2G1")).update_u64(fid.size()).update(fid).update_u64(index);
        return map_to_group(h.finish());
    }

    Point random_g1(Rng& rng) const {
        for (;;) {
            Point p = g1_mul(generator_, rng.below(curve_.r));
            if (!p.infinity) return p;
        }
    }
    Point random_g2(Rng& rng) const { return random_g1(rng); }

    // Compressed: empty for the identity, else (2 | y parity) || x (fixed width).
    Bytes encode_g1(const Point& p) const {
        if (p.infinity) return {};
        Bytes out;
        out.reserve(1 + qbytes_);
        out.push_back(static_cast<std::uint8_t>(2 | (mpz_odd_p(p.y.get_mpz_t()) ? 1 : 0)));
        Bytes x = fixed_bytes(p.x, qbytes_);
        out.insert(out.end(), x.begin(), x.end());
        return out;
    }

    Point decode_g1(ByteView b) const {
        if (b.empty()) return Point{};
        if (b.size() != 1 + qbytes_ || (b[0] != 2 && b[0] != 3)) fail(ErrorCode::Malformed, "bad point encoding");
        BigInt x = from_magnitude(b.subspan(1));
        if (x >= curve_.q) fail(ErrorCode::Malformed, "point x out of field");
        BigInt t = fq(x * x * x + x);
        if (!is_square(t)) fail(ErrorCode::Malformed, "point not on curve");
        BigInt y = powm(t, sqrt_exp_, curve_.q);
        if ((mpz_odd_p(y.get_mpz_t()) ? 1 : 0) != (b[0] & 1)) y = fq(-y);
        Point p{x, y, false};
        if (!g1_mul(p, curve_.r).infinity) fail(ErrorCode::Malformed, "point outside prime-order subgroup");
        return p;
    }

    Bytes encode_g2(const Point& p) const { return encode_g1(p); }
    Point decode_g2(ByteView b) const { return decode_g1(b); }

    Bytes encode_gt(const GT& t) const {
        Bytes out = fixed_bytes(t.a, qbytes_);
        Bytes b = fixed_bytes(t.b, qbytes_);
        out.insert(out.end(), b.begin(), b.end());
        return out;
    }

private:
    struct Jac {
        BigInt x = 1, y = 1, z = 0;  // z == 0 encodes the identity
    };

    BigInt fq(const BigInt& v) const { return mod(v, curve_.q); }
    void reduce(BigInt& v) const { mpz_mod(v.get_mpz_t(), v.get_mpz_t(), curve_.q.get_mpz_t()); }

    bool is_square(const BigInt& t) const { return t == 0 || mpz_legendre(t.get_mpz_t(), curve_.q.get_mpz_t()) == 1; }

    Jac to_jac(const Point& p) const {
        if (p.infinity) return Jac{};
        return Jac{p.x, p.y, 1};
    }

    Point to_affine(const Jac& j) const {
        if (j.z == 0) return Point{};
        BigInt zi;
        invert(zi, j.z, curve_.q);
        BigInt zi2 = fq(zi * zi);
        return Point{fq(j.x * zi2), fq(j.y * zi2 * zi), false};
    }

    // y^2 = x^3 + a x with a = 1
    void dbl(Jac& p) const {
        if (p.z == 0) return;
        if (p.y == 0) {
            p = Jac{};
            return;
        }
        BigInt xx = p.x * p.x; reduce(xx);
        BigInt yy = p.y * p.y; reduce(yy);
        BigInt yyyy = yy * yy; reduce(yyyy);
        BigInt zz = p.z * p.z; reduce(zz);
        BigInt s = 4 * p.x * yy; reduce(s);
        BigInt m = 3 * xx + zz * zz; reduce(m);
        BigInt x3 = m * m - 2 * s; reduce(x3);
        BigInt y3 = m * (s - x3) - 8 * yyyy; reduce(y3);
        BigInt z3 = 2 * p.y * p.z; reduce(z3);
        p.x = std::move(x3);
        p.y = std::move(y3);
        p.z = std::move(z3);
    }

    void add_mixed(Jac& p, const Point& q) const {
        if (q.infinity) return;
        if (p.z == 0) {
            p = to_jac(q);
            return;
        }
        BigInt z1z1 = p.z * p.z; reduce(z1z1);
        BigInt u2 = q.x * z1z1; reduce(u2);
        BigInt s2 = q.y * p.z; reduce(s2);
        s2 *= z1z1; reduce(s2);
        BigInt hh = u2 - p.x; reduce(hh);
        BigInt rr = s2 - p.y; reduce(rr);
        if (hh == 0) {
            if (rr == 0) dbl(p);
            else p = Jac{};
            return;
        }
        BigInt h2 = hh * hh; reduce(h2);
        BigInt h3 = hh * h2; reduce(h3);
        BigInt v = p.x * h2; reduce(v);
        BigInt x3 = rr * rr - h3 - 2 * v; reduce(x3);
        BigInt y3 = rr * (v - x3) - p.y * h3; reduce(y3);
        BigInt z3 = p.z * hh; reduce(z3);
        p.x = std::move(x3);
        p.y = std::move(y3);
        p.z = std::move(z3);
    }

    Fq2 f2_mul(const Fq2& x, const Fq2& y) const {
        BigInt ac = x.a * y.a, bd = x.b * y.b;
        BigInt cross = (x.a + x.b) * (y.a + y.b) - ac - bd;
        return Fq2{fq(ac - bd), fq(cross)};
    }

    Fq2 f2_sqr(const Fq2& x) const {
        BigInt t = x.a * x.b;
        return Fq2{fq((x.a + x.b) * (x.a - x.b)), fq(2 * t)};
    }

    Fq2 f2_inv(const Fq2& x) const {
        BigInt norm = fq(x.a * x.a + x.b * x.b), ni;
        if (!invert(ni, norm, curve_.q)) fail(ErrorCode::Internal, "F_q2 inverse of zero");
        return Fq2{fq(x.a * ni), fq(-x.b * ni)};
    }

    // f_{r,P} evaluated at distort(Q) = (-xQ, i*yQ). Vertical lines lie in F_q
    // and vanish under the final exponentiation, so they are skipped.
    Fq2 miller(const Point& p, const Point& q) const {
        Fq2 f{1, 0};
        BigInt tx = p.x, ty = p.y;
        bool t_inf = false;
        const BigInt& r = curve_.r;
        auto line = [&](const BigInt& slope) {
            // l(X, Y) = Y - ty - slope (X - tx) at X = -xQ, Y = i yQ
            BigInt a = fq(slope * (q.x + tx) - ty);
            f = f2_mul(f, Fq2{a, q.y});
        };
        for (std::size_t bit = bit_length(r) - 1; bit-- > 0;) {
            f = f2_sqr(f);
            if (!t_inf) {
                if (ty == 0) {
                    t_inf = true;
                } else {
                    BigInt inv, slope;
                    invert(inv, fq(2 * ty), curve_.q);
                    slope = fq((3 * tx * tx + 1) * inv);
                    line(slope);
                    BigInt nx = fq(slope * slope - 2 * tx);
                    ty = fq(slope * (tx - nx) - ty);
                    tx = std::move(nx);
                }
            }
            if (mpz_tstbit(r.get_mpz_t(), bit) && !t_inf) {
                if (tx == p.x) {
                    // T = -P: vertical line, T + P = O
                    t_inf = true;
                } else {
                    BigInt inv, slope;
                    invert(inv, fq(p.x - tx), curve_.q);
                    slope = fq((p.y - ty) * inv);
                    line(slope);
                    BigInt nx = fq(slope * slope - tx - p.x);
                    ty = fq(slope * (tx - nx) - ty);
                    tx = std::move(nx);
                }
            }
        }
        return f;
    }

    // f^((q^2 - 1) / r) = (conj(f) / f)^h since f^q = conj(f) for q = 3 mod 4.
    Fq2 final_exp(const Fq2& f) const {
        Fq2 g = f2_mul(Fq2{f.a, fq(-f.b)}, f2_inv(f));
        Fq2 acc{1, 0};
        const BigInt& h = curve_.h;
        for (std::size_t bit = bit_length(h); bit-- > 0;) {
            acc = f2_sqr(acc);
            if (mpz_tstbit(h.get_mpz_t(), bit)) acc = f2_mul(acc, g);
        }
        return acc;
    }

    Point map_to_group(const Digest& seed) const {
        for (std::uint64_t ctr = 0;; ++ctr) {
            // Expand to qbytes + 16 bytes so the reduction mod q is close to uniform.
            Bytes wide;
            for (std::uint64_t blk = 0; wide.size() < qbytes_ + 16; ++blk) {
                Digest d = Hasher().update(seed).update_u64(ctr).update_u64(blk).finish();
                wide.insert(wide.end(), d.begin(), d.end());
            }
            BigInt x = fq(from_magnitude(ByteView(wide.data(), qbytes_ + 16)));
            BigInt t = fq(x * x * x + x);
            if (!is_square(t)) continue;
            BigInt y = powm(t, sqrt_exp_, curve_.q);
            if ((seed[0] & 1) != (mpz_odd_p(y.get_mpz_t()) ? 1 : 0)) y = fq(-y);
            Point candidate{x, y, false};
            Point p = g1_mul_raw(candidate, curve_.h);
            if (!p.infinity) return p;
        }
    }

    // Scalar multiplication without reduction mod r (for cofactor clearing).
    Point g1_mul_raw(const Point& p, const BigInt& k) const {
        Jac acc;
        for (std::size_t bit = bit_length(k); bit-- > 0;) {
            dbl(acc);
            if (mpz_tstbit(k.get_mpz_t(), bit)) add_mixed(acc, p);
        }
        return to_affine(acc);
    }

    TypeACurve curve_;
    std::size_t qbytes_ = 0;
    BigInt sqrt_exp_;
    Point generator_;
};

static_assert(BilinearSuite<TypeASuite>);

} // namespace dscs

#endif // DSCS_CRYPTO_PAIRING_HPP
