#ifndef DSCS_VECTOR_HPP
#define DSCS_VECTOR_HPP

#include <map>
#include <vector>

#include "dscs/crypto/bigint.hpp"

namespace dscs {

/// n field-element segments.
using DataBlock = std::vector<BigInt>;

/// [v | c]: data part plus the coefficient part over block positions,
/// stored sparsely (1-based position -> value, zeros omitted).
struct AugmentedVector {
    DataBlock data;
    std::map<std::uint64_t, BigInt> coeffs;

    static AugmentedVector unit(DataBlock v, std::uint64_t i) {
        AugmentedVector u{std::move(v), {}};
        u.coeffs.emplace(i, 1);
        return u;
    }

    BigInt coeff(std::uint64_t i) const {
        auto it = coeffs.find(i);
        return it == coeffs.end() ? BigInt(0) : it->second;
    }

    /// Dense form of length n + m.
    std::vector<BigInt> dense(std::uint64_t m) const {
        std::vector<BigInt> out(data);
        out.resize(data.size() + m);
        for (const auto& [i, c] : coeffs)
            if (i >= 1 && i <= m) out[data.size() + i - 1] = c;
        return out;
    }

    bool operator==(const AugmentedVector&) const = default;
};

inline void put_block(ByteWriter& w, const DataBlock& v) { put_int_vec(w, v); }
inline DataBlock get_block(ByteReader& r) { return get_int_vec(r); }

} // namespace dscs

#endif // DSCS_VECTOR_HPP
