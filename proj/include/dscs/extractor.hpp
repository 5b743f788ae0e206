#ifndef DSCS_EXTRACTOR_HPP
#define DSCS_EXTRACTOR_HPP

#include <functional>
#include <optional>

#include "dscs/dscs1.hpp"

// Block extraction from audit responses: challenge the same index set J with
// fresh coefficients until |J| linearly independent accepted rows are
// collected, then solve  Y = M * V  over F_e by Gaussian elimination.

namespace dscs::dscs1 {

using Responder = std::function<std::optional<StorageProof>(const Challenge&)>;

struct ExtractionStats {
    std::size_t queries = 0;
    std::size_t rejected = 0;   // failed verify_audit
    std::size_t dependent = 0;  // accepted but added no rank
};

namespace detail {

// Row-reduces [M | Y] in place over F_p; returns false on a singular M.
inline bool solve_mod(std::vector<std::vector<BigInt>>& M, std::vector<std::vector<BigInt>>& Y, const BigInt& p) {
    const std::size_t l = M.size();
    for (std::size_t col = 0; col < l; ++col) {
        std::size_t pivot = col;
        while (pivot < l && M[pivot][col] == 0) ++pivot;
        if (pivot == l) return false;
        std::swap(M[pivot], M[col]);
        std::swap(Y[pivot], Y[col]);
        BigInt inv;
        if (!invert(inv, M[col][col], p)) return false;
        for (auto& v : M[col]) v = mod(v * inv, p);
        for (auto& v : Y[col]) v = mod(v * inv, p);
        for (std::size_t r = 0; r < l; ++r) {
            if (r == col || M[r][col] == 0) continue;
            BigInt f = M[r][col];
            for (std::size_t c = 0; c < l; ++c) M[r][c] = mod(M[r][c] - f * M[col][c], p);
            for (std::size_t c = 0; c < Y[r].size(); ++c) Y[r][c] = mod(Y[r][c] - f * Y[col][c], p);
        }
    }
    return true;
}

// Rank of the rows over F_p (copy-based, small l).
inline std::size_t rank_mod(std::vector<std::vector<BigInt>> rows, const BigInt& p) {
    std::size_t rank = 0;
    const std::size_t cols = rows.empty() ? 0 : rows[0].size();
    for (std::size_t col = 0; col < cols && rank < rows.size(); ++col) {
        std::size_t pivot = rank;
        while (pivot < rows.size() && rows[pivot][col] == 0) ++pivot;
        if (pivot == rows.size()) continue;
        std::swap(rows[pivot], rows[rank]);
        BigInt inv;
        invert(inv, rows[rank][col], p);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (r == rank || rows[r][col] == 0) continue;
            BigInt f = mod(rows[r][col] * inv, p);
            for (std::size_t c = 0; c < cols; ++c) rows[r][c] = mod(rows[r][c] - f * rows[rank][c], p);
        }
        ++rank;
    }
    return rank;
}

} // namespace detail

/// Recovers the blocks at positions J (in the given order). Gives up with
/// ExtractionStalled after `max_wasted` rejected or dependent responses.
inline std::vector<DataBlock> extract_blocks(const Responder& responder, const std::vector<std::uint64_t>& J,
                                             const RsaPublicKey& pk, Rng& rng, std::size_t max_wasted = 64,
                                             ExtractionStats* stats = nullptr) {
    if (J.empty()) fail(ErrorCode::BadCardinality, "nothing to extract");
    ExtractionStats local;
    auto& st = stats ? *stats : local;
    const std::size_t l = J.size();
    std::vector<std::vector<BigInt>> M, Y;

    while (M.size() < l) {
        if (st.rejected + st.dependent > max_wasted) fail(ErrorCode::ExtractionStalled, "too many useless responses");
        Challenge c;
        std::vector<BigInt> row;
        for (auto i : J) {
            BigInt nu = 1 + rng.below(pk.e - 1);
            c.pairs.emplace_back(i, nu);
            row.push_back(nu);
        }
        ++st.queries;
        auto resp = responder(c);
        if (!resp || !verify_audit(c, *resp, pk)) {
            ++st.rejected;
            continue;
        }
        M.push_back(row);
        if (detail::rank_mod(M, pk.e) < M.size()) {
            M.pop_back();
            ++st.dependent;
            continue;
        }
        Y.push_back(resp->y);
    }

    if (!detail::solve_mod(M, Y, pk.e)) fail(ErrorCode::ExtractionStalled, "coefficient matrix is singular");
    return Y;
}

} // namespace dscs::dscs1

#endif // DSCS_EXTRACTOR_HPP
