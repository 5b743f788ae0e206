#ifndef DSCS_TESTS_SUPPORT_HPP
#define DSCS_TESTS_SUPPORT_HPP

#include <cmath>
#include <filesystem>
#include <random>

#include "dscs/dscs1.hpp"

namespace dscs::testing {

inline DataBlock random_block(Rng& rng, std::size_t n, const BigInt& bound) {
    DataBlock v;
    for (std::size_t j = 0; j < n; ++j) v.push_back(rng.below(bound));
    return v;
}

/// Client plus in-memory honest server for the dynamic protocol.
struct Session1 {
    dscs1::ClientState client;
    dscs1::ServerFile server;

    static Session1 create(Rng& rng, std::uint64_t m, std::size_t n) {
        auto st = dscs1::keygen(test_profile(), m, n, rng);
        std::vector<DataBlock> blocks;
        for (std::uint64_t i = 0; i < m; ++i) blocks.push_back(random_block(rng, n, BigInt(1) << (8 * st.profile.segment_bytes())));
        auto bundle = dscs1::outsource_blocks(blocks, st, rng);
        return {std::move(st), dscs1::ServerFile::from_upload(std::move(bundle))};
    }

    std::vector<dscs1::ReadResponse> anchors(skiplist::UpdateType type, std::uint64_t i) const {
        std::vector<dscs1::ReadResponse> out;
        for (auto j : dscs1::update_anchors(type, i)) out.push_back(server.read(j, true));
        return out;
    }

    dscs1::PendingUpdate begin(skiplist::UpdateType type, std::uint64_t i, std::optional<DataBlock> block, Rng& rng) const {
        return dscs1::init_update(client, type, i, block, anchors(type, i), rng);
    }

    /// Full honest round trip; returns the client's verdict.
    bool update(skiplist::UpdateType type, std::uint64_t i, std::optional<DataBlock> block, Rng& rng) {
        auto pending = begin(type, i, std::move(block), rng);
        auto proof = server.perform_update(pending.request);
        return dscs1::verify_update(client, pending, proof);
    }

    bool audit(std::uint64_t l, Rng& rng) const {
        auto c = dscs1::challenge(client.pk, l, rng);
        return dscs1::verify_audit(c, dscs1::prove(server, c), client.pk);
    }
};

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        std::random_device rd;
        path = std::filesystem::temp_directory_path() / ("dscs-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

/// |observed - expected| within k binomial standard deviations.
inline bool within_sigma(double successes, double trials, double p, double k = 3.0) {
    double sigma = std::sqrt(trials * p * (1 - p));
    return std::abs(successes - trials * p) <= k * sigma + 1e-9;
}

} // namespace dscs::testing

#endif // DSCS_TESTS_SUPPORT_HPP
