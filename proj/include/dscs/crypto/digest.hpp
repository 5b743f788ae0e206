#ifndef DSCS_CRYPTO_DIGEST_HPP
#define DSCS_CRYPTO_DIGEST_HPP

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <memory>

#include "dscs/codec.hpp"

namespace dscs {

inline constexpr std::size_t kDigestSize = 32;
using Digest = std::array<std::uint8_t, kDigestSize>;

inline constexpr Digest kZeroDigest{};

/// Incremental SHA-256.
class Hasher {
public:
    Hasher() : ctx_(EVP_MD_CTX_new()) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            fail(ErrorCode::Internal, "SHA-256 init failed");
    }

    Hasher& update(ByteView b) {
        if (!b.empty() && EVP_DigestUpdate(ctx_.get(), b.data(), b.size()) != 1)
            fail(ErrorCode::Internal, "SHA-256 update failed");
        return *this;
    }
    Hasher& update(const Digest& d) { return update(ByteView(d.data(), d.size())); }
    Hasher& update_u8(std::uint8_t v) { return update(ByteView(&v, 1)); }
    Hasher& update_u64(std::uint64_t v) {
        std::uint8_t b[8];
        for (int k = 0; k < 8; ++k) b[k] = static_cast<std::uint8_t>(v >> (56 - 8 * k));
        return update(ByteView(b, 8));
    }

    Digest finish() {
        Digest out{};
        unsigned len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), out.data(), &len) != 1 || len != kDigestSize)
            fail(ErrorCode::Internal, "SHA-256 final failed");
        return out;
    }

private:
    struct Free {
        void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
    };
    std::unique_ptr<EVP_MD_CTX, Free> ctx_;
};

inline Digest digest(ByteView bytes) { return Hasher().update(bytes).finish(); }

inline ByteView view(const Digest& d) { return ByteView(d.data(), d.size()); }

} // namespace dscs

#endif // DSCS_CRYPTO_DIGEST_HPP
