#ifndef DSCS_PROFILE_HPP
#define DSCS_PROFILE_HPP

#include <string>
#include <string_view>

#include "dscs/error.hpp"

namespace dscs {

/// Parameter set shared by both protocols.
///  - lambda: security parameter; DSCS I segments are lambda bits wide.
///  - rsa_prime_bits: size of each safe prime (N has twice this many bits).
///  - e_bits: size of the public prime e (lambda + 1).
///  - curve_id: bilinear suite for the append-only protocol.
struct SecurityProfile {
    std::string name;
    unsigned lambda;
    std::size_t rsa_prime_bits;
    std::size_t e_bits;
    std::string curve_id;

    std::size_t segment_bytes() const { return lambda / 8; }
};

inline SecurityProfile test_profile() { return {"test", 16, 64, 17, "typeA-q160-r64"}; }
inline SecurityProfile full_profile() { return {"full", 112, 1024, 113, "typeA-q1024-r224"}; }

inline SecurityProfile profile_by_name(std::string_view name) {
    if (name == "test") return test_profile();
    if (name == "full") return full_profile();
    fail(ErrorCode::Usage, "unknown profile: " + std::string(name));
}

} // namespace dscs

#endif // DSCS_PROFILE_HPP
